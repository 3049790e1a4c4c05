//! Procedural meshes with authored seams: cubes, open tubes, UV spheres and
//! planar grids. Used by the test suites, the benchmarks and `train-toy`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::{build_adjacency, Edge, Mesh};
use crate::seams::{trace_chains, ChainSet, SeamChain, SeamEdgeSet};

/// Unit cube, 12 triangles, with a cross-shaped UV unfolding (seven seams).
pub fn cube() -> Mesh {
    let positions = vec![
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [1.0, 1.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [1.0, 0.0, 1.0],
        [1.0, 1.0, 1.0],
        [0.0, 1.0, 1.0],
    ];
    // (outward quad, its cell corners in a 4x3 cross layout)
    let quads: [([usize; 4], [[f64; 2]; 4]); 6] = [
        ([0, 1, 5, 4], [[0.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]]),
        ([1, 2, 6, 5], [[1.0, 1.0], [2.0, 1.0], [2.0, 2.0], [1.0, 2.0]]),
        ([2, 3, 7, 6], [[2.0, 1.0], [3.0, 1.0], [3.0, 2.0], [2.0, 2.0]]),
        ([3, 0, 4, 7], [[3.0, 1.0], [4.0, 1.0], [4.0, 2.0], [3.0, 2.0]]),
        ([4, 5, 6, 7], [[0.0, 2.0], [1.0, 2.0], [1.0, 3.0], [0.0, 3.0]]),
        ([0, 3, 2, 1], [[0.0, 1.0], [0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]),
    ];
    let mut faces = Vec::new();
    let mut uvs = Vec::new();
    for (q, cell) in quads {
        for tri in [[0, 1, 2], [0, 2, 3]] {
            faces.push(tri.map(|k| q[k]));
            uvs.extend(tri.map(|k| [cell[k][0] * 0.25, cell[k][1] * 0.25]));
        }
    }
    Mesh::new(positions, faces, Some(uvs)).expect("cube is valid")
}

/// Regular tetrahedron-ish solid (closed, 4 faces).
pub fn tetrahedron() -> Mesh {
    Mesh::new(
        vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.5, 3f64.sqrt() / 2.0, 0.0],
            [0.5, 3f64.sqrt() / 6.0, (2.0f64 / 3.0).sqrt()],
        ],
        vec![[0, 2, 1], [0, 1, 3], [1, 2, 3], [2, 0, 3]],
        None,
    )
    .expect("tetrahedron is valid")
}

/// `nx` by `ny` cells on the plane z = 0 with identity UVs (u, v) = (x, y).
pub fn grid(nx: usize, ny: usize, cell: f64) -> Mesh {
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut positions = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            positions.push([i as f64 * cell, j as f64 * cell, 0.0]);
        }
    }
    let mut faces = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    let uvs = faces
        .iter()
        .flat_map(|f| f.map(|v| [positions[v][0], positions[v][1]]))
        .collect();
    Mesh::new(positions, faces, Some(uvs)).expect("grid is valid")
}

/// Open tube around the z axis.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderSpec {
    pub segments: usize,
    /// Number of quad bands; there are `rows + 1` vertex rings.
    pub rows: usize,
    pub radius: f64,
    pub height: f64,
    /// Radius of vertex ring `r` is `radius * (1 - pinch * bump(r))`, where the
    /// bump peaks at `pinch_row`. Zero keeps the tube straight.
    pub pinch: f64,
    pub pinch_row: usize,
}

impl Default for CylinderSpec {
    fn default() -> Self {
        CylinderSpec {
            segments: 8,
            rows: 4,
            radius: 1.0,
            height: 2.0,
            pinch: 0.0,
            pinch_row: 2,
        }
    }
}

impl CylinderSpec {
    pub fn vertex(&self, row: usize, seg: usize) -> usize {
        row * self.segments + seg % self.segments
    }

    fn ring_radius(&self, row: usize) -> f64 {
        let d = row.abs_diff(self.pinch_row) as f64;
        self.radius * (1.0 - self.pinch * (-d * d).exp())
    }
}

pub fn cylinder(spec: &CylinderSpec) -> Mesh {
    let s = spec.segments;
    let mut positions = Vec::with_capacity((spec.rows + 1) * s);
    for r in 0..=spec.rows {
        let z = spec.height * r as f64 / spec.rows as f64;
        let rad = spec.ring_radius(r);
        for j in 0..s {
            let t = 2.0 * PI * j as f64 / s as f64;
            positions.push([rad * t.cos(), rad * t.sin(), z]);
        }
    }
    let mut faces = Vec::with_capacity(2 * spec.rows * s);
    for r in 0..spec.rows {
        for j in 0..s {
            let a = spec.vertex(r, j);
            let b = spec.vertex(r, j + 1);
            let c = spec.vertex(r + 1, j + 1);
            let d = spec.vertex(r + 1, j);
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    Mesh::new(positions, faces, None).expect("cylinder is valid")
}

/// Tube unrolled into one rectangle, cut along the vertical line at segment 0.
pub fn cylinder_with_uvs(spec: &CylinderSpec) -> Mesh {
    let mesh = cylinder(spec);
    let s = spec.segments;
    let circumference = 2.0 * PI * spec.radius;
    let mut uvs = Vec::with_capacity(3 * mesh.face_count());
    for (fi, f) in mesh.faces().iter().enumerate() {
        let col = (fi / 2) % s;
        for &v in f {
            let (row, seg) = (v / s, v % s);
            // the last column wraps back to segment 0 on the far edge
            let seg = if seg == 0 && col == s - 1 { s } else { seg };
            uvs.push([
                circumference * seg as f64 / s as f64,
                spec.height * row as f64 / spec.rows as f64,
            ]);
        }
    }
    mesh.with_uvs(Some(uvs)).expect("uv count matches")
}

/// Horizontal loop around vertex ring `row`.
pub fn ring_chain(spec: &CylinderSpec, row: usize) -> SeamChain {
    let mut v: Vec<usize> = (0..spec.segments).map(|j| spec.vertex(row, j)).collect();
    v.push(spec.vertex(row, 0));
    SeamChain::new(v).expect("ring is a loop")
}

/// Vertical open chain along segment `seg` from ring `from` up to ring `to`.
pub fn vertical_chain(spec: &CylinderSpec, seg: usize, from: usize, to: usize) -> SeamChain {
    SeamChain::new((from..=to).map(|r| spec.vertex(r, seg)).collect()).expect("vertical chain")
}

/// Latitude-longitude sphere with a vertex at each pole.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereSpec {
    pub slices: usize,
    pub stacks: usize,
    pub radius: f64,
}

impl Default for SphereSpec {
    fn default() -> Self {
        SphereSpec {
            slices: 8,
            stacks: 6,
            radius: 1.0,
        }
    }
}

impl SphereSpec {
    /// Vertex `seg` of latitude ring `ring` in `1..stacks`.
    pub fn vertex(&self, ring: usize, seg: usize) -> usize {
        1 + (ring - 1) * self.slices + seg % self.slices
    }

    pub fn south_pole(&self) -> usize {
        0
    }

    pub fn north_pole(&self) -> usize {
        1 + (self.stacks - 1) * self.slices
    }
}

pub fn sphere(spec: &SphereSpec) -> Mesh {
    let (s, st) = (spec.slices, spec.stacks);
    let mut positions = vec![[0.0, 0.0, -spec.radius]];
    for k in 1..st {
        let phi = -PI / 2.0 + PI * k as f64 / st as f64;
        for j in 0..s {
            let t = 2.0 * PI * j as f64 / s as f64;
            positions.push([
                spec.radius * phi.cos() * t.cos(),
                spec.radius * phi.cos() * t.sin(),
                spec.radius * phi.sin(),
            ]);
        }
    }
    positions.push([0.0, 0.0, spec.radius]);
    let mut faces = Vec::new();
    for j in 0..s {
        faces.push([spec.south_pole(), spec.vertex(1, j + 1), spec.vertex(1, j)]);
    }
    for k in 1..st - 1 {
        for j in 0..s {
            let a = spec.vertex(k, j);
            let b = spec.vertex(k, j + 1);
            let c = spec.vertex(k + 1, j + 1);
            let d = spec.vertex(k + 1, j);
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    for j in 0..s {
        faces.push([
            spec.vertex(st - 1, j),
            spec.vertex(st - 1, j + 1),
            spec.north_pole(),
        ]);
    }
    Mesh::new(positions, faces, None).expect("sphere is valid")
}

pub fn sphere_ring(spec: &SphereSpec, ring: usize) -> SeamChain {
    let mut v: Vec<usize> = (0..spec.slices).map(|j| spec.vertex(ring, j)).collect();
    v.push(spec.vertex(ring, 0));
    SeamChain::new(v).expect("ring is a loop")
}

/// Meridian from the south pole up to ring `to` along segment `seg`.
pub fn sphere_meridian(spec: &SphereSpec, seg: usize, to: usize) -> SeamChain {
    let mut v = vec![spec.south_pole()];
    v.extend((1..=to).map(|k| spec.vertex(k, seg)));
    SeamChain::new(v).expect("meridian")
}

/// Closed torus; vertex `(i, j)` is `i * minor + j` with `i` around the
/// central axis and `j` around the tube.
pub fn torus(major: usize, minor: usize, big_r: f64, small_r: f64) -> Mesh {
    let idx = |i: usize, j: usize| (i % major) * minor + j % minor;
    let mut positions = Vec::with_capacity(major * minor);
    for i in 0..major {
        let u = 2.0 * PI * i as f64 / major as f64;
        for j in 0..minor {
            let v = 2.0 * PI * j as f64 / minor as f64;
            let w = big_r + small_r * v.cos();
            positions.push([w * u.cos(), w * u.sin(), small_r * v.sin()]);
        }
    }
    let mut faces = Vec::new();
    for i in 0..major {
        for j in 0..minor {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    Mesh::new(positions, faces, None).expect("torus is valid")
}

/// Loop around the tube at major index `i`.
pub fn torus_meridian(minor: usize, i: usize) -> SeamChain {
    let mut v: Vec<usize> = (0..minor).map(|j| i * minor + j).collect();
    v.push(i * minor);
    SeamChain::new(v).expect("meridian is a loop")
}

/// Named meshes used as the shared fixture corpus.
pub fn fixture_corpus() -> Vec<(String, Mesh)> {
    let mut out = vec![
        ("cube".to_string(), cube()),
        ("tetrahedron".to_string(), tetrahedron()),
        ("grid".to_string(), grid(5, 4, 0.5)),
        ("cylinder".to_string(), cylinder(&CylinderSpec::default())),
        (
            "waist".to_string(),
            cylinder(&CylinderSpec {
                segments: 10,
                rows: 6,
                pinch: 0.4,
                pinch_row: 3,
                ..CylinderSpec::default()
            }),
        ),
        ("sphere".to_string(), sphere(&SphereSpec::default())),
    ];
    out.push((
        "tall_cylinder".to_string(),
        cylinder(&CylinderSpec {
            segments: 12,
            rows: 8,
            height: 4.0,
            ..CylinderSpec::default()
        }),
    ));
    out
}

/// Jitters vertex positions by up to `amount` in each coordinate.
pub fn jitter(mesh: &Mesh, amount: f64, rng: &mut impl Rng) -> Mesh {
    let positions = mesh
        .positions()
        .iter()
        .map(|p| p.map(|c| c + rng.gen_range(-amount..=amount)))
        .collect();
    Mesh::new(
        positions,
        mesh.faces().to_vec(),
        mesh.corner_uvs().map(<[_]>::to_vec),
    )
    .expect("jitter keeps topology")
}

/// Random tube or sphere with a random seam set, traced into chains.
pub fn random_seamed_mesh(seed: u64) -> (Mesh, ChainSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mesh = if rng.gen_bool(0.5) {
        let spec = CylinderSpec {
            segments: rng.gen_range(4..10),
            rows: rng.gen_range(2..7),
            radius: rng.gen_range(0.5..2.0),
            height: rng.gen_range(0.5..3.0),
            ..CylinderSpec::default()
        };
        cylinder(&spec)
    } else {
        let spec = SphereSpec {
            slices: rng.gen_range(4..10),
            stacks: rng.gen_range(3..7),
            radius: rng.gen_range(0.5..2.0),
        };
        sphere(&spec)
    };
    let mesh = jitter(&mesh, 0.05, &mut rng);
    let adj = build_adjacency(&mesh).expect("procedural meshes are manifold");
    let p = rng.gen_range(0.05..0.4);
    let seams: SeamEdgeSet = adj
        .edges()
        .filter(|_| rng.gen_bool(p))
        .collect::<Vec<Edge>>()
        .into_iter()
        .collect();
    let chains = trace_chains(&seams);
    (mesh, chains)
}
