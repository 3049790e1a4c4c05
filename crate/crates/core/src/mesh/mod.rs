//! Indexed triangle meshes: storage, OBJ I/O, adjacency and face connectivity.

mod obj;
mod topology;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Vec2, Vec3};

pub use obj::{load_obj, parse_obj, save_obj, write_obj};
pub use topology::{build_adjacency, connected_components, patch_area, AdjacencyTable, Patch};

/// Undirected mesh edge stored as `(min, max)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Edge(pub usize, pub usize);

impl Edge {
    pub fn new(a: usize, b: usize) -> Self {
        if a <= b {
            Edge(a, b)
        } else {
            Edge(b, a)
        }
    }

    pub fn has(&self, v: usize) -> bool {
        self.0 == v || self.1 == v
    }

    /// The endpoint that is not `v`.
    pub fn other(&self, v: usize) -> usize {
        if self.0 == v {
            self.1
        } else {
            self.0
        }
    }
}

impl From<[usize; 2]> for Edge {
    fn from(e: [usize; 2]) -> Self {
        Edge::new(e[0], e[1])
    }
}

impl From<Edge> for [usize; 2] {
    fn from(e: Edge) -> Self {
        [e.0, e.1]
    }
}

impl fmt::Debug for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.0, self.1)
    }
}

/// Triangle mesh with optional per-corner texture coordinates.
///
/// Corner `3 * f + k` belongs to vertex `faces[f][k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    positions: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    corner_uvs: Option<Vec<Vec2>>,
}

impl Mesh {
    pub fn new(positions: Vec<Vec3>, faces: Vec<[usize; 3]>, corner_uvs: Option<Vec<Vec2>>) -> Result<Self> {
        let n = positions.len();
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&v| v >= n) {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references a vertex >= {n}"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!("face {fi} is degenerate: {f:?}")));
            }
        }
        if let Some(uvs) = &corner_uvs {
            if uvs.len() != 3 * faces.len() {
                return Err(Error::InvalidMesh(format!(
                    "{} corner UVs for {} faces",
                    uvs.len(),
                    faces.len()
                )));
            }
        }
        if positions.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidMesh("non-finite vertex position".into()));
        }
        Ok(Mesh {
            positions,
            faces,
            corner_uvs,
        })
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn corner_uvs(&self) -> Option<&[Vec2]> {
        self.corner_uvs.as_deref()
    }

    pub fn has_uvs(&self) -> bool {
        self.corner_uvs.is_some()
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn position(&self, v: usize) -> Vec3 {
        self.positions[v]
    }

    /// UV of vertex `v` as seen from face `f`, if the mesh has UVs and `v` is a corner of `f`.
    pub fn corner_uv(&self, f: usize, v: usize) -> Option<Vec2> {
        let uvs = self.corner_uvs.as_ref()?;
        let k = self.faces[f].iter().position(|&x| x == v)?;
        Some(uvs[3 * f + k])
    }

    pub fn with_uvs(mut self, corner_uvs: Option<Vec<Vec2>>) -> Result<Self> {
        if let Some(uvs) = &corner_uvs {
            if uvs.len() != 3 * self.faces.len() {
                return Err(Error::InvalidMesh(format!(
                    "{} corner UVs for {} faces",
                    uvs.len(),
                    self.faces.len()
                )));
            }
        }
        self.corner_uvs = corner_uvs;
        Ok(self)
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.faces[f];
        geom::triangle_area3(self.positions[a], self.positions[b], self.positions[c])
    }

    /// Unit normal of face `f` following its winding.
    pub fn face_normal(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.faces[f];
        let p = &self.positions;
        geom::normalize3(geom::cross3(geom::sub3(p[b], p[a]), geom::sub3(p[c], p[a])))
    }

    pub fn area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Area-weighted vertex normals; isolated vertices get the zero vector.
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        let mut normals = vec![[0.0; 3]; self.positions.len()];
        let p = &self.positions;
        for &[a, b, c] in &self.faces {
            let n = geom::cross3(geom::sub3(p[b], p[a]), geom::sub3(p[c], p[a]));
            for v in [a, b, c] {
                normals[v] = geom::add3(normals[v], n);
            }
        }
        normals.into_iter().map(geom::normalize3).collect()
    }

    pub fn edge_length(&self, e: Edge) -> f64 {
        geom::dist3(self.positions[e.0], self.positions[e.1])
    }

    /// All undirected edges, sorted.
    pub fn edges(&self) -> Vec<Edge> {
        let mut edges: Vec<Edge> = self
            .faces
            .iter()
            .flat_map(|&[a, b, c]| [Edge::new(a, b), Edge::new(b, c), Edge::new(c, a)])
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Mesh made of a subset of faces, with vertices re-indexed in increasing
    /// parent order. Returns the mesh and the sub-to-parent vertex map.
    pub fn submesh(&self, faces: &[usize]) -> (Mesh, Vec<usize>) {
        let mut used: Vec<usize> = faces.iter().flat_map(|&f| self.faces[f]).collect();
        used.sort_unstable();
        used.dedup();
        let mut to_local = vec![usize::MAX; self.positions.len()];
        for (i, &v) in used.iter().enumerate() {
            to_local[v] = i;
        }
        let positions = used.iter().map(|&v| self.positions[v]).collect();
        let sub_faces = faces
            .iter()
            .map(|&f| self.faces[f].map(|v| to_local[v]))
            .collect();
        let uvs = self.corner_uvs.as_ref().map(|uvs| {
            faces
                .iter()
                .flat_map(|&f| [uvs[3 * f], uvs[3 * f + 1], uvs[3 * f + 2]])
                .collect()
        });
        let mesh = Mesh {
            positions,
            faces: sub_faces,
            corner_uvs: uvs,
        };
        (mesh, used)
    }
}
