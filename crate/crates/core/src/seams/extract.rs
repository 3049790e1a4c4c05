use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geom;
use crate::mesh::{AdjacencyTable, Edge, Mesh};

use super::SeamEdgeSet;

pub const DEFAULT_UV_TOLERANCE: f64 = 1e-6;

/// Marks an interior edge as a seam when either endpoint has different UVs in
/// the two incident faces. Boundary edges are never seams.
pub fn extract_seams_from_uv(mesh: &Mesh, adjacency: &AdjacencyTable, tolerance: f64) -> Result<SeamEdgeSet> {
    if !mesh.has_uvs() {
        return Err(Error::MissingUvs);
    }
    let mut seams = SeamEdgeSet::new();
    for e in adjacency.edges() {
        let &[f, g] = adjacency.edge_faces(e) else {
            continue;
        };
        let split = [e.0, e.1].into_iter().any(|v| {
            let a = mesh.corner_uv(f, v).unwrap();
            let b = mesh.corner_uv(g, v).unwrap();
            geom::dist2(a, b) > tolerance
        });
        if split {
            seams.insert(e);
        }
    }
    Ok(seams)
}

/// Face partition into UV islands, computed directly from corner UVs: two
/// faces are glued when they share an edge whose endpoints carry matching UVs
/// (within `tolerance`) on both sides. Islands are ordered by smallest face and
/// each island's faces are sorted.
pub fn uv_islands(mesh: &Mesh, tolerance: f64) -> Result<Vec<Vec<usize>>> {
    let uvs = mesh.corner_uvs().ok_or(Error::MissingUvs)?;
    let faces = mesh.faces();
    // (edge) -> [(face, uv_a, uv_b)]
    let mut sides: BTreeMap<Edge, Vec<(usize, [f64; 2], [f64; 2])>> = BTreeMap::new();
    for (f, tri) in faces.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let (ua, ub) = (uvs[3 * f + k], uvs[3 * f + (k + 1) % 3]);
            let e = Edge::new(a, b);
            let (u_lo, u_hi) = if a < b { (ua, ub) } else { (ub, ua) };
            sides.entry(e).or_default().push((f, u_lo, u_hi));
        }
    }
    let mut parent: Vec<usize> = (0..faces.len()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut x = x;
        while p[x] != r {
            let next = p[x];
            p[x] = r;
            x = next;
        }
        r
    }
    for list in sides.values() {
        for i in 0..list.len() {
            for j in i + 1..list.len() {
                let (f, a0, a1) = list[i];
                let (g, b0, b1) = list[j];
                if geom::dist2(a0, b0) <= tolerance && geom::dist2(a1, b1) <= tolerance {
                    let (rf, rg) = (find(&mut parent, f), find(&mut parent, g));
                    if rf != rg {
                        parent[rf.max(rg)] = rf.min(rg);
                    }
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for f in 0..faces.len() {
        let r = find(&mut parent, f);
        groups.entry(r).or_default().push(f);
    }
    let mut islands: Vec<Vec<usize>> = groups.into_values().collect();
    islands.sort_by_key(|g| g[0]);
    Ok(islands)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_adjacency, connected_components};
    use crate::synth;

    #[test]
    fn cube_cross_layout_has_seven_seams() {
        let cube = synth::cube();
        let adj = build_adjacency(&cube).unwrap();
        let seams = extract_seams_from_uv(&cube, &adj, DEFAULT_UV_TOLERANCE).unwrap();
        assert_eq!(seams.len(), 7);
        // oracle: interior edges minus the edges glued by the UV islands' dual tree
        let islands = uv_islands(&cube, DEFAULT_UV_TOLERANCE).unwrap();
        assert_eq!(islands.len(), 1);
        let glued = adj
            .edges()
            .filter(|&e| {
                let fs = adj.edge_faces(e);
                fs.len() == 2 && !seams.contains(&e)
            })
            .count();
        assert_eq!(18 - glued, 7);
    }

    #[test]
    fn identity_layout_has_no_seams() {
        let grid = synth::grid(4, 3, 1.0);
        let adj = build_adjacency(&grid).unwrap();
        assert!(extract_seams_from_uv(&grid, &adj, DEFAULT_UV_TOLERANCE)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn disjoint_islands_share_one_seam() {
        let mesh = Mesh::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]],
            vec![[0, 1, 2], [1, 3, 2]],
            Some(vec![
                [0.0, 0.0],
                [1.0, 0.0],
                [0.0, 1.0],
                [5.0, 0.0],
                [6.0, 1.0],
                [5.0, 1.0],
            ]),
        )
        .unwrap();
        let adj = build_adjacency(&mesh).unwrap();
        let seams = extract_seams_from_uv(&mesh, &adj, DEFAULT_UV_TOLERANCE).unwrap();
        assert_eq!(seams.iter().collect::<Vec<_>>(), vec![Edge(1, 2)]);
    }

    #[test]
    fn missing_uvs_is_an_error() {
        let mesh = synth::cube().with_uvs(None).unwrap();
        let adj = build_adjacency(&mesh).unwrap();
        assert!(matches!(
            extract_seams_from_uv(&mesh, &adj, 1e-6),
            Err(Error::MissingUvs)
        ));
    }

    #[test]
    fn cutting_reproduces_uv_islands() {
        let spec = synth::CylinderSpec::default();
        let tube = synth::cylinder_with_uvs(&spec);
        let adj = build_adjacency(&tube).unwrap();
        let seams = extract_seams_from_uv(&tube, &adj, DEFAULT_UV_TOLERANCE).unwrap();
        assert_eq!(seams.len(), spec.rows);
        let all: Vec<usize> = (0..tube.face_count()).collect();
        let comps = connected_components(&tube, &adj, &all, seams.as_set());
        let islands = uv_islands(&tube, DEFAULT_UV_TOLERANCE).unwrap();
        let comp_faces: Vec<Vec<usize>> = comps.iter().map(|p| p.faces().to_vec()).collect();
        assert_eq!(comp_faces, islands);
    }
}
