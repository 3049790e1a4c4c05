use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::{Error, Result};

use super::{Edge, Mesh};

/// 1-ring neighbor lists and edge-to-face incidence.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyTable {
    neighbors: Vec<Vec<usize>>,
    edge_faces: BTreeMap<Edge, Vec<usize>>,
}

impl AdjacencyTable {
    /// Sorted 1-ring of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn vertex_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    pub fn is_edge(&self, a: usize, b: usize) -> bool {
        a < self.neighbors.len() && self.neighbors[a].binary_search(&b).is_ok()
    }

    /// Incident faces of `e`, sorted; empty if `e` is not a mesh edge.
    pub fn edge_faces(&self, e: Edge) -> &[usize] {
        self.edge_faces.get(&e).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edge_faces.keys().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_faces.len()
    }

    pub fn is_boundary(&self, e: Edge) -> bool {
        self.edge_faces(e).len() == 1
    }

    /// Faces sharing a non-blocked edge with `f`.
    pub fn face_neighbors<'a>(
        &'a self,
        mesh: &'a Mesh,
        f: usize,
    ) -> impl Iterator<Item = (Edge, usize)> + 'a {
        let [a, b, c] = mesh.faces()[f];
        [Edge::new(a, b), Edge::new(b, c), Edge::new(c, a)]
            .into_iter()
            .flat_map(move |e| {
                self.edge_faces(e)
                    .iter()
                    .filter(move |&&g| g != f)
                    .map(move |&g| (e, g))
            })
    }
}

/// Builds the 1-ring table; fails on edges with more than two incident faces.
pub fn build_adjacency(mesh: &Mesh) -> Result<AdjacencyTable> {
    let mut neighbors = vec![Vec::new(); mesh.vertex_count()];
    let mut edge_faces: BTreeMap<Edge, Vec<usize>> = BTreeMap::new();
    for (f, &[a, b, c]) in mesh.faces().iter().enumerate() {
        for (u, v) in [(a, b), (b, c), (c, a)] {
            neighbors[u].push(v);
            neighbors[v].push(u);
            edge_faces.entry(Edge::new(u, v)).or_default().push(f);
        }
    }
    for list in &mut neighbors {
        list.sort_unstable();
        list.dedup();
    }
    for (&edge, faces) in &mut edge_faces {
        faces.sort_unstable();
        faces.dedup();
        if faces.len() > 2 {
            return Err(Error::NonManifold {
                edge,
                faces: faces.len(),
            });
        }
    }
    Ok(AdjacencyTable {
        neighbors,
        edge_faces,
    })
}

/// Edge-connected set of faces of a parent mesh with its cached area.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    faces: Vec<usize>,
    area: f64,
}

impl Patch {
    /// `faces` are sorted and deduplicated.
    pub fn new(mesh: &Mesh, mut faces: Vec<usize>) -> Self {
        faces.sort_unstable();
        faces.dedup();
        let area = faces.iter().map(|&f| mesh.face_area(f)).sum();
        Patch { faces, area }
    }

    pub fn whole(mesh: &Mesh) -> Self {
        Patch::new(mesh, (0..mesh.face_count()).collect())
    }

    pub fn faces(&self) -> &[usize] {
        &self.faces
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn contains(&self, f: usize) -> bool {
        self.faces.binary_search(&f).is_ok()
    }

    /// Smallest vertex index touched by the patch.
    pub fn leading_vertex(&self, mesh: &Mesh) -> usize {
        self.faces
            .iter()
            .flat_map(|&f| mesh.faces()[f])
            .min()
            .unwrap_or(usize::MAX)
    }
}

pub fn patch_area(mesh: &Mesh, patch: &Patch) -> f64 {
    patch.faces.iter().map(|&f| mesh.face_area(f)).sum()
}

/// Splits `faces` into maximal groups connected through shared edges that are
/// not in `blocked`. Components come out ordered by their smallest face.
pub fn connected_components(
    mesh: &Mesh,
    adjacency: &AdjacencyTable,
    faces: &[usize],
    blocked: &BTreeSet<Edge>,
) -> Vec<Patch> {
    let mut member = vec![false; mesh.face_count()];
    for &f in faces {
        member[f] = true;
    }
    let mut sorted: Vec<usize> = faces.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    let mut seen = vec![false; mesh.face_count()];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();
    for &start in &sorted {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(f) = queue.pop_front() {
            comp.push(f);
            for (e, g) in adjacency.face_neighbors(mesh, f) {
                if member[g] && !seen[g] && !blocked.contains(&e) {
                    seen[g] = true;
                    queue.push_back(g);
                }
            }
        }
        components.push(Patch::new(mesh, comp));
    }
    components
}
