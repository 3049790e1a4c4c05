use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::Result;
use crate::mesh::{build_adjacency, connected_components, AdjacencyTable, Edge, Mesh};
use crate::seams::SeamEdgeSet;

/// A chart cut out of the parent mesh. Seam vertices are duplicated per side,
/// so the chart is an independent mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    pub index: usize,
    /// Parent face ids, ascending; local face `i` is `faces[i]`.
    pub faces: Vec<usize>,
    pub mesh: Mesh,
    /// Parent vertex of each local vertex.
    pub vertex_map: Vec<usize>,
    /// Boundary cycles in local vertex ids, oriented consistently with the
    /// faces (the chart lies to the left). The first vertex is not repeated.
    pub boundary_loops: Vec<Vec<usize>>,
    pub euler: i64,
}

impl Chart {
    pub fn is_disk(&self) -> bool {
        self.euler == 1 && self.boundary_loops.len() == 1
    }

    pub fn area(&self) -> f64 {
        self.mesh.area()
    }

    /// Genus implied by the Euler characteristic and boundary count.
    pub fn genus(&self) -> i64 {
        (2 - self.euler - self.boundary_loops.len() as i64) / 2
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Directed boundary edges of a triangle soup, chained into cycles.
pub(crate) fn boundary_loops(faces: &[[usize; 3]]) -> Vec<Vec<usize>> {
    let mut directed: BTreeSet<(usize, usize)> = BTreeSet::new();
    for &[a, b, c] in faces {
        for (u, v) in [(a, b), (b, c), (c, a)] {
            directed.insert((u, v));
        }
    }
    let mut next: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(u, v) in &directed {
        if !directed.contains(&(v, u)) {
            next.entry(u).or_default().push(v);
        }
    }
    let mut used: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut loops = Vec::new();
    let starts: Vec<(usize, usize)> = next
        .iter()
        .flat_map(|(&u, vs)| vs.iter().map(move |&v| (u, v)))
        .collect();
    for (u0, v0) in starts {
        if used.contains(&(u0, v0)) {
            continue;
        }
        let mut cycle = vec![u0];
        let (mut u, mut v) = (u0, v0);
        loop {
            used.insert((u, v));
            if v == u0 {
                break;
            }
            cycle.push(v);
            let Some(w) = next
                .get(&v)
                .and_then(|ws| ws.iter().copied().find(|&w| !used.contains(&(v, w))))
            else {
                break;
            };
            u = v;
            v = w;
        }
        loops.push(cycle);
    }
    loops
}

/// Splits `mesh` along `seams` into charts, ordered by smallest parent face.
pub fn cut_mesh(mesh: &Mesh, adjacency: &AdjacencyTable, seams: &SeamEdgeSet) -> Result<Vec<Chart>> {
    let all: Vec<usize> = (0..mesh.face_count()).collect();
    let comps = connected_components(mesh, adjacency, &all, seams.as_set());
    comps
        .iter()
        .enumerate()
        .map(|(index, patch)| build_chart(mesh, adjacency, seams, index, patch.faces()))
        .collect()
}

fn build_chart(
    mesh: &Mesh,
    adjacency: &AdjacencyTable,
    seams: &SeamEdgeSet,
    index: usize,
    faces: &[usize],
) -> Result<Chart> {
    // corners are (local face, slot); corners of one parent vertex are glued
    // across every non-seam edge the two faces share
    let local_of: BTreeMap<usize, usize> = faces.iter().enumerate().map(|(i, &f)| (f, i)).collect();
    let corner = |lf: usize, slot: usize| 3 * lf + slot;
    let mut uf = UnionFind::new(3 * faces.len());
    for (lf, &f) in faces.iter().enumerate() {
        let tri = mesh.faces()[f];
        for slot in 0..3 {
            let (a, b) = (tri[slot], tri[(slot + 1) % 3]);
            let e = Edge::new(a, b);
            if seams.contains(&e) {
                continue;
            }
            for &g in adjacency.edge_faces(e) {
                let Some(&lg) = local_of.get(&g) else { continue };
                if lg == lf {
                    continue;
                }
                let other = mesh.faces()[g];
                for v in [a, b] {
                    let s = other.iter().position(|&x| x == v).expect("shared edge vertex");
                    let mine = tri.iter().position(|&x| x == v).expect("own vertex");
                    uf.union(corner(lf, mine), corner(lg, s));
                }
            }
        }
    }
    // one local vertex per corner class, ordered by (parent vertex, first corner)
    let mut classes: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for lf in 0..faces.len() {
        for slot in 0..3 {
            let root = uf.find(corner(lf, slot));
            let parent = mesh.faces()[faces[lf]][slot];
            classes.entry(root).or_insert((parent, corner(lf, slot)));
        }
    }
    let mut ordered: Vec<(usize, usize, usize)> = classes.iter().map(|(&r, &(p, c))| (p, c, r)).collect();
    ordered.sort_unstable();
    let id_of: BTreeMap<usize, usize> = ordered.iter().enumerate().map(|(i, &(_, _, r))| (r, i)).collect();
    let vertex_map: Vec<usize> = ordered.iter().map(|&(p, _, _)| p).collect();
    let positions = vertex_map.iter().map(|&p| mesh.position(p)).collect();
    let local_faces: Vec<[usize; 3]> = (0..faces.len())
        .map(|lf| [0, 1, 2].map(|slot| id_of[&uf.find(corner(lf, slot))]))
        .collect();
    let loops = boundary_loops(&local_faces);
    let chart_mesh = Mesh::new(positions, local_faces, None)?;
    let edges = build_adjacency(&chart_mesh)?.edge_count() as i64;
    let euler = vertex_map.len() as i64 - edges + faces.len() as i64;
    Ok(Chart {
        index,
        faces: faces.to_vec(),
        mesh: chart_mesh,
        vertex_map,
        boundary_loops: loops,
        euler,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AutoCut {
    /// Parent edges added to the seam set.
    pub added: Vec<Edge>,
    pub charts_cut: usize,
}

/// Extra cut edges that turn `chart` into a disk: the complement of a dual
/// spanning tree, with dangling interior edges pruned away.
pub fn disk_cut(chart: &Chart) -> Result<Vec<Edge>> {
    if chart.is_disk() {
        return Ok(Vec::new());
    }
    let adj = build_adjacency(&chart.mesh)?;
    let nf = chart.mesh.face_count();
    let mut in_tree: BTreeSet<Edge> = BTreeSet::new();
    let mut seen = vec![false; nf];
    let mut queue = std::collections::VecDeque::new();
    seen[0] = true;
    queue.push_back(0);
    while let Some(f) = queue.pop_front() {
        for (e, g) in adj.face_neighbors(&chart.mesh, f) {
            if !seen[g] {
                seen[g] = true;
                in_tree.insert(e);
                queue.push_back(g);
            }
        }
    }
    let mut cut: BTreeSet<Edge> = adj.edges().filter(|e| !in_tree.contains(e)).collect();
    let boundary: BTreeSet<Edge> = adj.edges().filter(|&e| adj.is_boundary(e)).collect();
    loop {
        let mut degree: BTreeMap<usize, usize> = BTreeMap::new();
        for e in &cut {
            *degree.entry(e.0).or_default() += 1;
            *degree.entry(e.1).or_default() += 1;
        }
        let leaves: Vec<Edge> = cut
            .iter()
            .copied()
            .filter(|e| !boundary.contains(e) && (degree[&e.0] == 1 || degree[&e.1] == 1))
            .collect();
        if leaves.is_empty() {
            break;
        }
        for e in leaves {
            cut.remove(&e);
        }
    }
    let mut interior: Vec<Edge> = cut.difference(&boundary).copied().collect();
    if interior.is_empty() && boundary.is_empty() {
        // closed genus-0 chart: open a two-edge slit at vertex 0
        let n = adj.neighbors(0);
        if n.len() >= 2 {
            interior = vec![Edge::new(0, n[0]), Edge::new(0, n[1])];
        }
    }
    Ok(interior
        .into_iter()
        .map(|e| Edge::new(chart.vertex_map[e.0], chart.vertex_map[e.1]))
        .collect())
}

/// Adds cuts until every chart is a disk. Returns the new charts, the
/// enlarged seam set and what was added.
pub fn auto_cut(
    mesh: &Mesh,
    adjacency: &AdjacencyTable,
    seams: &SeamEdgeSet,
) -> Result<(Vec<Chart>, SeamEdgeSet, AutoCut)> {
    let mut seams = seams.clone();
    let mut record = AutoCut::default();
    let mut charts = cut_mesh(mesh, adjacency, &seams)?;
    // one pass suffices for manifold charts; the bound only guards against
    // surprises in degenerate input
    for _ in 0..4 {
        let mut added_any = false;
        for chart in charts.iter().filter(|c| !c.is_disk()) {
            let edges = disk_cut(chart)?;
            if !edges.is_empty() {
                record.charts_cut += 1;
            }
            for e in edges {
                if seams.insert(e) {
                    record.added.push(e);
                    added_any = true;
                }
            }
        }
        if !added_any {
            break;
        }
        charts = cut_mesh(mesh, adjacency, &seams)?;
    }
    record.added.sort_unstable();
    Ok((charts, seams, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seams::{extract_seams_from_uv, DEFAULT_UV_TOLERANCE};
    use crate::synth;

    fn seams_of(adj: &AdjacencyTable, chains: &[crate::SeamChain]) -> SeamEdgeSet {
        SeamEdgeSet::from_edges(adj, chains.iter().flat_map(|c| c.edges())).unwrap()
    }

    #[test]
    fn empty_seams_give_whole_mesh() {
        let mesh = synth::grid(3, 2, 1.0);
        let adj = build_adjacency(&mesh).unwrap();
        let charts = cut_mesh(&mesh, &adj, &SeamEdgeSet::new()).unwrap();
        assert_eq!(charts.len(), 1);
        assert!(charts[0].is_disk());
        assert_eq!(charts[0].mesh.vertex_count(), mesh.vertex_count());
    }

    #[test]
    fn cylinder_ring_gives_two_bands() {
        let spec = synth::CylinderSpec::default();
        let mesh = synth::cylinder(&spec);
        let adj = build_adjacency(&mesh).unwrap();
        let charts = cut_mesh(&mesh, &adj, &seams_of(&adj, &[synth::ring_chain(&spec, 1)])).unwrap();
        assert_eq!(charts.len(), 2);
        // oracle: band areas from faces below / above ring 1
        let lower: f64 = (0..mesh.face_count())
            .filter(|&f| mesh.faces()[f].iter().all(|&v| v / spec.segments <= 1))
            .map(|f| mesh.face_area(f))
            .sum();
        assert!((charts[0].area() - lower).abs() < 1e-12);
        assert!((charts[0].area() + charts[1].area() - mesh.area()).abs() < 1e-12);
        // each band is an annulus
        assert!(charts.iter().all(|c| c.boundary_loops.len() == 2 && c.euler == 0));
    }

    #[test]
    fn cube_cross_is_one_disk() {
        let cube = synth::cube();
        let adj = build_adjacency(&cube).unwrap();
        let seams = extract_seams_from_uv(&cube, &adj, DEFAULT_UV_TOLERANCE).unwrap();
        let charts = cut_mesh(&cube, &adj, &seams).unwrap();
        assert_eq!(charts.len(), 1);
        assert!(charts[0].is_disk());
        // 7 seam edges become 14 boundary edges
        assert_eq!(charts[0].boundary_loops[0].len(), 14);
    }

    #[test]
    fn tetrahedron_opened_at_a_vertex() {
        let tet = synth::tetrahedron();
        let adj = build_adjacency(&tet).unwrap();
        let seams: SeamEdgeSet = adj.neighbors(0).iter().map(|&u| Edge::new(0, u)).collect();
        let charts = cut_mesh(&tet, &adj, &seams).unwrap();
        assert_eq!(charts.len(), 1);
        assert!(charts[0].is_disk());
        assert_eq!(charts[0].mesh.vertex_count(), 6);
    }

    #[test]
    fn boundary_loops_follow_faces() {
        let loops = boundary_loops(&[[0, 1, 2], [0, 2, 3]]);
        assert_eq!(loops, vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn auto_cut_opens_closed_and_annular_charts() {
        let sphere = synth::sphere(&synth::SphereSpec::default());
        let adj = build_adjacency(&sphere).unwrap();
        let (charts, seams, rec) = auto_cut(&sphere, &adj, &SeamEdgeSet::new()).unwrap();
        assert!(charts.iter().all(Chart::is_disk));
        assert_eq!(rec.added.len(), seams.len());
        assert!(!rec.added.is_empty());

        let spec = synth::CylinderSpec::default();
        let cyl = synth::cylinder(&spec);
        let adj = build_adjacency(&cyl).unwrap();
        let (charts, _, rec) = auto_cut(&cyl, &adj, &SeamEdgeSet::new()).unwrap();
        assert_eq!(charts.len(), 1);
        assert!(charts[0].is_disk());
        assert_eq!(rec.charts_cut, 1);

        let torus = synth::torus(8, 6, 2.0, 0.5);
        let adj = build_adjacency(&torus).unwrap();
        let (charts, _, _) = auto_cut(&torus, &adj, &SeamEdgeSet::new()).unwrap();
        assert!(charts.iter().all(Chart::is_disk));
        assert_eq!(charts.iter().map(|c| c.genus()).sum::<i64>(), 0);
    }
}
