use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::mesh::Edge;

use super::{ChainSet, SeamChain, SeamEdgeSet};

/// Decomposes the seam subgraph into maximal chains.
///
/// Vertices with seam-degree other than 2 terminate chains. Components where
/// every vertex has seam-degree 2 become single loops. Open chains start at
/// their smaller endpoint; loops start at their smallest vertex (or at the
/// junction they hang from) and head toward the smaller neighbor first.
/// Chains are sorted by smallest vertex, then lexicographically.
pub fn trace_chains(seams: &SeamEdgeSet) -> ChainSet {
    let mut graph: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for e in seams.iter() {
        graph.entry(e.0).or_default().push(e.1);
        graph.entry(e.1).or_default().push(e.0);
    }
    for list in graph.values_mut() {
        list.sort_unstable();
    }
    let is_endpoint = |v: usize| graph[&v].len() != 2;

    let mut used: BTreeSet<Edge> = BTreeSet::new();
    let mut chains: Vec<Vec<usize>> = Vec::new();

    let walk = |start: usize, first: usize, used: &mut BTreeSet<Edge>| -> Vec<usize> {
        let mut path = vec![start, first];
        used.insert(Edge::new(start, first));
        let mut prev = start;
        let mut cur = first;
        while !is_endpoint(cur) && cur != start {
            let next = graph[&cur]
                .iter()
                .copied()
                .find(|&n| n != prev && !used.contains(&Edge::new(cur, n)))
                .or_else(|| {
                    graph[&cur]
                        .iter()
                        .copied()
                        .find(|&n| !used.contains(&Edge::new(cur, n)))
                });
            let Some(next) = next else { break };
            used.insert(Edge::new(cur, next));
            path.push(next);
            prev = cur;
            cur = next;
        }
        path
    };

    for (&v, nbrs) in &graph {
        if !is_endpoint(v) {
            continue;
        }
        for &u in nbrs {
            if !used.contains(&Edge::new(v, u)) {
                chains.push(walk(v, u, &mut used));
            }
        }
    }
    // what remains are cycles through seam-degree-2 vertices only
    for (&v, nbrs) in &graph {
        for &u in nbrs {
            if !used.contains(&Edge::new(v, u)) {
                chains.push(walk(v, u, &mut used));
            }
        }
    }

    let mut chains: Vec<SeamChain> = chains
        .into_iter()
        .map(|mut c| {
            let n = c.len();
            if c[0] == c[n - 1] {
                if c[n - 2] < c[1] {
                    c.reverse();
                }
            } else if c[n - 1] < c[0] {
                c.reverse();
            }
            SeamChain::new(c).expect("traced chains never repeat an edge")
        })
        .collect();
    chains.sort_by(|a, b| {
        a.min_vertex()
            .cmp(&b.min_vertex())
            .then_with(|| a.vertices().cmp(b.vertices()))
    });
    ChainSet::new(chains).expect("traced chains are edge-disjoint")
}

/// Union of the chains' edges; fails if two steps share an edge.
pub fn chains_to_edges(chains: &ChainSet) -> Result<SeamEdgeSet> {
    let mut set = SeamEdgeSet::new();
    for c in chains.chains() {
        for e in c.edges() {
            if !set.insert(e) {
                return Err(Error::DuplicateEdge(e));
            }
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edges(list: &[(usize, usize)]) -> SeamEdgeSet {
        list.iter().map(|&(a, b)| Edge::new(a, b)).collect()
    }

    fn verts(set: &ChainSet) -> Vec<Vec<usize>> {
        set.chains().iter().map(|c| c.vertices().to_vec()).collect()
    }

    #[test]
    fn four_cycle_is_one_loop() {
        let set = trace_chains(&edges(&[(4, 9), (9, 2), (2, 7), (7, 4)]));
        assert_eq!(verts(&set), vec![vec![2, 7, 4, 9, 2]]);
        assert!(set.chains()[0].is_loop());
    }

    #[test]
    fn path_is_one_open_chain() {
        let set = trace_chains(&edges(&[(5, 3), (3, 8), (8, 1)]));
        assert_eq!(verts(&set), vec![vec![1, 8, 3, 5]]);
        assert!(!set.chains()[0].is_loop());
    }

    #[test]
    fn t_junction_splits_into_three() {
        let set = trace_chains(&edges(&[(0, 1), (1, 2), (1, 3)]));
        assert_eq!(verts(&set), vec![vec![0, 1], vec![1, 2], vec![1, 3]]);
    }

    #[test]
    fn loop_hanging_from_junction() {
        // 0-1 tail, then 1-2-3-1 triangle
        let set = trace_chains(&edges(&[(0, 1), (1, 2), (2, 3), (3, 1)]));
        assert_eq!(verts(&set), vec![vec![0, 1], vec![1, 2, 3, 1]]);
        assert!(set.chains()[1].is_loop());
    }

    #[test]
    fn empty_round_trip() {
        assert!(trace_chains(&SeamEdgeSet::new()).is_empty());
        assert!(chains_to_edges(&ChainSet::empty()).unwrap().is_empty());
    }

    #[test]
    fn loop_edges() {
        let set = ChainSet::new(vec![SeamChain::new(vec![3, 5, 8, 3]).unwrap()]).unwrap();
        let e = chains_to_edges(&set).unwrap();
        assert_eq!(e, edges(&[(3, 5), (5, 8), (3, 8)]));
    }

    proptest::proptest! {
        #[test]
        fn trace_round_trips(raw in proptest::collection::vec((0usize..12, 0usize..12), 0..40)) {
            let set: SeamEdgeSet = raw
                .into_iter()
                .filter(|(a, b)| a != b)
                .map(|(a, b)| Edge::new(a, b))
                .collect();
            let chains = trace_chains(&set);
            proptest::prop_assert_eq!(chains_to_edges(&chains).unwrap(), set);
            // tracing is canonical: re-tracing the same edges gives the same chains
            proptest::prop_assert_eq!(trace_chains(&chains_to_edges(&chains).unwrap()), chains);
        }
    }
}
