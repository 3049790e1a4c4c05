//! Canonical serialization order for a set of seam chains.
//!
//! Loops come first. The largest remaining surface patch is refined first,
//! and within it the loop whose cut splits the patch most evenly by area is
//! taken next. Loops that never separate a patch follow, then open chains,
//! both by decreasing 3D length.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{connected_components, AdjacencyTable, Edge, Mesh, Patch};
use crate::seams::{ChainSet, SeamChain};

pub const ORDERED_SCHEMA: &str = "seamforge.ordered/1";

/// Relative tolerance under which two areas, balance scores or lengths are
/// treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Compares with ties inside [`TIE_TOLERANCE`] reported as equal.
pub fn tolerant_cmp(a: f64, b: f64) -> Ordering {
    if (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs()) {
        Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

/// How a selected loop split its patch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopProvenance {
    /// Index of the loop in the ordered sequence.
    pub position: usize,
    pub patch_area: f64,
    pub sub_areas: [f64; 2],
    pub balance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderedChains {
    pub chains: Vec<SeamChain>,
    pub provenance: Vec<LoopProvenance>,
}

impl OrderedChains {
    /// The ordered chains as a plain chain set.
    pub fn chain_set(&self) -> ChainSet {
        ChainSet::new(self.chains.clone()).expect("ordering preserves disjointness")
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Wire<'a> {
            schema: &'a str,
            chains: &'a [SeamChain],
            provenance: &'a [LoopProvenance],
        }
        serde_json::to_string_pretty(&Wire {
            schema: ORDERED_SCHEMA,
            chains: &self.chains,
            provenance: &self.provenance,
        })
        .expect("ordered chains serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ordered: OrderedChains = serde_json::from_str(text)?;
        ChainSet::new(ordered.chains.clone())?;
        Ok(ordered)
    }
}

/// Result of cutting a patch along one loop.
#[derive(Clone, Debug)]
pub struct LoopSplit {
    pub parts: [Patch; 2],
    pub balance: f64,
}

/// True if every edge of `chain` has both incident faces inside `patch`.
pub fn is_internal(adjacency: &AdjacencyTable, patch: &Patch, chain: &SeamChain) -> bool {
    chain.edges().all(|e| {
        let fs = adjacency.edge_faces(e);
        fs.len() == 2 && fs.iter().all(|&f| patch.contains(f))
    })
}

/// Cuts `patch` along `chain` and scores the split as min(A1, A2) / max(A1, A2).
pub fn split_by_loop(
    mesh: &Mesh,
    adjacency: &AdjacencyTable,
    patch: &Patch,
    chain: &SeamChain,
) -> Result<LoopSplit> {
    if !chain.is_loop() {
        return Err(Error::InvalidChain(format!(
            "balance needs a loop, got open chain from {}",
            chain.first()
        )));
    }
    if !is_internal(adjacency, patch, chain) {
        return Err(Error::BoundaryCoincident(chain.first()));
    }
    let blocked: BTreeSet<Edge> = chain.edges().collect();
    let parts = connected_components(mesh, adjacency, patch.faces(), &blocked);
    let [a, b]: [Patch; 2] = parts
        .try_into()
        .map_err(|_| Error::NonSeparatingLoop(chain.first()))?;
    let balance = a.area().min(b.area()) / a.area().max(b.area());
    Ok(LoopSplit {
        parts: [a, b],
        balance,
    })
}

pub fn balance_score(
    mesh: &Mesh,
    adjacency: &AdjacencyTable,
    patch: &Patch,
    chain: &SeamChain,
) -> Result<f64> {
    split_by_loop(mesh, adjacency, patch, chain).map(|s| s.balance)
}

/// Orders `chains` loops-first, largest-patch-first, best-balance-first.
pub fn canonical_order(mesh: &Mesh, adjacency: &AdjacencyTable, chains: &ChainSet) -> OrderedChains {
    let mut loops: Vec<&SeamChain> = chains.loops().collect();
    loops.sort_by(|a, b| a.vertices().cmp(b.vertices()));
    let mut remaining: Vec<bool> = vec![true; loops.len()];

    let all: Vec<usize> = (0..mesh.face_count()).collect();
    let mut patches: Vec<Patch> = connected_components(mesh, adjacency, &all, &BTreeSet::new());
    let mut sequence: Vec<SeamChain> = Vec::new();
    let mut provenance = Vec::new();

    while !patches.is_empty() {
        let pick = (0..patches.len())
            .max_by(|&i, &j| {
                let (p, q) = (&patches[i], &patches[j]);
                tolerant_cmp(p.area(), q.area())
                    .then_with(|| q.leading_vertex(mesh).cmp(&p.leading_vertex(mesh)))
                    .then_with(|| q.faces()[0].cmp(&p.faces()[0]))
            })
            .unwrap();
        let patch = patches.swap_remove(pick);

        let mut best: Option<(usize, LoopSplit)> = None;
        for (li, chain) in loops.iter().enumerate() {
            if !remaining[li] {
                continue;
            }
            let Ok(split) = split_by_loop(mesh, adjacency, &patch, chain) else {
                continue;
            };
            let better = match &best {
                None => true,
                Some((bi, b)) => match tolerant_cmp(split.balance, b.balance) {
                    Ordering::Greater => true,
                    Ordering::Less => false,
                    Ordering::Equal => chain_tiebreak(chain, loops[*bi]) == Ordering::Less,
                },
            };
            if better {
                best = Some((li, split));
            }
        }
        let Some((li, split)) = best else {
            continue;
        };
        remaining[li] = false;
        provenance.push(LoopProvenance {
            position: sequence.len(),
            patch_area: patch.area(),
            sub_areas: [split.parts[0].area(), split.parts[1].area()],
            balance: split.balance,
        });
        sequence.push(loops[li].clone());
        let [a, b] = split.parts;
        patches.push(a);
        patches.push(b);
    }

    let mut deferred: Vec<&SeamChain> = loops
        .iter()
        .zip(&remaining)
        .filter(|(_, &r)| r)
        .map(|(c, _)| *c)
        .collect();
    sort_by_length(mesh, &mut deferred);
    sequence.extend(deferred.into_iter().cloned());

    let mut open: Vec<&SeamChain> = chains.open_chains().collect();
    sort_by_length(mesh, &mut open);
    sequence.extend(open.into_iter().cloned());

    OrderedChains {
        chains: sequence,
        provenance,
    }
}

fn chain_tiebreak(a: &SeamChain, b: &SeamChain) -> Ordering {
    a.first()
        .cmp(&b.first())
        .then_with(|| a.vertices().cmp(b.vertices()))
}

fn sort_by_length(mesh: &Mesh, chains: &mut [&SeamChain]) {
    chains.sort_by(|a, b| tolerant_cmp(b.length(mesh), a.length(mesh)).then_with(|| chain_tiebreak(a, b)));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_adjacency;
    use crate::synth::{self, CylinderSpec};

    fn tube() -> (CylinderSpec, Mesh, AdjacencyTable) {
        let spec = CylinderSpec::default();
        let mesh = synth::cylinder(&spec);
        let adj = build_adjacency(&mesh).unwrap();
        (spec, mesh, adj)
    }

    #[test]
    fn balance_of_even_and_quarter_rings() {
        let (spec, mesh, adj) = tube();
        let whole = Patch::whole(&mesh);
        let mid = balance_score(&mesh, &adj, &whole, &synth::ring_chain(&spec, 2)).unwrap();
        assert!((mid - 1.0).abs() < 1e-12);
        let quarter = balance_score(&mesh, &adj, &whole, &synth::ring_chain(&spec, 1)).unwrap();
        assert!((quarter - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_ring_is_not_internal() {
        let (spec, mesh, adj) = tube();
        let whole = Patch::whole(&mesh);
        let err = balance_score(&mesh, &adj, &whole, &synth::ring_chain(&spec, 0)).unwrap_err();
        assert!(matches!(err, Error::BoundaryCoincident(0)));
    }

    #[test]
    fn meridian_of_a_torus_does_not_separate() {
        let mesh = synth::torus(8, 6, 2.0, 0.5);
        let adj = build_adjacency(&mesh).unwrap();
        let whole = Patch::whole(&mesh);
        let meridian = synth::torus_meridian(6, 3);
        assert!(matches!(
            balance_score(&mesh, &adj, &whole, &meridian),
            Err(Error::NonSeparatingLoop(_))
        ));
        // it is deferred behind separating loops, ahead of open chains
        let open = SeamChain::new(vec![0, 1, 2]).unwrap();
        let set = ChainSet::new(vec![open.clone(), meridian.clone()]).unwrap();
        let ordered = canonical_order(&mesh, &adj, &set);
        assert_eq!(ordered.chains, vec![meridian, open]);
        assert!(ordered.provenance.is_empty());
    }

    #[test]
    fn face_boundary_loop_splits_off_one_face() {
        let cube = synth::cube();
        let adj = build_adjacency(&cube).unwrap();
        let whole = Patch::whole(&cube);
        let tri = SeamChain::new(vec![0, 1, 5, 0]).unwrap();
        let s = split_by_loop(&cube, &adj, &whole, &tri).unwrap();
        assert_eq!(s.parts[0].faces().len() + s.parts[1].faces().len(), 12);
        assert!((s.balance - 0.5 / 5.5).abs() < 1e-12);
        let one = Patch::new(&cube, vec![0]);
        assert!(matches!(
            balance_score(&cube, &adj, &one, &tri),
            Err(Error::BoundaryCoincident(_))
        ));
    }

    #[test]
    fn single_ring_orders_trivially() {
        let (spec, mesh, adj) = tube();
        let ring = synth::ring_chain(&spec, 1);
        let set = ChainSet::new(vec![ring.clone()]).unwrap();
        let ordered = canonical_order(&mesh, &adj, &set);
        assert_eq!(ordered.chains, vec![ring]);
        assert_eq!(ordered.provenance.len(), 1);
    }

    #[test]
    fn midpoint_ring_precedes_quarter_ring() {
        let (spec, mesh, adj) = tube();
        let quarter = synth::ring_chain(&spec, 1);
        let mid = synth::ring_chain(&spec, 2);
        let set = ChainSet::new(vec![quarter.clone(), mid.clone()]).unwrap();
        let ordered = canonical_order(&mesh, &adj, &set);
        assert_eq!(ordered.chains, vec![mid, quarter]);
        assert!((ordered.provenance[0].balance - 1.0).abs() < 1e-12);
        // the quarter ring splits the lower half evenly
        assert!((ordered.provenance[1].balance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn open_chains_follow_loops_by_length() {
        let spec = CylinderSpec {
            segments: 8,
            rows: 8,
            height: 8.0,
            ..CylinderSpec::default()
        };
        let mesh = synth::cylinder(&spec);
        let adj = build_adjacency(&mesh).unwrap();
        let short = synth::vertical_chain(&spec, 5, 0, 2);
        let long = synth::vertical_chain(&spec, 2, 1, 6);
        let loops = [synth::ring_chain(&spec, 4), synth::ring_chain(&spec, 7)];
        let set = ChainSet::new(vec![
            short.clone(),
            loops[1].clone(),
            long.clone(),
            loops[0].clone(),
        ])
        .unwrap();
        let ordered = canonical_order(&mesh, &adj, &set);
        assert_eq!(long.length(&mesh), 5.0);
        assert_eq!(short.length(&mesh), 2.0);
        assert_eq!(
            ordered.chains,
            vec![loops[0].clone(), loops[1].clone(), long, short]
        );
    }

    #[test]
    fn json_round_trip() {
        let (spec, mesh, adj) = tube();
        let set = ChainSet::new(vec![synth::ring_chain(&spec, 2)]).unwrap();
        let ordered = canonical_order(&mesh, &adj, &set);
        let json = ordered.to_json();
        assert!(json.contains("\"provenance\""));
        assert_eq!(OrderedChains::from_json(&json).unwrap(), ordered);
    }
}
