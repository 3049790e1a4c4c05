use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::geom::{dot3, norm3, sub3};
use crate::mesh::{AdjacencyTable, Edge, Mesh};
use crate::seams::{Token, TokenSequence};

use super::{decisions_of, DecodeState, MeshContext, Scorer};

/// Geometry-only scorer: follows concave creases, prefers going straight,
/// closes loops when it gets back to its start and stops after a few chains.
#[derive(Clone, Debug)]
pub struct HeuristicScorer {
    concavity: HashMap<Edge, f64>,
    start_pull: Vec<f64>,
    target_len: f64,
}

impl HeuristicScorer {
    pub const CONCAVITY_WEIGHT: f64 = 2.0;
    pub const CONTINUITY_WEIGHT: f64 = 0.5;
    /// Stands in for the dihedral on edges with a single face.
    pub const BOUNDARY_SCORE: f64 = -1.0;
    pub const CLOSURE_BONUS: f64 = 1.5;
    pub const REVISIT_PENALTY: f64 = -3.0;
    pub const EOC_RAMP: f64 = 0.5;
    pub const EOS_FLOOR: f64 = -1e4;

    pub fn new(mesh: &Mesh, adjacency: &AdjacencyTable) -> Self {
        let concavity: HashMap<Edge, f64> = adjacency
            .edges()
            .map(|e| (e, signed_dihedral(mesh, adjacency, e)))
            .collect();
        let start_pull = (0..mesh.vertex_count())
            .map(|v| {
                adjacency
                    .neighbors(v)
                    .iter()
                    .map(|&u| concavity[&Edge::new(u, v)])
                    .fold(f64::NEG_INFINITY, f64::max)
                    .max(Self::BOUNDARY_SCORE)
                    * Self::CONCAVITY_WEIGHT
            })
            .collect();
        HeuristicScorer {
            concavity,
            start_pull,
            target_len: (mesh.vertex_count() as f64).sqrt().max(3.0),
        }
    }

    /// Signed bend across `e` in radians: positive for valleys, negative for
    /// ridges, [`Self::BOUNDARY_SCORE`] for boundary edges.
    pub fn edge_concavity(&self, e: Edge) -> f64 {
        self.concavity.get(&e).copied().unwrap_or(Self::BOUNDARY_SCORE)
    }

    /// Geometric part of the score for stepping `v -> u`.
    pub fn neighbor_score(&self, mesh: &Mesh, prev: Option<usize>, v: usize, u: usize) -> f64 {
        let mut s = Self::CONCAVITY_WEIGHT * self.edge_concavity(Edge::new(v, u));
        if let Some(p) = prev {
            let a = sub3(mesh.position(v), mesh.position(p));
            let b = sub3(mesh.position(u), mesh.position(v));
            let (na, nb) = (norm3(a), norm3(b));
            if na > 0.0 && nb > 0.0 {
                s += Self::CONTINUITY_WEIGHT * dot3(a, b) / (na * nb);
            }
        }
        s
    }
}

fn signed_dihedral(mesh: &Mesh, adjacency: &AdjacencyTable, e: Edge) -> f64 {
    let faces = adjacency.edge_faces(e);
    if faces.len() != 2 {
        return HeuristicScorer::BOUNDARY_SCORE;
    }
    let (f, g) = (faces[0], faces[1]);
    let nf = mesh.face_normal(f);
    let ng = mesh.face_normal(g);
    let angle = dot3(nf, ng).clamp(-1.0, 1.0).acos();
    let opposite = mesh.faces()[g]
        .iter()
        .copied()
        .find(|&c| !e.has(c))
        .expect("triangle has a vertex off the edge");
    let side = dot3(nf, sub3(mesh.position(opposite), mesh.position(e.0)));
    if side > 0.0 {
        angle
    } else {
        -angle
    }
}

impl Scorer for HeuristicScorer {
    fn score(&mut self, state: &DecodeState, ctx: &MeshContext<'_>) -> Result<Vec<f64>> {
        let mut logits = vec![0.0; ctx.candidate_count()];
        let history = state.history();
        let chain_begin = history
            .iter()
            .rposition(|&t| t == Token::Eoc)
            .map_or(0, |i| i + 1);
        let earlier: BTreeSet<usize> = history[..chain_begin].iter().filter_map(|t| t.vertex()).collect();

        let Some(v) = state.current_vertex() else {
            for (u, &pull) in self.start_pull.iter().enumerate() {
                let penalty = if earlier.contains(&u) {
                    Self::REVISIT_PENALTY
                } else {
                    0.0
                };
                logits[u + Token::VERTEX_OFFSET] = pull + penalty;
            }
            logits[Token::EOC_ID] = Self::EOS_FLOOR;
            logits[Token::EOS_ID] = Self::EOS_FLOOR;
            return Ok(logits);
        };

        let in_chain: BTreeSet<usize> = history[chain_begin..].iter().filter_map(|t| t.vertex()).collect();
        let pos = state.chain_position();
        let start = state.chain_start();
        let prev = state.previous_vertex();
        for &u in ctx.adjacency.neighbors(v) {
            let mut s = self.neighbor_score(ctx.mesh, prev, v, u);
            if Some(u) == start && pos >= 3 {
                s += Self::CLOSURE_BONUS;
            } else if in_chain.contains(&u) || earlier.contains(&u) {
                s += Self::REVISIT_PENALTY;
            }
            logits[u + Token::VERTEX_OFFSET] = s;
        }
        let closed = Some(v) == start && pos > 1;
        let eoc = if closed {
            8.0
        } else {
            Self::EOC_RAMP * (pos as f64 - self.target_len)
        };
        logits[Token::EOC_ID] = eoc;
        logits[Token::EOS_ID] = eoc - 2.0 + state.chains_closed() as f64;
        Ok(logits)
    }
}

/// Forces a fixed decision sequence by giving its next entry a large logit.
#[derive(Clone, Debug)]
pub struct ReplayScorer {
    decisions: Vec<Token>,
}

impl ReplayScorer {
    pub const TARGET_LOGIT: f64 = 1e3;

    pub fn new(target: &TokenSequence) -> Self {
        ReplayScorer {
            decisions: decisions_of(target),
        }
    }

    pub fn from_decisions(decisions: Vec<Token>) -> Self {
        ReplayScorer { decisions }
    }
}

impl Scorer for ReplayScorer {
    fn score(&mut self, state: &DecodeState, ctx: &MeshContext<'_>) -> Result<Vec<f64>> {
        let step = state.decisions().len();
        let target = *self.decisions.get(step).ok_or(Error::ExhaustedTarget(step))?;
        let mut logits = vec![0.0; ctx.candidate_count()];
        if let Some(l) = logits.get_mut(target.candidate_id()) {
            *l = Self::TARGET_LOGIT;
        }
        Ok(logits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{cross3, normalize3};
    use crate::mesh::build_adjacency;
    use crate::synth;
    use crate::traversal::{candidate_mask, decode, DecodeConfig};

    #[test]
    fn flat_grid_neighbors_tie() {
        let mesh = synth::grid(4, 4, 1.0);
        let adj = build_adjacency(&mesh).unwrap();
        let h = HeuristicScorer::new(&mesh, &adj);
        let v = 12; // interior vertex
        let scores: Vec<f64> = adj
            .neighbors(v)
            .iter()
            .map(|&u| h.neighbor_score(&mesh, None, v, u))
            .collect();
        assert!(scores.iter().all(|&s| s.abs() < 1e-12), "{scores:?}");
    }

    // independent dihedral: angle between outward normals computed from raw
    // positions, signed by whether the far vertex lies above the first face
    fn oracle_concavity(mesh: &Mesh, e: Edge) -> Option<f64> {
        let faces: Vec<usize> = (0..mesh.face_count())
            .filter(|&f| mesh.faces()[f].contains(&e.0) && mesh.faces()[f].contains(&e.1))
            .collect();
        if faces.len() != 2 {
            return None;
        }
        let normal = |f: usize| {
            let [a, b, c] = mesh.faces()[f].map(|i| mesh.position(i));
            normalize3(cross3(sub3(b, a), sub3(c, a)))
        };
        let (n0, n1) = (normal(faces[0]), normal(faces[1]));
        let far = *mesh.faces()[faces[1]].iter().find(|&&c| !e.has(c)).unwrap();
        let up = dot3(n0, sub3(mesh.position(far), mesh.position(e.0))) > 0.0;
        let angle = dot3(n0, n1).clamp(-1.0, 1.0).acos();
        Some(if up { angle } else { -angle })
    }

    #[test]
    fn pinched_ring_is_most_concave() {
        let spec = synth::CylinderSpec {
            pinch: 0.4,
            ..synth::CylinderSpec::default()
        };
        let mesh = synth::cylinder(&spec);
        let adj = build_adjacency(&mesh).unwrap();
        let h = HeuristicScorer::new(&mesh, &adj);
        let best = adj
            .edges()
            .filter_map(|e| oracle_concavity(&mesh, e).map(|c| (e, c)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let ring = synth::ring_chain(&spec, spec.pinch_row);
        let ring_edges: BTreeSet<Edge> = ring.edges().collect();
        assert!(ring_edges.contains(&best.0));
        for e in adj.edges() {
            if let Some(c) = oracle_concavity(&mesh, e) {
                assert!((h.edge_concavity(e) - c).abs() < 1e-9);
            }
        }
        // from every ring vertex, the best-scored step stays on the ring
        for &v in &ring.vertices()[..spec.segments] {
            let best_u = adj
                .neighbors(v)
                .iter()
                .copied()
                .max_by(|&a, &b| {
                    h.neighbor_score(&mesh, None, v, a)
                        .total_cmp(&h.neighbor_score(&mesh, None, v, b))
                })
                .unwrap();
            assert!(ring_edges.contains(&Edge::new(v, best_u)), "{v} -> {best_u}");
        }
    }

    #[test]
    fn heuristic_terminates_on_corpus() {
        for (name, mesh) in synth::fixture_corpus() {
            let adj = build_adjacency(&mesh).unwrap();
            for seed in 0..5 {
                let mut h = HeuristicScorer::new(&mesh, &adj);
                let config = DecodeConfig {
                    seed,
                    ..DecodeConfig::default()
                };
                let out = decode(&mesh, &adj, &mut h, &config).unwrap();
                assert!(!out.truncated, "{name} seed {seed}");
                assert!(out.tokens.len() <= 400);
                out.chains.validate_on(&adj).unwrap();
            }
        }
    }

    #[test]
    fn replay_exhaustion() {
        let mesh = synth::grid(2, 2, 1.0);
        let adj = build_adjacency(&mesh).unwrap();
        let ctx = MeshContext {
            mesh: &mesh,
            adjacency: &adj,
        };
        let mut r = ReplayScorer::from_decisions(vec![Token::Vertex(0)]);
        let state = DecodeState::replay(&[Token::Vertex(0)], false);
        assert!(matches!(r.score(&state, &ctx), Err(Error::ExhaustedTarget(1))));
        let logits = r.score(&DecodeState::new(), &ctx).unwrap();
        assert_eq!(logits.len(), 9 + 2);
        assert_eq!(logits[2], ReplayScorer::TARGET_LOGIT);
        assert!(candidate_mask(&DecodeState::new(), &adj)[2]);
    }
}
