use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::Result;
use crate::mesh::{build_adjacency, connected_components, AdjacencyTable, Edge, Mesh};
use crate::seams::ChainSet;

use super::{decode_json, sanitize, DecodeConfig, MeshContext, RawChain, Scorer, Session, StepEvent};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DcConfig {
    pub decode: DecodeConfig,
    /// Patches with at most this many faces are not decoded further.
    pub min_faces: usize,
    pub max_depth: usize,
}

impl Default for DcConfig {
    fn default() -> Self {
        DcConfig {
            decode: DecodeConfig::default(),
            min_faces: 64,
            max_depth: 16,
        }
    }
}

/// A patch handed to the scorer factory. Indices are local; the maps lead
/// back to the input mesh.
pub struct SubMesh<'a> {
    pub mesh: &'a Mesh,
    pub adjacency: &'a AdjacencyTable,
    pub depth: usize,
    pub vertex_map: &'a [usize],
    pub face_map: &'a [usize],
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubMeshRecord {
    pub depth: usize,
    /// Face ids in the input mesh.
    pub faces: Vec<usize>,
    pub area: f64,
    pub decoded: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DcOutput {
    pub chains: ChainSet,
    pub log_probs: Vec<f64>,
    pub submeshes: Vec<SubMeshRecord>,
    pub truncated: bool,
    pub depth_capped: bool,
}

impl DcOutput {
    pub fn to_json(&self) -> String {
        decode_json(
            &self.chains,
            &self.log_probs,
            self.truncated,
            self.depth_capped,
            None,
            &self.submeshes,
        )
    }
}

pub type ScorerFactory<'f> = dyn FnMut(&SubMesh<'_>) -> Result<Box<dyn Scorer + 'f>> + 'f;

struct Run<'c, 'f> {
    config: &'c DcConfig,
    factory: &'c mut ScorerFactory<'f>,
    raw: Vec<RawChain>,
    submeshes: Vec<SubMeshRecord>,
    truncated: bool,
    depth_capped: bool,
}

fn mix(seed: u64, branch: usize) -> u64 {
    let mut z = seed ^ (branch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Run<'_, '_> {
    fn patch(
        &mut self,
        mesh: &Mesh,
        adjacency: &AdjacencyTable,
        vertex_map: &[usize],
        face_map: &[usize],
        depth: usize,
        seed: u64,
    ) -> Result<()> {
        let mut scorer = (self.factory)(&SubMesh {
            mesh,
            adjacency,
            depth,
            vertex_map,
            face_map,
        })?;
        let ctx = MeshContext { mesh, adjacency };
        let mut session = Session::new(ctx, &self.config.decode, seed);
        let may_split = mesh.face_count() > self.config.min_faces;
        let all_faces: Vec<usize> = (0..mesh.face_count()).collect();
        let mut split = None;
        loop {
            let closed = session.raw.len();
            let event = session.step(scorer.as_mut())?;
            if matches!(event, StepEvent::Continue) {
                continue;
            }
            if may_split && session.raw.len() > closed {
                let (local, _) = sanitize(&session.raw);
                let blocked: BTreeSet<Edge> = local.chains().iter().flat_map(|c| c.edges()).collect();
                let comps = connected_components(mesh, adjacency, &all_faces, &blocked);
                if comps.len() >= 2 {
                    split = Some(comps);
                    break;
                }
            }
            if matches!(event, StepEvent::Finished) {
                break;
            }
        }
        self.truncated |= session.truncated;
        for walk in &session.raw {
            self.raw.push(RawChain {
                vertices: walk.vertices.iter().map(|&v| vertex_map[v]).collect(),
                log_prob: walk.log_prob,
            });
        }
        let Some(comps) = split else {
            return Ok(());
        };
        log::debug!(
            "depth {depth}: patch of {} faces split into {}",
            mesh.face_count(),
            comps.len()
        );
        for (branch, comp) in comps.iter().enumerate() {
            let faces: Vec<usize> = comp.faces().iter().map(|&f| face_map[f]).collect();
            let idx = self.submeshes.len();
            self.submeshes.push(SubMeshRecord {
                depth: depth + 1,
                faces,
                area: comp.area(),
                decoded: false,
            });
            if comp.faces().len() <= self.config.min_faces {
                continue;
            }
            if depth + 1 > self.config.max_depth {
                self.depth_capped = true;
                continue;
            }
            let (sub, sub_vertices) = mesh.submesh(comp.faces());
            let sub_adj = build_adjacency(&sub)?;
            let vmap: Vec<usize> = sub_vertices.iter().map(|&v| vertex_map[v]).collect();
            let fmap: Vec<usize> = comp.faces().iter().map(|&f| face_map[f]).collect();
            self.submeshes[idx].decoded = true;
            self.patch(&sub, &sub_adj, &vmap, &fmap, depth + 1, mix(seed, branch))?;
        }
        Ok(())
    }
}

/// Decodes chain by chain; whenever the chains so far disconnect the current
/// patch, each large enough piece is decoded again as its own mesh with a
/// fresh scorer from `factory`.
pub fn divide_and_conquer_decode(
    mesh: &Mesh,
    adjacency: &AdjacencyTable,
    factory: &mut ScorerFactory<'_>,
    config: &DcConfig,
) -> Result<DcOutput> {
    config.decode.validate()?;
    let mut run = Run {
        config,
        factory,
        raw: Vec::new(),
        submeshes: Vec::new(),
        truncated: false,
        depth_capped: false,
    };
    let vmap: Vec<usize> = (0..mesh.vertex_count()).collect();
    let fmap: Vec<usize> = (0..mesh.face_count()).collect();
    run.patch(mesh, adjacency, &vmap, &fmap, 0, config.decode.seed)?;
    let (chains, log_probs) = sanitize(&run.raw);
    Ok(DcOutput {
        chains,
        log_probs,
        submeshes: run.submeshes,
        truncated: run.truncated,
        depth_capped: run.depth_capped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seams::{tokenize, Token};
    use crate::synth;
    use crate::traversal::{HeuristicScorer, ReplayScorer};

    fn ring_setup() -> (synth::CylinderSpec, Mesh, AdjacencyTable) {
        let spec = synth::CylinderSpec::default();
        let mesh = synth::cylinder(&spec);
        let adj = build_adjacency(&mesh).unwrap();
        (spec, mesh, adj)
    }

    fn replay_factory(target: Vec<Token>) -> impl FnMut(&SubMesh<'_>) -> Result<Box<dyn Scorer>> {
        move |sub: &SubMesh<'_>| -> Result<Box<dyn Scorer>> {
            Ok(if sub.depth == 0 {
                Box::new(ReplayScorer::from_decisions(target.clone()))
            } else {
                Box::new(ReplayScorer::from_decisions(vec![Token::Eos]))
            })
        }
    }

    #[test]
    fn ring_splits_into_two_submeshes() {
        let (spec, mesh, adj) = ring_setup();
        let ring = synth::ring_chain(&spec, 2);
        let target = crate::traversal::decisions_of(&tokenize(&ChainSet::new(vec![ring.clone()]).unwrap()));
        let config = DcConfig {
            min_faces: 8,
            decode: DecodeConfig {
                allow_empty: true,
                ..DecodeConfig::default()
            },
            ..DcConfig::default()
        };
        let out = divide_and_conquer_decode(&mesh, &adj, &mut replay_factory(target), &config).unwrap();
        assert_eq!(out.chains.chains(), &[ring]);
        assert_eq!(out.submeshes.len(), 2);
        // oracle: faces whose vertices all lie on rings <= 2 form the lower half
        let lower: Vec<usize> = (0..mesh.face_count())
            .filter(|&f| mesh.faces()[f].iter().all(|&v| v / spec.segments <= 2))
            .collect();
        let lower_area: f64 = lower.iter().map(|&f| mesh.face_area(f)).sum();
        let mut areas: Vec<f64> = out.submeshes.iter().map(|s| s.area).collect();
        areas.sort_by(f64::total_cmp);
        assert!((areas[0] - lower_area).abs() < 1e-9);
        assert!((areas[0] + areas[1] - mesh.area()).abs() < 1e-9);
        assert_eq!(out.submeshes[0].faces, lower);
        assert!(out.submeshes.iter().all(|s| s.decoded && s.depth == 1));
    }

    #[test]
    fn small_mesh_never_recurses() {
        let (spec, mesh, adj) = ring_setup();
        let target = crate::traversal::decisions_of(&tokenize(
            &ChainSet::new(vec![synth::ring_chain(&spec, 2)]).unwrap(),
        ));
        let out = divide_and_conquer_decode(&mesh, &adj, &mut replay_factory(target), &DcConfig::default())
            .unwrap();
        assert!(out.submeshes.is_empty());
        assert_eq!(out.chains.len(), 1);
    }

    #[test]
    fn depth_cap_is_flagged() {
        let (spec, mesh, adj) = ring_setup();
        let target = crate::traversal::decisions_of(&tokenize(
            &ChainSet::new(vec![synth::ring_chain(&spec, 2)]).unwrap(),
        ));
        let config = DcConfig {
            min_faces: 8,
            max_depth: 0,
            ..DcConfig::default()
        };
        let out = divide_and_conquer_decode(&mesh, &adj, &mut replay_factory(target), &config).unwrap();
        assert!(out.depth_capped);
        assert!(out.submeshes.iter().all(|s| !s.decoded));
    }

    #[test]
    fn heuristic_dc_yields_valid_chains() {
        let spec = synth::CylinderSpec {
            segments: 12,
            rows: 8,
            pinch: 0.4,
            pinch_row: 4,
            ..synth::CylinderSpec::default()
        };
        let mesh = synth::cylinder(&spec);
        let adj = build_adjacency(&mesh).unwrap();
        let mut factory = |sub: &SubMesh<'_>| -> Result<Box<dyn Scorer>> {
            Ok(Box::new(HeuristicScorer::new(sub.mesh, sub.adjacency)))
        };
        let config = DcConfig {
            min_faces: 16,
            ..DcConfig::default()
        };
        for seed in 0..4 {
            let config = DcConfig {
                decode: DecodeConfig {
                    seed,
                    ..config.decode.clone()
                },
                ..config.clone()
            };
            let out = divide_and_conquer_decode(&mesh, &adj, &mut factory, &config).unwrap();
            out.chains.validate_on(&adj).unwrap();
            assert_eq!(out.log_probs.len(), out.chains.len());
            for s in &out.submeshes {
                assert!(s.faces.iter().all(|&f| f < mesh.face_count()));
            }
        }
    }
}
