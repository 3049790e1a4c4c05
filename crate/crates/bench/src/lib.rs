//! Shared workloads for the benchmarks.

use seamforge_core::atlas::{auto_cut, Chart};
use seamforge_core::seams::chains_to_edges;
use seamforge_core::synth::{self, CylinderSpec, SphereSpec};
use seamforge_core::{build_adjacency, AdjacencyTable, ChainSet, Mesh};

pub struct Workload {
    pub name: &'static str,
    pub mesh: Mesh,
    pub adjacency: AdjacencyTable,
    pub chains: ChainSet,
}

/// A tube and a sphere at increasing resolution, each with a few rings and
/// one open chain.
pub fn workloads() -> Vec<Workload> {
    let mut out = Vec::new();
    for (name, segments, rows) in [("tube-small", 16, 8), ("tube-large", 48, 32)] {
        let spec = CylinderSpec {
            segments,
            rows,
            ..CylinderSpec::default()
        };
        let chains = vec![
            synth::ring_chain(&spec, rows / 4),
            synth::ring_chain(&spec, rows / 2),
            synth::vertical_chain(&spec, 0, 0, rows / 4),
        ];
        out.push(build(name, synth::cylinder(&spec), chains));
    }
    for (name, slices, stacks) in [("sphere-small", 16, 10), ("sphere-large", 48, 30)] {
        let spec = SphereSpec {
            slices,
            stacks,
            radius: 1.0,
        };
        let chains = vec![
            synth::sphere_ring(&spec, stacks / 3),
            synth::sphere_ring(&spec, 2 * stacks / 3),
            synth::sphere_meridian(&spec, 0, stacks / 3 - 1),
        ];
        out.push(build(name, synth::sphere(&spec), chains));
    }
    out
}

fn build(name: &'static str, mesh: Mesh, chains: Vec<seamforge_core::SeamChain>) -> Workload {
    let adjacency = build_adjacency(&mesh).expect("procedural meshes are manifold");
    let chains = ChainSet::new(chains).expect("workload chains are disjoint");
    Workload {
        name,
        mesh,
        adjacency,
        chains,
    }
}

/// Disk charts of a workload after cutting along its chains.
pub fn charts(w: &Workload) -> Vec<Chart> {
    let seams = chains_to_edges(&w.chains).expect("chains are valid");
    auto_cut(&w.mesh, &w.adjacency, &seams)
        .expect("auto-cut succeeds")
        .0
}
