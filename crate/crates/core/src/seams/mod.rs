//! Seam edges, seam chains and their token serialization.
//!
//! A seam chain is a vertex walk on the mesh: consecutive vertices share an
//! edge. Closed walks (first vertex repeated at the end) are loop cuts.

mod extract;
mod tokens;
mod trace;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{AdjacencyTable, Edge, Mesh};

pub use extract::{extract_seams_from_uv, uv_islands, DEFAULT_UV_TOLERANCE};
pub use tokens::{detokenize, tokenize, Token, TokenSequence, TOKENS_SCHEMA};
pub use trace::{chains_to_edges, trace_chains};

pub const CHAINS_SCHEMA: &str = "seamforge.chains/1";
pub const SEAMS_SCHEMA: &str = "seamforge.seams/1";

/// A set of mesh edges marked as cuts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeamEdgeSet {
    edges: BTreeSet<Edge>,
}

impl SeamEdgeSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a set, checking every edge against the mesh.
    pub fn from_edges(adjacency: &AdjacencyTable, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let edges: BTreeSet<Edge> = edges.into_iter().collect();
        if let Some(bad) = edges.iter().find(|e| !adjacency.is_edge(e.0, e.1)) {
            return Err(Error::NotAnEdge(*bad));
        }
        Ok(SeamEdgeSet { edges })
    }

    pub fn insert(&mut self, e: Edge) -> bool {
        self.edges.insert(e)
    }

    pub fn contains(&self, e: &Edge) -> bool {
        self.edges.contains(e)
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().copied()
    }

    pub fn as_set(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn total_length(&self, mesh: &Mesh) -> f64 {
        self.edges.iter().map(|&e| mesh.edge_length(e)).sum()
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Wire<'a> {
            schema: &'a str,
            edges: &'a BTreeSet<Edge>,
        }
        serde_json::to_string_pretty(&Wire {
            schema: SEAMS_SCHEMA,
            edges: &self.edges,
        })
        .expect("edge set serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl FromIterator<Edge> for SeamEdgeSet {
    fn from_iter<I: IntoIterator<Item = Edge>>(iter: I) -> Self {
        SeamEdgeSet {
            edges: iter.into_iter().collect(),
        }
    }
}

/// An ordered vertex walk with no repeated edge. `is_loop` iff the walk
/// returns to its first vertex.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ChainWire")]
pub struct SeamChain {
    vertices: Vec<usize>,
    is_loop: bool,
}

#[derive(Deserialize)]
struct ChainWire {
    vertices: Vec<usize>,
    #[serde(default)]
    is_loop: Option<bool>,
}

impl TryFrom<ChainWire> for SeamChain {
    type Error = Error;

    fn try_from(w: ChainWire) -> Result<Self> {
        let chain = SeamChain::new(w.vertices)?;
        if let Some(flag) = w.is_loop {
            if flag != chain.is_loop {
                return Err(Error::InvalidChain(format!(
                    "is_loop={flag} disagrees with endpoints of {:?}",
                    chain.vertices
                )));
            }
        }
        Ok(chain)
    }
}

impl SeamChain {
    pub fn new(vertices: Vec<usize>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidChain(format!(
                "chain needs at least 2 vertices, got {}",
                vertices.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for w in vertices.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidChain(format!("repeated vertex {} in a step", w[0])));
            }
            if !seen.insert(Edge::new(w[0], w[1])) {
                return Err(Error::DuplicateEdge(Edge::new(w[0], w[1])));
            }
        }
        let is_loop = vertices.first() == vertices.last();
        Ok(SeamChain { vertices, is_loop })
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn is_loop(&self) -> bool {
        self.is_loop
    }

    pub fn first(&self) -> usize {
        self.vertices[0]
    }

    pub fn edge_count(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.vertices.windows(2).map(|w| Edge::new(w[0], w[1]))
    }

    pub fn min_vertex(&self) -> usize {
        *self.vertices.iter().min().unwrap()
    }

    /// Sum of 3D edge lengths.
    pub fn length(&self, mesh: &Mesh) -> f64 {
        self.edges().map(|e| mesh.edge_length(e)).sum()
    }

    /// Every step is a mesh edge.
    pub fn is_walk_on(&self, adjacency: &AdjacencyTable) -> bool {
        self.vertices.windows(2).all(|w| adjacency.is_edge(w[0], w[1]))
    }

    /// Maps vertex indices through `map` (e.g. sub-mesh to parent).
    pub fn remap(&self, map: &[usize]) -> Result<SeamChain> {
        SeamChain::new(self.vertices.iter().map(|&v| map[v]).collect())
    }
}

/// Chains with pairwise disjoint edge sets.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ChainSetWire")]
pub struct ChainSet {
    chains: Vec<SeamChain>,
}

#[derive(Deserialize)]
struct ChainSetWire {
    chains: Vec<SeamChain>,
}

impl TryFrom<ChainSetWire> for ChainSet {
    type Error = Error;

    fn try_from(w: ChainSetWire) -> Result<Self> {
        ChainSet::new(w.chains)
    }
}

impl ChainSet {
    pub fn new(chains: Vec<SeamChain>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for c in &chains {
            for e in c.edges() {
                if !seen.insert(e) {
                    return Err(Error::DuplicateEdge(e));
                }
            }
        }
        Ok(ChainSet { chains })
    }

    pub fn empty() -> Self {
        ChainSet { chains: Vec::new() }
    }

    pub fn chains(&self) -> &[SeamChain] {
        &self.chains
    }

    pub fn into_chains(self) -> Vec<SeamChain> {
        self.chains
    }

    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.chains.iter().map(SeamChain::edge_count).sum()
    }

    pub fn loops(&self) -> impl Iterator<Item = &SeamChain> {
        self.chains.iter().filter(|c| c.is_loop())
    }

    pub fn open_chains(&self) -> impl Iterator<Item = &SeamChain> {
        self.chains.iter().filter(|c| !c.is_loop())
    }

    /// Checks that every chain walks along mesh edges.
    pub fn validate_on(&self, adjacency: &AdjacencyTable) -> Result<()> {
        for c in &self.chains {
            for w in c.vertices().windows(2) {
                if !adjacency.is_edge(w[0], w[1]) {
                    return Err(Error::NotAnEdge(Edge::new(w[0], w[1])));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Wire<'a> {
            schema: &'a str,
            chains: &'a [SeamChain],
        }
        serde_json::to_string_pretty(&Wire {
            schema: CHAINS_SCHEMA,
            chains: &self.chains,
        })
        .expect("chains serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
