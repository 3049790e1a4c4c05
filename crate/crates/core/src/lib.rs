//! Mesh-native UV seam toolkit.
//!
//! Seams are represented as chains of mesh vertices, serialized into a
//! pointer-style token stream, decoded under a 1-ring neighbor mask, and
//! evaluated by cutting, flattening and measuring the resulting charts.

pub mod atlas;
pub mod error;
pub mod geom;
pub mod mesh;
pub mod neural;
pub mod order;
pub mod seams;
pub mod synth;
pub mod traversal;

pub use error::{Error, Result};
pub use mesh::{build_adjacency, AdjacencyTable, Edge, Mesh, Patch};
pub use seams::{ChainSet, SeamChain, SeamEdgeSet, Token, TokenSequence};
