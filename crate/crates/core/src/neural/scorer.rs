use crate::error::Result;
use crate::traversal::{DecodeState, MeshContext, Scorer};

use super::model::{Encoded, Model};

/// Scores candidates with a trained [`Model`]. The mesh is encoded on the
/// first call and reused for the rest of the decode.
pub struct ModelScorer<'m> {
    model: &'m Model,
    encoded: Option<Encoded>,
}

impl<'m> ModelScorer<'m> {
    pub fn new(model: &'m Model) -> Self {
        ModelScorer { model, encoded: None }
    }

    /// Uses a precomputed encoding instead of encoding on first use.
    pub fn with_encoding(model: &'m Model, encoded: Encoded) -> Self {
        ModelScorer {
            model,
            encoded: Some(encoded),
        }
    }
}

impl Scorer for ModelScorer<'_> {
    fn score(&mut self, state: &DecodeState, ctx: &MeshContext<'_>) -> Result<Vec<f64>> {
        if self.encoded.is_none() {
            let inputs = self.model.mesh_inputs(ctx.mesh, ctx.adjacency)?;
            self.encoded = Some(self.model.encode(&inputs));
        }
        let enc = self.encoded.as_ref().expect("encoded above");
        let logits = self.model.logits(enc, state.decisions())?;
        Ok(logits.row(logits.rows - 1).to_vec())
    }
}
