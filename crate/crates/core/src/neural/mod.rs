//! Toy-scale dual-stream encoder and pointer decoder.
//!
//! Vertices are embedded from Fourier features of position and normal, mixed
//! over the 1-ring by mean-aggregating graph layers, then enriched by
//! cross-attention to a small set of global shape tokens. A causal decoder
//! with rotary attention produces pointer logits over `[EOC, EOS, vertices]`.

pub mod autodiff;
mod io;
mod model;
mod scorer;
mod shape;
pub mod tensor;
mod train;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use io::{load_weights, loss_csv, read_weights, save_weights, write_weights};
pub use model::{Encoded, Example, Model, ModelWeights};
pub use scorer::ModelScorer;
pub use shape::{fourier_features, sample_surface, ShapeProvider};
pub use tensor::Matrix;
pub use train::{greedy_reconstruction_rate, toy_dataset, train_toy, TrainConfig, TrainOutput};

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub d_model: usize,
    pub d_point: usize,
    pub graph_widths: Vec<usize>,
    pub decoder_layers: usize,
    pub cross_attn_layers: usize,
    pub fourier_bands: usize,
    /// Number of global shape tokens.
    pub shape_tokens: usize,
    pub heads: usize,
    /// Longest decoder input; also the size of the chain position table.
    pub max_len: usize,
    /// Surface samples fed to the shape-token provider.
    pub shape_points: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_model: 512,
            d_point: 384,
            graph_widths: vec![64, 128, 256, 512],
            decoder_layers: 6,
            cross_attn_layers: 2,
            fourier_bands: 6,
            shape_tokens: 256,
            heads: 8,
            max_len: 400,
            shape_points: 2048,
        }
    }
}

impl ModelConfig {
    pub fn toy() -> Self {
        ModelConfig {
            d_model: 32,
            d_point: 16,
            graph_widths: vec![8, 16, 32, 32],
            decoder_layers: 2,
            cross_attn_layers: 2,
            fourier_bands: 4,
            shape_tokens: 8,
            heads: 4,
            max_len: 400,
            shape_points: 256,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    /// Width of the per-vertex Fourier input.
    pub fn feature_width(&self) -> usize {
        12 * self.fourier_bands + 6
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.d_model == 0 || self.d_point == 0 || self.heads == 0 {
            return bad("widths and head count must be positive".into());
        }
        if self.graph_widths.is_empty() || self.graph_widths.contains(&0) {
            return bad("graph widths must be a non-empty list of positive values".into());
        }
        if self.d_model % self.heads != 0 {
            return bad(format!(
                "d_model {} not divisible by {} heads",
                self.d_model, self.heads
            ));
        }
        if self.head_dim() % 2 != 0 {
            return bad(format!(
                "rotary attention needs an even head width, got {}",
                self.head_dim()
            ));
        }
        if self.fourier_bands == 0 || self.shape_tokens == 0 || self.max_len < 2 {
            return bad("fourier_bands and shape_tokens must be >= 1, max_len >= 2".into());
        }
        if self.shape_points < self.shape_tokens {
            return bad("shape_points must be at least shape_tokens".into());
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        let widths: Vec<String> = self.graph_widths.iter().map(|w| w.to_string()).collect();
        vec![
            ("d_model", self.d_model.to_string()),
            ("d_point", self.d_point.to_string()),
            ("graph_widths", widths.join(",")),
            ("decoder_layers", self.decoder_layers.to_string()),
            ("cross_attn_layers", self.cross_attn_layers.to_string()),
            ("fourier_bands", self.fourier_bands.to_string()),
            ("shape_tokens", self.shape_tokens.to_string()),
            ("heads", self.heads.to_string()),
            ("max_len", self.max_len.to_string()),
            ("shape_points", self.shape_points.to_string()),
        ]
    }

    /// Overrides fields named in `kv`; unknown keys are left for the caller.
    pub fn apply(&mut self, kv: &BTreeMap<String, String>) -> Result<()> {
        for (k, v) in kv {
            match k.as_str() {
                "d_model" => self.d_model = parse_value(k, v)?,
                "d_point" => self.d_point = parse_value(k, v)?,
                "graph_widths" => {
                    self.graph_widths = v
                        .split(',')
                        .map(|w| parse_value(k, w.trim()))
                        .collect::<Result<_>>()?
                }
                "decoder_layers" => self.decoder_layers = parse_value(k, v)?,
                "cross_attn_layers" => self.cross_attn_layers = parse_value(k, v)?,
                "fourier_bands" => self.fourier_bands = parse_value(k, v)?,
                "shape_tokens" => self.shape_tokens = parse_value(k, v)?,
                "heads" => self.heads = parse_value(k, v)?,
                "max_len" => self.max_len = parse_value(k, v)?,
                "shape_points" => self.shape_points = parse_value(k, v)?,
                _ => {}
            }
        }
        self.validate()
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut c = ModelConfig::toy();
        c.apply(&parse_kv(text)?)?;
        Ok(c)
    }

    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.to_kv().as_bytes()).into()
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected `key = value`, got {line:?}"),
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub(crate) fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}
