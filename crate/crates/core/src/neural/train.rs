use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::scale3;
use crate::mesh::{build_adjacency, Mesh};
use crate::order::{canonical_order, OrderedChains};
use crate::seams::{extract_seams_from_uv, tokenize, trace_chains, ChainSet, DEFAULT_UV_TOLERANCE};
use crate::synth;
use crate::traversal::{decode, DecodeConfig};

use super::model::{Example, Model};
use super::scorer::ModelScorer;
use super::tensor::Matrix;
use super::{parse_kv, parse_value, ModelConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Final learning rate as a fraction of `lr` (cosine schedule).
    pub min_lr_frac: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            lr: 3e-3,
            min_lr_frac: 0.05,
            batch_size: 4,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || !(self.lr >= 0.0) || !(self.eps > 0.0) {
            return Err(Error::Config("batch_size must be >= 1, lr >= 0, eps > 0".into()));
        }
        Ok(())
    }

    /// Reads `key = value` text holding both training and model settings.
    pub fn from_kv(text: &str) -> Result<(ModelConfig, TrainConfig)> {
        let kv = parse_kv(text)?;
        let mut model = ModelConfig::toy();
        model.apply(&kv)?;
        let mut t = TrainConfig::default();
        for (k, v) in &kv {
            match k.as_str() {
                "epochs" => t.epochs = parse_value(k, v)?,
                "lr" => t.lr = parse_value(k, v)?,
                "min_lr_frac" => t.min_lr_frac = parse_value(k, v)?,
                "batch_size" => t.batch_size = parse_value(k, v)?,
                "weight_decay" => t.weight_decay = parse_value(k, v)?,
                "beta1" => t.beta1 = parse_value(k, v)?,
                "beta2" => t.beta2 = parse_value(k, v)?,
                "eps" => t.eps = parse_value(k, v)?,
                "clip_norm" => t.clip_norm = parse_value(k, v)?,
                "seed" => t.seed = parse_value(k, v)?,
                other if is_model_key(other) => {}
                other => return Err(Error::Config(format!("unknown key {other:?}"))),
            }
        }
        t.validate()?;
        Ok((model, t))
    }

    fn lr_at(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.lr;
        }
        let t = epoch as f64 / (self.epochs - 1) as f64;
        let floor = self.lr * self.min_lr_frac;
        floor + 0.5 * (self.lr - floor) * (1.0 + (std::f64::consts::PI * t).cos())
    }
}

fn is_model_key(k: &str) -> bool {
    let kv: BTreeMap<String, String> = ModelConfig::toy()
        .to_kv()
        .lines()
        .filter_map(|l| l.split_once('=').map(|(a, b)| (a.trim().into(), b.trim().into())))
        .collect();
    kv.contains_key(k)
}

pub struct TrainOutput {
    pub model: Model,
    /// Mean example loss per epoch.
    pub losses: Vec<f64>,
}

struct Adam {
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    step: i32,
}

impl Adam {
    fn new(model: &Model) -> Self {
        let zeros: Vec<Matrix> = model
            .weights()
            .iter()
            .map(|(_, w)| Matrix::zeros(w.rows, w.cols))
            .collect();
        Adam {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    fn update(&mut self, model: &mut Model, grads: &[Matrix], lr: f64, cfg: &TrainConfig) {
        self.step += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.step);
        let bc2 = 1.0 - cfg.beta2.powi(self.step);
        for (i, (_, w)) in model.weights_mut().iter_mut().enumerate() {
            let (m, v, g) = (&mut self.m[i], &mut self.v[i], &grads[i]);
            for j in 0..w.data.len() {
                let gj = g.data[j];
                m.data[j] = cfg.beta1 * m.data[j] + (1.0 - cfg.beta1) * gj;
                v.data[j] = cfg.beta2 * v.data[j] + (1.0 - cfg.beta2) * gj * gj;
                let mh = m.data[j] / bc1;
                let vh = v.data[j] / bc2;
                w.data[j] -= lr * (mh / (vh.sqrt() + cfg.eps) + cfg.weight_decay * w.data[j]);
            }
        }
    }
}

/// Teacher-forced AdamW training on canonical chain orders. Deterministic
/// for a given seed regardless of thread count: per-example gradients are
/// reduced in example order.
pub fn train_toy(
    dataset: &[(Mesh, OrderedChains)],
    model_config: &ModelConfig,
    config: &TrainConfig,
) -> Result<TrainOutput> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let mut model = Model::new(model_config.clone(), config.seed)?;
    let examples: Vec<Example> = dataset
        .par_iter()
        .map(|(mesh, ordered)| {
            let adj = build_adjacency(mesh)?;
            model.example(mesh, &adj, &ordered.chain_set())
        })
        .collect::<Result<_>>()?;
    log::info!(
        "training {} parameters on {} sequences",
        model.weights().parameter_count(),
        examples.len()
    );

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(&model);
    let mut losses = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let lr = config.lr_at(epoch);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let results: Vec<(f64, Vec<Matrix>)> = batch
                .par_iter()
                .map(|&i| model.loss_and_grads(&examples[i]))
                .collect();
            let mut iter = results.into_iter();
            let (mut loss, mut grads) = iter.next().expect("batch is non-empty");
            for (l, g) in iter {
                loss += l;
                for (a, b) in grads.iter_mut().zip(&g) {
                    a.add_assign(b);
                }
            }
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    message: format!("batch loss {loss} on examples {batch:?}"),
                });
            }
            epoch_loss += loss;
            let scale = 1.0 / batch.len() as f64;
            let mut norm = 0.0;
            for g in &mut grads {
                *g = g.scaled(scale);
                norm += g.sum_sq();
            }
            let norm = norm.sqrt();
            if !norm.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    message: format!("gradient norm {norm}"),
                });
            }
            if config.clip_norm > 0.0 && norm > config.clip_norm {
                let s = config.clip_norm / norm;
                for g in &mut grads {
                    *g = g.scaled(s);
                }
            }
            adam.update(&mut model, &grads, lr, config);
        }
        let mean = epoch_loss / examples.len() as f64;
        log::debug!("epoch {} loss {mean:.5} lr {lr:.2e}", epoch + 1);
        losses.push(mean);
    }
    Ok(TrainOutput { model, losses })
}

/// Fraction of meshes whose greedy decode reproduces the canonical token
/// stream exactly.
pub fn greedy_reconstruction_rate(model: &Model, dataset: &[(Mesh, OrderedChains)]) -> Result<f64> {
    let hits: Vec<bool> = dataset
        .par_iter()
        .map(|(mesh, ordered)| -> Result<bool> {
            let adj = build_adjacency(mesh)?;
            let target = tokenize(&ordered.chain_set());
            let config = DecodeConfig {
                greedy: true,
                max_len: model.config().max_len,
                ..DecodeConfig::default()
            };
            let mut scorer = ModelScorer::new(model);
            let out = decode(mesh, &adj, &mut scorer, &config)?;
            Ok(out.tokens == target)
        })
        .collect::<Result<_>>()?;
    if hits.is_empty() {
        return Ok(0.0);
    }
    Ok(hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64)
}

/// Cylinders, spheres and cubes of varying size and resolution with
/// hand-placed seams, in canonical order.
pub fn toy_dataset(count: usize) -> Result<Vec<(Mesh, OrderedChains)>> {
    let cube = synth::cube();
    let cube_chains = trace_chains(&extract_seams_from_uv(
        &cube,
        &build_adjacency(&cube)?,
        DEFAULT_UV_TOLERANCE,
    )?);
    (0..count)
        .map(|i| {
            let k = i / 3;
            let (mesh, chains) = match i % 3 {
                0 => {
                    let spec = synth::CylinderSpec {
                        segments: 6 + k % 4,
                        rows: 4 + k % 3,
                        radius: 0.7 + 0.04 * i as f64,
                        height: 1.6 + 0.05 * i as f64,
                        ..synth::CylinderSpec::default()
                    };
                    let mid = spec.rows / 2;
                    let chains = vec![
                        synth::ring_chain(&spec, mid),
                        synth::vertical_chain(&spec, 0, 0, mid),
                    ];
                    (synth::cylinder(&spec), chains)
                }
                1 => {
                    let spec = synth::SphereSpec {
                        slices: 6 + k % 4,
                        stacks: 4 + k % 3,
                        radius: 0.8 + 0.03 * i as f64,
                    };
                    let mid = spec.stacks / 2;
                    let chains = vec![
                        synth::sphere_ring(&spec, mid),
                        synth::sphere_meridian(&spec, 0, mid),
                    ];
                    (synth::sphere(&spec), chains)
                }
                _ => {
                    let s = 0.6 + 0.05 * i as f64;
                    let mesh = Mesh::new(
                        cube.positions().iter().map(|&p| scale3(p, s)).collect(),
                        cube.faces().to_vec(),
                        None,
                    )?;
                    (mesh, cube_chains.chains().to_vec())
                }
            };
            let adj = build_adjacency(&mesh)?;
            let ordered = canonical_order(&mesh, &adj, &ChainSet::new(chains)?);
            Ok((mesh, ordered))
        })
        .collect()
}
