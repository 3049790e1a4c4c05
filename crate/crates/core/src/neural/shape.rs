use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::{add3, dist3, scale3};
use crate::mesh::Mesh;

use super::model::uniform_init;
use super::tensor::Matrix;
use super::ModelConfig;

/// `[sin(2^k pi x), cos(2^k pi x)]` per band `k`, then the raw coordinates.
pub fn fourier_features(coords: &[f64; 6], bands: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(12 * bands + 6);
    for k in 0..bands {
        let f = (1u64 << k) as f64 * PI;
        out.extend(coords.iter().map(|&x| (f * x).sin()));
        out.extend(coords.iter().map(|&x| (f * x).cos()));
    }
    out.extend_from_slice(coords);
    out
}

/// Area-weighted surface points with their face normals.
pub fn sample_surface(mesh: &Mesh, n: usize, seed: u64) -> Result<Vec<[f64; 6]>> {
    let areas: Vec<f64> = (0..mesh.face_count()).map(|f| mesh.face_area(f)).collect();
    let total: f64 = areas.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("mesh has zero surface area".into()));
    }
    let mut cumulative = Vec::with_capacity(areas.len());
    let mut acc = 0.0;
    for a in &areas {
        acc += a;
        cumulative.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let r = rng.gen::<f64>() * total;
        let f = cumulative.partition_point(|&c| c <= r).min(areas.len() - 1);
        let (mut u, mut v) = (rng.gen::<f64>(), rng.gen::<f64>());
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        let [a, b, c] = mesh.faces()[f].map(|i| mesh.position(i));
        let p = add3(scale3(a, 1.0 - u - v), add3(scale3(b, u), scale3(c, v)));
        let nrm = mesh.face_normal(f);
        out.push([p[0], p[1], p[2], nrm[0], nrm[1], nrm[2]]);
    }
    Ok(out)
}

/// Stand-in for a pretrained point-cloud encoder: a frozen random Fourier
/// MLP over surface samples, pooled around farthest-point anchors.
#[derive(Clone, Debug)]
pub struct ShapeProvider {
    config: ModelConfig,
    w1: Matrix,
    b1: Matrix,
    w2: Matrix,
    proj: Matrix,
}

impl ShapeProvider {
    const FROZEN_SEED: u64 = 0x5eed_5a4e;
    pub const SAMPLE_SEED: u64 = 0;

    pub fn new(config: &ModelConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(Self::FROZEN_SEED);
        let d = config.d_model;
        ShapeProvider {
            config: config.clone(),
            w1: uniform_init(config.feature_width(), d, &mut rng),
            b1: uniform_init(1, d, &mut rng),
            w2: uniform_init(d, d, &mut rng),
            proj: uniform_init(d, d, &mut rng),
        }
    }

    /// `shape_tokens x d_model` matrix for `mesh`.
    pub fn tokens(&self, mesh: &Mesh) -> Result<Matrix> {
        let cfg = &self.config;
        let points = sample_surface(mesh, cfg.shape_points, Self::SAMPLE_SEED)?;
        let feats = Matrix::from_fn(points.len(), cfg.feature_width(), |r, c| {
            fourier_features(&points[r], cfg.fourier_bands)[c]
        });
        let mut hidden = feats.matmul(&self.w1);
        for r in 0..hidden.rows {
            for (x, b) in hidden.row_mut(r).iter_mut().zip(&self.b1.data) {
                let t = *x + b;
                *x = t / (1.0 + (-t).exp());
            }
        }
        let per_point = hidden.matmul(&self.w2);

        let anchors = farthest_points(&points, cfg.shape_tokens);
        let mut pooled = Matrix::zeros(anchors.len(), cfg.d_model);
        let mut counts = vec![0usize; anchors.len()];
        for (i, p) in points.iter().enumerate() {
            let pos = [p[0], p[1], p[2]];
            let nearest = (0..anchors.len())
                .min_by(|&a, &b| {
                    let pa = &points[anchors[a]];
                    let pb = &points[anchors[b]];
                    dist3(pos, [pa[0], pa[1], pa[2]]).total_cmp(&dist3(pos, [pb[0], pb[1], pb[2]]))
                })
                .expect("at least one anchor");
            counts[nearest] += 1;
            for (o, x) in pooled.row_mut(nearest).iter_mut().zip(per_point.row(i)) {
                *o += x;
            }
        }
        for (a, &n) in counts.iter().enumerate() {
            for o in pooled.row_mut(a) {
                *o /= n.max(1) as f64;
            }
        }
        Ok(pooled.matmul(&self.proj))
    }
}

/// Greedy farthest-point selection starting from point 0.
fn farthest_points(points: &[[f64; 6]], k: usize) -> Vec<usize> {
    let pos = |i: usize| [points[i][0], points[i][1], points[i][2]];
    let mut chosen = vec![0];
    let mut dist: Vec<f64> = (0..points.len()).map(|i| dist3(pos(i), pos(0))).collect();
    while chosen.len() < k.min(points.len()) {
        let mut best = 0;
        for i in 1..points.len() {
            if dist[i] > dist[best] {
                best = i;
            }
        }
        chosen.push(best);
        for i in 0..points.len() {
            dist[i] = dist[i].min(dist3(pos(i), pos(best)));
        }
    }
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn fourier_shape_and_zero() {
        let f = fourier_features(&[0.0; 6], 3);
        assert_eq!(f.len(), 2 * 3 * 6 + 6);
        for k in 0..3 {
            assert!(f[12 * k..12 * k + 6].iter().all(|&s| s == 0.0));
            assert!(f[12 * k + 6..12 * k + 12].iter().all(|&c| c == 1.0));
        }
    }

    #[test]
    fn fourier_band_doubling() {
        let x = [0.3, -0.7, 0.11, 0.5, 0.25, -0.9];
        let x2 = x.map(|v| 2.0 * v);
        let a = fourier_features(&x, 3);
        let b = fourier_features(&x2, 3);
        for k in 0..2 {
            for j in 0..12 {
                assert!((a[12 * (k + 1) + j] - b[12 * k + j]).abs() < 1e-12);
            }
        }
        assert_eq!(&a[36..], &x);
    }

    #[test]
    fn tokens_shape_and_determinism() {
        let cfg = ModelConfig::toy();
        let sp = ShapeProvider::new(&cfg);
        let mesh = synth::sphere(&synth::SphereSpec::default());
        let z = sp.tokens(&mesh).unwrap();
        assert_eq!(z.shape(), (cfg.shape_tokens, cfg.d_model));
        assert!(z.is_finite());
        assert_eq!(z, ShapeProvider::new(&cfg).tokens(&mesh).unwrap());
    }

    #[test]
    fn translation_shifts_raw_coordinates() {
        let mesh = synth::cube();
        let t = [0.5, -2.0, 3.25];
        let moved = Mesh::new(
            mesh.positions().iter().map(|&p| add3(p, t)).collect(),
            mesh.faces().to_vec(),
            None,
        )
        .unwrap();
        let a = sample_surface(&mesh, 64, 7).unwrap();
        let b = sample_surface(&moved, 64, 7).unwrap();
        for (p, q) in a.iter().zip(&b) {
            for j in 0..3 {
                assert!((q[j] - p[j] - t[j]).abs() < 1e-9);
            }
            for j in 3..6 {
                assert!((q[j] - p[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_area_is_degenerate() {
        let flat = Mesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]],
            vec![[0, 1, 2]],
            None,
        );
        // construction may already refuse the triangle; either way no tokens
        if let Ok(m) = flat {
            assert!(sample_surface(&m, 4, 0).is_err());
        }
    }
}
