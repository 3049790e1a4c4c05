use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{convex_hull, cross3, dist2, dot3, norm3, orient2, polygon_area, sub3, Vec2};
use crate::mesh::Mesh;
use crate::seams::SeamEdgeSet;

use super::cut::Chart;
use super::flatten::{Flattener, UvChart};

pub const REPORT_SCHEMA: &str = "seamforge.report/1";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsConfig {
    pub samples_per_loop: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            samples_per_loop: 128,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartReport {
    pub index: usize,
    pub faces: usize,
    pub area_3d: f64,
    pub area_uv: f64,
    pub compactness: f64,
    pub convexity: f64,
    pub jaggedness: f64,
    pub flipped: usize,
    pub flattener: Flattener,
    pub fell_back: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtlasReport {
    pub schema: String,
    pub overall_dist: f64,
    pub angular_dist: f64,
    pub n_charts: usize,
    pub compactness: f64,
    pub convexity: f64,
    pub seam_len_ratio: f64,
    /// Mean turning κ divided by the mean resample spacing.
    pub jaggedness: f64,
    /// Mean κ in UV units.
    pub jaggedness_raw: f64,
    pub samples_per_loop: usize,
    pub degenerate: usize,
    pub flipped: usize,
    /// "tutte", "lscm", or "mixed" when some charts fell back.
    pub flattener: String,
    pub auto_cut_edges: usize,
    pub charts: Vec<ChartReport>,
}

impl AtlasReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// 2σ1σ2 / (σ1² + σ2²) of a 2x2 map `[[a, b], [c, d]]`; equals
/// 2|det| / ‖J‖_F².
pub fn conformality(j: [[f64; 2]; 2]) -> f64 {
    let frob = j[0][0].powi(2) + j[0][1].powi(2) + j[1][0].powi(2) + j[1][1].powi(2);
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if frob == 0.0 {
        0.0
    } else {
        2.0 * det.abs() / frob
    }
}

pub fn compactness(area: f64, perimeter: f64) -> f64 {
    if perimeter <= 0.0 {
        return 0.0;
    }
    (4.0 * std::f64::consts::PI * area / (perimeter * perimeter)).min(1.0)
}

/// Area over convex hull area of the given point cloud, clamped to 1 to
/// absorb rounding when the chart is itself convex.
pub fn convexity(area: f64, points: &[Vec2]) -> f64 {
    let hull = polygon_area(&convex_hull(points));
    if hull <= 0.0 {
        0.0
    } else {
        (area / hull).min(1.0)
    }
}

/// `n` points spaced evenly by arc length around the closed polygon,
/// starting at its first vertex.
pub fn resample_loop(points: &[Vec2], n: usize) -> Vec<Vec2> {
    let m = points.len();
    if m == 0 || n == 0 {
        return Vec::new();
    }
    let lengths: Vec<f64> = (0..m).map(|i| dist2(points[i], points[(i + 1) % m])).collect();
    let total: f64 = lengths.iter().sum();
    if total == 0.0 {
        return vec![points[0]; n];
    }
    let step = total / n as f64;
    let mut out = Vec::with_capacity(n);
    let (mut seg, mut seg_start) = (0, 0.0);
    for k in 0..n {
        let s = k as f64 * step;
        while seg + 1 < m && seg_start + lengths[seg] <= s {
            seg_start += lengths[seg];
            seg += 1;
        }
        let t = if lengths[seg] > 0.0 {
            ((s - seg_start) / lengths[seg]).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (p, q) = (points[seg], points[(seg + 1) % m]);
        out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
    }
    out
}

/// Mean of ‖p[i-1] - 2p[i] + p[i+1]‖ with cyclic indexing.
pub fn loop_jaggedness(points: &[Vec2]) -> f64 {
    let n = points.len();
    if n < 3 {
        return 0.0;
    }
    let total: f64 = (0..n)
        .map(|i| {
            let (a, b, c) = (points[(i + n - 1) % n], points[i], points[(i + 1) % n]);
            (a[0] - 2.0 * b[0] + c[0]).hypot(a[1] - 2.0 * b[1] + c[1])
        })
        .sum();
    total / n as f64
}

struct ChartTally {
    report: ChartReport,
    weighted_stretch: f64,
    weighted_conformality: f64,
    conformal_area: f64,
    stretch: Vec<(f64, f64)>,
    degenerate: usize,
    kappa_sum: f64,
    kappa_count: usize,
    spacing_sum: f64,
    loops: usize,
}

fn measure_chart(chart: &Chart, uv: &UvChart, samples: usize) -> ChartTally {
    let mesh = &chart.mesh;
    let mut stretch = Vec::with_capacity(mesh.face_count());
    let mut weighted_conformality = 0.0;
    let mut conformal_area = 0.0;
    let mut degenerate = 0;
    let mut flipped = 0;
    let mean_uv = chart
        .mesh
        .faces()
        .iter()
        .map(|&[a, b, c]| orient2(uv.uv[a], uv.uv[b], uv.uv[c]).abs())
        .sum::<f64>()
        / mesh.face_count().max(1) as f64;
    for &[a, b, c] in mesh.faces() {
        let (p0, p1, p2) = (mesh.position(a), mesh.position(b), mesh.position(c));
        let e1 = sub3(p1, p0);
        let e2 = sub3(p2, p0);
        let twice_3d = norm3(cross3(e1, e2));
        let twice_uv = orient2(uv.uv[a], uv.uv[b], uv.uv[c]);
        if twice_uv <= 0.0 {
            flipped += 1;
        }
        if twice_3d <= 1e-300 || twice_uv.abs() <= 1e-12 * mean_uv {
            degenerate += 1;
            continue;
        }
        stretch.push((0.5 * twice_3d, 0.5 * twice_uv.abs()));
        // 3D triangle in its own frame: (0,0), (l, 0), (x, y)
        let l = norm3(e1);
        let (x, y) = (dot3(e1, e2) / l, twice_3d / l);
        let du1 = [uv.uv[b][0] - uv.uv[a][0], uv.uv[b][1] - uv.uv[a][1]];
        let du2 = [uv.uv[c][0] - uv.uv[a][0], uv.uv[c][1] - uv.uv[a][1]];
        // J * [[l, x], [0, y]] = [du1 du2]
        let j = [
            [du1[0] / l, (du2[0] - du1[0] * x / l) / y],
            [du1[1] / l, (du2[1] - du1[1] * x / l) / y],
        ];
        weighted_conformality += 0.5 * twice_3d * conformality(j);
        conformal_area += 0.5 * twice_3d;
    }

    let area_uv = uv.uv_area(chart).abs();
    let mut perimeter = 0.0;
    let (mut kappa_sum, mut kappa_count, mut spacing_sum) = (0.0, 0, 0.0);
    for lp in &chart.boundary_loops {
        let pts: Vec<Vec2> = lp.iter().map(|&v| uv.uv[v]).collect();
        let len: f64 = (0..pts.len())
            .map(|i| dist2(pts[i], pts[(i + 1) % pts.len()]))
            .sum();
        perimeter += len;
        let sampled = resample_loop(&pts, samples);
        kappa_sum += loop_jaggedness(&sampled) * sampled.len() as f64;
        kappa_count += sampled.len();
        spacing_sum += len / samples as f64;
    }
    let loops = chart.boundary_loops.len();
    let chart_jag = if loops > 0 && spacing_sum > 0.0 {
        (kappa_sum / kappa_count as f64) / (spacing_sum / loops as f64)
    } else {
        0.0
    };
    let report = ChartReport {
        index: chart.index,
        faces: chart.faces.len(),
        area_3d: chart.area(),
        area_uv,
        compactness: if perimeter > 0.0 {
            compactness(area_uv, perimeter)
        } else {
            0.0
        },
        convexity: convexity(area_uv, &uv.uv),
        jaggedness: chart_jag,
        flipped,
        flattener: uv.method,
        fell_back: uv.fell_back,
    };
    ChartTally {
        report,
        weighted_stretch: 0.0,
        weighted_conformality,
        conformal_area,
        stretch,
        degenerate,
        kappa_sum,
        kappa_count,
        spacing_sum,
        loops,
    }
}

/// Computes the seven atlas metrics plus per-chart breakdowns. `uvs[i]` must
/// flatten `charts[i]`, and the charts must cover every face of `mesh`.
pub fn compute_metrics(
    mesh: &Mesh,
    charts: &[Chart],
    uvs: &[UvChart],
    seams: &SeamEdgeSet,
    config: &MetricsConfig,
) -> Result<AtlasReport> {
    if charts.is_empty() || charts.len() != uvs.len() {
        return Err(Error::Config(format!(
            "{} charts but {} uv layouts",
            charts.len(),
            uvs.len()
        )));
    }
    let covered: usize = charts.iter().map(|c| c.faces.len()).sum();
    if covered != mesh.face_count() {
        return Err(Error::Config(format!(
            "charts cover {covered} of {} faces",
            mesh.face_count()
        )));
    }
    if config.samples_per_loop < 3 {
        return Err(Error::Config("samples_per_loop must be at least 3".into()));
    }
    let mut tallies: Vec<ChartTally> = charts
        .par_iter()
        .zip(uvs.par_iter())
        .map(|(c, uv)| measure_chart(c, uv, config.samples_per_loop))
        .collect();

    let total_3d: f64 = tallies.iter().flat_map(|t| t.stretch.iter().map(|s| s.0)).sum();
    let total_uv: f64 = tallies.iter().flat_map(|t| t.stretch.iter().map(|s| s.1)).sum();
    let norm = if total_uv > 0.0 { total_3d / total_uv } else { 1.0 };
    for t in &mut tallies {
        t.weighted_stretch = t
            .stretch
            .iter()
            .map(|&(a3, auv)| {
                let sigma = norm * auv / a3;
                a3 * sigma.max(1.0 / sigma)
            })
            .sum();
    }
    let overall = if total_3d > 0.0 {
        tallies.iter().map(|t| t.weighted_stretch).sum::<f64>() / total_3d
    } else {
        1.0
    };
    let conf_area: f64 = tallies.iter().map(|t| t.conformal_area).sum();
    let angular = if conf_area > 0.0 {
        tallies.iter().map(|t| t.weighted_conformality).sum::<f64>() / conf_area
    } else {
        0.0
    };
    let area_sum: f64 = tallies.iter().map(|t| t.report.area_3d).sum();
    let weighted = |f: fn(&ChartReport) -> f64| {
        if area_sum > 0.0 {
            tallies
                .iter()
                .map(|t| t.report.area_3d * f(&t.report))
                .sum::<f64>()
                / area_sum
        } else {
            0.0
        }
    };
    let compact = weighted(|r| r.compactness);
    let convex = weighted(|r| r.convexity);
    let kappa_count: usize = tallies.iter().map(|t| t.kappa_count).sum();
    let loops: usize = tallies.iter().map(|t| t.loops).sum();
    let raw = if kappa_count > 0 {
        tallies.iter().map(|t| t.kappa_sum).sum::<f64>() / kappa_count as f64
    } else {
        0.0
    };
    let spacing = if loops > 0 {
        tallies.iter().map(|t| t.spacing_sum).sum::<f64>() / loops as f64
    } else {
        0.0
    };
    let methods: std::collections::BTreeSet<Flattener> = tallies.iter().map(|t| t.report.flattener).collect();
    let flattener = match methods.iter().next() {
        Some(m) if methods.len() == 1 => m.to_string(),
        _ => "mixed".to_string(),
    };
    Ok(AtlasReport {
        schema: REPORT_SCHEMA.to_string(),
        overall_dist: overall,
        angular_dist: angular,
        n_charts: charts.len(),
        compactness: compact,
        convexity: convex,
        seam_len_ratio: seams.total_length(mesh) / mesh.area(),
        jaggedness: if spacing > 0.0 { raw / spacing } else { 0.0 },
        jaggedness_raw: raw,
        samples_per_loop: config.samples_per_loop,
        degenerate: tallies.iter().map(|t| t.degenerate).sum(),
        flipped: tallies.iter().map(|t| t.report.flipped).sum(),
        flattener,
        auto_cut_edges: 0,
        charts: tallies.into_iter().map(|t| t.report).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::{cut_mesh, flatten_lscm, flatten_tutte};
    use crate::mesh::build_adjacency;
    use crate::synth;
    use proptest::prelude::*;

    fn identity_layout(mesh: &Mesh) -> (Vec<Chart>, Vec<UvChart>) {
        let adj = build_adjacency(mesh).unwrap();
        let charts = cut_mesh(mesh, &adj, &SeamEdgeSet::new()).unwrap();
        let uvs = charts
            .iter()
            .map(|c| UvChart {
                chart: c.index,
                uv: c.mesh.positions().iter().map(|p| [p[0], p[1]]).collect(),
                method: Flattener::Tutte,
                fell_back: false,
            })
            .collect();
        (charts, uvs)
    }

    fn report(mesh: &Mesh, charts: &[Chart], uvs: &[UvChart]) -> AtlasReport {
        compute_metrics(mesh, charts, uvs, &SeamEdgeSet::new(), &MetricsConfig::default()).unwrap()
    }

    #[test]
    fn unit_square_anchors() {
        let square = synth::grid(1, 1, 1.0);
        let (charts, uvs) = identity_layout(&square);
        let r = report(&square, &charts, &uvs);
        assert!((r.compactness - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        assert!((r.convexity - 1.0).abs() < 1e-12);
        assert!((r.overall_dist - 1.0).abs() < 1e-12);
        assert!((r.angular_dist - 1.0).abs() < 1e-12);
        assert_eq!(r.n_charts, 1);
        assert_eq!(r.seam_len_ratio, 0.0);
    }

    #[test]
    fn l_shape_convexity() {
        let l = Mesh::new(
            vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [2.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [1.0, 1.0, 0.0],
                [2.0, 1.0, 0.0],
                [0.0, 2.0, 0.0],
                [1.0, 2.0, 0.0],
            ],
            vec![[0, 1, 4], [0, 4, 3], [1, 2, 5], [1, 5, 4], [3, 4, 7], [3, 7, 6]],
            None,
        )
        .unwrap();
        let (charts, uvs) = identity_layout(&l);
        let r = report(&l, &charts, &uvs);
        // hull of the L: area 4 minus the cut corner triangle 0.5
        assert!((r.convexity - 3.0 / 3.5).abs() < 1e-12);
    }

    #[test]
    fn kappa_anchors() {
        let square = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!((loop_jaggedness(&square) - 2f64.sqrt()).abs() < 1e-12);
        let line: [Vec2; 6] = [
            [0.0, 0.0],
            [1.0, 0.0],
            [2.0, 0.0],
            [3.0, 0.0],
            [4.0, 0.0],
            [5.0, 0.0],
        ];
        let kappa = |i: usize| {
            let (a, b, c) = (line[i - 1], line[i], line[i + 1]);
            (a[0] - 2.0 * b[0] + c[0]).hypot(a[1] - 2.0 * b[1] + c[1])
        };
        assert!((1..5).all(|i| kappa(i) == 0.0));
        let r = resample_loop(&square, 4);
        assert_eq!(r, square.to_vec());
        let r8 = resample_loop(&square, 8);
        assert_eq!(r8[1], [0.5, 0.0]);
        assert_eq!(r8[5], [0.5, 1.0]);
    }

    #[test]
    fn conformality_anchors() {
        assert!((conformality([[2.0, 0.0], [0.0, 1.0]]) - 0.8).abs() < 1e-15);
        assert_eq!(conformality([[3.0, -4.0], [4.0, 3.0]]), 1.0);
        // a rotated anisotropic map keeps its singular values
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let j = [[2.0 * c, -s], [2.0 * s, c]];
        assert!((conformality(j) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn uniform_scale_is_not_distortion() {
        let square = synth::grid(3, 3, 1.0);
        let (charts, mut uvs) = identity_layout(&square);
        for p in &mut uvs[0].uv {
            *p = [5.0 * p[0], 5.0 * p[1]];
        }
        let r = report(&square, &charts, &uvs);
        assert!((r.overall_dist - 1.0).abs() < 1e-12);
        // stretching x by 2 on every face: σ = 2 → max(σ, 1/σ) after normalization is 1
        for p in &mut uvs[0].uv {
            p[0] *= 2.0;
        }
        let r = report(&square, &charts, &uvs);
        assert!((r.overall_dist - 1.0).abs() < 1e-12);
        assert!((r.angular_dist - 0.8).abs() < 1e-12);
    }

    #[test]
    fn lscm_beats_tutte_on_half_cylinder() {
        let spec = synth::CylinderSpec {
            segments: 16,
            rows: 6,
            ..Default::default()
        };
        let cyl = synth::cylinder(&spec);
        let half: Vec<usize> = (0..cyl.face_count())
            .filter(|&f| {
                cyl.faces()[f]
                    .iter()
                    .all(|&v| v % spec.segments <= spec.segments / 2)
            })
            .collect();
        let (mesh, _) = cyl.submesh(&half);
        let adj = build_adjacency(&mesh).unwrap();
        let charts = cut_mesh(&mesh, &adj, &SeamEdgeSet::new()).unwrap();
        assert_eq!(charts.len(), 1);
        assert!(charts[0].is_disk());
        let tutte = vec![flatten_tutte(&charts[0]).unwrap()];
        let lscm = vec![flatten_lscm(&charts[0]).unwrap()];
        let rt = report(&mesh, &charts, &tutte);
        let rl = report(&mesh, &charts, &lscm);
        assert!(
            rl.angular_dist > rt.angular_dist,
            "{} vs {}",
            rl.angular_dist,
            rt.angular_dist
        );
        // a half cylinder develops onto the plane exactly
        assert!((rl.angular_dist - 1.0).abs() < 1e-6);
    }

    #[test]
    fn degenerate_uv_triangles_are_tallied() {
        let square = synth::grid(1, 1, 1.0);
        let (charts, mut uvs) = identity_layout(&square);
        // collapse vertex 3 onto the diagonal: face [0,2,3] loses its area
        let v3 = (0..4)
            .find(|&v| charts[0].mesh.position(v) == [0.0, 1.0, 0.0])
            .unwrap();
        uvs[0].uv[v3] = [0.5, 0.5];
        let r = report(&square, &charts, &uvs);
        assert_eq!(r.degenerate, 1);
        assert!((r.angular_dist - 1.0).abs() < 1e-12);
    }

    #[test]
    fn report_json_has_table_columns() {
        let square = synth::grid(2, 2, 1.0);
        let (charts, uvs) = identity_layout(&square);
        let json = report(&square, &charts, &uvs).to_json();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        for key in [
            "overall_dist",
            "angular_dist",
            "n_charts",
            "compactness",
            "convexity",
            "seam_len_ratio",
            "jaggedness",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["schema"], REPORT_SCHEMA);
    }

    fn similarity(uvs: &[UvChart], s: f64, theta: f64, t: Vec2) -> Vec<UvChart> {
        let (c, si) = (theta.cos(), theta.sin());
        uvs.iter()
            .map(|u| UvChart {
                uv: u
                    .uv
                    .iter()
                    .map(|p| {
                        [
                            s * (c * p[0] - si * p[1]) + t[0],
                            s * (si * p[0] + c * p[1]) + t[1],
                        ]
                    })
                    .collect(),
                ..u.clone()
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn metric_bounds_hold(seed in 0u64..10_000) {
            let (mesh, chains) = synth::random_seamed_mesh(seed);
            let adj = build_adjacency(&mesh).unwrap();
            let seams: SeamEdgeSet = chains.chains().iter().flat_map(|c| c.edges()).collect();
            let (charts, seams, _) = crate::atlas::auto_cut(&mesh, &adj, &seams).unwrap();
            let total: f64 = charts.iter().map(Chart::area).sum();
            prop_assert!((total - mesh.area()).abs() <= 1e-6 * mesh.area());
            let uvs: Vec<UvChart> = charts.iter().map(|c| flatten_tutte(c).unwrap()).collect();
            prop_assert!(uvs.iter().zip(&charts).all(|(u, c)| u.flipped(c) == 0));
            let r = compute_metrics(&mesh, &charts, &uvs, &seams, &MetricsConfig::default()).unwrap();
            prop_assert!(r.overall_dist >= 1.0 - 1e-12);
            prop_assert!(r.angular_dist > 0.0 && r.angular_dist <= 1.0 + 1e-12);
            prop_assert!(r.compactness > 0.0 && r.compactness <= 1.0 + 1e-12);
            prop_assert!(r.convexity > 0.0 && r.convexity <= 1.0 + 1e-12);
            prop_assert!(r.jaggedness >= 0.0);
            prop_assert!(r.n_charts >= 1);
        }

        #[test]
        fn similarity_invariance(seed in 0u64..10_000, s in 0.1f64..10.0, theta in 0.0f64..std::f64::consts::TAU, tx in -5.0f64..5.0, ty in -5.0f64..5.0) {
            let (mesh, chains) = synth::random_seamed_mesh(seed);
            let adj = build_adjacency(&mesh).unwrap();
            let seams: SeamEdgeSet = chains.chains().iter().flat_map(|c| c.edges()).collect();
            let (charts, seams, _) = crate::atlas::auto_cut(&mesh, &adj, &seams).unwrap();
            let uvs: Vec<UvChart> = charts.iter().map(|c| flatten_tutte(c).unwrap()).collect();
            let moved = similarity(&uvs, s, theta, [tx, ty]);
            let a = compute_metrics(&mesh, &charts, &uvs, &seams, &MetricsConfig::default()).unwrap();
            let b = compute_metrics(&mesh, &charts, &moved, &seams, &MetricsConfig::default()).unwrap();
            let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(1.0);
            prop_assert!(close(a.overall_dist, b.overall_dist));
            prop_assert!(close(a.angular_dist, b.angular_dist));
            prop_assert!(close(a.compactness, b.compactness));
            prop_assert!(close(a.convexity, b.convexity));
            prop_assert!(close(a.jaggedness, b.jaggedness));
            prop_assert!(close(a.jaggedness_raw * s, b.jaggedness_raw));
        }
    }
}
