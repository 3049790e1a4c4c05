use crate::error::{Error, Result};
use crate::geom::Vec2;

use super::cut::Chart;
use super::flatten::UvChart;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PackConfig {
    /// Empty border around the layout, as a fraction of the unit square.
    pub margin: f64,
    /// Spacing between chart boxes, relative to the square root of the total
    /// box area.
    pub gap: f64,
}

impl Default for PackConfig {
    fn default() -> Self {
        PackConfig {
            margin: 0.01,
            gap: 0.01,
        }
    }
}

impl PackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.margin) || !(0.0..1.0).contains(&self.gap) {
            return Err(Error::Config(format!(
                "pack margin must be in [0, 0.5) and gap in [0, 1), got {} and {}",
                self.margin, self.gap
            )));
        }
        Ok(())
    }
}

fn bounds(uv: &[Vec2]) -> [f64; 4] {
    uv.iter().fold(
        [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY],
        |b, p| [b[0].min(p[0]), b[1].min(p[1]), b[2].max(p[0]), b[3].max(p[1])],
    )
}

/// Rescales every chart so its UV area equals its 3D area, then shelf-packs
/// the bounding boxes (tallest first) and fits the result into the unit
/// square. Returns the moved charts in input order.
pub fn pack_charts(charts: &[Chart], uvs: &[UvChart], config: &PackConfig) -> Result<Vec<UvChart>> {
    config.validate()?;
    if uvs.is_empty() {
        return Err(Error::Config("nothing to pack".into()));
    }
    let mut normalized: Vec<UvChart> = Vec::with_capacity(uvs.len());
    for uv in uvs {
        let chart = charts
            .get(uv.chart)
            .ok_or_else(|| Error::Config(format!("uv chart {} has no chart", uv.chart)))?;
        let a_uv = uv.uv_area(chart).abs();
        let s = if a_uv > 0.0 {
            (chart.area() / a_uv).sqrt()
        } else {
            1.0
        };
        let b = bounds(&uv.uv);
        let mut moved = uv.clone();
        for p in &mut moved.uv {
            *p = [(p[0] - b[0]) * s, (p[1] - b[1]) * s];
        }
        normalized.push(moved);
    }
    let sizes: Vec<[f64; 2]> = normalized
        .iter()
        .map(|c| {
            let b = bounds(&c.uv);
            [b[2], b[3]]
        })
        .collect();
    let box_area: f64 = sizes.iter().map(|s| s[0] * s[1]).sum();
    let gap = config.gap * box_area.sqrt();
    let padded: f64 = sizes.iter().map(|s| (s[0] + gap) * (s[1] + gap)).sum();
    let widest = sizes.iter().map(|s| s[0]).fold(0.0, f64::max);
    let shelf_width = widest.max(padded.sqrt());

    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| sizes[b][1].total_cmp(&sizes[a][1]).then(a.cmp(&b)));
    let mut offsets = vec![[0.0; 2]; sizes.len()];
    let (mut x, mut y, mut shelf_h, mut extent_x) = (0.0, 0.0, 0.0f64, 0.0f64);
    for &i in &order {
        let [w, h] = sizes[i];
        if x > 0.0 && x + w > shelf_width {
            y += shelf_h + gap;
            x = 0.0;
            shelf_h = 0.0;
        }
        offsets[i] = [x, y];
        extent_x = extent_x.max(x + w);
        shelf_h = shelf_h.max(h);
        x += w + gap;
    }
    let extent = extent_x.max(y + shelf_h);
    let k = if extent > 0.0 {
        (1.0 - 2.0 * config.margin) / extent
    } else {
        1.0
    };
    for (c, off) in normalized.iter_mut().zip(&offsets) {
        for p in &mut c.uv {
            *p = [
                config.margin + k * (p[0] + off[0]),
                config.margin + k * (p[1] + off[1]),
            ];
        }
    }
    Ok(normalized)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::{cut_mesh, flatten_tutte};
    use crate::mesh::{build_adjacency, Edge, Mesh};
    use crate::seams::SeamEdgeSet;
    use crate::synth;

    fn boxes(uvs: &[UvChart]) -> Vec<[f64; 4]> {
        uvs.iter().map(|c| bounds(&c.uv)).collect()
    }

    #[test]
    fn single_chart_fills_square_minus_margin() {
        let grid = synth::grid(2, 2, 1.0);
        let adj = build_adjacency(&grid).unwrap();
        let charts = cut_mesh(&grid, &adj, &SeamEdgeSet::new()).unwrap();
        let uvs = vec![flatten_tutte(&charts[0]).unwrap()];
        let cfg = PackConfig {
            margin: 0.05,
            gap: 0.0,
        };
        let packed = pack_charts(&charts, &uvs, &cfg).unwrap();
        let b = bounds(&packed[0].uv);
        assert!((b[0] - 0.05).abs() < 1e-12 && (b[1] - 0.05).abs() < 1e-12);
        assert!((b[2].max(b[3]) - 0.95).abs() < 1e-12);
    }

    #[test]
    fn unit_squares_pack_without_overlap() {
        // nine separate unit squares laid out along x
        let mut positions = Vec::new();
        let mut faces = Vec::new();
        for i in 0..9 {
            let x = 3.0 * i as f64;
            let base = positions.len();
            positions.extend([
                [x, 0.0, 0.0],
                [x + 1.0, 0.0, 0.0],
                [x + 1.0, 1.0, 0.0],
                [x, 1.0, 0.0],
            ]);
            faces.push([base, base + 1, base + 2]);
            faces.push([base, base + 2, base + 3]);
        }
        let mesh = Mesh::new(positions, faces, None).unwrap();
        let adj = build_adjacency(&mesh).unwrap();
        let charts = cut_mesh(&mesh, &adj, &SeamEdgeSet::new()).unwrap();
        assert_eq!(charts.len(), 9);
        let uvs: Vec<UvChart> = charts.iter().map(|c| flatten_tutte(c).unwrap()).collect();
        let packed = pack_charts(&charts, &uvs, &PackConfig::default()).unwrap();
        let b = boxes(&packed);
        for i in 0..b.len() {
            assert!(b[i][0] >= 0.0 && b[i][1] >= 0.0 && b[i][2] <= 1.0 && b[i][3] <= 1.0);
            for j in 0..i {
                let apart =
                    b[i][2] <= b[j][0] || b[j][2] <= b[i][0] || b[i][3] <= b[j][1] || b[j][3] <= b[i][1];
                assert!(apart, "boxes {i} and {j} overlap");
            }
        }
        // equal squares end up on a 3x3 grid: three distinct rows
        let mut rows: Vec<i64> = b.iter().map(|r| (r[1] * 1e6).round() as i64).collect();
        rows.sort_unstable();
        rows.dedup();
        assert_eq!(rows.len(), 3);
    }

    #[test]
    fn rejects_empty_and_bad_margin() {
        assert!(pack_charts(&[], &[], &PackConfig::default()).is_err());
        assert!(PackConfig {
            margin: 0.6,
            gap: 0.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn charts_keep_relative_scale() {
        let spec = synth::CylinderSpec::default();
        let mesh = synth::cylinder(&spec);
        let adj = build_adjacency(&mesh).unwrap();
        let mut seams: SeamEdgeSet = synth::ring_chain(&spec, 1).edges().collect();
        for r in 0..spec.rows {
            seams.insert(Edge::new(spec.vertex(r, 0), spec.vertex(r + 1, 0)));
        }
        let charts = cut_mesh(&mesh, &adj, &seams).unwrap();
        let uvs: Vec<UvChart> = charts.iter().map(|c| flatten_tutte(c).unwrap()).collect();
        let packed = pack_charts(&charts, &uvs, &PackConfig::default()).unwrap();
        let r0 = packed[0].uv_area(&charts[0]) / charts[0].area();
        let r1 = packed[1].uv_area(&charts[1]) / charts[1].area();
        assert!((r0 - r1).abs() < 1e-9 * r0);
    }
}
