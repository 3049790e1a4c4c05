use std::io::Write;

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::mesh::Mesh;
use crate::seams::SeamChain;

use super::cut::Chart;
use super::flatten::UvChart;

pub const PALETTE: [&str; 16] = [
    "#e6194b", "#3cb44b", "#ffe119", "#4363d8", "#f58231", "#911eb4", "#46f0f0", "#f032e6", "#bcf60c",
    "#fabebe", "#008080", "#e6beff", "#9a6324", "#800000", "#aaffc3", "#000075",
];

fn rgb(hex: &str) -> [u8; 3] {
    let n = u32::from_str_radix(&hex[1..], 16).expect("palette entries are hex");
    [(n >> 16) as u8, (n >> 8) as u8, n as u8]
}

/// The parent mesh with per-corner UVs taken from the (packed) charts.
pub fn atlas_mesh(mesh: &Mesh, charts: &[Chart], uvs: &[UvChart]) -> Result<Mesh> {
    let mut corner = vec![None; 3 * mesh.face_count()];
    for uv in uvs {
        let chart = charts
            .get(uv.chart)
            .ok_or_else(|| Error::Config(format!("uv chart {} has no chart", uv.chart)))?;
        for (lf, &f) in chart.faces.iter().enumerate() {
            let local = chart.mesh.faces()[lf];
            for (slot, &v) in local.iter().enumerate() {
                corner[3 * f + slot] = Some(uv.uv[v]);
            }
        }
    }
    let corner: Option<Vec<Vec2>> = corner.into_iter().collect();
    let corner = corner.ok_or_else(|| Error::Config("uv layouts do not cover every face".into()))?;
    mesh.clone().with_uvs(Some(corner))
}

pub fn write_atlas_obj<W: Write>(mesh: &Mesh, charts: &[Chart], uvs: &[UvChart], out: W) -> Result<()> {
    let atlas = atlas_mesh(mesh, charts, uvs)?;
    crate::mesh::write_obj(&atlas, out).map_err(|e| Error::io("<atlas obj>", e))
}

/// UV layout drawing: one group per chart with its triangles filled in a
/// palette color and its boundary loops stroked on top. UV v points up.
pub fn write_uv_svg<W: Write>(
    charts: &[Chart],
    uvs: &[UvChart],
    size: u32,
    mut out: W,
) -> std::io::Result<()> {
    let s = size as f64;
    let pt = |p: Vec2| format!("{:.3},{:.3}", p[0] * s, (1.0 - p[1]) * s);
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    )?;
    writeln!(out, r##"<rect width="{size}" height="{size}" fill="#ffffff"/>"##)?;
    for uv in uvs {
        let Some(chart) = charts.get(uv.chart) else {
            continue;
        };
        let color = PALETTE[uv.chart % PALETTE.len()];
        writeln!(
            out,
            r#"<g id="chart-{}" fill="{color}" stroke="{color}" stroke-width="0.3">"#,
            uv.chart
        )?;
        for &[a, b, c] in chart.mesh.faces() {
            writeln!(
                out,
                r#"<polygon points="{} {} {}"/>"#,
                pt(uv.uv[a]),
                pt(uv.uv[b]),
                pt(uv.uv[c])
            )?;
        }
        for lp in &chart.boundary_loops {
            let mut pts: Vec<String> = lp.iter().map(|&v| pt(uv.uv[v])).collect();
            pts.push(pt(uv.uv[lp[0]]));
            writeln!(
                out,
                r##"<polyline points="{}" fill="none" stroke="#000000" stroke-width="1"/>"##,
                pts.join(" ")
            )?;
        }
        writeln!(out, "</g>")?;
    }
    writeln!(out, "</svg>")
}

/// ASCII PLY of the mesh vertices plus one colored edge element per chain
/// edge; chain `i` gets palette color `i`.
pub fn write_seam_ply<W: Write>(mesh: &Mesh, chains: &[SeamChain], mut out: W) -> std::io::Result<()> {
    let edges: Vec<(usize, usize, [u8; 3])> = chains
        .iter()
        .enumerate()
        .flat_map(|(i, c)| {
            let color = rgb(PALETTE[i % PALETTE.len()]);
            c.vertices().windows(2).map(move |w| (w[0], w[1], color))
        })
        .collect();
    writeln!(out, "ply\nformat ascii 1.0")?;
    writeln!(out, "element vertex {}", mesh.vertex_count())?;
    writeln!(out, "property float x\nproperty float y\nproperty float z")?;
    writeln!(out, "element face {}", mesh.face_count())?;
    writeln!(out, "property list uchar int vertex_indices")?;
    writeln!(out, "element edge {}", edges.len())?;
    writeln!(out, "property int vertex1\nproperty int vertex2")?;
    writeln!(
        out,
        "property uchar red\nproperty uchar green\nproperty uchar blue"
    )?;
    writeln!(out, "end_header")?;
    for p in mesh.positions() {
        writeln!(out, "{} {} {}", p[0], p[1], p[2])?;
    }
    for f in mesh.faces() {
        writeln!(out, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    for (a, b, [r, g, bl]) in edges {
        writeln!(out, "{a} {b} {r} {g} {bl}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::{auto_cut, cut_mesh, flatten_tutte, pack_charts, PackConfig};
    use crate::mesh::{build_adjacency, parse_obj};
    use crate::seams::{extract_seams_from_uv, uv_islands, SeamEdgeSet, DEFAULT_UV_TOLERANCE};
    use crate::synth;

    fn packed(mesh: &Mesh, seams: &SeamEdgeSet) -> (Vec<Chart>, Vec<UvChart>) {
        let adj = build_adjacency(mesh).unwrap();
        let (charts, _, _) = auto_cut(mesh, &adj, seams).unwrap();
        let uvs: Vec<UvChart> = charts.iter().map(|c| flatten_tutte(c).unwrap()).collect();
        let uvs = pack_charts(&charts, &uvs, &PackConfig::default()).unwrap();
        (charts, uvs)
    }

    #[test]
    fn atlas_obj_round_trips_chart_count() {
        let spec = synth::CylinderSpec::default();
        let mesh = synth::cylinder(&spec);
        let mut seams: SeamEdgeSet = synth::ring_chain(&spec, 2).edges().collect();
        seams.insert(crate::Edge::new(spec.vertex(0, 0), spec.vertex(1, 0)));
        seams.insert(crate::Edge::new(spec.vertex(1, 0), spec.vertex(2, 0)));
        let (charts, uvs) = packed(&mesh, &seams);
        let mut buf = Vec::new();
        write_atlas_obj(&mesh, &charts, &uvs, &mut buf).unwrap();
        let back = parse_obj(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(
            uv_islands(&back, DEFAULT_UV_TOLERANCE).unwrap().len(),
            charts.len()
        );
        let adj = build_adjacency(&back).unwrap();
        let recovered = extract_seams_from_uv(&back, &adj, DEFAULT_UV_TOLERANCE).unwrap();
        assert_eq!(cut_mesh(&back, &adj, &recovered).unwrap().len(), charts.len());
    }

    #[test]
    fn svg_has_a_group_per_chart() {
        let spec = synth::CylinderSpec::default();
        let mesh = synth::cylinder(&spec);
        let seams: SeamEdgeSet = synth::ring_chain(&spec, 2).edges().collect();
        let (charts, uvs) = packed(&mesh, &seams);
        let mut buf = Vec::new();
        write_uv_svg(&charts, &uvs, 512, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.matches("<g id=\"chart-").count(), charts.len());
        assert!(text.contains(PALETTE[0]) && text.contains(PALETTE[1]));
        assert_eq!(text.matches("<polygon").count(), mesh.face_count());
        assert!(text.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn ply_lists_chain_edges() {
        let spec = synth::CylinderSpec::default();
        let mesh = synth::cylinder(&spec);
        let chains = [synth::ring_chain(&spec, 1), synth::vertical_chain(&spec, 0, 0, 2)];
        let mut buf = Vec::new();
        write_seam_ply(&mesh, &chains, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let n_edges: usize = chains.iter().map(|c| c.edge_count()).sum();
        assert!(text.contains(&format!("element edge {n_edges}")));
        let body: Vec<&str> = text.split("end_header\n").nth(1).unwrap().lines().collect();
        assert_eq!(body.len(), mesh.vertex_count() + mesh.face_count() + n_edges);
        assert!(body.last().unwrap().ends_with("60 180 75"));
    }

    #[test]
    fn atlas_mesh_requires_full_cover() {
        let mesh = synth::grid(2, 2, 1.0);
        let (charts, mut uvs) = packed(&mesh, &SeamEdgeSet::new());
        uvs.clear();
        assert!(atlas_mesh(&mesh, &charts, &uvs).is_err());
    }
}
