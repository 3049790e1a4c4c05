use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{Vec2, Vec3};

use super::Mesh;

pub fn load_obj(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text)
}

/// Parses `v`, `vt` and `f` records. Polygons are fan-triangulated; other
/// record types are ignored.
pub fn parse_obj(text: &str) -> Result<Mesh> {
    let mut positions: Vec<Vec3> = Vec::new();
    let mut texcoords: Vec<Vec2> = Vec::new();
    // (line, [(vertex, texcoord)])
    let mut polygons: Vec<(usize, Vec<(usize, Option<usize>)>)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut parts = line.split_whitespace();
        let Some(tag) = parts.next() else { continue };
        match tag {
            "v" => {
                let xyz = parse_floats::<3>(&mut parts, line_no, "v")?;
                positions.push(xyz);
            }
            "vt" => {
                let uv = parse_floats::<2>(&mut parts, line_no, "vt")?;
                texcoords.push(uv);
            }
            "f" => {
                let mut corners = Vec::new();
                for item in parts {
                    let mut fields = item.split('/');
                    let v = fields.next().unwrap_or("");
                    let v = resolve_index(v, positions.len(), line_no, "vertex")?;
                    let vt = match fields.next() {
                        Some(s) if !s.is_empty() => {
                            Some(resolve_index(s, texcoords.len(), line_no, "texcoord")?)
                        }
                        _ => None,
                    };
                    corners.push((v, vt));
                }
                if corners.len() < 3 {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("face needs at least 3 vertices, got {}", corners.len()),
                    });
                }
                polygons.push((line_no, corners));
            }
            _ => {}
        }
    }

    let with_uv = polygons
        .iter()
        .filter(|(_, c)| c.iter().all(|(_, t)| t.is_some()))
        .count();
    let uses_uvs = with_uv > 0;
    if uses_uvs && with_uv != polygons.len() {
        let line = polygons
            .iter()
            .find(|(_, c)| c.iter().any(|(_, t)| t.is_none()))
            .map(|(l, _)| *l)
            .unwrap_or(0);
        return Err(Error::Parse {
            line,
            message: "faces mix corners with and without texture coordinates".into(),
        });
    }

    let mut faces = Vec::new();
    let mut uvs = Vec::new();
    for (line, corners) in &polygons {
        for k in 1..corners.len() - 1 {
            let tri = [corners[0], corners[k], corners[k + 1]];
            let f = tri.map(|c| c.0);
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::Parse {
                    line: *line,
                    message: format!("degenerate triangle {f:?}"),
                });
            }
            faces.push(f);
            if uses_uvs {
                uvs.extend(tri.iter().map(|c| texcoords[c.1.unwrap()]));
            }
        }
    }
    Mesh::new(positions, faces, uses_uvs.then_some(uvs))
}

fn parse_floats<const N: usize>(
    parts: &mut std::str::SplitWhitespace<'_>,
    line: usize,
    tag: &str,
) -> Result<[f64; N]> {
    let mut out = [0.0; N];
    for slot in out.iter_mut() {
        let tok = parts.next().ok_or_else(|| Error::Parse {
            line,
            message: format!("`{tag}` record needs {N} coordinates"),
        })?;
        *slot = tok.parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad number `{tok}`"),
        })?;
    }
    Ok(out)
}

fn resolve_index(tok: &str, count: usize, line: usize, what: &'static str) -> Result<usize> {
    let raw: i64 = tok.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad {what} index `{tok}`"),
    })?;
    let resolved = if raw > 0 {
        raw - 1
    } else if raw < 0 {
        count as i64 + raw
    } else {
        -1
    };
    if resolved < 0 || resolved >= count as i64 {
        return Err(Error::IndexOutOfRange {
            line,
            what,
            index: raw,
            count,
        });
    }
    Ok(resolved as usize)
}

/// Writes the mesh as OBJ. UVs are emitted one `vt` per face corner.
pub fn write_obj<W: Write>(mesh: &Mesh, mut out: W) -> std::io::Result<()> {
    for p in mesh.positions() {
        writeln!(out, "v {} {} {}", p[0], p[1], p[2])?;
    }
    match mesh.corner_uvs() {
        Some(uvs) => {
            for uv in uvs {
                writeln!(out, "vt {} {}", uv[0], uv[1])?;
            }
            for (f, tri) in mesh.faces().iter().enumerate() {
                writeln!(
                    out,
                    "f {}/{} {}/{} {}/{}",
                    tri[0] + 1,
                    3 * f + 1,
                    tri[1] + 1,
                    3 * f + 2,
                    tri[2] + 1,
                    3 * f + 3
                )?;
            }
        }
        None => {
            for tri in mesh.faces() {
                writeln!(out, "f {} {} {}", tri[0] + 1, tri[1] + 1, tri[2] + 1)?;
            }
        }
    }
    Ok(())
}

pub fn save_obj(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_obj(mesh, &mut buf).expect("writing to memory");
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_triangle_without_uvs() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert_eq!(m.vertex_count(), 3);
        assert_eq!(m.face_count(), 1);
        assert!(!m.has_uvs());
    }

    #[test]
    fn out_of_range_index_reports_line() {
        let err = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 99\n").unwrap_err();
        match err {
            Error::IndexOutOfRange { line, index, .. } => {
                assert_eq!(line, 4);
                assert_eq!(index, 99);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_number_is_a_parse_error() {
        let err = parse_obj("v 0 zero 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn quads_fan_triangulate_and_keep_uvs() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 1 1\nvt 0 1\n\
                    o thing\ng part\nf 1/1 2/2 3/3 4/4\n";
        let m = parse_obj(text).unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2], [0, 2, 3]]);
        let uvs = m.corner_uvs().unwrap();
        assert_eq!(uvs.len(), 6);
        assert_eq!(uvs[5], [0.0, 1.0]);
    }

    #[test]
    fn negative_indices_are_relative() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n").unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn mixed_uv_faces_are_rejected() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nvt 0 0\nf 1/1 2/1 3/1\nf 2 4 3\n";
        assert!(matches!(parse_obj(text), Err(Error::Parse { line: 7, .. })));
    }
}
