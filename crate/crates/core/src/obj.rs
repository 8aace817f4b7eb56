//! Wavefront OBJ subset: `v` and `f` records only.
//!
//! Texture/normal references in face records (`f 1/2/3 ...`) are accepted and
//! ignored, as are `vt`, `vn`, material and group records. Polygons are
//! fan-triangulated around their first vertex.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Vec3};

pub fn load_obj(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text, path)
}

pub fn parse_obj(text: &str, path: &Path) -> Result<Mesh> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut vertices = Vec::new();
    // (line number, polygon)
    let mut polygons: Vec<(usize, Vec<i64>)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| parse_err(line_no, format!("bad vertex coordinate: {e}")))?;
                if coords.len() != 3 {
                    return Err(parse_err(line_no, "vertex needs 3 coordinates".into()));
                }
                vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for t in tokens {
                    let head = t.split('/').next().unwrap_or("");
                    let idx: i64 = head
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("bad face index `{t}`")))?;
                    poly.push(idx);
                }
                if poly.len() < 3 {
                    return Err(parse_err(
                        line_no,
                        format!("face has {} vertices, need at least 3", poly.len()),
                    ));
                }
                polygons.push((line_no, poly));
            }
            _ => {}
        }
    }

    let n = vertices.len() as i64;
    let mut faces = Vec::new();
    for (line_no, poly) in polygons {
        let resolved: Vec<usize> = poly
            .iter()
            .map(|&i| {
                // Negative indices are relative to the end of the vertex list.
                let zero_based = if i > 0 { i - 1 } else { n + i };
                if i == 0 || zero_based < 0 || zero_based >= n {
                    Err(parse_err(
                        line_no,
                        format!("face index {i} out of range (1..={n})"),
                    ))
                } else {
                    Ok(zero_based as usize)
                }
            })
            .collect::<Result<_>>()?;
        for k in 1..resolved.len() - 1 {
            faces.push([resolved[0], resolved[k], resolved[k + 1]]);
        }
    }

    Mesh::new(vertices, faces).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })
}

/// OBJ text with coordinates printed at 17 significant digits, which
/// reproduces every `f64` exactly on reload.
pub fn to_obj_string(mesh: &Mesh) -> String {
    let mut out = String::with_capacity(mesh.vertex_count() * 64 + mesh.faces().len() * 24);
    for p in mesh.vertices() {
        writeln!(out, "v {:.16e} {:.16e} {:.16e}", p.x, p.y, p.z).unwrap();
    }
    for f in mesh.faces() {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
    }
    out
}

pub fn save_obj(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_obj_string(mesh)).map_err(|e| Error::io(path, e))
}
