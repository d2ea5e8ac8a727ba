//! Minimal ASCII Wavefront OBJ support: `v` and `f` records only.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Point3;

use super::{GeometryError, TriangleMesh};

fn parse_err(line: usize, message: impl Into<String>) -> GeometryError {
    GeometryError::Parse {
        line,
        message: message.into(),
    }
}

/// Parses OBJ text. Polygons are fan-triangulated; other record types are
/// ignored.
pub fn parse_obj(text: &str) -> Result<TriangleMesh, GeometryError> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("v") => {
                let coords: Vec<f64> = fields
                    .by_ref()
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|_| parse_err(line_no, format!("bad coordinate `{t}`"))))
                    .collect::<Result<_, _>>()?;
                if coords.len() != 3 {
                    return Err(parse_err(line_no, "vertex needs 3 coordinates"));
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut corners = Vec::with_capacity(4);
                for token in fields {
                    let head = token.split('/').next().unwrap_or("");
                    let raw_index: i64 = head
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("bad face index `{token}`")))?;
                    let resolved = match raw_index {
                        0 => return Err(parse_err(line_no, "face index 0 is invalid")),
                        i if i > 0 => i - 1,
                        i => vertices.len() as i64 + i,
                    };
                    if resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(parse_err(line_no, format!("face index {raw_index} out of range")));
                    }
                    corners.push(resolved as u32);
                }
                if corners.len() < 3 {
                    return Err(parse_err(line_no, "face needs at least 3 vertices"));
                }
                for k in 1..corners.len() - 1 {
                    triangles.push([corners[0], corners[k], corners[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(TriangleMesh {
        vertices,
        triangles,
    })
}

/// Renders a mesh as OBJ text. Coordinates use the shortest round-trip
/// decimal form, so output is byte-deterministic.
pub fn format_obj(mesh: &TriangleMesh) -> String {
    let mut out = String::with_capacity(mesh.vertices.len() * 40 + mesh.triangles.len() * 24);
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in &mesh.triangles {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out
}

pub fn load_obj(path: impl AsRef<Path>) -> Result<TriangleMesh, GeometryError> {
    let text = std::fs::read_to_string(path)?;
    parse_obj(&text)
}

pub fn save_obj(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<(), GeometryError> {
    std::fs::write(path, format_obj(mesh))?;
    Ok(())
}
