//! Plain-text mesh format.
//!
//! ```text
//! v x y z      vertex position
//! vn x y z     vertex normal, paired with positions by order
//! f i j k      triangle, 1-based vertex indices
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Face entries of the
//! form `i/j/k` use the leading index. A file without `vn` lines gets
//! area-weighted normals. Numbers are written in Rust's shortest
//! round-trip representation.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;

use super::{ControlMesh, MeshError};

pub fn read_mesh<R: BufRead>(reader: R) -> Result<ControlMesh, MeshError> {
    let mut positions = Vec::new();
    let mut normals = Vec::new();
    let mut triangles = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let mut parts = line.split_whitespace();
        let Some(tag) = parts.next() else { continue };
        let fields: Vec<&str> = parts.collect();
        let err = |message: String| MeshError::Parse {
            line: lineno,
            message,
        };
        match tag {
            t if t.starts_with('#') => {}
            "v" | "vn" => {
                if fields.len() != 3 {
                    return Err(err(format!("`{tag}` expects 3 numbers, found {}", fields.len())));
                }
                let mut xyz = [0.0; 3];
                for (k, f) in fields.iter().enumerate() {
                    xyz[k] = f.parse().map_err(|_| err(format!("invalid number `{f}`")))?;
                }
                let p = Vector3::from(xyz);
                if tag == "v" {
                    positions.push(p);
                } else {
                    normals.push(p);
                }
            }
            "f" => {
                if fields.len() != 3 {
                    return Err(err(format!("`f` expects 3 indices, found {}", fields.len())));
                }
                let mut tri = [0usize; 3];
                for (k, f) in fields.iter().enumerate() {
                    let head = f.split('/').next().unwrap_or(f);
                    let idx: usize = head.parse().map_err(|_| err(format!("invalid index `{f}`")))?;
                    if idx == 0 {
                        return Err(err("indices are 1-based".into()));
                    }
                    tri[k] = idx - 1;
                }
                triangles.push(tri);
            }
            other => return Err(err(format!("unknown record `{other}`"))),
        }
    }
    if normals.is_empty() {
        ControlMesh::from_geometry(positions, triangles)
    } else {
        ControlMesh::new(positions, normals, triangles)
    }
}

pub fn write_mesh<W: Write>(mesh: &ControlMesh, mut out: W) -> Result<(), MeshError> {
    for p in mesh.positions() {
        writeln!(out, "v {} {} {}", p.x, p.y, p.z)?;
    }
    for n in mesh.normals() {
        writeln!(out, "vn {} {} {}", n.x, n.y, n.z)?;
    }
    for [a, b, c] in mesh.triangles() {
        writeln!(out, "f {} {} {}", a + 1, b + 1, c + 1)?;
    }
    Ok(())
}

pub fn read_mesh_file(path: impl AsRef<Path>) -> Result<ControlMesh, MeshError> {
    read_mesh(BufReader::new(File::open(path)?))
}

pub fn write_mesh_file(mesh: &ControlMesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_mesh(mesh, &mut w)?;
    w.flush()?;
    Ok(())
}
