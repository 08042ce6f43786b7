//! Plain-text mesh files.
//!
//! ```text
//! cfm-mesh 1
//! V <count>
//! <id> <x> <y> <boundary_flag>
//! E <count>
//! <id> <v0> <v1> <v2> <tag>
//! G <count>
//! <v0> <v1>
//! ```
//!
//! Coordinates are written with 17 significant digits, which round-trips f64.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use super::{Element, Mesh, Subdomain};

pub const MESH_HEADER: &str = "cfm-mesh 1";

#[derive(Debug, Error)]
pub enum MeshIoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("inconsistent mesh file: {0}")]
    Inconsistent(String),
}

pub fn format_mesh(mesh: &Mesh) -> String {
    let mut s = String::new();
    s.push_str(MESH_HEADER);
    s.push('\n');
    let _ = writeln!(s, "V {}", mesh.num_vertices());
    for (i, (p, &b)) in mesh
        .vertices()
        .iter()
        .zip(mesh.boundary_flags())
        .enumerate()
    {
        let _ = writeln!(s, "{i} {:.16e} {:.16e} {}", p[0], p[1], u8::from(b));
    }
    let _ = writeln!(s, "E {}", mesh.num_elements());
    for (i, el) in mesh.elements().iter().enumerate() {
        let [a, b, c] = el.vertices;
        let _ = writeln!(s, "{i} {a} {b} {c} {}", el.tag.tag());
    }
    let _ = writeln!(s, "G {}", mesh.interface_edges().len());
    for [a, b] in mesh.interface_edges() {
        let _ = writeln!(s, "{a} {b}");
    }
    s
}

pub fn write_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<(), MeshIoError> {
    std::fs::write(path, format_mesh(mesh))?;
    Ok(())
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<Mesh, MeshIoError> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_fields(&mut self, what: &str) -> Result<(usize, Vec<&'a str>), MeshIoError> {
        for (i, line) in self.inner.by_ref() {
            self.last = i + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if !fields.is_empty() {
                return Ok((i + 1, fields));
            }
        }
        Err(MeshIoError::Parse {
            line: self.last + 1,
            message: format!("unexpected end of file, expected {what}"),
        })
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T, MeshIoError> {
    tok.parse().map_err(|_| MeshIoError::Parse {
        line,
        message: format!("invalid {what} '{tok}'"),
    })
}

fn section(lines: &mut Lines<'_>, key: &str) -> Result<usize, MeshIoError> {
    let (line, f) = lines.next_fields(&format!("'{key} <count>'"))?;
    if f.len() != 2 || f[0] != key {
        return Err(MeshIoError::Parse {
            line,
            message: format!("expected '{key} <count>', found '{}'", f.join(" ")),
        });
    }
    parse_num(f[1], line, "count")
}

fn expect_len(f: &[&str], n: usize, line: usize, what: &str) -> Result<(), MeshIoError> {
    if f.len() != n {
        return Err(MeshIoError::Parse {
            line,
            message: format!("{what} line needs {n} fields, found {}", f.len()),
        });
    }
    Ok(())
}

fn expect_id(tok: &str, expected: usize, line: usize) -> Result<(), MeshIoError> {
    let id: usize = parse_num(tok, line, "id")?;
    if id != expected {
        return Err(MeshIoError::Parse {
            line,
            message: format!("id {id} out of sequence, expected {expected}"),
        });
    }
    Ok(())
}

pub fn parse_mesh(text: &str) -> Result<Mesh, MeshIoError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let (line, header) = lines.next_fields("header")?;
    if header.join(" ") != MESH_HEADER {
        return Err(MeshIoError::Parse {
            line,
            message: format!("expected header '{MESH_HEADER}'"),
        });
    }

    let nv = section(&mut lines, "V")?;
    let mut vertices = Vec::with_capacity(nv);
    let mut boundary = Vec::with_capacity(nv);
    for i in 0..nv {
        let (line, f) = lines.next_fields("vertex")?;
        expect_len(&f, 4, line, "vertex")?;
        expect_id(f[0], i, line)?;
        let x: f64 = parse_num(f[1], line, "coordinate")?;
        let y: f64 = parse_num(f[2], line, "coordinate")?;
        let b = match f[3] {
            "0" => false,
            "1" => true,
            other => {
                return Err(MeshIoError::Parse {
                    line,
                    message: format!("boundary flag must be 0 or 1, found '{other}'"),
                })
            }
        };
        vertices.push([x, y]);
        boundary.push(b);
    }

    let ne = section(&mut lines, "E")?;
    let mut elements = Vec::with_capacity(ne);
    for i in 0..ne {
        let (line, f) = lines.next_fields("element")?;
        expect_len(&f, 5, line, "element")?;
        expect_id(f[0], i, line)?;
        let mut v = [0usize; 3];
        for k in 0..3 {
            v[k] = parse_num(f[1 + k], line, "vertex index")?;
            if v[k] >= nv {
                return Err(MeshIoError::Parse {
                    line,
                    message: format!("element {i} references missing vertex {}", v[k]),
                });
            }
        }
        let tag: u8 = parse_num(f[4], line, "tag")?;
        let tag = Subdomain::from_tag(tag).ok_or_else(|| MeshIoError::Parse {
            line,
            message: format!("subdomain tag must be 1 or 2, found {tag}"),
        })?;
        elements.push(Element { vertices: v, tag });
    }

    let ng = section(&mut lines, "G")?;
    let mut interface = Vec::with_capacity(ng);
    for _ in 0..ng {
        let (line, f) = lines.next_fields("interface edge")?;
        expect_len(&f, 2, line, "interface edge")?;
        let a: usize = parse_num(f[0], line, "vertex index")?;
        let b: usize = parse_num(f[1], line, "vertex index")?;
        if a >= nv || b >= nv {
            return Err(MeshIoError::Parse {
                line,
                message: format!("interface edge references missing vertex {}", a.max(b)),
            });
        }
        interface.push([a, b]);
    }

    if let Some((i, line)) = lines.inner.find(|(_, l)| !l.trim().is_empty()) {
        return Err(MeshIoError::Inconsistent(format!(
            "trailing content at line {}: '{}' (counts do not match the data)",
            i + 1,
            line.trim()
        )));
    }
    if ne == 0 {
        return Err(MeshIoError::Inconsistent("mesh has no elements".into()));
    }
    Ok(Mesh::from_parts(vertices, elements, boundary, interface))
}
