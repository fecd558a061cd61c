//! Line-oriented mesh text format.
//!
//! ```text
//! polymesh 1
//! vertices N
//! x y            (N lines)
//! cells M
//! i j k ...      (M lines, CCW, 0-based)
//! ```
//!
//! `#` starts a comment. Edges and derived data are never stored.

use std::io::{BufRead, Write};

use nalgebra::Point2;

use super::Mesh;
use crate::error::{Error, Result};

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    /// Next non-empty line with comments stripped, and its 1-based number.
    fn next_content(&mut self) -> Result<Option<(usize, String)>> {
        for raw in self.inner.by_ref() {
            self.line += 1;
            let raw = raw?;
            let text = raw.split('#').next().unwrap_or("").trim();
            if !text.is_empty() {
                return Ok(Some((self.line, text.to_string())));
            }
        }
        Ok(None)
    }

    fn expect(&mut self, what: &str) -> Result<(usize, String)> {
        self.next_content()?.ok_or_else(|| Error::Parse {
            line: self.line + 1,
            message: format!("unexpected end of input, expected {what}"),
        })
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn count_line(lines: &mut Lines<impl BufRead>, keyword: &str) -> Result<usize> {
    let (ln, text) = lines.expect(&format!("'{keyword} <count>'"))?;
    let mut it = text.split_whitespace();
    if it.next() != Some(keyword) {
        return Err(parse_err(ln, format!("expected '{keyword} <count>', found '{text}'")));
    }
    let count = it
        .next()
        .and_then(|t| t.parse::<usize>().ok())
        .ok_or_else(|| parse_err(ln, format!("missing or invalid {keyword} count")))?;
    if it.next().is_some() {
        return Err(parse_err(ln, "trailing tokens"));
    }
    Ok(count)
}

/// Reads a mesh and derives its topology. Area-sum checks are left to
/// [`super::validate`].
pub fn load_mesh(reader: impl BufRead) -> Result<Mesh> {
    let mut lines = Lines {
        inner: reader.lines(),
        line: 0,
    };
    let (ln, header) = lines.expect("header 'polymesh 1'")?;
    if header.split_whitespace().collect::<Vec<_>>() != ["polymesh", "1"] {
        return Err(parse_err(ln, format!("expected header 'polymesh 1', found '{header}'")));
    }

    let nv = count_line(&mut lines, "vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, text) = lines.expect("vertex coordinates")?;
        let coords: Vec<f64> = text
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(ln, format!("bad coordinate: {e}")))?;
        match coords[..] {
            [x, y] if x.is_finite() && y.is_finite() => vertices.push(Point2::new(x, y)),
            _ => return Err(parse_err(ln, "expected two finite coordinates 'x y'")),
        }
    }

    let nc = count_line(&mut lines, "cells")?;
    let mut cycles = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (ln, text) = lines.expect("cell vertex list")?;
        let cycle: Vec<usize> = text
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(ln, format!("bad vertex index: {e}")))?;
        if cycle.len() < 3 {
            return Err(parse_err(ln, "a cell needs at least 3 vertices"));
        }
        if let Some(&bad) = cycle.iter().find(|&&v| v >= nv) {
            return Err(parse_err(ln, format!("vertex index {bad} out of range")));
        }
        cycles.push(cycle);
    }

    if let Some((ln, text)) = lines.next_content()? {
        return Err(parse_err(ln, format!("unexpected trailing content '{text}'")));
    }
    Mesh::from_cells(vertices, cycles)
}

pub fn write_mesh(mesh: &Mesh, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "polymesh 1")?;
    writeln!(out, "vertices {}", mesh.vertices.len())?;
    for v in &mesh.vertices {
        writeln!(out, "{} {}", v.x, v.y)?;
    }
    writeln!(out, "cells {}", mesh.cells.len())?;
    for c in &mesh.cells {
        let ids: Vec<String> = c.vertices.iter().map(usize::to_string).collect();
        writeln!(out, "{}", ids.join(" "))?;
    }
    Ok(())
}
