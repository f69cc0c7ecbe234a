//! Mesh text format.
//!
//! ```text
//! mesh <n> <m>
//! x y z        (n lines)
//! u v w        (m lines, 0-based)
//! ```

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use log::warn;

use super::{GraphError, MeshGraph};
use crate::linalg::io::FormatError;

fn parse_err(line: usize, msg: impl Into<String>) -> GraphError {
    GraphError::Format(FormatError::Parse {
        line,
        msg: msg.into(),
    })
}

fn fields<T: std::str::FromStr>(line: &str, lineno: usize, count: usize) -> Result<Vec<T>, GraphError>
where
    T::Err: std::fmt::Display,
{
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != count {
        return Err(parse_err(
            lineno,
            format!("expected {count} fields, found {}", parts.len()),
        ));
    }
    parts
        .iter()
        .map(|p| p.parse::<T>().map_err(|e| parse_err(lineno, format!("{p:?}: {e}"))))
        .collect()
}

/// Parses a mesh. Edges given as `v u` with `v > u` are flipped; repeated
/// edges are dropped with a warning (the first weight is kept).
pub fn parse_mesh(text: &str) -> Result<MeshGraph, GraphError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hl, header) = lines.next().ok_or_else(|| parse_err(1, "empty mesh file"))?;
    let mut head = header.split_whitespace();
    if head.next() != Some("mesh") {
        return Err(parse_err(hl, "header must be `mesh <n> <m>`"));
    }
    let dims: Vec<usize> = fields(&head.collect::<Vec<_>>().join(" "), hl, 2)?;
    let (n, m) = (dims[0], dims[1]);

    let mut coords = Vec::with_capacity(n);
    for _ in 0..n {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| parse_err(0, format!("expected {n} coordinate lines")))?;
        let c: Vec<f64> = fields(l, ln, 3)?;
        coords.push([c[0], c[1], c[2]]);
    }

    let mut edges = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    let mut seen = HashSet::with_capacity(m);
    for _ in 0..m {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| parse_err(0, format!("expected {m} edge lines")))?;
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(parse_err(ln, "edge line must be `u v w`"));
        }
        let idx = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| parse_err(ln, format!("{s:?}: {e}")))
        };
        let (mut a, mut b) = (idx(parts[0])?, idx(parts[1])?);
        let w: f64 = parts[2]
            .parse()
            .map_err(|e| parse_err(ln, format!("{:?}: {e}", parts[2])))?;
        if a == b {
            return Err(parse_err(ln, format!("self loop at node {a}")));
        }
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        if !seen.insert((a, b)) {
            warn!("line {ln}: duplicate edge ({a}, {b}) ignored");
            continue;
        }
        edges.push((a, b));
        weights.push(w);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "trailing content after edge list"));
    }
    MeshGraph::new(coords, &edges, Some(weights))
}

pub fn render_mesh(g: &MeshGraph) -> String {
    let mut s = format!("mesh {} {}\n", g.num_nodes(), g.num_edges());
    for c in g.coords() {
        s.push_str(&format!("{} {} {}\n", c[0], c[1], c[2]));
    }
    for (u, v, w) in g.edges() {
        s.push_str(&format!("{u} {v} {w}\n"));
    }
    s
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<MeshGraph, GraphError> {
    let text = fs::read_to_string(path).map_err(FormatError::from)?;
    parse_mesh(&text)
}

pub fn write_mesh(path: impl AsRef<Path>, g: &MeshGraph) -> Result<(), GraphError> {
    fs::write(path, render_mesh(g)).map_err(FormatError::from)?;
    Ok(())
}
