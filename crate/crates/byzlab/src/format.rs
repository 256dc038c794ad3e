//! Graph files: `n m` followed by `m` lines `u v`, or JSON
//! `{"n": .., "edges": [[u, v], ..]}`.

use std::fmt::Write as _;
use std::path::Path;

use byzlab_core::graph::{DiGraph, EdgeList, GraphError, NodeId};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("invalid graph JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn at(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Line { line, message: message.into() }
}

/// Blank lines and `#` comments are skipped; line numbers are 1-based and
/// count every physical line.
pub fn parse_text(text: &str) -> Result<DiGraph, FormatError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (header_line, header) = lines.next().ok_or_else(|| at(1, "missing header `n m`"))?;
    let (n, m) = pair(header_line, header, "header `n m`")?;
    if n == 0 {
        return Err(at(header_line, "graph must have at least one node"));
    }
    if n > byzlab_core::graph::MAX_NODES {
        return Err(at(header_line, GraphError::TooManyNodes { n }.to_string()));
    }

    let mut edges: Vec<(NodeId, NodeId)> = Vec::with_capacity(m);
    let mut adjacency = vec![0u64; n + 1];
    for (line, body) in lines.by_ref() {
        if edges.len() == m {
            return Err(at(line, format!("header announced {m} edges, found more")));
        }
        let (u, v) = pair(line, body, "edge `u v`")?;
        for node in [u, v] {
            if node == 0 || node > n {
                return Err(at(line, format!("node {node} is outside 1..={n}")));
            }
        }
        if u == v {
            return Err(at(line, format!("self-loop on node {u}")));
        }
        if adjacency[u] >> v & 1 == 1 {
            return Err(at(line, format!("duplicate edge {u} -> {v}")));
        }
        adjacency[u] |= 1 << v;
        edges.push((u, v));
    }
    if edges.len() != m {
        return Err(at(text.lines().count().max(1), format!("header announced {m} edges, found {}", edges.len())));
    }
    Ok(DiGraph::new(n, edges)?)
}

fn pair(line: usize, body: &str, what: &str) -> Result<(usize, usize), FormatError> {
    let fields: Vec<&str> = body.split_whitespace().collect();
    let [a, b] = fields[..] else {
        return Err(at(line, format!("expected {what}, got `{body}`")));
    };
    let num = |s: &str| s.parse::<usize>().map_err(|_| at(line, format!("`{s}` is not a non-negative integer")));
    Ok((num(a)?, num(b)?))
}

pub fn parse_json(text: &str) -> Result<DiGraph, FormatError> {
    let list: EdgeList = serde_json::from_str(text)?;
    Ok(DiGraph::try_from(list)?)
}

/// JSON if the first non-blank character is `{`, text otherwise.
pub fn parse(text: &str) -> Result<DiGraph, FormatError> {
    if text.trim_start().starts_with('{') {
        parse_json(text)
    } else {
        parse_text(text)
    }
}

pub fn read(path: &Path) -> Result<DiGraph, FormatError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| FormatError::Io { path: path.display().to_string(), source })?;
    parse(&text)
}

pub fn to_text(g: &DiGraph) -> String {
    let mut out = format!("{} {}\n", g.node_count(), g.edge_count());
    for (u, v) in g.edges() {
        let _ = writeln!(out, "{u} {v}");
    }
    out
}

pub fn to_json(g: &DiGraph) -> String {
    serde_json::to_string(&EdgeList::from(g)).expect("edge lists always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_of(err: FormatError) -> usize {
        match err {
            FormatError::Line { line, .. } => line,
            other => panic!("expected a line error, got {other}"),
        }
    }

    #[test]
    fn text_round_trip() {
        let g = DiGraph::cycle(4).unwrap();
        assert_eq!(parse_text(&to_text(&g)).unwrap(), g);
        assert_eq!(parse(&to_json(&g)).unwrap(), g);
        let commented = "# a cycle\n3 3\n1 2\n\n2 3 # back\n3 1\n";
        assert_eq!(parse(commented).unwrap(), DiGraph::cycle(3).unwrap());
    }

    #[test]
    fn text_errors_carry_line_numbers() {
        assert_eq!(line_of(parse_text("3 2\n1 2\n2 2\n").unwrap_err()), 3);
        assert_eq!(line_of(parse_text("3 2\n1 2\n1 2\n").unwrap_err()), 3);
        assert_eq!(line_of(parse_text("3 1\n\n1 4\n").unwrap_err()), 3);
        assert_eq!(line_of(parse_text("3 1\n1 0\n").unwrap_err()), 2);
        assert_eq!(line_of(parse_text("3\n").unwrap_err()), 1);
        assert_eq!(line_of(parse_text("3 1\n1 x\n").unwrap_err()), 2);
        assert_eq!(line_of(parse_text("3 1\n1 2\n2 3\n").unwrap_err()), 3);
        assert_eq!(line_of(parse_text("3 2\n1 2\n").unwrap_err()), 2);
        assert!(parse_text("").is_err());
    }

    #[test]
    fn json_rejects_bad_graphs() {
        assert!(matches!(parse_json(r#"{"n": 3, "edges": [[1, 1]]}"#), Err(FormatError::Graph(_))));
        assert!(matches!(parse_json(r#"{"n": 3, "edges": [[1, 2], [1, 2]]}"#), Err(FormatError::Graph(_))));
        assert!(matches!(parse_json(r#"{"n": 3, "edges": [[1, 5]]}"#), Err(FormatError::Graph(_))));
        assert!(matches!(parse_json(r#"{"n": 3}"#), Err(FormatError::Json(_))));
    }
}
