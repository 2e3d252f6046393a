//! Whitespace-separated edge lists in the Konect/Pajek style.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::objective::WeightedGraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LoadOptions {
    /// Store every edge in both directions.
    pub symmetrize: bool,
    /// Sum the weights of repeated pairs; when false a repeated pair is an error.
    pub collapse_multi_edges: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            symmetrize: true,
            collapse_multi_edges: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadStats {
    /// Edge lines read, including dropped self-loops and repeats.
    pub edge_lines: usize,
    pub self_loops: usize,
    /// Lines naming a pair that was already seen (in either orientation when
    /// symmetrizing).
    pub repeated: usize,
    /// `ids[i]` is the file id of dense node `i`.
    pub ids: Vec<u64>,
}

/// Reads an edge list from `path`. See [`parse_edge_list`].
pub fn load_edge_list(path: &Path, options: LoadOptions) -> Result<(WeightedGraph, LoadStats)> {
    let text = std::fs::read_to_string(path)?;
    parse_edge_list(&text, path, options)
}

/// Parses `u v [weight ...]` lines.
///
/// Lines that are blank or start with `%` or `#` are skipped; columns after the
/// weight are ignored. Node ids are non-negative integers remapped to dense
/// indices in increasing id order. The default weight is 1. Self-loops are
/// dropped with a warning. `origin` only labels error messages.
pub fn parse_edge_list(text: &str, origin: &Path, options: LoadOptions) -> Result<(WeightedGraph, LoadStats)> {
    let bad = |line: usize, message: String| Error::EdgeList {
        path: origin.to_path_buf(),
        line,
        message,
    };

    let mut stats = LoadStats::default();
    let mut edges: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') || trimmed.starts_with('#') {
            continue;
        }
        let mut cols = trimmed.split_whitespace();
        let mut id = |name: &str| -> Result<u64> {
            let tok = cols
                .next()
                .ok_or_else(|| bad(line, format!("missing {name} node id")))?;
            tok.parse::<u64>()
                .map_err(|_| bad(line, format!("node id {tok:?} is not a non-negative integer")))
        };
        let u = id("source")?;
        let v = id("target")?;
        let w = match cols.next() {
            None => 1.0,
            Some(tok) => {
                let w: f64 = tok
                    .parse()
                    .map_err(|_| bad(line, format!("weight {tok:?} is not a number")))?;
                if !(w.is_finite() && w >= 0.0) {
                    return Err(bad(line, format!("weight {w} must be finite and non-negative")));
                }
                w
            }
        };
        stats.edge_lines += 1;
        if u == v {
            log::warn!("{}:{line}: dropping self-loop on node {u}", origin.display());
            stats.self_loops += 1;
            continue;
        }
        let key = if options.symmetrize {
            (u.min(v), u.max(v))
        } else {
            (u, v)
        };
        match edges.get_mut(&key) {
            Some(total) => {
                if !options.collapse_multi_edges {
                    return Err(bad(line, format!("repeated edge {u} {v}")));
                }
                stats.repeated += 1;
                *total += w;
            }
            None => {
                edges.insert(key, w);
            }
        }
    }
    if edges.is_empty() {
        return Err(Error::EmptyGraph);
    }

    let mut ids: Vec<u64> = edges.keys().flat_map(|&(u, v)| [u, v]).collect();
    ids.sort_unstable();
    ids.dedup();
    let dense = |id: u64| ids.binary_search(&id).expect("id collected above");

    let mut graph = WeightedGraph::new(ids.len());
    for (&(u, v), &w) in &edges {
        let (i, j) = (dense(u), dense(v));
        graph.add_weight(i, j, w)?;
        if options.symmetrize {
            graph.add_weight(j, i, w)?;
        }
    }
    stats.ids = ids;
    Ok((graph, stats))
}

/// Serializes `graph` with 1-based ids so that parsing it back yields the same
/// graph.
///
/// Symmetric graphs are written one line per unordered pair (reload with
/// `symmetrize = true`); other graphs one line per directed entry (reload with
/// `symmetrize = false`). Graphs with isolated nodes have no edge-list
/// representation and are refused.
pub fn write_edge_list(graph: &WeightedGraph) -> Result<String> {
    let mut touched = vec![false; graph.n()];
    for i in 0..graph.n() {
        for &(j, _) in graph.neighbors(i) {
            touched[i] = true;
            touched[j] = true;
        }
    }
    if let Some(i) = touched.iter().position(|t| !t) {
        return Err(Error::InvalidParameter(format!(
            "node {i} is isolated and cannot be written as an edge list"
        )));
    }
    let symmetric = graph.is_symmetric();
    let mut out = String::new();
    let _ = writeln!(out, "% {} {} nodes", if symmetric { "sym" } else { "asym" }, graph.n());
    for i in 0..graph.n() {
        for &(j, w) in graph.neighbors(i) {
            if symmetric && j < i {
                continue;
            }
            let _ = writeln!(out, "{} {} {w}", i + 1, j + 1);
        }
    }
    Ok(out)
}
