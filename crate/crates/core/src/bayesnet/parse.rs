//! Network text format:
//!
//! ```text
//! # comment
//! node either
//! parents lung tub
//! cpt 0 0 -> 1 0
//! cpt 0 1 -> 0 1
//! ...
//! ```
//!
//! `parents` may be empty; `cpt` lines list the parent values (in `parents`
//! order) followed by `P(node=0) P(node=1)`.

use std::fmt::Write as _;

use super::{BayesNet, NodeSpec};
use crate::error::{Error, Result};

struct Pending {
    name: String,
    line: usize,
    parents: Option<Vec<String>>,
    rows: Vec<Option<[f64; 2]>>,
}

fn finish(p: Pending) -> Result<NodeSpec> {
    let parents = p.parents.unwrap_or_default();
    let expected = 1usize << parents.len();
    let mut rows = Vec::with_capacity(expected);
    for i in 0..expected {
        match p.rows.get(i).copied().flatten() {
            Some(r) => rows.push(r),
            None => {
                return Err(Error::Network(format!(
                    "node `{}` (line {}) is missing the CPT row for parent values {:0width$b}",
                    p.name,
                    p.line,
                    i,
                    width = parents.len().max(1)
                )))
            }
        }
    }
    Ok(NodeSpec {
        name: p.name,
        parents,
        rows,
    })
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parses and validates a network spec.
pub fn load_network(text: &str) -> Result<BayesNet> {
    let mut specs = Vec::new();
    let mut current: Option<Pending> = None;

    for (idx, raw) in text.lines().enumerate() {
        let ln = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (keyword, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        match keyword {
            "node" => {
                if rest.is_empty() || rest.contains(char::is_whitespace) {
                    return Err(parse_err(ln, "expected `node <name>`"));
                }
                if let Some(p) = current.take() {
                    specs.push(finish(p)?);
                }
                current = Some(Pending {
                    name: rest.to_string(),
                    line: ln,
                    parents: None,
                    rows: Vec::new(),
                });
            }
            "parents" => {
                let p = current
                    .as_mut()
                    .ok_or_else(|| parse_err(ln, "`parents` before any `node`"))?;
                if p.parents.is_some() {
                    return Err(parse_err(ln, "duplicate `parents` line"));
                }
                let list: Vec<String> = rest
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect();
                p.rows = vec![None; 1 << list.len()];
                p.parents = Some(list);
            }
            "cpt" => {
                let p = current
                    .as_mut()
                    .ok_or_else(|| parse_err(ln, "`cpt` before any `node`"))?;
                let parents = p
                    .parents
                    .as_ref()
                    .ok_or_else(|| parse_err(ln, "`cpt` before `parents`"))?;
                let (lhs, rhs) = rest
                    .split_once("->")
                    .ok_or_else(|| parse_err(ln, "expected `cpt <parent values> -> <p0> <p1>`"))?;
                let values: Vec<u8> = lhs
                    .split_whitespace()
                    .map(|v| match v {
                        "0" => Ok(0),
                        "1" => Ok(1),
                        other => Err(parse_err(ln, format!("parent value `{other}` is not 0 or 1"))),
                    })
                    .collect::<Result<_>>()?;
                if values.len() != parents.len() {
                    return Err(parse_err(
                        ln,
                        format!("{} parent values for {} parents", values.len(), parents.len()),
                    ));
                }
                let probs: Vec<f64> = rhs
                    .split_whitespace()
                    .map(|v| {
                        v.parse::<f64>()
                            .map_err(|_| parse_err(ln, format!("`{v}` is not a probability")))
                    })
                    .collect::<Result<_>>()?;
                if probs.len() != 2 {
                    return Err(parse_err(ln, "expected two probabilities"));
                }
                let idx = values.iter().fold(0usize, |acc, &v| (acc << 1) | v as usize);
                if p.rows[idx].is_some() {
                    return Err(parse_err(ln, "duplicate CPT row"));
                }
                p.rows[idx] = Some([probs[0], probs[1]]);
            }
            other => return Err(parse_err(ln, format!("unknown keyword `{other}`"))),
        }
    }
    if let Some(p) = current.take() {
        specs.push(finish(p)?);
    }
    if specs.is_empty() {
        return Err(Error::Empty("network spec"));
    }
    BayesNet::new(specs)
}

/// Renders a network in the text format accepted by [`load_network`].
pub fn to_spec_text(net: &BayesNet) -> String {
    let mut s = String::new();
    for spec in net.node_specs() {
        let _ = writeln!(s, "node {}", spec.name);
        let _ = writeln!(s, "parents {}", spec.parents.join(" ").trim_end());
        let k = spec.parents.len();
        for (i, row) in spec.rows.iter().enumerate() {
            let bits: Vec<String> = (0..k).rev().map(|b| ((i >> b) & 1).to_string()).collect();
            let lhs = if bits.is_empty() {
                String::new()
            } else {
                format!("{} ", bits.join(" "))
            };
            let _ = writeln!(s, "cpt {lhs}-> {} {}", row[0], row[1]);
        }
        s.push('\n');
    }
    s
}
