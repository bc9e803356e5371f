//! MOLT v1 text records.
//!
//! ```text
//! #MOLT v1
//! atoms <n>
//! <index> <symbol>
//! bonds <m>
//! <i> <j> <order>
//! ```
//!
//! Records are separated by blank lines.

use std::fmt::Write as _;

use super::{valency_audit, AtomVocab, BondVocab, MolecularGraph};
use crate::error::GraphError;

pub const HEADER: &str = "#MOLT v1";

pub fn write_molt(g: &MolecularGraph, vocab: &AtomVocab, bonds: &BondVocab) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{HEADER}\natoms {}", g.n());
    for (i, &t) in g.node_types().iter().enumerate() {
        let _ = writeln!(s, "{i} {}", vocab.symbol(t));
    }
    let list = g.bonds();
    let _ = writeln!(s, "bonds {}", list.len());
    for (i, j, c) in list {
        let _ = writeln!(s, "{i} {j} {}", bonds.order(c));
    }
    s
}

/// Writes records separated by blank lines.
pub fn write_molt_set(gs: &[MolecularGraph], vocab: &AtomVocab, bonds: &BondVocab) -> String {
    gs.iter()
        .map(|g| write_molt(g, vocab, bonds))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Parses every record in `text`. With `allow_invalid`, valency violations
/// are admitted (structural errors never are).
pub fn parse_molt(
    text: &str,
    vocab: &AtomVocab,
    bonds: &BondVocab,
    allow_invalid: bool,
) -> Result<Vec<MolecularGraph>, GraphError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .peekable();
    let mut out = Vec::new();
    while let Some((line, header)) = lines.next() {
        let err = |line: usize, msg: String| GraphError::Parse { line, msg };
        if header != HEADER {
            return Err(err(line, format!("expected `{HEADER}`, got `{header}`")));
        }
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| {
                err(
                    usize::MAX,
                    format!("unexpected end of input, expected {what}"),
                )
            })
        };
        let count = |line: usize, l: &str, key: &str| -> Result<usize, GraphError> {
            l.strip_prefix(key)
                .and_then(|r| r.trim().parse().ok())
                .ok_or_else(|| err(line, format!("expected `{key} <count>`, got `{l}`")))
        };
        let (line, l) = next("atoms")?;
        let n = count(line, l, "atoms")?;
        let mut types = Vec::with_capacity(n);
        for k in 0..n {
            let (line, l) = next("atom line")?;
            let mut parts = l.split_whitespace();
            let idx = parts.next().and_then(|p| p.parse::<usize>().ok());
            let sym = parts.next();
            match (idx, sym, parts.next()) {
                (Some(i), Some(s), None) if i == k => types.push(
                    vocab
                        .index_of(s)
                        .ok_or_else(|| GraphError::UnknownSymbol(s.to_string()))?,
                ),
                _ => return Err(err(line, format!("expected `{k} <symbol>`, got `{l}`"))),
            }
        }
        let (line, l) = next("bonds")?;
        let m = count(line, l, "bonds")?;
        let mut list = Vec::with_capacity(m);
        for _ in 0..m {
            let (line, l) = next("bond line")?;
            let nums: Vec<Option<u32>> = l.split_whitespace().map(|p| p.parse().ok()).collect();
            let [Some(i), Some(j), Some(order)] = nums[..] else {
                return Err(err(line, format!("expected `<i> <j> <order>`, got `{l}`")));
            };
            let (i, j) = (i as usize, j as usize);
            if i == j {
                return Err(GraphError::SelfLoop(i));
            }
            if i > j {
                return Err(err(
                    line,
                    format!("bond endpoints must satisfy i < j, got `{l}`"),
                ));
            }
            let c = bonds
                .category_of(order)
                .ok_or(GraphError::UnknownBondOrder(order))?;
            list.push((i, j, c));
        }
        let g = MolecularGraph::from_bonds(types, bonds.len(), &list)?;
        if !allow_invalid {
            valency_audit(&g, vocab, bonds)?;
        }
        out.push(g);
    }
    Ok(out)
}
