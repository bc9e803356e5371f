//! `GRAPHAF-CKPT v1` text checkpoints.
//!
//! ```text
//! GRAPHAF-CKPT v1
//! tensor <name> <rank> <dim...>
//! <values, whitespace separated, 17 significant digits>
//! ```

use std::fmt::Write as _;

use thiserror::Error;

use crate::store::ParamStore;
use crate::tensor::Tensor;

pub const HEADER: &str = "GRAPHAF-CKPT v1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CheckpointError {
    #[error("missing or unknown header (expected `{HEADER}`)")]
    Header,
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("tensor `{got}` found where schema expects `{expected}`")]
    Name { expected: String, got: String },
    #[error("tensor `{name}`: shape {got:?} does not match schema {expected:?}")]
    Shape {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("checkpoint has {got} tensors, schema expects {expected}")]
    Count { expected: usize, got: usize },
}

pub fn save(store: &ParamStore) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    for e in store.entries() {
        let shape = e.tensor.shape();
        write!(out, "tensor {} {}", e.name, shape.len()).unwrap();
        for d in shape {
            write!(out, " {d}").unwrap();
        }
        out.push('\n');
        for (i, v) in e.tensor.data().iter().enumerate() {
            if i > 0 {
                out.push(if i % 8 == 0 { '\n' } else { ' ' });
            }
            write!(out, "{v:.16e}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Parses `text` and checks every tensor against `schema` (names, order,
/// ranks and dims). Trainable flags are taken from the schema.
pub fn load(text: &str, schema: &ParamStore) -> Result<ParamStore, CheckpointError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, h)) if h == HEADER => {}
        _ => return Err(CheckpointError::Header),
    }
    let mut parsed: Vec<(String, Tensor)> = Vec::new();
    let mut pending: Option<(String, Vec<usize>, Vec<f64>, usize)> = None;
    for (ln, line) in lines {
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("tensor ") {
            if let Some(p) = pending.take() {
                parsed.push(finish(p)?);
            }
            let mut toks = rest.split_whitespace();
            let name = toks.next().ok_or_else(|| syntax(ln, "missing tensor name"))?;
            let rank: usize = toks
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| syntax(ln, "bad rank"))?;
            let dims: Vec<usize> = toks
                .map(|t| t.parse().map_err(|_| syntax(ln, &format!("bad dim `{t}`"))))
                .collect::<Result<_, _>>()?;
            if dims.len() != rank {
                return Err(syntax(ln, &format!("rank {rank} but {} dims", dims.len())));
            }
            let n = dims.iter().product();
            pending = Some((name.to_string(), dims, Vec::with_capacity(n), ln));
        } else {
            let Some((_, _, values, _)) = pending.as_mut() else {
                return Err(syntax(ln, "values before any tensor line"));
            };
            for tok in line.split_whitespace() {
                values.push(tok.parse().map_err(|_| syntax(ln, &format!("bad value `{tok}`")))?);
            }
        }
    }
    if let Some(p) = pending.take() {
        parsed.push(finish(p)?);
    }
    if parsed.len() != schema.len() {
        return Err(CheckpointError::Count {
            expected: schema.len(),
            got: parsed.len(),
        });
    }
    let mut out = ParamStore::new();
    for ((name, tensor), expected) in parsed.into_iter().zip(schema.entries()) {
        if name != expected.name {
            return Err(CheckpointError::Name {
                expected: expected.name.clone(),
                got: name,
            });
        }
        if tensor.shape() != expected.tensor.shape() {
            return Err(CheckpointError::Shape {
                name,
                expected: expected.tensor.shape().to_vec(),
                got: tensor.shape().to_vec(),
            });
        }
        out.push(name, tensor, expected.trainable);
    }
    Ok(out)
}

fn finish(
    (name, dims, values, ln): (String, Vec<usize>, Vec<f64>, usize),
) -> Result<(String, Tensor), CheckpointError> {
    let t = Tensor::new(dims, values).map_err(|e| syntax(ln, &format!("tensor `{name}`: {e}")))?;
    Ok((name, t))
}

fn syntax(line: usize, msg: &str) -> CheckpointError {
    CheckpointError::Syntax {
        line,
        msg: msg.to_string(),
    }
}
