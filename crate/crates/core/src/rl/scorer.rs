use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use thiserror::Error;

use crate::graph::molt::write_molt;
use crate::graph::{AtomVocab, BondVocab, MolecularGraph};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScorerError {
    #[error("unknown scorer spec `{0}` (expected toy:<name>[:param] or exec:<path>)")]
    Spec(String),
    #[error("scorer failed: {0}")]
    Failed(String),
}

/// A deterministic property of a molecule.
pub trait PropertyScorer: Send + Sync {
    fn score(&self, g: &MolecularGraph) -> Result<f64, ScorerError>;
    fn name(&self) -> String;
}

/// Number of atoms.
#[derive(Debug, Clone, Copy, Default)]
pub struct AtomCount;

impl PropertyScorer for AtomCount {
    fn score(&self, g: &MolecularGraph) -> Result<f64, ScorerError> {
        Ok(g.n() as f64)
    }

    fn name(&self) -> String {
        "toy:atom-count".into()
    }
}

/// Minus the number of independent cycles (`bonds - atoms + components`).
#[derive(Debug, Clone, Copy, Default)]
pub struct RingPenalty;

impl PropertyScorer for RingPenalty {
    fn score(&self, g: &MolecularGraph) -> Result<f64, ScorerError> {
        let mut parent: Vec<usize> = (0..g.n()).collect();
        fn root(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut cycles = 0;
        for (i, j, _) in g.bonds() {
            let (a, b) = (root(&mut parent, i), root(&mut parent, j));
            if a == b {
                cycles += 1;
            } else {
                parent[a] = b;
            }
        }
        Ok(-(cycles as f64))
    }

    fn name(&self) -> String {
        "toy:ring-penalty".into()
    }
}

/// Fraction of atoms of one type.
#[derive(Debug, Clone)]
pub struct TargetAtomFraction {
    pub atom_type: usize,
    pub symbol: String,
}

impl PropertyScorer for TargetAtomFraction {
    fn score(&self, g: &MolecularGraph) -> Result<f64, ScorerError> {
        if g.n() == 0 {
            return Ok(0.0);
        }
        let hits = g
            .node_types()
            .iter()
            .filter(|&&t| t == self.atom_type)
            .count();
        Ok(hits as f64 / g.n() as f64)
    }

    fn name(&self) -> String {
        format!("toy:fraction:{}", self.symbol)
    }
}

/// A child process speaking the line protocol: one MOLT record followed by
/// `#END`, answered by one number per line.
pub struct ExternalScorer {
    path: String,
    vocab: AtomVocab,
    bonds: BondVocab,
    io: Mutex<(Child, ChildStdin, BufReader<ChildStdout>)>,
}

impl ExternalScorer {
    pub fn spawn(
        path: impl AsRef<Path>,
        vocab: AtomVocab,
        bonds: BondVocab,
    ) -> Result<Self, ScorerError> {
        let path = path.as_ref();
        let mut child = Command::new(path)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| ScorerError::Failed(format!("cannot start {}: {e}", path.display())))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self {
            path: path.display().to_string(),
            vocab,
            bonds,
            io: Mutex::new((child, stdin, stdout)),
        })
    }
}

impl PropertyScorer for ExternalScorer {
    fn score(&self, g: &MolecularGraph) -> Result<f64, ScorerError> {
        let record = write_molt(g, &self.vocab, &self.bonds);
        let mut io = self
            .io
            .lock()
            .map_err(|_| ScorerError::Failed("scorer lock poisoned".into()))?;
        let (_, stdin, stdout) = &mut *io;
        let io_err = |e: std::io::Error| ScorerError::Failed(e.to_string());
        stdin.write_all(record.as_bytes()).map_err(io_err)?;
        stdin.write_all(b"#END\n").map_err(io_err)?;
        stdin.flush().map_err(io_err)?;
        let mut line = String::new();
        if stdout.read_line(&mut line).map_err(io_err)? == 0 {
            return Err(ScorerError::Failed("scorer closed its output".into()));
        }
        let v: f64 = line
            .trim()
            .parse()
            .map_err(|_| ScorerError::Failed(format!("non-numeric reply `{}`", line.trim())))?;
        if !v.is_finite() {
            return Err(ScorerError::Failed(format!(
                "non-finite reply `{}`",
                line.trim()
            )));
        }
        Ok(v)
    }

    fn name(&self) -> String {
        format!("exec:{}", self.path)
    }
}

impl Drop for ExternalScorer {
    fn drop(&mut self) {
        if let Ok(io) = self.io.get_mut() {
            let _ = io.0.kill();
            let _ = io.0.wait();
        }
    }
}

/// `toy:atom-count`, `toy:ring-penalty`, `toy:fraction:<symbol>`, or `exec:<path>`.
pub fn parse_scorer(
    spec: &str,
    vocab: &AtomVocab,
    bonds: &BondVocab,
) -> Result<Box<dyn PropertyScorer>, ScorerError> {
    let bad = || ScorerError::Spec(spec.to_string());
    if let Some(path) = spec.strip_prefix("exec:") {
        return Ok(Box::new(ExternalScorer::spawn(
            path,
            vocab.clone(),
            bonds.clone(),
        )?));
    }
    let rest = spec.strip_prefix("toy:").ok_or_else(bad)?;
    let mut parts = rest.splitn(2, ':');
    match (parts.next(), parts.next()) {
        (Some("atom-count"), None) => Ok(Box::new(AtomCount)),
        (Some("ring-penalty"), None) => Ok(Box::new(RingPenalty)),
        (Some("fraction"), Some(sym)) => {
            let atom_type = vocab.index_of(sym).ok_or_else(bad)?;
            Ok(Box::new(TargetAtomFraction {
                atom_type,
                symbol: sym.to_string(),
            }))
        }
        _ => Err(bad()),
    }
}
