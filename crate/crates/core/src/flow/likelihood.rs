use graphaf_tensor::{Tape, Tensor, Var};

use super::{generation_steps, GraphAF, Step, LOG_ALPHA_CLAMP};
use crate::error::FlowError;
use crate::graph::{
    argmax, is_bfs_ordered, max_dependency, quantize, DequantizedGraph, MolecularGraph, PrefixGraph,
};
use crate::rgcn::{bind, embeddings_from, encode_batch, NodeEmbeddings};

/// Mean and scale of one step's Gaussian conditional.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditional {
    pub mu: Vec<f64>,
    pub alpha: Vec<f64>,
}

/// `z = eps * alpha + mu`.
pub fn forward_transform(eps: &[f64], mu: &[f64], alpha: &[f64]) -> Vec<f64> {
    eps.iter()
        .zip(mu)
        .zip(alpha)
        .map(|((e, m), a)| e * a + m)
        .collect()
}

/// `eps = (z - mu) / alpha`.
pub fn inverse_transform(z: &[f64], mu: &[f64], alpha: &[f64]) -> Vec<f64> {
    z.iter()
        .zip(mu)
        .zip(alpha)
        .map(|((z, m), a)| (z - m) / a)
        .collect()
}

/// Latent noise per generation step.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSeq {
    pub steps: Vec<Step>,
    pub eps: Vec<Vec<f64>>,
}

/// Log-likelihood of a dequantized graph with its per-step decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLik {
    pub total: f64,
    pub steps: Vec<Step>,
    /// Base log-density plus `sum log(1/alpha)` for each step.
    pub per_step: Vec<f64>,
    /// `sum log(1/alpha)` over all steps.
    pub log_det: f64,
}

pub(crate) struct RecordedLik {
    pub total: Var,
    pub sv: StepVars,
    pub steps: Vec<Step>,
    /// Per-step log-density rows (`rows x 1`) with the step positions they cover.
    pub row_vars: Vec<(Vec<usize>, Var)>,
}

/// Conditionals of a batch of steps, recorded on a tape.
pub(crate) struct StepVars {
    /// Positions (in the step list) of node steps, then of edge steps.
    pub node_rows: Vec<usize>,
    pub edge_rows: Vec<usize>,
    pub node: Option<(Var, Var)>,
    pub edge: Option<(Var, Var)>,
    pub h_raw: Option<Var>,
}

fn positive_scale(tape: &mut Tape<'_>, raw: Var) -> Var {
    let s = tape.clamp(raw, -LOG_ALPHA_CLAMP, LOG_ALPHA_CLAMP);
    tape.exp(s)
}

impl GraphAF {
    /// Records the conditionals of `steps`, whose states are `prefixes`, in one stacked pass.
    pub(crate) fn step_vars(
        &self,
        tape: &mut Tape<'_>,
        vars: &[Var],
        steps: &[Step],
        prefixes: &[&PrefixGraph],
    ) -> Result<StepVars, FlowError> {
        let enc = encode_batch(
            tape,
            vars,
            &self.store,
            &self.rgcn,
            &self.config.rgcn(),
            prefixes,
        )?;
        let mut node_rows = Vec::new();
        let mut edge_rows = Vec::new();
        let (mut gi, mut hi, mut hj) = (Vec::new(), Vec::new(), Vec::new());
        for (t, s) in steps.iter().enumerate() {
            match *s {
                Step::Node(_) => node_rows.push(t),
                Step::Edge(i, j) => {
                    edge_rows.push(t);
                    gi.push(t);
                    hi.push(enc.offsets[t] + i);
                    hj.push(enc.offsets[t] + j);
                }
            }
        }
        let node = if node_rows.is_empty() {
            None
        } else {
            let x = tape.gather_rows(enc.graph, &node_rows)?;
            let mu = self.node_mu.apply(tape, vars, x)?;
            let raw = self.node_alpha.apply(tape, vars, x)?;
            Some((mu, positive_scale(tape, raw)))
        };
        let edge = if edge_rows.is_empty() {
            None
        } else {
            let h = enc.h.expect("edge steps have non-empty prefixes");
            let parts = [
                tape.gather_rows(enc.graph, &gi)?,
                tape.gather_rows(h, &hi)?,
                tape.gather_rows(h, &hj)?,
            ];
            let x = tape.concat(&parts, 1)?;
            let mu = self.edge_mu.apply(tape, vars, x)?;
            let raw = self.edge_alpha.apply(tape, vars, x)?;
            Some((mu, positive_scale(tape, raw)))
        };
        Ok(StepVars {
            node_rows,
            edge_rows,
            node,
            edge,
            h_raw: enc.h_raw,
        })
    }

    /// Conditionals of `steps` as plain values, in step order.
    pub fn conditionals_for(
        &self,
        steps: &[Step],
        prefixes: &[&PrefixGraph],
    ) -> Result<Vec<Conditional>, FlowError> {
        let mut tape = Tape::new();
        let vars = bind(&mut tape, &self.store);
        let sv = self.step_vars(&mut tape, &vars, steps, prefixes)?;
        let mut out = vec![
            Conditional {
                mu: Vec::new(),
                alpha: Vec::new()
            };
            steps.len()
        ];
        for (rows, pair) in [(&sv.node_rows, sv.node), (&sv.edge_rows, sv.edge)] {
            if let Some((mu, alpha)) = pair {
                for (r, &t) in rows.iter().enumerate() {
                    out[t] = Conditional {
                        mu: tape.value(mu).row_slice(r).to_vec(),
                        alpha: tape.value(alpha).row_slice(r).to_vec(),
                    };
                }
            }
        }
        Ok(out)
    }

    /// Conditional of a single step given its state.
    pub fn step_conditional(
        &self,
        prefix: &PrefixGraph,
        step: Step,
    ) -> Result<Conditional, FlowError> {
        Ok(self.conditionals_for(&[step], &[prefix])?.remove(0))
    }

    /// `(mu, alpha)` of the node head for a pooled prefix embedding.
    pub fn node_conditional(&self, embedding: &[f64]) -> Result<Conditional, FlowError> {
        self.head_values(&[embedding], true)
    }

    /// `(mu, alpha)` of the edge head for `[graph embedding, H_i, H_j]`.
    pub fn edge_conditional(
        &self,
        graph: &[f64],
        h_i: &[f64],
        h_j: &[f64],
    ) -> Result<Conditional, FlowError> {
        self.head_values(&[graph, h_i, h_j], false)
    }

    fn head_values(&self, parts: &[&[f64]], node: bool) -> Result<Conditional, FlowError> {
        let x: Vec<f64> = parts.concat();
        let mut tape = Tape::new();
        let vars = bind(&mut tape, &self.store);
        let x = tape.constant(Tensor::row(x));
        let (mh, ah) = if node {
            (self.node_mu, self.node_alpha)
        } else {
            (self.edge_mu, self.edge_alpha)
        };
        let mu = mh.apply(&mut tape, &vars, x)?;
        let raw = ah.apply(&mut tape, &vars, x)?;
        let alpha = positive_scale(&mut tape, raw);
        Ok(Conditional {
            mu: tape.value(mu).data().to_vec(),
            alpha: tape.value(alpha).data().to_vec(),
        })
    }

    /// Encodes one prefix.
    pub fn encode(&self, prefix: &PrefixGraph) -> Result<NodeEmbeddings, FlowError> {
        if prefix.is_empty() {
            return Err(FlowError::Dimension("cannot encode an empty prefix".into()));
        }
        Ok(self.encode_prefixes(&[prefix])?.remove(0))
    }

    /// Encodes the first `sizes[t]` nodes of `g` for each `t`, in one stacked pass.
    pub fn encode_prefix_batch(
        &self,
        g: &MolecularGraph,
        sizes: &[usize],
    ) -> Result<Vec<NodeEmbeddings>, FlowError> {
        if let Some(&m) = sizes.iter().find(|&&m| m > g.n()) {
            return Err(FlowError::TooLarge { n: m, max: g.n() });
        }
        let prefixes: Vec<PrefixGraph> = sizes.iter().map(|&m| PrefixGraph::nodes(g, m)).collect();
        self.encode_prefixes(&prefixes.iter().collect::<Vec<_>>())
    }

    fn encode_prefixes(&self, prefixes: &[&PrefixGraph]) -> Result<Vec<NodeEmbeddings>, FlowError> {
        let mut tape = Tape::new();
        let vars = bind(&mut tape, &self.store);
        let cfg = self.config.rgcn();
        let enc = encode_batch(&mut tape, &vars, &self.store, &self.rgcn, &cfg, prefixes)?;
        Ok(prefixes
            .iter()
            .enumerate()
            .map(|(t, p)| embeddings_from(&tape, &enc, t, p.len(), cfg.hidden))
            .collect())
    }

    /// Checks that `g` fits the model, is BFS ordered and respects the window.
    pub(crate) fn check_graph(&self, g: &MolecularGraph, window: usize) -> Result<(), FlowError> {
        is_bfs_ordered(g).map_err(FlowError::NotBfsOrdered)?;
        self.check_shape(g, window)
    }

    /// Vocabulary and window checks only: the flow map itself is defined for
    /// any node order, the BFS requirement belongs to density evaluation.
    fn check_shape(&self, g: &MolecularGraph, window: usize) -> Result<(), FlowError> {
        if g.n() == 0 {
            return Err(FlowError::Dimension("empty graph".into()));
        }
        if g.bond_types() != self.config.bond_types {
            return Err(FlowError::Dimension(format!(
                "graph has {} bond types, model {}",
                g.bond_types(),
                self.config.bond_types
            )));
        }
        if let Some(&t) = g
            .node_types()
            .iter()
            .find(|&&t| t >= self.config.atom_types)
        {
            return Err(FlowError::Dimension(format!(
                "atom type {t} outside the model vocabulary"
            )));
        }
        if max_dependency(g) > window {
            let (i, j) = g
                .bonds()
                .into_iter()
                .map(|(a, b, _)| (b, a))
                .find(|(b, a)| b - a > window)
                .expect("some bond exceeds the window");
            return Err(FlowError::WindowExceeded { i, j, window });
        }
        Ok(())
    }

    fn check_latent_dims(&self, g: &MolecularGraph, z: &DequantizedGraph) -> Result<(), FlowError> {
        if z.n != g.n() || z.d != self.config.atom_types || z.c != self.config.edge_categories() {
            return Err(FlowError::Dimension(format!(
                "dequantized graph is n={}, d={}, c={}; expected n={}, d={}, c={}",
                z.n,
                z.d,
                z.c,
                g.n(),
                self.config.atom_types,
                self.config.edge_categories()
            )));
        }
        Ok(())
    }

    /// Records the log-likelihood of `z` (the dequantization of `g`) on `tape`,
    /// every step conditioned in one stacked pass.
    pub(crate) fn record_log_likelihood(
        &self,
        tape: &mut Tape<'_>,
        vars: &[Var],
        g: &MolecularGraph,
        z: &DequantizedGraph,
        window: usize,
    ) -> Result<RecordedLik, FlowError> {
        self.check_graph(g, window)?;
        self.check_latent_dims(g, z)?;
        let steps = generation_steps(g.n(), window, 0);
        let prefixes: Vec<PrefixGraph> = steps.iter().map(|s| s.prefix(g)).collect();
        let sv = self.step_vars(tape, vars, &steps, &prefixes.iter().collect::<Vec<_>>())?;
        let mut parts = Vec::with_capacity(2);
        let mut row_vars = Vec::with_capacity(2);
        for (rows, pair, width) in [(&sv.node_rows, sv.node, z.d), (&sv.edge_rows, sv.edge, z.c)] {
            let Some((mu, alpha)) = pair else { continue };
            let mut data = Vec::with_capacity(rows.len() * width);
            for &t in rows {
                data.extend_from_slice(match steps[t] {
                    Step::Node(i) => z.node(i),
                    Step::Edge(i, j) => z.edge(i, j),
                });
            }
            let x = tape.constant(Tensor::matrix(rows.len(), width, data));
            let lp = tape.gaussian_logpdf(x, mu, alpha)?;
            let rs = tape.row_sums(lp)?;
            parts.push(rs);
            row_vars.push((rows.clone(), rs));
        }
        let total = match parts[..] {
            [a] => tape.sum(a),
            [a, b] => {
                let (a, b) = (tape.sum(a), tape.sum(b));
                tape.add(a, b)?
            }
            _ => unreachable!("at least the first node step exists"),
        };
        Ok(RecordedLik {
            total,
            sv,
            steps,
            row_vars,
        })
    }

    /// Records the log-likelihood on a caller-owned tape. `vars` must hold one
    /// variable per store entry, in store order.
    pub fn log_likelihood_on_tape(
        &self,
        tape: &mut Tape<'_>,
        vars: &[Var],
        g: &MolecularGraph,
        z: &DequantizedGraph,
        window: usize,
    ) -> Result<Var, FlowError> {
        if vars.len() != self.store.len() {
            return Err(FlowError::Dimension(format!(
                "{} variables for {} store entries",
                vars.len(),
                self.store.len()
            )));
        }
        Ok(self.record_log_likelihood(tape, vars, g, z, window)?.total)
    }

    /// Exact log-likelihood of the dequantized graph `z` under the flow,
    /// with all prefixes encoded in parallel. `g` must equal `quantize(z)`.
    pub fn log_likelihood_parallel(
        &self,
        g: &MolecularGraph,
        z: &DequantizedGraph,
        window: usize,
    ) -> Result<LogLik, FlowError> {
        let mut tape = Tape::new();
        let vars = bind(&mut tape, &self.store);
        let rec = self.record_log_likelihood(&mut tape, &vars, g, z, window)?;
        let mut per_step = vec![0.0; rec.steps.len()];
        for (rows, v) in &rec.row_vars {
            for (r, &t) in rows.iter().enumerate() {
                per_step[t] = tape.value(*v).data()[r];
            }
        }
        let mut log_det = 0.0;
        for (rows, pair) in [
            (&rec.sv.node_rows, rec.sv.node),
            (&rec.sv.edge_rows, rec.sv.edge),
        ] {
            let Some((_, alpha)) = pair else { continue };
            for r in 0..rows.len() {
                log_det -= tape
                    .value(alpha)
                    .row_slice(r)
                    .iter()
                    .map(|a| a.ln())
                    .sum::<f64>();
            }
        }
        Ok(LogLik {
            total: tape.value(rec.total).item(),
            steps: rec.steps,
            per_step,
            log_det,
        })
    }

    /// Reference likelihood: one independently built prefix per step, strictly
    /// in generation order.
    pub fn log_likelihood_sequential(
        &self,
        g: &MolecularGraph,
        z: &DequantizedGraph,
        window: usize,
    ) -> Result<LogLik, FlowError> {
        self.check_graph(g, window)?;
        self.check_latent_dims(g, z)?;
        let steps = generation_steps(g.n(), window, 0);
        let mut per_step = Vec::with_capacity(steps.len());
        let mut total = 0.0;
        let mut log_det = 0.0;
        for &step in &steps {
            let (prefix, x) = match step {
                Step::Node(i) => (
                    PrefixGraph::from_parts(g.node_types()[..i].to_vec(), decided(&g.prefix(i))),
                    z.node(i),
                ),
                Step::Edge(i, j) => {
                    let mut p = PrefixGraph::from_parts(
                        g.node_types()[..=i].to_vec(),
                        decided(&g.prefix(i + 1)),
                    );
                    for jp in j..i {
                        p.set(i, jp, None);
                    }
                    (p, z.edge(i, j))
                }
            };
            let c = self.step_conditional(&prefix, step)?;
            let v = gaussian_row(x, &c.mu, &c.alpha);
            log_det -= c.alpha.iter().map(|a| a.ln()).sum::<f64>();
            total += v;
            per_step.push(v);
        }
        Ok(LogLik {
            total,
            steps,
            per_step,
            log_det,
        })
    }

    /// Maps a dequantized graph to its latent noise. The conditioning graph is
    /// `quantize(z)`.
    pub fn inverse(&self, z: &DequantizedGraph, window: usize) -> Result<LatentSeq, FlowError> {
        let g = quantize(z)?;
        self.check_shape(&g, window)?;
        self.check_latent_dims(&g, z)?;
        let steps = generation_steps(g.n(), window, 0);
        let prefixes: Vec<PrefixGraph> = steps.iter().map(|s| s.prefix(&g)).collect();
        let conds = self.conditionals_for(&steps, &prefixes.iter().collect::<Vec<_>>())?;
        let eps = steps
            .iter()
            .zip(&conds)
            .map(|(s, c)| {
                let x = match *s {
                    Step::Node(i) => z.node(i),
                    Step::Edge(i, j) => z.edge(i, j),
                };
                inverse_transform(x, &c.mu, &c.alpha)
            })
            .collect();
        Ok(LatentSeq { steps, eps })
    }

    /// Runs the flow forward on `latent`, decoding each step by argmax and
    /// conditioning later steps on the decoded prefix.
    pub fn decode(
        &self,
        latent: &LatentSeq,
    ) -> Result<(MolecularGraph, DequantizedGraph), FlowError> {
        let n = latent.steps.iter().map(|s| s.node() + 1).max().unwrap_or(0);
        let (d, c) = (self.config.atom_types, self.config.edge_categories());
        let mut g = MolecularGraph::new(Vec::new(), self.config.bond_types);
        let mut z = DequantizedGraph {
            n,
            d,
            c,
            zx: vec![0.0; n * d],
            za: vec![0.0; n * n.saturating_sub(1) / 2 * c],
        };
        for (&step, eps) in latent.steps.iter().zip(&latent.eps) {
            let prefix = match step {
                Step::Node(i) if i == g.n() => PrefixGraph::nodes(&g, i),
                Step::Edge(i, j) if i + 1 == g.n() && j < i => PrefixGraph::edge_step(&g, i, j),
                _ => {
                    return Err(FlowError::Dimension(format!(
                        "step {step:?} out of generation order"
                    )))
                }
            };
            let cond = self.step_conditional(&prefix, step)?;
            let zs = forward_transform(eps, &cond.mu, &cond.alpha);
            let k = argmax(&zs)?;
            match step {
                Step::Node(i) => {
                    g.push_node(k);
                    z.node_mut(i).copy_from_slice(&zs);
                }
                Step::Edge(i, j) => {
                    g.set_edge(i, j, k);
                    z.edge_mut(i, j).copy_from_slice(&zs);
                }
            }
        }
        Ok((g, z))
    }
}

fn decided(g: &MolecularGraph) -> Vec<Option<usize>> {
    let m = g.n();
    (0..m * m)
        .map(|k| {
            if k / m == k % m {
                None
            } else {
                Some(g.edge(k / m, k % m))
            }
        })
        .collect()
}

/// Sum over a row of `log N(x; mu, alpha²)`, same arithmetic as the tape op.
fn gaussian_row(x: &[f64], mu: &[f64], alpha: &[f64]) -> f64 {
    let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    x.iter()
        .zip(mu)
        .zip(alpha)
        .map(|((x, m), a)| {
            let s = (x - m) / a;
            -half_ln_2pi - a.ln() - 0.5 * s * s
        })
        .sum()
}
