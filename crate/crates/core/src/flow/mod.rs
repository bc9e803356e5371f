//! The autoregressive flow: conditional Gaussian heads over R-GCN prefix
//! encodings, affine transforms, exact likelihood and training.

mod likelihood;
mod train;

pub use likelihood::{forward_transform, inverse_transform, Conditional, LatentSeq, LogLik};
pub use train::{reorder_within, train, TrainConfig, TrainReport};

use graphaf_tensor::checkpoint::{self, CheckpointError};
use graphaf_tensor::{ParamStore, Tape, Tensor, Var};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::FlowError;
use crate::graph::{MolecularGraph, PrefixGraph};
use crate::rgcn::{xavier, RgcnConfig, RgcnLayout};

/// Raw scale outputs are clamped to this range before `exp`.
pub const LOG_ALPHA_CLAMP: f64 = 7.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub atom_types: usize,
    pub bond_types: usize,
    pub layers: usize,
    pub hidden: usize,
    pub include_no_edge: bool,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

impl ModelConfig {
    /// Three layers, width 32.
    pub fn new(atom_types: usize, bond_types: usize) -> Self {
        Self {
            atom_types,
            bond_types,
            layers: 3,
            hidden: 32,
            include_no_edge: true,
            bn_momentum: 0.9,
            bn_eps: 1e-5,
        }
    }

    pub fn edge_categories(&self) -> usize {
        self.bond_types + 1
    }

    pub fn rgcn(&self) -> RgcnConfig {
        RgcnConfig {
            atom_types: self.atom_types,
            bond_types: self.bond_types,
            layers: self.layers,
            hidden: self.hidden,
            include_no_edge: self.include_no_edge,
            bn_eps: self.bn_eps,
        }
    }

    fn validate(&self) -> Result<(), FlowError> {
        let bad = |m: &str| Err(FlowError::Dimension(m.to_string()));
        if self.atom_types == 0 || self.bond_types == 0 {
            return bad("need at least one atom type and one bond type");
        }
        if self.layers == 0 || self.hidden == 0 {
            return bad("layers and hidden width must be positive");
        }
        if !(0.0..1.0).contains(&self.bn_momentum) || self.bn_eps <= 0.0 {
            return bad("batch-norm momentum must be in [0, 1) and eps positive");
        }
        Ok(())
    }
}

/// Two affine layers with `tanh` between them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Head {
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
}

impl Head {
    fn register<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        output: usize,
        rng: Option<&mut R>,
    ) -> Self {
        let w1 = match rng {
            Some(rng) => xavier(input, hidden, rng),
            None => Tensor::zeros(&[input, hidden]),
        };
        Self {
            w1: store.push(format!("{name}.fc1.weight"), w1, true),
            b1: store.push(
                format!("{name}.fc1.bias"),
                Tensor::zeros(&[1, hidden]),
                true,
            ),
            // zero output layer: the flow starts as the identity
            w2: store.push(
                format!("{name}.fc2.weight"),
                Tensor::zeros(&[hidden, output]),
                true,
            ),
            b2: store.push(
                format!("{name}.fc2.bias"),
                Tensor::zeros(&[1, output]),
                true,
            ),
        }
    }

    pub(crate) fn apply(
        &self,
        tape: &mut Tape<'_>,
        vars: &[Var],
        x: Var,
    ) -> Result<Var, FlowError> {
        let a = tape.matmul(x, vars[self.w1])?;
        let a = tape.add_row(a, vars[self.b1])?;
        let a = tape.tanh(a);
        let a = tape.matmul(a, vars[self.w2])?;
        Ok(tape.add_row(a, vars[self.b2])?)
    }
}

/// A generation step: a node, or the edge between node `i` and earlier node `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Step {
    Node(usize),
    Edge(usize, usize),
}

impl Step {
    /// The node whose generation this step belongs to.
    pub fn node(self) -> usize {
        match self {
            Step::Node(i) | Step::Edge(i, _) => i,
        }
    }

    /// State the step conditions on, read from `g`.
    pub fn prefix(self, g: &MolecularGraph) -> PrefixGraph {
        match self {
            Step::Node(i) => PrefixGraph::nodes(g, i),
            Step::Edge(i, j) => PrefixGraph::edge_step(g, i, j),
        }
    }
}

/// Earliest node an edge step of node `i` may reach.
pub fn window_start(i: usize, window: usize) -> usize {
    i.saturating_sub(window)
}

/// Steps for nodes `first..n` in generation order: each node followed by its
/// in-window edges with ascending `j`.
pub fn generation_steps(n: usize, window: usize, first: usize) -> Vec<Step> {
    let mut steps = Vec::new();
    for i in first..n {
        steps.push(Step::Node(i));
        steps.extend((window_start(i, window)..i).map(|j| Step::Edge(i, j)));
    }
    steps
}

/// Model parameters and the layout of every tensor in the store.
#[derive(Debug, Clone)]
pub struct GraphAF {
    config: ModelConfig,
    store: ParamStore,
    rgcn: RgcnLayout,
    node_mu: Head,
    node_alpha: Head,
    edge_mu: Head,
    edge_alpha: Head,
}

impl GraphAF {
    /// Fresh model: Xavier-uniform weights, zero output layers (identity flow).
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self, FlowError> {
        config.validate()?;
        Ok(Self::build(config, Some(rng)))
    }

    fn build<R: Rng + ?Sized>(config: ModelConfig, mut rng: Option<&mut R>) -> Self {
        let mut store = ParamStore::new();
        let (k, d, c) = (config.hidden, config.atom_types, config.edge_categories());
        let rgcn = RgcnLayout::register(&mut store, &config.rgcn(), rng.as_deref_mut());
        let node_mu = Head::register(&mut store, "node_mu", k, k, d, rng.as_deref_mut());
        let node_alpha = Head::register(&mut store, "node_alpha", k, k, d, rng.as_deref_mut());
        let edge_mu = Head::register(&mut store, "edge_mu", 3 * k, k, c, rng.as_deref_mut());
        let edge_alpha = Head::register(&mut store, "edge_alpha", 3 * k, k, c, rng);
        Self {
            config,
            store,
            rgcn,
            node_mu,
            node_alpha,
            edge_mu,
            edge_alpha,
        }
    }

    /// Zero-valued store with the names and shapes a checkpoint must have.
    pub fn schema(config: &ModelConfig) -> ParamStore {
        Self::build::<rand_chacha::ChaCha8Rng>(config.clone(), None).store
    }

    /// Wraps a store that matches [`GraphAF::schema`].
    pub fn from_store(config: ModelConfig, store: ParamStore) -> Result<Self, FlowError> {
        config.validate()?;
        let mut model = Self::build::<rand_chacha::ChaCha8Rng>(config, None);
        if store.len() != model.store.len() {
            return Err(FlowError::Dimension(format!(
                "store has {} tensors, model needs {}",
                store.len(),
                model.store.len()
            )));
        }
        for (a, b) in store.entries().iter().zip(model.store.entries()) {
            if a.name != b.name || a.tensor.shape() != b.tensor.shape() {
                return Err(FlowError::Dimension(format!(
                    "tensor `{}` {:?} does not match `{}` {:?}",
                    a.name,
                    a.tensor.shape(),
                    b.name,
                    b.tensor.shape()
                )));
            }
        }
        model.store = store;
        Ok(model)
    }

    pub fn save_checkpoint(&self) -> String {
        checkpoint::save(&self.store)
    }

    pub fn load_checkpoint(config: ModelConfig, text: &str) -> Result<Self, CheckpointError> {
        let store = checkpoint::load(text, &Self::schema(&config))?;
        Self::from_store(config, store).map_err(|e| CheckpointError::Syntax {
            line: 0,
            msg: e.to_string(),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn rgcn_layout(&self) -> &RgcnLayout {
        &self.rgcn
    }

    /// Adds `N(0, scale²)` noise to every trainable tensor. Handy for testing
    /// away from the identity initialization.
    pub fn perturb<R: Rng + ?Sized>(&mut self, scale: f64, rng: &mut R) {
        let normal = Normal::new(0.0, scale).expect("finite scale");
        for e in self.store.entries_mut() {
            if e.trainable {
                for v in e.tensor.data_mut() {
                    *v += normal.sample(rng);
                }
            }
        }
    }

    /// Folds observed pre-normalization row statistics into the running estimates.
    pub fn update_running_stats(&mut self, mean: &[f64], var: &[f64]) {
        let m = self.config.bn_momentum;
        for (idx, batch) in [(self.rgcn.running_mean, mean), (self.rgcn.running_var, var)] {
            for (r, b) in self.store.tensor_mut(idx).data_mut().iter_mut().zip(batch) {
                *r = m * *r + (1.0 - m) * b;
            }
        }
    }
}
