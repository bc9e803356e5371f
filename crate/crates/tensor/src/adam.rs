//! Bias-corrected Adam.

use thiserror::Error;

use crate::store::ParamStore;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimError {
    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("gradient for parameter `{name}` has shape {got:?}, expected {expected:?}")]
    Shape {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("learning rate must be positive, got {0}")]
    LearningRate(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    /// Zero moments shaped like `params`.
    pub fn new<'t>(config: AdamConfig, params: impl IntoIterator<Item = &'t Tensor>) -> Self {
        let m: Vec<Tensor> = params.into_iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            config,
            v: m.clone(),
            m,
            step: 0,
        }
    }

    pub fn for_store(config: AdamConfig, store: &ParamStore) -> Self {
        Self::new(config, store.entries().iter().map(|e| &e.tensor))
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    /// One update of every parameter. Nothing is modified if any gradient is
    /// non-finite.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<(), OptimError> {
        let names: Vec<String> = (0..params.len()).map(|i| format!("#{i}")).collect();
        let mut refs: Vec<&mut Tensor> = params.iter_mut().collect();
        let grads: Vec<Option<&Tensor>> = grads.iter().map(Some).collect();
        self.apply(&mut refs, &grads, &names)
    }

    /// Updates the trainable entries of `store`; `grads[i]` belongs to entry `i`
    /// and `None` counts as a zero gradient.
    pub fn step_store(
        &mut self,
        store: &mut ParamStore,
        grads: &[Option<Tensor>],
    ) -> Result<(), OptimError> {
        let names: Vec<String> = store.entries().iter().map(|e| e.name.clone()).collect();
        let zeros: Vec<Option<Tensor>> = store
            .entries()
            .iter()
            .zip(grads)
            .map(|(e, g)| (e.trainable && g.is_none()).then(|| Tensor::zeros(e.tensor.shape())))
            .collect();
        let g: Vec<Option<&Tensor>> = store
            .entries()
            .iter()
            .zip(grads.iter().zip(&zeros))
            .map(|(e, (g, z))| if e.trainable { g.as_ref().or(z.as_ref()) } else { None })
            .collect();
        let mut refs: Vec<&mut Tensor> = store.entries_mut().iter_mut().map(|e| &mut e.tensor).collect();
        self.apply(&mut refs, &g, &names)
    }

    fn apply(
        &mut self,
        params: &mut [&mut Tensor],
        grads: &[Option<&Tensor>],
        names: &[String],
    ) -> Result<(), OptimError> {
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        if !(lr > 0.0) {
            return Err(OptimError::LearningRate(lr));
        }
        for (i, g) in grads.iter().enumerate() {
            if let Some(g) = g {
                if g.shape() != params[i].shape() {
                    return Err(OptimError::Shape {
                        name: names[i].clone(),
                        expected: params[i].shape().to_vec(),
                        got: g.shape().to_vec(),
                    });
                }
                if !g.is_finite() {
                    return Err(OptimError::NonFiniteGradient(names[i].clone()));
                }
            }
        }
        self.step += 1;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (i, p) in params.iter_mut().enumerate() {
            let Some(g) = grads[i] else { continue };
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for (k, (pv, &gv)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                m[k] = beta1 * m[k] + (1.0 - beta1) * gv;
                v[k] = beta2 * v[k] + (1.0 - beta2) * gv * gv;
                let mhat = m[k] / bc1;
                let vhat = v[k] / bc2;
                *pv -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
