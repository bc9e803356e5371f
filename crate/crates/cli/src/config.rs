//! `key = value` run configuration with `#` comments.

use std::fmt::Write as _;
use std::path::PathBuf;

use graphaf_core::flow::{ModelConfig, TrainConfig};
use graphaf_core::graph::{AtomVocab, BondVocab};
use graphaf_core::rl::{ConstrainedConfig, FinetuneConfig, PpoConfig, RewardConfig, RewardShape};
use graphaf_core::sampler::SamplerConfig;
use graphaf_tensor::AdamConfig;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Where training molecules come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Synthetic,
    Community,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out: String,
    pub dataset: String,
    pub data_count: usize,
    pub max_atoms: usize,
    pub community_size: usize,
    pub p_intra: f64,
    pub p_inter: f64,
    pub atoms: String,
    pub bonds: String,
    pub layers: usize,
    pub hidden: usize,
    pub max_size: usize,
    pub window: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub valency_check: bool,
    pub temperature: f64,
    pub max_resample: usize,
    pub samples: usize,
    pub gamma: f64,
    pub reward: String,
    pub t1: f64,
    pub t2: f64,
    pub validity_penalty: f64,
    pub clip_ratio: f64,
    pub ppo_epochs: usize,
    pub warmup: usize,
    pub iterations: usize,
    pub rl_batch: usize,
    pub rl_lr: f64,
    pub scorer: String,
    pub opt_molecules: usize,
    pub opt_samples: usize,
    pub opt_deltas: String,
    pub opt_max_drop: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: "out".into(),
            dataset: "synthetic".into(),
            data_count: 500,
            max_atoms: 12,
            community_size: 6,
            p_intra: 0.7,
            p_inter: 0.05,
            atoms: "auto".into(),
            bonds: "auto".into(),
            layers: 3,
            hidden: 32,
            max_size: 16,
            window: 12,
            epochs: 40,
            batch_size: 32,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            valency_check: true,
            temperature: 1.0,
            max_resample: 100,
            samples: 1000,
            gamma: 0.97,
            reward: "linear".into(),
            t1: 1.0,
            t2: 1.0,
            validity_penalty: -1.0,
            clip_ratio: 0.2,
            ppo_epochs: 4,
            warmup: 0,
            iterations: 50,
            rl_batch: 64,
            rl_lr: 1e-3,
            scorer: "toy:fraction:N".into(),
            opt_molecules: 20,
            opt_samples: 50,
            opt_deltas: "0,0.2,0.4,0.6".into(),
            opt_max_drop: 5,
        }
    }
}

trait Value: Sized {
    fn parse_value(s: &str) -> Option<Self>;
    fn render(&self) -> String;
}

macro_rules! plain_value {
    ($($t:ty),*) => {$(
        impl Value for $t {
            fn parse_value(s: &str) -> Option<Self> {
                s.parse().ok()
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}
plain_value!(u64, usize, String);

impl Value for f64 {
    fn parse_value(s: &str) -> Option<Self> {
        s.parse().ok().filter(|v: &f64| v.is_finite())
    }
    fn render(&self) -> String {
        // shortest representation that round-trips
        format!("{self:?}")
    }
}

impl Value for bool {
    fn parse_value(s: &str) -> Option<Self> {
        match s {
            "true" | "yes" | "on" | "1" => Some(true),
            "false" | "no" | "off" | "0" => Some(false),
            _ => None,
        }
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

macro_rules! keys {
    ($($field:ident),* $(,)?) => {
        #[cfg(test)]
        const KEYS: &[&str] = &[$(stringify!($field)),*];

        impl RunConfig {
            /// Sets one key; unknown keys and unparsable values are usage errors.
            pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
                match key {
                    $(stringify!($field) => {
                        self.$field = Value::parse_value(value).ok_or_else(|| {
                            CliError::Usage(format!("bad value `{value}` for key `{key}`"))
                        })?;
                    })*
                    _ => return Err(CliError::Usage(format!("unknown config key `{key}`"))),
                }
                Ok(())
            }

            /// Every key in a fixed order, one `key = value` per line.
            pub fn render(&self) -> String {
                let mut s = String::new();
                $(let _ = writeln!(s, "{} = {}", stringify!($field), Value::render(&self.$field));)*
                s
            }
        }
    };
}

keys!(
    seed, out, dataset, data_count, max_atoms, community_size, p_intra, p_inter, atoms, bonds,
    layers, hidden, max_size, window, epochs, batch_size, lr, beta1, beta2, valency_check,
    temperature, max_resample, samples, gamma, reward, t1, t2, validity_penalty, clip_ratio,
    ppo_epochs, warmup, iterations, rl_batch, rl_lr, scorer, opt_molecules, opt_samples,
    opt_deltas, opt_max_drop,
);

impl RunConfig {
    #[cfg(test)]
    pub fn keys() -> &'static [&'static str] {
        KEYS
    }

    /// Applies a config file on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", ln + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), CliError> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("override `{kv}` is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.render().as_bytes()))
    }

    pub fn dataset(&self) -> Dataset {
        match self.dataset.as_str() {
            "synthetic" => Dataset::Synthetic,
            "community" => Dataset::Community,
            path => Dataset::File(PathBuf::from(path)),
        }
    }

    pub fn vocab(&self) -> Result<(AtomVocab, BondVocab), CliError> {
        let community = self.dataset() == Dataset::Community;
        let atoms = match (self.atoms.as_str(), community) {
            ("auto", true) => AtomVocab::generic((2 * self.community_size).saturating_sub(1) as u32),
            ("auto", false) => AtomVocab::organic(),
            (spec, _) => AtomVocab::parse(spec).map_err(|e| CliError::Usage(format!("key `atoms`: {e}")))?,
        };
        let bonds = match (self.bonds.as_str(), community) {
            ("auto", true) => BondVocab::single_only(),
            ("auto", false) => BondVocab::standard(),
            (spec, _) => BondVocab::parse(spec).map_err(|e| CliError::Usage(format!("key `bonds`: {e}")))?,
        };
        Ok((atoms, bonds))
    }

    pub fn deltas(&self) -> Result<Vec<f64>, CliError> {
        self.opt_deltas
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|d| (0.0..=1.0).contains(d))
                    .ok_or_else(|| CliError::Usage(format!("key `opt_deltas`: `{t}` is not in [0, 1]")))
            })
            .collect()
    }

    fn reward_shape(&self) -> Result<RewardShape, CliError> {
        match self.reward.as_str() {
            "linear" => Ok(RewardShape::Linear { t1: self.t1 }),
            "exp" => Ok(RewardShape::Exp { t2: self.t2 }),
            other => Err(CliError::Usage(format!("key `reward`: `{other}` (expected linear or exp)"))),
        }
    }

    /// Range checks for every key.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |key: &str, why: &str| Err(CliError::Usage(format!("key `{key}`: {why}")));
        let positive = [
            ("data_count", self.data_count),
            ("max_atoms", self.max_atoms),
            ("community_size", self.community_size),
            ("layers", self.layers),
            ("hidden", self.hidden),
            ("max_size", self.max_size),
            ("window", self.window),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("max_resample", self.max_resample),
            ("ppo_epochs", self.ppo_epochs),
            ("rl_batch", self.rl_batch),
            ("opt_samples", self.opt_samples),
        ];
        for (key, v) in positive {
            if v == 0 {
                return bad(key, "must be positive");
            }
        }
        for (key, p) in [("p_intra", self.p_intra), ("p_inter", self.p_inter)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(key, "must be a probability");
            }
        }
        if !(self.lr > 0.0) {
            return bad("lr", "must be positive");
        }
        if !(self.rl_lr >= 0.0) {
            return bad("rl_lr", "must be non-negative");
        }
        for (key, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(key, "must be in [0, 1)");
            }
        }
        if self.temperature < 0.0 {
            return bad("temperature", "must be non-negative");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma", "must be in (0, 1]");
        }
        if !(self.clip_ratio > 0.0 && self.clip_ratio < 1.0) {
            return bad("clip_ratio", "must be in (0, 1)");
        }
        if self.reward == "exp" && !(self.t2 > 0.0) {
            return bad("t2", "must be positive");
        }
        self.reward_shape()?;
        self.vocab()?;
        self.deltas()?;
        Ok(())
    }

    pub fn model(&self) -> Result<ModelConfig, CliError> {
        let (v, b) = self.vocab()?;
        let mut m = ModelConfig::new(v.len(), b.len());
        m.layers = self.layers;
        m.hidden = self.hidden;
        Ok(m)
    }

    fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig {
            lr,
            beta1: self.beta1,
            beta2: self.beta2,
            ..Default::default()
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            adam: self.adam(self.lr),
            window: self.window,
            seed: self.seed,
        }
    }

    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            max_size: self.max_size,
            window: self.window,
            valency_check: self.valency_check,
            max_resample: self.max_resample,
            temperature: self.temperature,
        }
    }

    pub fn finetune(&self) -> Result<FinetuneConfig, CliError> {
        Ok(FinetuneConfig {
            iterations: self.iterations,
            batch_size: self.rl_batch,
            ppo: PpoConfig {
                clip_ratio: self.clip_ratio,
                epochs: self.ppo_epochs,
                lr: self.rl_lr,
                warmup: self.warmup,
                adam: self.adam(self.rl_lr),
                ..Default::default()
            },
            reward: RewardConfig {
                shape: self.reward_shape()?,
                gamma: self.gamma,
                validity_penalty: self.validity_penalty,
            },
            sampler: self.sampler(),
            seed: self.seed,
        })
    }

    pub fn constrained(&self) -> Result<ConstrainedConfig, CliError> {
        Ok(ConstrainedConfig {
            samples_per_molecule: self.opt_samples,
            deltas: self.deltas()?,
            max_drop: self.opt_max_drop,
            sampler: self.sampler(),
            seed: self.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_round_trips() {
        let mut c = RunConfig::default();
        c.set("lr", "0.005").unwrap();
        c.set("valency_check", "off").unwrap();
        let mut d = RunConfig::default();
        d.apply_text(&c.render()).unwrap();
        assert_eq!(c, d);
        assert_eq!(c.sha256(), d.sha256());
        assert_ne!(c.sha256(), RunConfig::default().sha256());
        assert_eq!(c.render().lines().count(), RunConfig::keys().len());
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let mut c = RunConfig::default();
        let e = c.apply_text("epochs = 3\nbogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("bogus"));
        assert!(c.apply_text("epochs = three").unwrap_err().to_string().contains("epochs"));
        assert!(c.apply_text("just words").is_err());
        assert!(c.set("lr", "NaN").is_err());
        c.apply_text("# comment\n\n  seed = 7  # trailing\n").unwrap();
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn validation_names_the_key() {
        for (k, v) in [("gamma", "0"), ("clip_ratio", "1.5"), ("epochs", "0"), ("atoms", "C:0"), ("opt_deltas", "0.2,2"), ("reward", "cubic")] {
            let mut c = RunConfig::default();
            c.set(k, v).unwrap();
            let e = c.validate().unwrap_err().to_string();
            assert!(e.contains(k), "{e}");
        }
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn community_vocab_is_generic() {
        let mut c = RunConfig::default();
        c.set("dataset", "community").unwrap();
        let (v, b) = c.vocab().unwrap();
        assert_eq!((v.len(), b.len()), (1, 1));
        assert_eq!(v.valence(0), 11);
    }
}
