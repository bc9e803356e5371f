use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use graphaf_core::flow::{train, GraphAF};
use graphaf_core::graph::molt::{parse_molt, write_molt_set};
use graphaf_core::graph::{
    gen_community_graphs, gen_synthetic_molecules, valency_audit, AtomVocab, BondVocab, MolecularGraph,
    SynthConfig,
};
use graphaf_core::metrics::{evaluate_set, mmd_report, EvalOptions};
use graphaf_core::rl::{finetune, lowest_scoring, optimize_constrained, parse_scorer, PropertyScorer};
use graphaf_core::rng::{stream, stream_seed};
use graphaf_core::sampler::sample_batch;

use crate::config::{Dataset, RunConfig};
use crate::error::CliError;
use crate::manifest::{sha256_hex, Outputs};

/// Paths and switches that are not part of the hashed run configuration.
#[derive(Debug, Clone, Default)]
pub struct Io {
    pub checkpoint: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub trace: bool,
    pub csv: bool,
}

/// Command context: validated config, vocabularies and recorded inputs.
pub struct Ctx {
    pub cfg: RunConfig,
    pub io: Io,
    pub vocab: AtomVocab,
    pub bonds: BondVocab,
    inputs: Vec<(String, String)>,
}

impl Ctx {
    pub fn new(cfg: RunConfig, io: Io) -> Result<Self, CliError> {
        cfg.validate()?;
        let (vocab, bonds) = cfg.vocab()?;
        Ok(Self {
            cfg,
            io,
            vocab,
            bonds,
            inputs: Vec::new(),
        })
    }

    fn out_dir(&self) -> PathBuf {
        PathBuf::from(&self.cfg.out)
    }

    fn read_input(&mut self, path: &Path) -> Result<String, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.inputs.push((path.display().to_string(), sha256_hex(text.as_bytes())));
        Ok(text)
    }

    fn dataset(&mut self) -> Result<Vec<MolecularGraph>, CliError> {
        let c = &self.cfg;
        let mut rng = stream(c.seed, "data");
        let data = match c.dataset() {
            Dataset::Synthetic => {
                let mut synth = SynthConfig::default();
                if synth.bond_weights.len() != self.bonds.len() {
                    synth.bond_weights = vec![1.0; self.bonds.len()];
                }
                gen_synthetic_molecules(c.data_count, c.max_atoms, &self.vocab, &self.bonds, &synth, &mut rng)?
            }
            Dataset::Community => gen_community_graphs(c.data_count, c.community_size, c.p_intra, c.p_inter, &mut rng)?,
            Dataset::File(p) => {
                let text = self.read_input(&p)?;
                parse_molt(&text, &self.vocab, &self.bonds, false)
                    .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?
            }
        };
        if data.is_empty() {
            return Err(CliError::Data("dataset is empty".into()));
        }
        Ok(data)
    }

    fn checkpoint_path(&self, default: &str) -> PathBuf {
        self.io.checkpoint.clone().unwrap_or_else(|| self.out_dir().join(default))
    }

    fn load_model(&mut self, path: &Path) -> Result<GraphAF, CliError> {
        let text = self.read_input(path)?;
        GraphAF::load_checkpoint(self.cfg.model()?, &text)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    fn scorer(&self) -> Result<Box<dyn PropertyScorer>, CliError> {
        parse_scorer(&self.cfg.scorer, &self.vocab, &self.bonds).map_err(|e| CliError::Usage(format!("key `scorer`: {e}")))
    }

    fn finish(self, command: &str, outputs: Outputs) -> Result<(), CliError> {
        let p = outputs.finish(command, &self.cfg, &self.inputs)?;
        eprintln!("manifest: {}", p.display());
        Ok(())
    }
}

pub fn gen_data(mut ctx: Ctx) -> Result<(), CliError> {
    let data = ctx.dataset()?;
    let mut out = Outputs::new(&ctx.out_dir())?;
    let p = out.write("data.molt", &write_molt_set(&data, &ctx.vocab, &ctx.bonds))?;
    println!("wrote {} graphs to {}", data.len(), p.display());
    ctx.finish("gen-data", out)
}

pub fn train_cmd(mut ctx: Ctx) -> Result<(), CliError> {
    let data = ctx.dataset()?;
    if let Some(g) = data.iter().find(|g| g.n() > ctx.cfg.max_size) {
        return Err(CliError::Data(format!(
            "dataset has a {}-node graph; max_size is {}",
            g.n(),
            ctx.cfg.max_size
        )));
    }
    let mut model = GraphAF::new(ctx.cfg.model()?, &mut stream(ctx.cfg.seed, "init"))?;
    let report = train(&mut model, &data, &ctx.cfg.train())?;
    let mut nll = String::from("epoch,nll\n");
    for (e, v) in report.epoch_nll.iter().enumerate() {
        println!("epoch {:>4}  nll {v:.6}", e + 1);
        let _ = writeln!(nll, "{},{v:?}", e + 1);
    }
    let mut out = Outputs::new(&ctx.out_dir())?;
    let p = out.write("model.ckpt", &model.save_checkpoint())?;
    out.write("train_nll.csv", &nll)?;
    println!("{} updates on {} graphs; checkpoint {}", report.updates, data.len(), p.display());
    ctx.finish("train", out)
}

pub fn sample(mut ctx: Ctx) -> Result<(), CliError> {
    let path = ctx.checkpoint_path("model.ckpt");
    let model = ctx.load_model(&path)?;
    let cfg = ctx.cfg.sampler();
    let drawn = sample_batch(&model, &ctx.vocab, &ctx.bonds, &cfg, ctx.cfg.samples, stream_seed(ctx.cfg.seed, "sample"))?;
    let graphs: Vec<MolecularGraph> = drawn.iter().map(|(g, _)| g.clone()).collect();
    let valid = graphs.iter().filter(|g| valency_audit(g, &ctx.vocab, &ctx.bonds).is_ok()).count();
    let atoms: usize = graphs.iter().map(|g| g.n()).sum();
    let mut out = Outputs::new(&ctx.out_dir())?;
    out.write("samples.molt", &write_molt_set(&graphs, &ctx.vocab, &ctx.bonds))?;
    if ctx.io.trace {
        let mut text = String::new();
        for (k, (_, t)) in drawn.iter().enumerate() {
            let _ = writeln!(text, "# sample {k}");
            text.push_str(&t.to_text());
        }
        out.write("samples.trace", &text)?;
    }
    println!(
        "{} samples, {valid} valid, mean size {:.2}",
        graphs.len(),
        atoms as f64 / graphs.len().max(1) as f64
    );
    ctx.finish("sample", out)
}

pub fn evaluate(mut ctx: Ctx) -> Result<(), CliError> {
    let input = ctx.io.input.clone().unwrap_or_else(|| ctx.out_dir().join("samples.molt"));
    let text = ctx.read_input(&input)?;
    let samples = parse_molt(&text, &ctx.vocab, &ctx.bonds, true)
        .map_err(|e| CliError::Data(format!("{}: {e}", input.display())))?;
    let train_set = ctx.dataset()?;
    // reconstruction needs a model; an implicit default is used only if present
    let ckpt = ctx.checkpoint_path("model.ckpt");
    let model = if ctx.io.checkpoint.is_some() || ckpt.exists() {
        Some(ctx.load_model(&ckpt)?)
    } else {
        None
    };
    let opts = EvalOptions {
        reconstruction: model.as_ref().map(|m| (m, ctx.cfg.window, stream_seed(ctx.cfg.seed, "reconstruct"))),
    };
    let report = evaluate_set(&samples, &train_set, &ctx.vocab, &ctx.bonds, opts)?;
    let mut text = format!("{}\n{}", report.to_table(), report.to_kv());
    if ctx.cfg.dataset() == Dataset::Community && samples.len() >= 2 {
        let m = mmd_report(&samples, &train_set, 1.0).map_err(|e| CliError::Data(e.to_string()))?;
        let _ = writeln!(text, "mmd_degree = {:?}\nmmd_cluster = {:?}\nmmd_bandwidth = {:?}", m.degree, m.cluster, m.bandwidth);
    }
    let mut out = Outputs::new(&ctx.out_dir())?;
    out.write("report.txt", &text)?;
    if ctx.io.csv {
        let csv = report.to_csv();
        out.write("report.csv", &csv)?;
        print!("{csv}");
    } else {
        print!("{text}");
    }
    ctx.finish("evaluate", out)
}

pub fn finetune_cmd(mut ctx: Ctx) -> Result<(), CliError> {
    let path = ctx.checkpoint_path("model.ckpt");
    let mut model = ctx.load_model(&path)?;
    let scorer = ctx.scorer()?;
    let cfg = ctx.cfg.finetune()?;
    let report = finetune(&mut model, &ctx.vocab, &ctx.bonds, &cfg, scorer.as_ref(), None)?;
    let mut trace = String::from("iteration,reward,score,loss\n");
    for (i, ((r, s), l)) in report.reward_trace.iter().zip(&report.score_trace).zip(&report.loss_trace).enumerate() {
        println!("iter {:>4}  reward {r:.4}  score {s:.4}  loss {l:.5}", i + 1);
        let _ = writeln!(trace, "{},{r:?},{s:?},{l:?}", i + 1);
    }
    if report.failures > 0 {
        eprintln!("{} episodes dropped: scorer failures", report.failures);
    }
    let mut out = Outputs::new(&ctx.out_dir())?;
    out.write("finetuned.ckpt", &model.save_checkpoint())?;
    out.write("reward_trace.csv", &trace)?;
    ctx.finish("finetune", out)
}

pub fn optimize(mut ctx: Ctx) -> Result<(), CliError> {
    let path = ctx.checkpoint_path("finetuned.ckpt");
    let model = ctx.load_model(&path)?;
    let scorer = ctx.scorer()?;
    let data = ctx.dataset()?;
    let picked = lowest_scoring(&data, scorer.as_ref(), ctx.cfg.opt_molecules);
    if picked.is_empty() {
        return Err(CliError::Data("no dataset molecule could be scored".into()));
    }
    let molecules: Vec<MolecularGraph> = picked.iter().map(|&i| data[i].clone()).collect();
    let cfg = ctx.cfg.constrained()?;
    let results = optimize_constrained(&model, &ctx.vocab, &ctx.bonds, &molecules, scorer.as_ref(), &cfg)?;

    let mut csv = String::from("molecule,original_score,delta,improvement,similarity,success\n");
    for (&idx, r) in picked.iter().zip(&results) {
        for o in &r.outcomes {
            let _ = writeln!(
                csv,
                "{idx},{:?},{:?},{:?},{:?},{}",
                r.original_score, o.delta, o.improvement, o.similarity, o.success
            );
        }
    }
    println!("{:>6} {:>12} {:>12} {:>8}", "delta", "improvement", "similarity", "success");
    let n = results.len() as f64;
    for (k, &delta) in cfg.deltas.iter().enumerate() {
        let outs: Vec<_> = results.iter().map(|r| &r.outcomes[k]).collect();
        let wins: Vec<_> = outs.iter().filter(|o| o.success).collect();
        let rate = 100.0 * wins.len() as f64 / n;
        if wins.is_empty() {
            println!("{delta:>6.2} {:>12} {:>12} {rate:>7.1}%", "-", "-");
            continue;
        }
        // means over successful molecules
        let imp = wins.iter().map(|o| o.improvement).sum::<f64>() / wins.len() as f64;
        let sim = wins.iter().map(|o| o.similarity).sum::<f64>() / wins.len() as f64;
        println!("{delta:>6.2} {imp:>12.4} {sim:>12.4} {rate:>7.1}%");
    }
    let failures: usize = results.iter().map(|r| r.failures).sum();
    if failures > 0 {
        eprintln!("{failures} outputs could not be scored");
    }
    let mut out = Outputs::new(&ctx.out_dir())?;
    out.write("constrained.csv", &csv)?;
    ctx.finish("optimize-constrained", out)
}
