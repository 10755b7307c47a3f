//! generate → train → evaluate, per seed, with resumable on-disk stages.
//!
//! Each seed writes into `<output_dir>/seed-<seed>/`. A stage records a stamp
//! with the SHA-256 of its inputs (the run-determining config, the seed and
//! the input files) and of every output. A stage whose stamp matches and
//! whose outputs are intact is skipped.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use gcarl_core::estimator::{extract_graph, extract_latents, train_with, RegressionModel, TrainOutcome};
use gcarl_core::evaluation::{evaluate, roc_sweep, EvalReport};
use gcarl_core::graphs::{check_all, gen_cyclic_confounded, gen_dag_sim1, gen_grn_dag_with, GroupedGraph};
use gcarl_core::grn::simulate_grn;
use gcarl_core::mixing::{gen_mixing, graph_hash, mix, GroupedDataset, MixingModel};
use gcarl_core::rng::derive_seed;
use gcarl_core::sampler::{ancestral_sample, gibbs_sample, mask_confounders, LatentSamples};
use gcarl_core::GroupLayout;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, PhiConfig, Regime};
use crate::error::{Error, Result};
use crate::formats::{
    loss_csv, metrics_csv, read_dataset, read_json, roc_csv, write_bytes, write_dataset, write_json, EvalFile,
    GraphFile, MixingFile, ModelFile, SummaryFile, TrainingMeta,
};

const GRAPH_TAG: u64 = 1;
const LATENT_TAG: u64 = 2;
const MIXING_TAG: u64 = 3;
const INIT_TAG: u64 = 4;
const TRAIN_TAG: u64 = 5;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Ignore stamps and recompute every stage.
    pub force: bool,
    pub verbose: bool,
    /// Worker threads for multi-seed experiments; 0 or 1 runs sequentially.
    pub threads: usize,
}

impl RunOptions {
    fn log(&self, msg: impl FnOnce() -> String) {
        if self.verbose {
            eprintln!("{}", msg());
        }
    }
}

/// File names inside a seed directory.
pub struct RunPaths {
    pub dir: PathBuf,
}

impl RunPaths {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> Self {
        Self { dir: cfg.output_dir.join(format!("seed-{seed}")) }
    }
    pub fn graph(&self) -> PathBuf {
        self.dir.join("graph.json")
    }
    /// True latents, confounders removed; same binary layout as the dataset.
    pub fn latents(&self) -> PathBuf {
        self.dir.join("latents.bin")
    }
    pub fn dataset(&self) -> PathBuf {
        self.dir.join("dataset.bin")
    }
    pub fn mixing(&self) -> PathBuf {
        self.dir.join("mixing.json")
    }
    pub fn model(&self) -> PathBuf {
        self.dir.join("model.json")
    }
    pub fn loss(&self) -> PathBuf {
        self.dir.join("loss.csv")
    }
    pub fn report(&self) -> PathBuf {
        self.dir.join("report.json")
    }
    pub fn metrics(&self) -> PathBuf {
        self.dir.join("metrics.csv")
    }
    pub fn roc(&self) -> PathBuf {
        self.dir.join("roc.csv")
    }
    pub fn check(&self) -> PathBuf {
        self.dir.join("check.json")
    }
    fn stamp(&self, stage: &str) -> PathBuf {
        self.dir.join("stamps").join(format!("{stage}.json"))
    }
}

/// Everything drawn from the generative model for one seed.
#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub graph: GroupedGraph,
    /// Observable latents.
    pub latents: LatentSamples,
    pub mixing: MixingModel,
    pub data: GroupedDataset,
}

pub fn generate(cfg: &ExperimentConfig, seed: u64) -> Result<Generated> {
    cfg.validate()?;
    let (m, d, n) = (cfg.groups, cfg.dim, cfg.n);
    let (gseed, sseed) = (derive_seed(seed, GRAPH_TAG), derive_seed(seed, LATENT_TAG));
    let phi = cfg.phi();
    let (graph, full) = match (&cfg.regime, &cfg.phi) {
        (Regime::Sim1, _) => {
            let g = gen_dag_sim1(m, d, gseed, cfg.weight_range)?;
            let s = ancestral_sample(&g, &phi, n, sseed)?;
            (g, s)
        }
        (Regime::Sim2, PhiConfig::GaussRelu { sweeps }) => {
            let g = gen_cyclic_confounded(m, d, gseed)?;
            let s = gibbs_sample(&g, &phi, n, *sweeps, sseed)?;
            (g, s)
        }
        (Regime::Grn, PhiConfig::GrnHill(p)) => {
            let params = p.params();
            let g = gen_grn_dag_with(m, d, gseed, params.interaction_magnitude)?;
            let s = simulate_grn(&g, &params, n, sseed)?;
            (g, s)
        }
        _ => unreachable!("pairing is validated"),
    };
    let latents = mask_confounders(&full, &graph);
    if !latents.values.is_finite() {
        return Err(Error::Numeric("latent samples are not finite".into()));
    }
    let mixing_seed = derive_seed(seed, MIXING_TAG);
    let mixing = gen_mixing(latents.layout.dims(), cfg.mixing_layers, mixing_seed)?;
    let mut data = mix(&mixing, &latents)?;
    data.provenance.graph_hash = graph_hash(&graph);
    data.provenance.mixing_seed = mixing_seed;
    data.provenance.phi_kind = phi.kind_name().into();
    Ok(Generated { graph, latents, mixing, data })
}

pub fn initial_model(cfg: &ExperimentConfig, seed: u64, layout: &GroupLayout) -> Result<RegressionModel> {
    RegressionModel::new(layout.clone(), cfg.feature_layers(), cfg.psi.spec(), derive_seed(seed, INIT_TAG))
        .map_err(|e| Error::Config(e.to_string()))
}

pub fn fit(cfg: &ExperimentConfig, seed: u64, data: &GroupedDataset, opts: &RunOptions) -> Result<TrainOutcome> {
    let tcfg = cfg.train.with_seed(derive_seed(seed, TRAIN_TAG));
    let model = initial_model(cfg, seed, &data.layout)?;
    Ok(train_with(model, data, &tcfg, |it, loss| opts.log(|| format!("seed {seed}: iteration {it} loss {loss:.5}")))?)
}

pub fn score(cfg: &ExperimentConfig, model: &RegressionModel, data: &GroupedDataset, latents: &LatentSamples, graph: &GroupedGraph) -> Result<EvalReport> {
    let h = extract_latents(model, data)?;
    let est = extract_graph(model);
    Ok(evaluate(&h, &latents.values, &est.weights, graph, &cfg.eval_options())?)
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn file_hash(path: &Path) -> Result<String> {
    fs::read(path).map(|b| sha256_hex(&b)).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Stamp {
    stage: String,
    input: String,
    outputs: Vec<(String, String)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageOutcome {
    Ran,
    /// Stamp and outputs matched; nothing was recomputed.
    Reused,
}

fn stage_input(stage: &str, cfg: &ExperimentConfig, seed: u64, inputs: &[PathBuf]) -> Result<String> {
    let mut text = format!("{stage}\n{}\n{seed}\n", cfg.run_identity());
    for p in inputs {
        text.push_str(&file_hash(p)?);
        text.push('\n');
    }
    Ok(sha256_hex(text.as_bytes()))
}

fn up_to_date(paths: &RunPaths, stage: &str, input: &str) -> bool {
    let Ok(stamp) = read_json::<Stamp>(&paths.stamp(stage)) else { return false };
    stamp.stage == stage
        && stamp.input == input
        && stamp.outputs.iter().all(|(name, hash)| file_hash(&paths.dir.join(name)).is_ok_and(|h| &h == hash))
}

/// Runs `work` unless the stage is current, then stamps its outputs.
fn run_stage(
    paths: &RunPaths,
    stage: &str,
    input: String,
    outputs: &[PathBuf],
    opts: &RunOptions,
    work: impl FnOnce() -> Result<()>,
) -> Result<StageOutcome> {
    if !opts.force && up_to_date(paths, stage, &input) {
        opts.log(|| format!("{}: {stage} is up to date", paths.dir.display()));
        return Ok(StageOutcome::Reused);
    }
    work()?;
    let mut recorded = Vec::new();
    for p in outputs {
        let name = p.file_name().unwrap().to_string_lossy().into_owned();
        recorded.push((name, file_hash(p)?));
    }
    write_json(&paths.stamp(stage), &Stamp { stage: stage.into(), input, outputs: recorded })?;
    Ok(StageOutcome::Ran)
}

pub fn cmd_generate(cfg: &ExperimentConfig, seed: u64, opts: &RunOptions) -> Result<StageOutcome> {
    let p = RunPaths::new(cfg, seed);
    let input = stage_input("generate", cfg, seed, &[])?;
    let outputs = [p.graph(), p.latents(), p.dataset(), p.mixing()];
    run_stage(&p, "generate", input, &outputs, opts, || {
        opts.log(|| format!("seed {seed}: generating {} data", cfg.regime.name()));
        let g = generate(cfg, seed)?;
        write_json(&p.graph(), &GraphFile::from_graph(&g.graph))?;
        write_dataset(&p.latents(), &g.latents.values, &g.latents.layout)?;
        write_dataset(&p.dataset(), &g.data.x, &g.data.layout)?;
        write_json(&p.mixing(), &MixingFile::from_model(&g.mixing, g.data.provenance.mixing_seed))
    })
}

fn load_dataset(path: &Path) -> Result<GroupedDataset> {
    let (x, layout) = read_dataset(path)?;
    GroupedDataset::new(x, layout).map_err(|e| Error::format(path, e.to_string()))
}

fn load_model(path: &Path) -> Result<RegressionModel> {
    read_json::<ModelFile>(path)?.to_model().map_err(|m| Error::format(path, m))
}

fn load_graph(path: &Path) -> Result<GroupedGraph> {
    read_json::<GraphFile>(path)?.to_graph().map_err(|m| Error::format(path, m))
}

pub fn cmd_train(cfg: &ExperimentConfig, seed: u64, opts: &RunOptions) -> Result<StageOutcome> {
    let p = RunPaths::new(cfg, seed);
    let input = stage_input("train", cfg, seed, &[p.dataset()])?;
    run_stage(&p, "train", input, &[p.model(), p.loss()], opts, || {
        let data = load_dataset(&p.dataset())?;
        let out = fit(cfg, seed, &data, opts)?;
        let meta = TrainingMeta::new(&cfg.train.with_seed(derive_seed(seed, TRAIN_TAG)), out.final_loss);
        write_json(&p.model(), &ModelFile::from_model(&out.model, meta))?;
        write_bytes(&p.loss(), loss_csv(&out.trace).as_bytes())
    })
}

fn eval_inputs(p: &RunPaths) -> [PathBuf; 4] {
    [p.model(), p.dataset(), p.latents(), p.graph()]
}

fn load_eval_inputs(p: &RunPaths) -> Result<(RegressionModel, GroupedDataset, LatentSamples, GroupedGraph)> {
    let model = load_model(&p.model())?;
    let data = load_dataset(&p.dataset())?;
    let (values, layout) = read_dataset(&p.latents())?;
    Ok((model, data, LatentSamples { values, layout }, load_graph(&p.graph())?))
}

pub fn cmd_eval(cfg: &ExperimentConfig, seed: u64, opts: &RunOptions) -> Result<EvalFile> {
    let p = RunPaths::new(cfg, seed);
    let input = stage_input("eval", cfg, seed, &eval_inputs(&p))?;
    run_stage(&p, "eval", input, &[p.report(), p.metrics(), p.roc()], opts, || {
        let (model, data, latents, graph) = load_eval_inputs(&p)?;
        let report = score(cfg, &model, &data, &latents, &graph)?;
        let file = EvalFile::new(seed, &report, cfg.threshold_pct, cfg.rank_corr);
        write_json(&p.report(), &file)?;
        write_bytes(&p.metrics(), metrics_csv(&[file.metrics()]).as_bytes())?;
        write_bytes(&p.roc(), roc_csv(&report.roc).as_bytes())
    })?;
    read_json(&p.report())
}

/// The threshold sweep alone; rewrites `roc.csv`.
pub fn cmd_roc(cfg: &ExperimentConfig, seed: u64) -> Result<PathBuf> {
    let p = RunPaths::new(cfg, seed);
    let (model, data, latents, graph) = load_eval_inputs(&p)?;
    let report = score(cfg, &model, &data, &latents, &graph)?;
    // `score` already oriented the estimate when transposition is allowed
    let weights = extract_graph(&model).weights;
    let weights = if report.transposed { weights.transpose() } else { weights };
    let roc = roc_sweep(&weights, &graph.observable_subgraph(), &report.assignment)?;
    write_bytes(&p.roc(), roc_csv(&roc).as_bytes())?;
    Ok(p.roc())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub groups: [usize; 2],
    pub c1: bool,
    pub c1_alt: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub rows_after_zero_removal: usize,
    pub numeric_rank: usize,
    pub every_variable_has_neighbor: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckFile {
    pub a1: Vec<bool>,
    pub directed: bool,
    pub pairs: Vec<PairEntry>,
    pub rank_details: Vec<RankEntry>,
}

impl CheckFile {
    pub fn summary(&self) -> String {
        let mark = |b: bool| if b { "yes" } else { "no" };
        let mut s = format!("A1 per group: {:?}\ninter-group edges directed: {}\n", self.a1.iter().map(|&b| mark(b)).collect::<Vec<_>>(), mark(self.directed));
        for p in &self.pairs {
            s.push_str(&format!("groups {}-{}: C1 {}, C'1 {}\n", p.groups[0], p.groups[1], mark(p.c1), mark(p.c1_alt)));
        }
        s
    }
}

/// Assumption checks on the observable part of a graph file.
pub fn cmd_check(graph_path: &Path) -> Result<CheckFile> {
    let g = load_graph(graph_path)?;
    let r = check_all(&g, true);
    Ok(CheckFile {
        a1: r.per_group_a1,
        directed: r.directed,
        pairs: r
            .per_pair_c1
            .iter()
            .map(|(&(m, mp), &c1)| PairEntry { groups: [m, mp], c1, c1_alt: r.per_pair_c1_alt[&(m, mp)] })
            .collect(),
        rank_details: r
            .rank_details
            .iter()
            .map(|d| RankEntry {
                rows_after_zero_removal: d.rows_after_zero_removal,
                numeric_rank: d.numeric_rank,
                every_variable_has_neighbor: d.every_variable_has_neighbor,
            })
            .collect(),
    })
}

pub fn run_seed(cfg: &ExperimentConfig, seed: u64, opts: &RunOptions) -> Result<EvalFile> {
    cmd_generate(cfg, seed, opts)?;
    cmd_train(cfg, seed, opts)?;
    cmd_eval(cfg, seed, opts)
}

/// Every seed, then `config.json`, `metrics.csv`, `summary.json` and
/// `summary.txt` in the output directory.
pub fn cmd_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<SummaryFile> {
    cfg.validate()?;
    let results: Vec<Mutex<Option<Result<EvalFile>>>> = cfg.seeds.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(&seed) = cfg.seeds.get(i) else { break };
        *results[i].lock().unwrap() = Some(run_seed(cfg, seed, opts));
    };
    let threads = opts.threads.clamp(1, cfg.seeds.len());
    if threads == 1 {
        worker();
    } else {
        std::thread::scope(|s| {
            for _ in 0..threads {
                s.spawn(worker);
            }
        });
    }
    let mut rows = Vec::with_capacity(cfg.seeds.len());
    for r in results {
        rows.push(r.into_inner().unwrap().expect("every seed ran")?.metrics());
    }
    let summary = SummaryFile::new(rows);
    let dir = &cfg.output_dir;
    write_bytes(&dir.join("config.json"), cfg.to_json().as_bytes())?;
    write_bytes(&dir.join("metrics.csv"), metrics_csv(&summary.runs).as_bytes())?;
    write_json(&dir.join("summary.json"), &summary)?;
    write_bytes(&dir.join("summary.txt"), summary.table().as_bytes())?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{PsiConfig, ScopeConfig};

    fn tiny(dir: &Path) -> ExperimentConfig {
        let mut c = ExperimentConfig::sim1(dir);
        c.dim = 2;
        c.mixing_layers = 1;
        c.n = 256;
        c.seeds = vec![3];
        c.train.batch_size = 64;
        c.train.iterations = 20;
        c.train.eval_every = 10;
        c
    }

    #[test]
    fn generation_is_deterministic() {
        let c = tiny(Path::new("unused"));
        let (a, b) = (generate(&c, 3).unwrap(), generate(&c, 3).unwrap());
        assert_eq!(a, b);
        assert_ne!(a.data, generate(&c, 4).unwrap().data);
        assert_eq!(a.data.provenance.phi_kind, "laplace_tanh");
    }

    #[test]
    fn sim2_masks_confounders() {
        let mut c = tiny(Path::new("unused"));
        c.regime = Regime::Sim2;
        c.phi = PhiConfig::GaussRelu { sweeps: 5 };
        c.psi = PsiConfig::MaxoutBilinear { scope: ScopeConfig::PerGroupPair };
        let g = generate(&c, 0).unwrap();
        assert_eq!(g.graph.num_vars(), 12);
        assert_eq!(g.data.x.cols(), 6);
        assert_eq!(g.latents.values.cols(), 6);
    }
}
