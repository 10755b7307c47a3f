//! Experiment configuration. One JSON file fully determines an experiment.
//!
//! ```json
//! {
//!   "regime": "sim1",
//!   "groups": 3,
//!   "dim": 10,
//!   "mixing_layers": 3,
//!   "n": 65536,
//!   "seeds": [0, 1, 2],
//!   "phi": { "kind": "laplace_tanh", "alpha": 3.0, "beta": 0.8 },
//!   "psi": { "kind": "abs_mlp" },
//!   "output_dir": "runs/sim1"
//! }
//! ```
//!
//! `dim` is the observable dimension per group. Omitted fields take the
//! defaults below; `feature_layers` defaults to `mixing_layers`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use gcarl_core::estimator::{PsiScope, PsiSpec, TrainConfig, DEFAULT_INNER_HIDDEN, DEFAULT_TANH_ORDER};
use gcarl_core::evaluation::EvalOptions;
use gcarl_core::grn::GrnParams;
use gcarl_core::sampler::{CausalFunction, DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_SWEEPS};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// DAG latents, piecewise-Laplace conditionals.
    Sim1,
    /// Cyclic graph with masked confounders, Gibbs-sampled Gaussian conditionals.
    Sim2,
    /// Gene-regulatory network with masked confounders.
    Grn,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Sim1 => "sim1",
            Regime::Sim2 => "sim2",
            Regime::Grn => "grn",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhiConfig {
    LaplaceTanh {
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_beta")]
        beta: f64,
    },
    GaussRelu {
        #[serde(default = "default_sweeps")]
        sweeps: usize,
    },
    GrnHill(GrnSettings),
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_beta() -> f64 {
    DEFAULT_BETA
}
fn default_sweeps() -> usize {
    DEFAULT_SWEEPS
}

/// Mirror of [`GrnParams`] with per-field defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrnSettings {
    pub hill_coefficient: f64,
    pub interaction_magnitude: f64,
    pub basal_rate_range: [f64; 2],
    pub decay_rate: f64,
    pub noise_amplitude: f64,
    pub dt: f64,
    pub steps: usize,
    pub activating_fraction: f64,
    pub start_at_steady_state: bool,
}

impl Default for GrnSettings {
    fn default() -> Self {
        let p = GrnParams::default();
        Self {
            hill_coefficient: p.hill_coefficient,
            interaction_magnitude: p.interaction_magnitude,
            basal_rate_range: p.basal_rate_range,
            decay_rate: p.decay_rate,
            noise_amplitude: p.noise_amplitude,
            dt: p.dt,
            steps: p.steps,
            activating_fraction: p.activating_fraction,
            start_at_steady_state: p.start_at_steady_state,
        }
    }
}

impl GrnSettings {
    pub fn params(&self) -> GrnParams {
        GrnParams {
            hill_coefficient: self.hill_coefficient,
            interaction_magnitude: self.interaction_magnitude,
            basal_rate_range: self.basal_rate_range,
            decay_rate: self.decay_rate,
            noise_amplitude: self.noise_amplitude,
            dt: self.dt,
            steps: self.steps,
            activating_fraction: self.activating_fraction,
            start_at_steady_state: self.start_at_steady_state,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScopeConfig {
    PerGroupPair,
    Global,
}

impl From<ScopeConfig> for PsiScope {
    fn from(s: ScopeConfig) -> Self {
        match s {
            ScopeConfig::PerGroupPair => PsiScope::PerGroupPair,
            ScopeConfig::Global => PsiScope::Global,
        }
    }
}

fn default_scope() -> ScopeConfig {
    ScopeConfig::PerGroupPair
}
fn default_hidden() -> usize {
    DEFAULT_INNER_HIDDEN
}
fn default_order() -> usize {
    DEFAULT_TANH_ORDER
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PsiConfig {
    AbsMlp {
        #[serde(default = "default_hidden")]
        hidden: usize,
        #[serde(default = "default_scope")]
        scope: ScopeConfig,
    },
    MaxoutBilinear {
        #[serde(default = "default_scope")]
        scope: ScopeConfig,
    },
    TanhMixture {
        #[serde(default = "default_order")]
        order: usize,
    },
}

impl PsiConfig {
    pub fn spec(&self) -> PsiSpec {
        match *self {
            PsiConfig::AbsMlp { hidden, scope } => PsiSpec::AbsMlp { hidden, scope: scope.into() },
            PsiConfig::MaxoutBilinear { scope } => PsiSpec::MaxoutBilinear { scope: scope.into() },
            PsiConfig::TanhMixture { order } => PsiSpec::TanhMixture { order },
        }
    }
}

/// [`TrainConfig`] without the seed, which is derived per run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub batch_size: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub eval_every: usize,
    pub lr_decay: f64,
    pub decay_at: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            batch_size: t.batch_size,
            iterations: t.iterations,
            learning_rate: t.learning_rate,
            momentum: t.momentum,
            eval_every: t.eval_every,
            lr_decay: t.lr_decay,
            decay_at: t.decay_at,
        }
    }
}

impl TrainSettings {
    pub fn with_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            iterations: self.iterations,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            seed,
            eval_every: self.eval_every,
            lr_decay: self.lr_decay,
            decay_at: self.decay_at,
        }
    }
}

fn default_threshold() -> f64 {
    35.0
}
fn default_weight_range() -> [f64; 2] {
    [0.9, 1.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub regime: Regime,
    pub groups: usize,
    pub dim: usize,
    pub mixing_layers: usize,
    #[serde(default)]
    pub feature_layers: Option<usize>,
    pub n: usize,
    pub seeds: Vec<u64>,
    pub phi: PhiConfig,
    pub psi: PsiConfig,
    #[serde(default)]
    pub train: TrainSettings,
    /// Range of the raw inter-group weights before normalization (sim1).
    #[serde(default = "default_weight_range")]
    pub weight_range: [f64; 2],
    #[serde(default = "default_threshold")]
    pub threshold_pct: f64,
    #[serde(default)]
    pub rank_corr: bool,
    #[serde(default)]
    pub allow_transpose: bool,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Desk-scale Sim-1 configuration.
    pub fn sim1(output_dir: impl Into<PathBuf>) -> Self {
        Self {
            regime: Regime::Sim1,
            groups: 3,
            dim: 10,
            mixing_layers: 3,
            feature_layers: None,
            n: 1 << 16,
            seeds: (0..10).collect(),
            phi: PhiConfig::LaplaceTanh { alpha: DEFAULT_ALPHA, beta: DEFAULT_BETA },
            psi: PsiConfig::AbsMlp { hidden: DEFAULT_INNER_HIDDEN, scope: ScopeConfig::PerGroupPair },
            train: TrainSettings::default(),
            weight_range: default_weight_range(),
            threshold_pct: default_threshold(),
            rank_corr: false,
            allow_transpose: false,
            output_dir: output_dir.into(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        crate::formats::to_json(self)
    }

    pub fn feature_layers(&self) -> usize {
        self.feature_layers.unwrap_or(self.mixing_layers)
    }

    pub fn phi(&self) -> CausalFunction {
        match self.phi {
            PhiConfig::LaplaceTanh { alpha, beta } => CausalFunction::LaplaceTanh { alpha, beta },
            PhiConfig::GaussRelu { .. } => CausalFunction::GaussRelu,
            PhiConfig::GrnHill(_) => CausalFunction::GrnHill,
        }
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions { threshold_pct: self.threshold_pct, rank_corr: self.rank_corr, allow_transpose: self.allow_transpose }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let paired = matches!(
            (self.regime, &self.phi, &self.psi),
            (Regime::Sim1, PhiConfig::LaplaceTanh { .. }, PsiConfig::AbsMlp { .. })
                | (Regime::Sim2, PhiConfig::GaussRelu { .. }, PsiConfig::MaxoutBilinear { .. })
                | (Regime::Grn, PhiConfig::GrnHill(_), PsiConfig::TanhMixture { .. })
        );
        if !paired {
            return bad(format!(
                "regime {} pairs with {}",
                self.regime.name(),
                match self.regime {
                    Regime::Sim1 => "phi laplace_tanh and psi abs_mlp",
                    Regime::Sim2 => "phi gauss_relu and psi maxout_bilinear",
                    Regime::Grn => "phi grn_hill and psi tanh_mixture",
                }
            ));
        }
        if self.groups < 2 || self.dim == 0 {
            return bad("need at least 2 groups of positive dimension".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if self.n < self.train.batch_size {
            return bad(format!("n = {} is smaller than the batch size {}", self.n, self.train.batch_size));
        }
        if !(0.0..=100.0).contains(&self.threshold_pct) {
            return bad("threshold_pct must lie in [0, 100]".into());
        }
        let [lo, hi] = self.weight_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad("weight_range must satisfy 0 < lo ≤ hi".into());
        }
        if !self.psi.spec().is_valid() {
            return bad("psi hidden width / order must be positive".into());
        }
        match &self.phi {
            PhiConfig::LaplaceTanh { .. } => self.phi().validate()?,
            PhiConfig::GaussRelu { sweeps } if *sweeps == 0 => return bad("gibbs sweeps must be positive".into()),
            PhiConfig::GrnHill(p) => p.params().validate()?,
            _ => {}
        }
        self.train.with_seed(0).validate()?;
        if self.output_dir.as_os_str().is_empty() {
            return bad("output_dir must be set".into());
        }
        Ok(())
    }

    /// Canonical JSON of everything that determines a single-seed run.
    pub fn run_identity(&self) -> String {
        let mut c = self.clone();
        c.seeds.clear();
        c.output_dir = PathBuf::from(".");
        serde_json::to_string(&c).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "regime": "sim1", "groups": 3, "dim": 5, "mixing_layers": 2, "n": 1024,
        "seeds": [0], "phi": {"kind": "laplace_tanh"}, "psi": {"kind": "abs_mlp"},
        "output_dir": "out"
    }"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.phi, PhiConfig::LaplaceTanh { alpha: 3.0, beta: 0.8 });
        assert_eq!(c.threshold_pct, 35.0);
        assert_eq!(c.feature_layers(), 2);
        assert_eq!(c.train, TrainSettings::default());
    }

    #[test]
    fn mismatched_pairing_rejected() {
        let text = MINIMAL.replace("abs_mlp", "maxout_bilinear");
        assert!(matches!(ExperimentConfig::parse(&text), Err(Error::Config(_))));
        let text = MINIMAL.replace(r#""regime": "sim1""#, r#""regime": "grn""#);
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn unknown_fields_and_bad_values_rejected() {
        assert!(ExperimentConfig::parse(&MINIMAL.replace("\"n\"", "\"bogus\": 1, \"n\"")).is_err());
        assert!(ExperimentConfig::parse(&MINIMAL.replace("[0]", "[1, 1]")).is_err());
        assert!(ExperimentConfig::parse(&MINIMAL.replace("1024", "10")).is_err());
    }

    #[test]
    fn run_identity_ignores_seeds_and_location() {
        let a = ExperimentConfig::parse(MINIMAL).unwrap();
        let mut b = a.clone();
        b.seeds = vec![4, 5];
        b.output_dir = "elsewhere".into();
        assert_eq!(a.run_identity(), b.run_identity());
        b.n = 2048;
        assert_ne!(a.run_identity(), b.run_identity());
    }
}
