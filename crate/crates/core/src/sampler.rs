//! Latent samples from the pairwise causal model.
//!
//! Every variable is drawn from its conditional given its parents. DAGs are
//! sampled exactly in topological order; graphs with cycles use one Gibbs
//! chain per sample with a fixed sequential scan.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, Exp1, StandardNormal};
use thiserror::Error;

use crate::graphs::GroupedGraph;
use crate::matrix::{GroupLayout, Matrix};
use crate::rng::{self, Rng};

pub const DEFAULT_ALPHA: f64 = 3.0;
pub const DEFAULT_BETA: f64 = 0.8;
pub const DEFAULT_SWEEPS: usize = 50;
pub const DEFAULT_WINDOW: (f64, f64) = (-10.0, 10.0);
pub const DEFAULT_GRID: usize = 8192;
/// Smallest admissible normalizer of a grid density.
pub const INTEGRABILITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("graph has a directed cycle; use the Gibbs sampler")]
    Cyclic,
    #[error("invalid causal function: {0}")]
    InvalidFunction(&'static str),
    #[error("variable {0} has a non-positive total parent weight")]
    NonPositiveWeight(usize),
    #[error("density is not integrable on the window (normalizer below floor)")]
    NonIntegrable,
    #[error("at least one Gibbs sweep is required")]
    NoSweeps,
    #[error("the gene-network causal function is simulated by the grn module")]
    Unsupported,
}

/// Scalar basis functions used by exponential-family causal functions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Basis {
    Identity,
    Relu,
    Tanh,
    Square,
    Abs,
    Sin,
}

impl Basis {
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Basis::Identity => x,
            Basis::Relu => x.max(0.0),
            Basis::Tanh => libm::tanh(x),
            Basis::Square => x * x,
            Basis::Abs => x.abs(),
            Basis::Sin => libm::sin(x),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Basis::Identity => "identity",
            Basis::Relu => "relu",
            Basis::Tanh => "tanh",
            Basis::Square => "square",
            Basis::Abs => "abs",
            Basis::Sin => "sin",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Self::Identity, Self::Relu, Self::Tanh, Self::Square, Self::Abs, Self::Sin].into_iter().find(|b| b.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BaseMeasure {
    Lebesgue,
    /// `exp(-precision · y² / 2)`
    Gaussian { precision: f64 },
}

impl BaseMeasure {
    fn log_density(self, y: f64) -> f64 {
        match self {
            BaseMeasure::Lebesgue => 0.0,
            BaseMeasure::Gaussian { precision } => -0.5 * precision * y * y,
        }
    }
}

/// `φ(x, y) = η(x)ᵀ T(y)` with a base measure, sampled on a bounded window.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpFamily {
    pub eta: Vec<Basis>,
    pub t: Vec<Basis>,
    pub base: BaseMeasure,
    pub window: (f64, f64),
    pub grid: usize,
}

impl ExpFamily {
    pub fn new(eta: Vec<Basis>, t: Vec<Basis>, base: BaseMeasure) -> Self {
        Self { eta, t, base, window: DEFAULT_WINDOW, grid: DEFAULT_GRID }
    }

    fn validate(&self) -> Result<(), SamplerError> {
        if self.eta.is_empty() || self.eta.len() != self.t.len() {
            return Err(SamplerError::InvalidFunction("η and T must have the same length N ≥ 1"));
        }
        let (lo, hi) = self.window;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) || self.grid < 2 {
            return Err(SamplerError::InvalidFunction("window must be finite with at least two grid points"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CausalFunction {
    /// Child density `∝ exp(-Σ λ_b |y - α tanh(β x_b)|)`.
    LaplaceTanh { alpha: f64, beta: f64 },
    /// Child is Gaussian with mean pulled down by the positive part of its parents.
    GaussRelu,
    ExpFamily(ExpFamily),
    /// Hill-type regulation, simulated by [`crate::grn`].
    GrnHill,
}

impl CausalFunction {
    pub fn laplace_tanh_default() -> Self {
        Self::LaplaceTanh { alpha: DEFAULT_ALPHA, beta: DEFAULT_BETA }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        match self {
            CausalFunction::LaplaceTanh { alpha, beta } => {
                if *alpha > 0.0 && *beta > 0.0 && alpha.is_finite() && beta.is_finite() {
                    Ok(())
                } else {
                    Err(SamplerError::InvalidFunction("laplace_tanh requires α > 0 and β > 0"))
                }
            }
            CausalFunction::GaussRelu => Ok(()),
            CausalFunction::ExpFamily(e) => e.validate(),
            CausalFunction::GrnHill => Err(SamplerError::Unsupported),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            CausalFunction::LaplaceTanh { .. } => "laplace_tanh",
            CausalFunction::GaussRelu => "gauss_relu",
            CausalFunction::ExpFamily(_) => "expfam",
            CausalFunction::GrnHill => "grn_hill",
        }
    }
}

/// `n × D` latent matrix with the group layout of its graph.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentSamples {
    pub values: Matrix,
    pub layout: GroupLayout,
}

/// Density `∝ exp(-Σ_b λ_b |s - μ_b|)`, piecewise exponential between the
/// sorted locations, sampled exactly by inverse CDF.
#[derive(Clone, Debug)]
pub struct PiecewiseLaplace {
    locs: Vec<f64>,
    /// slope of the log density on segment k (k locations to its left)
    slopes: Vec<f64>,
    /// log mass of each of the `K + 1` segments, unnormalized
    log_mass: Vec<f64>,
    cum: Vec<f64>,
    total_rate: f64,
    log_at_locs: Vec<f64>,
}

impl PiecewiseLaplace {
    pub fn new(locations: &[f64], rates: &[f64]) -> Result<Self, SamplerError> {
        if locations.is_empty() || locations.len() != rates.len() {
            return Err(SamplerError::InvalidFunction("need one positive rate per location"));
        }
        if rates.iter().any(|&r| !(r > 0.0 && r.is_finite())) || locations.iter().any(|l| !l.is_finite()) {
            return Err(SamplerError::InvalidFunction("rates must be positive and locations finite"));
        }
        let mut idx: Vec<usize> = (0..locations.len()).collect();
        idx.sort_by(|&a, &b| locations[a].total_cmp(&locations[b]));
        let locs: Vec<f64> = idx.iter().map(|&i| locations[i]).collect();
        let sorted_rates: Vec<f64> = idx.iter().map(|&i| rates[i]).collect();
        let total_rate: f64 = sorted_rates.iter().sum();
        let log_density = |s: f64| -> f64 { -locs.iter().zip(&sorted_rates).map(|(m, r)| r * (s - m).abs()).sum::<f64>() };
        let log_at_locs: Vec<f64> = locs.iter().map(|&m| log_density(m)).collect();
        let k = locs.len();
        let mut slopes = Vec::with_capacity(k + 1);
        let mut left = 0.0;
        slopes.push(total_rate);
        for r in &sorted_rates {
            left += r;
            slopes.push(total_rate - 2.0 * left);
        }
        let mut log_mass = Vec::with_capacity(k + 1);
        log_mass.push(log_at_locs[0] - libm::log(total_rate));
        for seg in 1..k {
            let (a, b) = (locs[seg - 1], locs[seg]);
            let w = b - a;
            let c = slopes[seg];
            let lm = if w <= 0.0 {
                f64::NEG_INFINITY
            } else if (c * w).abs() < 1e-12 {
                log_at_locs[seg - 1] + libm::log(w)
            } else if c > 0.0 {
                log_at_locs[seg] + libm::log(-libm::expm1(-c * w)) - libm::log(c)
            } else {
                log_at_locs[seg - 1] + libm::log(-libm::expm1(c * w)) - libm::log(-c)
            };
            log_mass.push(lm);
        }
        log_mass.push(log_at_locs[k - 1] - libm::log(total_rate));
        let max = log_mass.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut cum = Vec::with_capacity(k + 1);
        let mut acc = 0.0;
        for lm in &log_mass {
            acc += libm::exp(lm - max);
            cum.push(acc);
        }
        for c in &mut cum {
            *c /= acc;
        }
        Ok(Self { locs, slopes, log_mass, cum, total_rate, log_at_locs })
    }

    pub fn log_density_unnormalized(&self, s: f64) -> f64 {
        // reconstruct from the sorted breakpoints: f is linear on each segment
        let seg = self.locs.partition_point(|&m| m <= s);
        if seg == 0 {
            self.log_at_locs[0] + self.total_rate * (s - self.locs[0])
        } else {
            self.log_at_locs[seg - 1] + self.slopes[seg] * (s - self.locs[seg - 1])
        }
    }

    /// Log of the normalizing constant.
    pub fn log_normalizer(&self) -> f64 {
        let max = self.log_mass.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        max + libm::log(self.log_mass.iter().map(|lm| libm::exp(lm - max)).sum::<f64>())
    }

    pub fn cdf(&self, s: f64) -> f64 {
        let k = self.locs.len();
        let seg = self.locs.partition_point(|&m| m <= s);
        let before = if seg == 0 { 0.0 } else { self.cum[seg - 1] };
        let seg_mass = self.cum[seg] - before;
        let frac = if seg == 0 {
            libm::exp(self.total_rate * (s - self.locs[0]))
        } else if seg == k {
            -libm::expm1(-self.total_rate * (s - self.locs[k - 1]))
        } else {
            let (a, b) = (self.locs[seg - 1], self.locs[seg]);
            let c = self.slopes[seg];
            let w = b - a;
            if (c * w).abs() < 1e-12 {
                (s - a) / w
            } else {
                libm::expm1(c * (s - a)) / libm::expm1(c * w)
            }
        };
        (before + seg_mass * frac).clamp(0.0, 1.0)
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        let k = self.locs.len();
        let u: f64 = rng.random();
        let seg = self.cum.partition_point(|&c| c < u).min(k);
        if seg == 0 {
            let e: f64 = Exp1.sample(rng);
            return self.locs[0] - e / self.total_rate;
        }
        if seg == k {
            let e: f64 = Exp1.sample(rng);
            return self.locs[k - 1] + e / self.total_rate;
        }
        let (a, b) = (self.locs[seg - 1], self.locs[seg]);
        let c = self.slopes[seg];
        let w = b - a;
        let v: f64 = rng.random();
        if (c * w).abs() < 1e-12 {
            a + v * w
        } else if c > 0.0 {
            b + libm::log1p(v * libm::expm1(-c * w)) / c
        } else {
            a + libm::log1p(v * libm::expm1(c * w)) / c
        }
    }
}

/// Grid-discretized density `∝ base(y) · exp(θᵀ T(y))` with inverse-CDF sampling.
#[derive(Clone, Debug)]
pub struct GridDensity {
    lo: f64,
    step: f64,
    log_unnorm: Vec<f64>,
    cdf: Vec<f64>,
}

impl GridDensity {
    pub fn new(family: &ExpFamily, natural: &[f64]) -> Result<Self, SamplerError> {
        family.validate()?;
        let (lo, hi) = family.window;
        let n = family.grid;
        let step = (hi - lo) / (n - 1) as f64;
        let log_unnorm: Vec<f64> = (0..n)
            .map(|i| {
                let y = lo + i as f64 * step;
                family.base.log_density(y) + family.t.iter().zip(natural).map(|(t, th)| th * t.eval(y)).sum::<f64>()
            })
            .collect();
        let max = log_unnorm.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(SamplerError::NonIntegrable);
        }
        let mut cdf = Vec::with_capacity(n);
        cdf.push(0.0);
        let mut acc = 0.0;
        for w in log_unnorm.windows(2) {
            acc += 0.5 * (libm::exp(w[0] - max) + libm::exp(w[1] - max)) * step;
            cdf.push(acc);
        }
        if !(acc > 0.0) || max + libm::log(acc) < libm::log(INTEGRABILITY_FLOOR) || !acc.is_finite() {
            return Err(SamplerError::NonIntegrable);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        Ok(Self { lo, step, log_unnorm, cdf })
    }

    /// Unnormalized log density at grid resolution (linear interpolation).
    pub fn log_density_unnormalized(&self, y: f64) -> f64 {
        let t = ((y - self.lo) / self.step).clamp(0.0, (self.log_unnorm.len() - 1) as f64);
        let i = (t as usize).min(self.log_unnorm.len() - 2);
        let f = t - i as f64;
        self.log_unnorm[i] * (1.0 - f) + self.log_unnorm[i + 1] * f
    }

    pub fn cdf(&self, y: f64) -> f64 {
        let t = (y - self.lo) / self.step;
        if t <= 0.0 {
            return 0.0;
        }
        let last = (self.cdf.len() - 1) as f64;
        if t >= last {
            return 1.0;
        }
        let i = t as usize;
        let f = t - i as f64;
        self.cdf[i] * (1.0 - f) + self.cdf[i + 1] * f
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        let u: f64 = rng.random();
        let i = self.cdf.partition_point(|&c| c < u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let f = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.lo + (i as f64 - 1.0 + f) * self.step
    }
}

/// Conditional of an exponential-family child given its parents: the natural
/// parameter is `Σ_b λ_b η(x_b)`.
pub fn expfam_conditional(family: &ExpFamily, parents: &[f64], weights: &[f64]) -> Result<GridDensity, SamplerError> {
    let mut natural = vec![0.0; family.eta.len()];
    for (&x, &w) in parents.iter().zip(weights) {
        for (th, eta) in natural.iter_mut().zip(&family.eta) {
            *th += w * eta.eval(x);
        }
    }
    GridDensity::new(family, &natural)
}

/// Mean and standard deviation of the Gaussian-relu conditional. Parent
/// weights enter scaled by the parent count.
pub fn gauss_relu_moments(parents: &[f64], weights: &[f64]) -> Result<(f64, f64), SamplerError> {
    if parents.is_empty() {
        return Ok((0.0, 1.0));
    }
    let count = parents.len() as f64;
    let precision: f64 = weights.iter().map(|w| w / count).sum();
    if !(precision > 0.0) {
        return Err(SamplerError::NonPositiveWeight(0));
    }
    let pull: f64 = parents.iter().zip(weights).map(|(x, w)| w / count * x.max(0.0)).sum();
    Ok((-pull / precision, 1.0 / libm::sqrt(precision)))
}

/// Per-variable parent lists `(index, weight)` taken from the adjacency columns.
fn parent_lists(g: &GroupedGraph) -> Vec<Vec<(usize, f64)>> {
    (0..g.num_vars()).map(|v| g.parents(v).into_iter().map(|p| (p, g.weight(p, v))).collect()).collect()
}

fn draw(
    phi: &CausalFunction,
    var: usize,
    parents: &[(usize, f64)],
    state: &[f64],
    rng: &mut Rng,
) -> Result<f64, SamplerError> {
    match phi {
        CausalFunction::LaplaceTanh { alpha, beta } => {
            if parents.is_empty() {
                return PiecewiseLaplace::new(&[0.0], &[1.0]).map(|d| d.sample(rng));
            }
            if parents.iter().any(|&(_, w)| w <= 0.0) {
                return Err(SamplerError::NonPositiveWeight(var));
            }
            let locs: Vec<f64> = parents.iter().map(|&(p, _)| alpha * libm::tanh(beta * state[p])).collect();
            let rates: Vec<f64> = parents.iter().map(|&(_, w)| w).collect();
            Ok(PiecewiseLaplace::new(&locs, &rates)?.sample(rng))
        }
        CausalFunction::GaussRelu => {
            let xs: Vec<f64> = parents.iter().map(|&(p, _)| state[p]).collect();
            let ws: Vec<f64> = parents.iter().map(|&(_, w)| w).collect();
            let (mean, sd) = gauss_relu_moments(&xs, &ws).map_err(|_| SamplerError::NonPositiveWeight(var))?;
            let z: f64 = StandardNormal.sample(rng);
            Ok(mean + sd * z)
        }
        CausalFunction::ExpFamily(family) => {
            let xs: Vec<f64> = parents.iter().map(|&(p, _)| state[p]).collect();
            let ws: Vec<f64> = parents.iter().map(|&(_, w)| w).collect();
            Ok(expfam_conditional(family, &xs, &ws)?.sample(rng))
        }
        CausalFunction::GrnHill => Err(SamplerError::Unsupported),
    }
}

/// Exact ancestral sampling on a DAG. Sample `i` uses stream `i` of `seed`.
pub fn ancestral_sample(g: &GroupedGraph, phi: &CausalFunction, n: usize, seed: u64) -> Result<LatentSamples, SamplerError> {
    phi.validate()?;
    let order = g.topological_order().ok_or(SamplerError::Cyclic)?;
    let parents = parent_lists(g);
    let d = g.num_vars();
    let mut values = Matrix::zeros(n, d);
    for i in 0..n {
        let mut rng = rng::stream(seed, i as u64);
        let row = values.row_mut(i);
        for &v in &order {
            row[v] = draw(phi, v, &parents[v], row, &mut rng)?;
        }
    }
    Ok(LatentSamples { values, layout: g.layout().clone() })
}

/// One Gibbs chain per sample: standard-normal start, `sweeps` sequential
/// scans in variable order, last state kept.
pub fn gibbs_sample(
    g: &GroupedGraph,
    phi: &CausalFunction,
    n: usize,
    sweeps: usize,
    seed: u64,
) -> Result<LatentSamples, SamplerError> {
    phi.validate()?;
    if sweeps == 0 {
        return Err(SamplerError::NoSweeps);
    }
    let parents = parent_lists(g);
    let d = g.num_vars();
    let mut values = Matrix::zeros(n, d);
    for i in 0..n {
        let mut rng = rng::stream(seed, i as u64);
        let row = values.row_mut(i);
        for x in row.iter_mut() {
            *x = StandardNormal.sample(&mut rng);
        }
        for _ in 0..sweeps {
            for v in 0..d {
                row[v] = draw(phi, v, &parents[v], row, &mut rng)?;
            }
        }
    }
    Ok(LatentSamples { values, layout: g.layout().clone() })
}

/// Drops the confounder columns. The mask refers to the graph the samples were drawn from.
pub fn mask_confounders(samples: &LatentSamples, g: &GroupedGraph) -> LatentSamples {
    if samples.values.cols() != g.num_vars() {
        // already masked
        return samples.clone();
    }
    let keep = g.observable_indices();
    let sub = g.observable_subgraph();
    LatentSamples { values: samples.values.select_columns(&keep), layout: sub.layout().clone() }
}
