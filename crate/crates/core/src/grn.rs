//! Simplified single-cell expression simulator: chemical Langevin dynamics
//! with Hill-type regulation, integrated by Euler–Maruyama per cell.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::graphs::GroupedGraph;
use crate::matrix::Matrix;
use crate::rng;
use crate::sampler::LatentSamples;

pub const DEFAULT_INTERACTION_MAGNITUDE: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrnError {
    #[error("gene network must be acyclic")]
    Cyclic,
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("steps·dt too short to relax: need at least {needed} steps")]
    TooFewSteps { needed: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrnParams {
    pub hill_coefficient: f64,
    pub interaction_magnitude: f64,
    pub basal_rate_range: [f64; 2],
    pub decay_rate: f64,
    pub noise_amplitude: f64,
    pub dt: f64,
    pub steps: usize,
    pub activating_fraction: f64,
    /// Start each cell at the noise-free fixed point instead of at zero.
    pub start_at_steady_state: bool,
}

impl Default for GrnParams {
    fn default() -> Self {
        Self {
            hill_coefficient: 6.0,
            interaction_magnitude: DEFAULT_INTERACTION_MAGNITUDE,
            basal_rate_range: [0.25, 0.75],
            decay_rate: 0.8,
            noise_amplitude: 1.0,
            dt: 0.01,
            steps: 1500,
            activating_fraction: 0.5,
            start_at_steady_state: true,
        }
    }
}

impl GrnParams {
    pub fn min_steps(&self) -> usize {
        libm::ceil(5.0 / (self.decay_rate * self.dt)) as usize
    }

    pub fn validate(&self) -> Result<(), GrnError> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.hill_coefficient) {
            return Err(GrnError::InvalidParameter("hill_coefficient must be positive"));
        }
        if !(self.interaction_magnitude >= 0.0) {
            return Err(GrnError::InvalidParameter("interaction_magnitude must be non-negative"));
        }
        let [lo, hi] = self.basal_rate_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(GrnError::InvalidParameter("basal_rate_range must satisfy 0 < lo ≤ hi"));
        }
        if !positive(self.decay_rate) || !positive(self.dt) {
            return Err(GrnError::InvalidParameter("decay_rate and dt must be positive"));
        }
        if !(self.noise_amplitude >= 0.0 && self.noise_amplitude.is_finite()) {
            return Err(GrnError::InvalidParameter("noise_amplitude must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.activating_fraction) {
            return Err(GrnError::InvalidParameter("activating_fraction must lie in [0, 1]"));
        }
        if self.steps < self.min_steps() {
            return Err(GrnError::TooFewSteps { needed: self.min_steps() });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignedEdge {
    pub from: usize,
    pub to: usize,
    pub activating: bool,
}

/// Splits each gene's parents into activating and repressing halves; with an
/// odd count the extra parent activates.
pub fn grn_edge_signs(g: &GroupedGraph, seed: u64) -> Vec<SignedEdge> {
    let mut rng = rng::seeded(seed);
    let mut out = Vec::new();
    for v in 0..g.num_vars() {
        let mut parents = g.parents(v);
        parents.shuffle(&mut rng);
        let n_act = parents.len().div_ceil(2);
        for (i, p) in parents.into_iter().enumerate() {
            out.push(SignedEdge { from: p, to: v, activating: i < n_act });
        }
    }
    out.sort_by_key(|e| (e.from, e.to));
    out
}

/// Fixed network quantities shared by every cell.
#[derive(Clone, Debug)]
pub struct GrnSystem {
    order: Vec<usize>,
    /// per gene: (parent, magnitude, activating, half-saturation)
    regulators: Vec<Vec<(usize, f64, bool, f64)>>,
    /// basal production; zero for regulated genes
    pub basal: Vec<f64>,
    pub steady_state: Vec<f64>,
    hill: f64,
}

impl GrnSystem {
    pub fn new(g: &GroupedGraph, p: &GrnParams, seed: u64) -> Result<Self, GrnError> {
        p.validate()?;
        let order = g.topological_order().ok_or(GrnError::Cyclic)?;
        let d = g.num_vars();
        let mut rng = rng::seeded(rng::derive_seed(seed, 0x6261_7361));
        let [lo, hi] = p.basal_rate_range;
        let basal: Vec<f64> = (0..d)
            .map(|v| {
                let r = if lo < hi { rng.random_range(lo..hi) } else { lo };
                if g.parents(v).is_empty() { r } else { 0.0 }
            })
            .collect();
        let mut steady_state = vec![0.0; d];
        let mut regulators = vec![Vec::new(); d];
        for &v in &order {
            let regs: Vec<(usize, f64, bool, f64)> = g
                .parents(v)
                .into_iter()
                .map(|b| {
                    let w = g.weight(b, v);
                    (b, w.abs(), w > 0.0, steady_state[b])
                })
                .collect();
            regulators[v] = regs;
            let prod = production(&regulators[v], basal[v], &steady_state, p.hill_coefficient);
            steady_state[v] = prod / p.decay_rate;
        }
        Ok(Self { order, regulators, basal, steady_state, hill: p.hill_coefficient })
    }

    pub fn production(&self, gene: usize, state: &[f64]) -> f64 {
        production(&self.regulators[gene], self.basal[gene], state, self.hill)
    }
}

fn hill(x: f64, half: f64, h: f64) -> f64 {
    if half <= 0.0 {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    let r = libm::pow(x.max(0.0) / half, h);
    r / (1.0 + r)
}

fn production(regs: &[(usize, f64, bool, f64)], basal: f64, state: &[f64], h: f64) -> f64 {
    basal
        + regs
            .iter()
            .map(|&(b, k, act, half)| {
                let hv = hill(state[b], half, h);
                if act { k * hv } else { k * (1.0 - hv) }
            })
            .sum::<f64>()
}

#[derive(Clone, Debug)]
pub struct GrnOutput {
    pub samples: LatentSamples,
    /// per-cell mean over the last tenth of the integration steps
    pub tail_mean: Matrix,
    pub system: GrnSystem,
}

pub fn simulate_grn(g: &GroupedGraph, p: &GrnParams, n: usize, seed: u64) -> Result<LatentSamples, GrnError> {
    simulate_grn_detailed(g, p, n, seed).map(|o| o.samples)
}

pub fn simulate_grn_detailed(g: &GroupedGraph, p: &GrnParams, n: usize, seed: u64) -> Result<GrnOutput, GrnError> {
    let system = GrnSystem::new(g, p, seed)?;
    let d = g.num_vars();
    let sqrt_dt = libm::sqrt(p.dt);
    let tail_start = p.steps - (p.steps / 10).max(1);
    let mut values = Matrix::zeros(n, d);
    let mut tail_mean = Matrix::zeros(n, d);
    let mut prod = vec![0.0; d];
    for i in 0..n {
        let mut rng = rng::stream(rng::derive_seed(seed, 0x7365_6c6c), i as u64);
        let mut x = if p.start_at_steady_state { system.steady_state.clone() } else { vec![0.0; d] };
        let mut acc = vec![0.0; d];
        for step in 0..p.steps {
            for &v in &system.order {
                prod[v] = system.production(v, &x);
            }
            for v in 0..d {
                let drift = prod[v] - p.decay_rate * x[v];
                let z1: f64 = StandardNormal.sample(&mut rng);
                let z2: f64 = StandardNormal.sample(&mut rng);
                let diffusion = p.noise_amplitude * (libm::sqrt(prod[v]) * z1 + libm::sqrt(p.decay_rate * x[v]) * z2);
                x[v] = (x[v] + drift * p.dt + diffusion * sqrt_dt).max(0.0);
            }
            if step >= tail_start {
                for (a, &xv) in acc.iter_mut().zip(&x) {
                    *a += xv;
                }
            }
        }
        let count = (p.steps - tail_start) as f64;
        values.row_mut(i).copy_from_slice(&x);
        for (t, a) in tail_mean.row_mut(i).iter_mut().zip(&acc) {
            *t = a / count;
        }
    }
    Ok(GrnOutput { samples: LatentSamples { values, layout: g.layout().clone() }, tail_mean, system })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::GroupLayout;

    fn chain(weight: f64) -> GroupedGraph {
        let mut adj = Matrix::zeros(2, 2);
        adj.set(0, 1, weight);
        GroupedGraph::fully_observed(GroupLayout::new(vec![1, 1]), adj).unwrap()
    }

    #[test]
    fn sign_split() {
        let mut adj = Matrix::zeros(4, 4);
        adj.set(0, 3, 1.0);
        adj.set(1, 3, 1.0);
        adj.set(2, 1, 1.0);
        let g = GroupedGraph::fully_observed(GroupLayout::new(vec![2, 2]), adj).unwrap();
        let e = grn_edge_signs(&g, 3);
        let to3: Vec<_> = e.iter().filter(|e| e.to == 3).collect();
        assert_eq!(to3.len(), 2);
        assert_eq!(to3.iter().filter(|e| e.activating).count(), 1);
        assert!(e.iter().find(|e| e.to == 1).unwrap().activating);
        assert_eq!(e.iter().filter(|e| e.to == 0).count(), 0);
    }

    #[test]
    fn noise_free_master_relaxes_to_basal_over_decay() {
        let g = chain(0.25);
        let p = GrnParams { noise_amplitude: 0.0, start_at_steady_state: false, steps: 3000, ..GrnParams::default() };
        let out = simulate_grn_detailed(&g, &p, 1, 5).unwrap();
        let b = out.system.basal[0];
        let x = out.samples.values.get(0, 0);
        assert!((x - b / p.decay_rate).abs() < 0.01 * b / p.decay_rate);
        // child sits at K/2 / γ when its half-saturation is the parent's fixed point
        assert!((out.system.steady_state[1] - 0.125 / 0.8).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_params() {
        let g = chain(0.25);
        let p = GrnParams { steps: 10, ..GrnParams::default() };
        assert!(matches!(simulate_grn(&g, &p, 1, 0), Err(GrnError::TooFewSteps { .. })));
        let p = GrnParams { decay_rate: -1.0, ..GrnParams::default() };
        assert!(simulate_grn(&g, &p, 1, 0).is_err());
    }

    #[test]
    fn expression_non_negative() {
        let g = crate::graphs::gen_grn_dag(3, 3, 1).unwrap();
        let s = simulate_grn(&g, &GrnParams { steps: 700, ..GrnParams::default() }, 4, 2).unwrap();
        assert!(s.values.as_slice().iter().all(|&v| v >= 0.0));
    }
}
