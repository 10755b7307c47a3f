//! Scoring of recovered latents and graphs: per-group optimal variable
//! assignment, direction-and-threshold binarization, inter-group F1 and ROC.

mod correlation;
mod hungarian;

pub use correlation::{correlation_matrix, pearson, ranks, spearman};
pub use hungarian::hungarian;

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::graphs::GroupedGraph;
use crate::matrix::{GroupLayout, Matrix};

/// ROC thresholds in percent: 0, 5, …, 100.
pub const ROC_THRESHOLDS: usize = 21;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("estimate and truth disagree on the group layout")]
    LayoutMismatch,
    #[error("estimate and truth have different sample counts")]
    SampleMismatch,
    #[error("threshold must lie in [0, 100]")]
    Threshold,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    /// `perms[m][i]`: estimated in-group index matched to true in-group index `i`
    pub perms: Vec<Vec<usize>>,
    /// correlation of every true variable with its matched estimate, in true order
    pub per_variable_corr: Vec<f64>,
    pub mcc: f64,
}

impl Assignment {
    pub fn identity(layout: &GroupLayout) -> Self {
        Self {
            perms: layout.dims().iter().map(|&d| (0..d).collect()).collect(),
            per_variable_corr: vec![1.0; layout.total()],
            mcc: 1.0,
        }
    }

    /// Global index of the estimate matched to true variable `v`.
    pub fn map(&self, layout: &GroupLayout, v: usize) -> usize {
        let m = layout.group_of(v);
        layout.offset(m) + self.perms[m][v - layout.offset(m)]
    }
}

/// Per group, matches estimated to true variables maximizing the mean
/// absolute correlation.
pub fn assign(h: &Matrix, s: &Matrix, layout: &GroupLayout, rank_corr: bool) -> Result<Assignment, EvalError> {
    if h.cols() != layout.total() || s.cols() != layout.total() {
        return Err(EvalError::LayoutMismatch);
    }
    if h.rows() != s.rows() {
        return Err(EvalError::SampleMismatch);
    }
    let mut perms = Vec::new();
    let mut per_variable_corr = Vec::with_capacity(layout.total());
    for m in 0..layout.num_groups() {
        let range = layout.range(m);
        let c = correlation_matrix(&s.column_block(range.clone()), &h.column_block(range), rank_corr);
        let cost = c.map(|v| 1.0 - v.abs());
        let perm = hungarian(&cost);
        for (i, &j) in perm.iter().enumerate() {
            per_variable_corr.push(c.get(i, j));
        }
        perms.push(perm);
    }
    let mcc = per_variable_corr.iter().map(|c| c.abs()).sum::<f64>() / per_variable_corr.len().max(1) as f64;
    Ok(Assignment { perms, per_variable_corr, mcc })
}

/// Dense boolean adjacency; `get(a, b)` means `a → b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryGraph {
    dim: usize,
    edges: Vec<bool>,
}

impl BinaryGraph {
    pub fn empty(dim: usize) -> Self {
        Self { dim, edges: vec![false; dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, a: usize, b: usize) -> bool {
        self.edges[a * self.dim + b]
    }

    pub fn set(&mut self, a: usize, b: usize, v: bool) {
        self.edges[a * self.dim + b] = v;
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::empty(self.dim);
        for a in 0..self.dim {
            for b in 0..self.dim {
                t.set(b, a, self.get(a, b));
            }
        }
        t
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().filter(|&&e| e).count()
    }

    pub fn from_weights(weights: &Matrix) -> Self {
        let mut g = Self::empty(weights.rows());
        for a in 0..weights.rows() {
            for b in 0..weights.cols() {
                g.set(a, b, weights.get(a, b) != 0.0);
            }
        }
        g
    }
}

/// Orients every inter-group pair by the larger magnitude (ties: source in
/// the lower group) and drops edges below `threshold_pct` % of the largest
/// magnitude over both blocks of the group pair. Intra-group entries stay false.
pub fn binarize_graph(weights: &Matrix, layout: &GroupLayout, threshold_pct: f64) -> Result<BinaryGraph, EvalError> {
    if !(0.0..=100.0).contains(&threshold_pct) {
        return Err(EvalError::Threshold);
    }
    if weights.rows() != layout.total() || weights.cols() != layout.total() {
        return Err(EvalError::LayoutMismatch);
    }
    let mut out = BinaryGraph::empty(layout.total());
    let groups = layout.num_groups();
    for m in 0..groups {
        for mp in m + 1..groups {
            let mut max: f64 = 0.0;
            for a in layout.range(m) {
                for b in layout.range(mp) {
                    max = max.max(weights.get(a, b).abs()).max(weights.get(b, a).abs());
                }
            }
            let cut = threshold_pct / 100.0 * max;
            for a in layout.range(m) {
                for b in layout.range(mp) {
                    let (fwd, bwd) = (weights.get(a, b).abs(), weights.get(b, a).abs());
                    let (from, to, mag) = if fwd >= bwd { (a, b, fwd) } else { (b, a, bwd) };
                    if mag >= cut {
                        out.set(from, to, true);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Truth restricted to what the estimate can see.
fn visible_truth(truth: &GroupedGraph) -> GroupedGraph {
    if truth.confounder_mask().iter().any(|&c| c) { truth.observable_subgraph() } else { truth.clone() }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct F1Score {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// the transposed estimate scored better
    pub transposed: bool,
}

fn confusion(est: &BinaryGraph, truth: &GroupedGraph, asg: &Assignment) -> (usize, usize, usize) {
    let layout = truth.layout();
    let d = truth.num_vars();
    let (mut tp, mut est_edges, mut true_edges) = (0, 0, 0);
    for a in 0..d {
        for b in 0..d {
            if !truth.is_inter_group(a, b) {
                continue;
            }
            let t = truth.weight(a, b) != 0.0;
            let e = est.get(asg.map(layout, a), asg.map(layout, b));
            tp += (t && e) as usize;
            est_edges += e as usize;
            true_edges += t as usize;
        }
    }
    (tp, est_edges, true_edges)
}

fn score(tp: usize, est_edges: usize, true_edges: usize) -> (f64, f64, f64) {
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let (p, r) = (ratio(tp, est_edges), ratio(tp, true_edges));
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f1)
}

/// Precision, recall and F1 over inter-group edges after mapping true
/// variables to their matched estimates.
pub fn f1_inter_group(est: &BinaryGraph, truth: &GroupedGraph, asg: &Assignment, allow_transpose: bool) -> Result<F1Score, EvalError> {
    let truth = visible_truth(truth);
    if est.dim() != truth.num_vars() {
        return Err(EvalError::LayoutMismatch);
    }
    let (tp, e, t) = confusion(est, &truth, asg);
    let (precision, recall, f1) = score(tp, e, t);
    let mut best = F1Score { precision, recall, f1, transposed: false };
    if allow_transpose {
        let (tp, e, t) = confusion(&est.transpose(), &truth, asg);
        let (precision, recall, f1) = score(tp, e, t);
        if f1 > best.f1 {
            best = F1Score { precision, recall, f1, transposed: true };
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// Binarizes at 0, 5, …, 100 % and reports false- and true-positive rates
/// over ordered inter-group pairs.
pub fn roc_sweep(weights: &Matrix, truth: &GroupedGraph, asg: &Assignment) -> Result<Vec<RocPoint>, EvalError> {
    let truth = visible_truth(truth);
    let layout = truth.layout().clone();
    let d = truth.num_vars();
    let mut points = Vec::with_capacity(ROC_THRESHOLDS);
    for k in 0..ROC_THRESHOLDS {
        let threshold = 5.0 * k as f64;
        let est = binarize_graph(weights, &layout, threshold)?;
        let (mut tp, mut fp, mut pos, mut neg) = (0usize, 0usize, 0usize, 0usize);
        for a in 0..d {
            for b in 0..d {
                if !truth.is_inter_group(a, b) {
                    continue;
                }
                let e = est.get(asg.map(&layout, a), asg.map(&layout, b));
                if truth.weight(a, b) != 0.0 {
                    pos += 1;
                    tp += e as usize;
                } else {
                    neg += 1;
                    fp += e as usize;
                }
            }
        }
        let rate = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        points.push(RocPoint { threshold, fpr: rate(fp, neg), tpr: rate(tp, pos) });
    }
    Ok(points)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub threshold_pct: f64,
    pub rank_corr: bool,
    pub allow_transpose: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { threshold_pct: 35.0, rank_corr: false, allow_transpose: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub assignment: Assignment,
    pub mcc: f64,
    pub binarized: BinaryGraph,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub transposed: bool,
    pub roc: Vec<RocPoint>,
}

/// Full evaluation of a latent estimate `h` and strength estimate `weights`
/// against true latents `s` (observable columns) and the true graph.
pub fn evaluate(h: &Matrix, s: &Matrix, weights: &Matrix, truth: &GroupedGraph, opts: &EvalOptions) -> Result<EvalReport, EvalError> {
    let visible = visible_truth(truth);
    let layout = visible.layout().clone();
    let assignment = assign(h, s, &layout, opts.rank_corr)?;
    let binarized = binarize_graph(weights, &layout, opts.threshold_pct)?;
    let f = f1_inter_group(&binarized, &visible, &assignment, opts.allow_transpose)?;
    let roc_weights = if f.transposed { weights.transpose() } else { weights.clone() };
    let roc = roc_sweep(&roc_weights, &visible, &assignment)?;
    Ok(EvalReport {
        mcc: assignment.mcc,
        assignment,
        binarized: if f.transposed { binarized.transpose() } else { binarized },
        precision: f.precision,
        recall: f.recall,
        f1: f.f1,
        transposed: f.transposed,
        roc,
    })
}
