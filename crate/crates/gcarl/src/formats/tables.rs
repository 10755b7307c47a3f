//! Plot-ready CSVs and the evaluation/summary JSON documents.

use std::fmt::Write as _;

use gcarl_core::evaluation::{EvalReport, RocPoint};
use serde::{Deserialize, Serialize};

/// `iteration,loss`
pub fn loss_csv(trace: &[(usize, f64)]) -> String {
    let mut s = String::from("iteration,loss\n");
    for (it, loss) in trace {
        writeln!(s, "{it},{loss}").unwrap();
    }
    s
}

/// `threshold,fpr,tpr`; thresholds in percent.
pub fn roc_csv(roc: &[RocPoint]) -> String {
    let mut s = String::from("threshold,fpr,tpr\n");
    for p in roc {
        writeln!(s, "{},{},{}", p.threshold, p.fpr, p.tpr).unwrap();
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub seed: u64,
    pub mcc: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

/// `seed,mcc,f1,precision,recall`
pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut s = String::from("seed,mcc,f1,precision,recall\n");
    for r in rows {
        writeln!(s, "{},{},{},{},{}", r.seed, r.mcc, r.f1, r.precision, r.recall).unwrap();
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocEntry {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalFile {
    pub seed: u64,
    pub mcc: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub transposed: bool,
    pub threshold_pct: f64,
    pub rank_corr: bool,
    /// Estimated index assigned to each true variable, per group.
    pub assignment: Vec<Vec<usize>>,
    pub per_variable_corr: Vec<f64>,
    /// Directed edges `[from, to]` of the binarized estimate.
    pub edges: Vec<[usize; 2]>,
    pub roc: Vec<RocEntry>,
}

impl EvalFile {
    pub fn new(seed: u64, r: &EvalReport, threshold_pct: f64, rank_corr: bool) -> Self {
        let d = r.binarized.dim();
        let edges = (0..d).flat_map(|a| (0..d).map(move |b| [a, b])).filter(|&[a, b]| r.binarized.get(a, b)).collect();
        Self {
            seed,
            mcc: r.mcc,
            f1: r.f1,
            precision: r.precision,
            recall: r.recall,
            transposed: r.transposed,
            threshold_pct,
            rank_corr,
            assignment: r.assignment.perms.clone(),
            per_variable_corr: r.assignment.per_variable_corr.clone(),
            edges,
            roc: r.roc.iter().map(|p| RocEntry { threshold: p.threshold, fpr: p.fpr, tpr: p.tpr }).collect(),
        }
    }

    pub fn metrics(&self) -> MetricsRow {
        MetricsRow { seed: self.seed, mcc: self.mcc, f1: self.f1, precision: self.precision, recall: self.recall }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub sd: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        // shifted by the first value, so repeated values aggregate exactly
        let k = values.first().copied().unwrap_or(0.0);
        let shift = values.iter().map(|v| v - k).sum::<f64>() / n;
        let sd = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - k - shift).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean: k + shift, sd }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryFile {
    pub runs: Vec<MetricsRow>,
    pub mcc: Stat,
    pub f1: Stat,
    pub precision: Stat,
    pub recall: Stat,
}

impl SummaryFile {
    pub fn new(runs: Vec<MetricsRow>) -> Self {
        let col = |f: fn(&MetricsRow) -> f64| Stat::of(&runs.iter().map(f).collect::<Vec<_>>());
        Self { mcc: col(|r| r.mcc), f1: col(|r| r.f1), precision: col(|r| r.precision), recall: col(|r| r.recall), runs }
    }

    /// Human-readable table, one row per seed then mean ± sd.
    pub fn table(&self) -> String {
        let mut s = String::from("seed      mcc      f1       precision recall\n");
        for r in &self.runs {
            writeln!(s, "{:<9} {:<8.4} {:<8.4} {:<9.4} {:.4}", r.seed, r.mcc, r.f1, r.precision, r.recall).unwrap();
        }
        let pm = |x: Stat| format!("{:.3}±{:.3}", x.mean, x.sd);
        writeln!(s, "mean±sd   {} {} {} {}", pm(self.mcc), pm(self.f1), pm(self.precision), pm(self.recall)).unwrap();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_runs_have_zero_spread() {
        let row = MetricsRow { seed: 1, mcc: 0.9, f1: 0.7, precision: 0.6, recall: 0.8 };
        let s = SummaryFile::new(vec![row.clone(), MetricsRow { seed: 2, ..row.clone() }, MetricsRow { seed: 3, ..row }]);
        assert_eq!(s.mcc, Stat { mean: 0.9, sd: 0.0 });
        assert_eq!(s.recall.sd, 0.0);
        assert_eq!(s.table().lines().count(), 5);
    }

    #[test]
    fn sample_sd() {
        let s = Stat::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(Stat::of(&[3.0]).sd, 0.0);
    }

    #[test]
    fn csv_headers() {
        assert_eq!(loss_csv(&[(0, 0.5)]), "iteration,loss\n0,0.5\n");
        assert!(roc_csv(&[]).starts_with("threshold,fpr,tpr\n"));
        assert!(metrics_csv(&[]).starts_with("seed,mcc,f1,precision,recall\n"));
    }
}
