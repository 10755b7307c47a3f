//! Sampler fidelity against quadrature and closed forms.

use gcarl_core::graphs::{gen_cyclic_confounded, gen_dag_sim1, GroupedGraph};
use gcarl_core::matrix::{GroupLayout, Matrix};
use gcarl_core::rng;
use gcarl_core::sampler::*;
use rand::Rng as _;

/// Normalized density and CDF of `exp(log_density)` on an evenly spaced
/// grid of `points` nodes over `[lo, hi]`, by the trapezoid rule.
struct Quadrature {
    lo: f64,
    step: f64,
    cdf: Vec<f64>,
}

impl Quadrature {
    fn new(log_density: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> Self {
        let step = (hi - lo) / (points - 1) as f64;
        let dens: Vec<f64> = (0..points).map(|i| log_density(lo + i as f64 * step).exp()).collect();
        let mut cdf = vec![0.0; points];
        for i in 1..points {
            cdf[i] = cdf[i - 1] + 0.5 * step * (dens[i] + dens[i - 1]);
        }
        let total = cdf[points - 1];
        cdf.iter_mut().for_each(|c| *c /= total);
        Self { lo, step, cdf }
    }

    fn cdf(&self, x: f64) -> f64 {
        let t = (x - self.lo) / self.step;
        if t <= 0.0 {
            return 0.0;
        }
        let i = t.floor() as usize;
        if i + 1 >= self.cdf.len() {
            return 1.0;
        }
        let f = t - i as f64;
        self.cdf[i] * (1.0 - f) + self.cdf[i + 1] * f
    }
}

fn ks(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).abs().max((c - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Total variation on `bins` equal bins over `[lo, hi]`, tails pooled into the end bins.
fn tv(samples: &[f64], q: &Quadrature, lo: f64, hi: f64, bins: usize) -> f64 {
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in samples {
        let b = (((x - lo) / w).floor().max(0.0) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = samples.len() as f64;
    (0..bins)
        .map(|b| {
            let left = if b == 0 { 0.0 } else { q.cdf(lo + b as f64 * w) };
            let right = if b == bins - 1 { 1.0 } else { q.cdf(lo + (b + 1) as f64 * w) };
            (counts[b] as f64 / n - (right - left)).abs()
        })
        .sum::<f64>()
        / 2.0
}

fn draw_many(n: usize, seed: u64, mut f: impl FnMut(&mut rng::Rng) -> f64) -> Vec<f64> {
    let mut r = rng::seeded(seed);
    (0..n).map(|_| f(&mut r)).collect()
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

#[test]
fn two_parent_histogram_matches_quadrature() {
    let d = PiecewiseLaplace::new(&[-1.0, 1.0], &[1.0, 1.0]).unwrap();
    let q = Quadrature::new(|s| -(s + 1.0).abs() - (s - 1.0).abs(), -12.0, 12.0, 4000);
    let s = draw_many(100_000, 3, |r| d.sample(r));
    let t = tv(&s, &q, -5.0, 5.0, 50);
    assert!(t < 0.02, "TV {t}");
}

#[test]
fn random_parent_configurations_pass_ks() {
    let mut r = rng::seeded(11);
    for case in 0..10 {
        let k = r.random_range(1..=5);
        let locs: Vec<f64> = (0..k).map(|_| r.random_range(-3.0..3.0)).collect();
        let rates: Vec<f64> = (0..k).map(|_| r.random_range(0.1..1.0)).collect();
        let d = PiecewiseLaplace::new(&locs, &rates).unwrap();
        let total: f64 = rates.iter().sum();
        let span = 40.0 / total;
        let q = Quadrature::new(
            |s| -locs.iter().zip(&rates).map(|(m, l)| l * (s - m).abs()).sum::<f64>(),
            -3.0 - span,
            3.0 + span,
            4000,
        );
        let mut s = draw_many(100_000, 100 + case, |r| d.sample(r));
        let e = ks(&mut s, |x| q.cdf(x));
        assert!(e < 0.01, "case {case}: KS {e} for {locs:?} {rates:?}");
    }
}

#[test]
fn laplace_root_and_zero_parent_mean() {
    let d = PiecewiseLaplace::new(&[0.0], &[1.0]).unwrap();
    let s = draw_many(100_000, 5, |r| d.sample(r));
    let (m, sd) = mean_sd(&s);
    assert!(m.abs() < 3.0 * sd / (s.len() as f64).sqrt(), "mean {m}");
    // Laplace(0, 1) has variance 2
    assert!((sd * sd - 2.0).abs() < 0.05, "variance {}", sd * sd);
}

fn chain(weights: &[(usize, usize, f64)], dims: Vec<usize>) -> GroupedGraph {
    let layout = GroupLayout::new(dims);
    let d = layout.total();
    let mut adj = Matrix::zeros(d, d);
    for &(a, b, w) in weights {
        adj.set(a, b, w);
    }
    GroupedGraph::fully_observed(layout, adj).unwrap()
}

#[test]
fn gauss_relu_single_positive_parent() {
    assert_eq!(gauss_relu_moments(&[2.0], &[1.0]).unwrap(), (-2.0, 1.0));
    // the parent is a root drawn from N(0, 1); condition on it empirically
    let g = chain(&[(0, 1, 1.0)], vec![1, 1]);
    let s = ancestral_sample(&g, &CausalFunction::GaussRelu, 100_000, 9).unwrap();
    let resid: Vec<f64> = (0..s.values.rows()).map(|i| s.values.get(i, 1) + s.values.get(i, 0).max(0.0)).collect();
    let (m, sd) = mean_sd(&resid);
    assert!(m.abs() < 3.0 / (resid.len() as f64).sqrt(), "mean {m}");
    assert!((sd - 1.0).abs() < 0.01, "sd {sd}");
}

fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    0.5 * (1.0 + libm::erf((x - mean) / (sd * std::f64::consts::SQRT_2)))
}

#[test]
fn expfam_linear_statistic_shifts_gaussian() {
    // η(x) = x, T(y) = y, Gaussian base: parent value 2 with weight 1 gives N(2, 1)
    let fam = ExpFamily::new(vec![Basis::Identity], vec![Basis::Identity], BaseMeasure::Gaussian { precision: 1.0 });
    let d = expfam_conditional(&fam, &[2.0], &[1.0]).unwrap();
    let mut s = draw_many(100_000, 21, |r| d.sample(r));
    let e = ks(&mut s, |x| normal_cdf(x, 2.0, 1.0));
    assert!(e < 0.01, "KS {e}");
}

#[test]
fn gibbs_matches_ancestral_on_generated_dag() {
    // generated DAGs index parents before children, so the scan refreshes
    // parents first; a reverse-indexed DAG settles on a different joint
    let g = gen_dag_sim1(2, 3, 5, [0.9, 1.0]).unwrap();
    let n = 100_000;
    for phi in [CausalFunction::laplace_tanh_default(), CausalFunction::GaussRelu] {
        let a = ancestral_sample(&g, &phi, n, 1).unwrap();
        let b = gibbs_sample(&g, &phi, n, DEFAULT_SWEEPS, 2).unwrap();
        for v in 0..g.num_vars() {
            let (ca, cb) = (a.values.column(v), b.values.column(v));
            let ((ma, sa), (mb, sb)) = (mean_sd(&ca), mean_sd(&cb));
            let se = ((sa * sa + sb * sb) / n as f64).sqrt();
            assert!((ma - mb).abs() < 3.0 * se, "{} var {v}: means {ma} {mb}", phi.kind_name());
            let m4 = |c: &[f64], m: f64| c.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n as f64;
            let var_se = ((m4(&ca, ma) - sa.powi(4) + m4(&cb, mb) - sb.powi(4)) / n as f64).sqrt();
            assert!((sa * sa - sb * sb).abs() < 3.0 * var_se, "{} var {v}: variances {} {}", phi.kind_name(), sa * sa, sb * sb);
        }
    }
}

#[test]
fn samples_are_exchangeable() {
    let g = gen_dag_sim1(2, 3, 4, [0.9, 1.0]).unwrap();
    let n = 20_000;
    let s = ancestral_sample(&g, &CausalFunction::laplace_tanh_default(), n, 8).unwrap();
    for v in 0..g.num_vars() {
        let c = s.values.column(v);
        let (m, sd) = mean_sd(&c);
        let lag1 = c.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / ((n - 1) as f64 * sd * sd);
        assert!(lag1.abs() < 4.0 / (n as f64).sqrt(), "var {v}: lag-1 autocorrelation {lag1}");
    }
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let g = gen_dag_sim1(3, 3, 0, [0.9, 1.0]).unwrap();
    let phi = CausalFunction::laplace_tanh_default();
    let a = ancestral_sample(&g, &phi, 64, 5).unwrap();
    assert_eq!(a, ancestral_sample(&g, &phi, 64, 5).unwrap());
    assert_ne!(a, ancestral_sample(&g, &phi, 64, 6).unwrap());
    // a prefix of a larger draw is the smaller draw
    let big = ancestral_sample(&g, &phi, 128, 5).unwrap();
    assert_eq!(big.values.select_rows(&(0..64).collect::<Vec<_>>()), a.values);
}

#[test]
fn masking_keeps_observables_and_is_idempotent() {
    let g = gen_cyclic_confounded(3, 10, 0).unwrap();
    assert_eq!(g.num_vars(), 60);
    let s = gibbs_sample(&g, &CausalFunction::GaussRelu, 50, 5, 1).unwrap();
    let m = mask_confounders(&s, &g);
    assert_eq!(m.values.cols(), 30);
    assert_eq!(m.layout.dims(), &[10, 10, 10]);
    assert_eq!(mask_confounders(&m, &g), m);
    let keep = g.observable_indices();
    assert_eq!(m.values, s.values.select_columns(&keep));
}
