use gcarl_core::estimator::*;
use gcarl_core::graphs::gen_dag_sim1;
use gcarl_core::matrix::{GroupLayout, Matrix};
use gcarl_core::mixing::{gen_mixing, mix, GroupedDataset};
use gcarl_core::rng;
use gcarl_core::sampler::{ancestral_sample, CausalFunction};
use rand_distr::{Distribution, StandardNormal};

fn sim1_data(n: usize, layers: usize, seed: u64) -> GroupedDataset {
    let g = gen_dag_sim1(3, 5, seed, [0.9, 1.0]).unwrap();
    let s = ancestral_sample(&g, &CausalFunction::laplace_tanh_default(), n, seed + 1).unwrap();
    mix(&gen_mixing(&[5, 5, 5], layers, seed + 2).unwrap(), &s).unwrap()
}

fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut worst) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        worst = worst.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    worst
}

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn negatives_keep_group_marginals() {
    let data = sim1_data(10_000, 2, 0);
    let mut r = rng::seeded(4);
    let batch = build_shuffled_batch(&data, 10_000, &mut r).unwrap();
    let neg = batch.negatives();
    for c in 0..15 {
        let k = two_sample_ks(&neg.column(c), &data.x.column(c));
        assert!(k < 0.02, "column {c}: KS {k}");
    }
    assert!(batch.labels[..10_000].iter().all(|&y| y == 1.0) && batch.labels[10_000..].iter().all(|&y| y == 0.0));
}

#[test]
fn negatives_break_cross_group_dependence() {
    let data = sim1_data(16_384, 0, 1);
    let b = 4096;
    let mut r = rng::seeded(5);
    let batch = build_shuffled_batch(&data, b, &mut r).unwrap();
    let (pos, neg) = (batch.positives(), batch.negatives());
    let mut linked = 0.0f64;
    let mut worst = 0.0f64;
    for a in 0..15 {
        for c in 0..15 {
            if a / 5 != c / 5 {
                linked = linked.max(corr(&pos.column(a), &pos.column(c)).abs());
                worst = worst.max(corr(&neg.column(a), &neg.column(c)).abs());
            }
        }
    }
    assert!(linked > 4.0 / (b as f64).sqrt(), "the data should be dependent across groups: {linked}");
    assert!(worst < 4.0 / (b as f64).sqrt(), "max cross-group correlation {worst}");
}

#[test]
fn oversized_batch_rejected() {
    let data = sim1_data(10, 1, 2);
    let mut r = rng::seeded(0);
    assert!(matches!(build_shuffled_batch(&data, 11, &mut r), Err(TrainError::BatchTooLarge { .. })));
}

#[test]
fn single_group_cannot_be_discriminated() {
    let mut r = rng::seeded(3);
    let mut x = Matrix::zeros(4096, 4);
    for v in x.as_mut_slice() {
        *v = StandardNormal.sample(&mut r);
    }
    let data = GroupedDataset::new(x, GroupLayout::new(vec![4])).unwrap();
    let model = RegressionModel::new(data.layout.clone(), 1, PsiSpec::abs_mlp(), 0).unwrap();
    let cfg = TrainConfig { iterations: 300, batch_size: 256, seed: 1, eval_every: 50, ..TrainConfig::default() };
    let out = train(model, &data, &cfg).unwrap();
    let loss = evaluate_loss(&out.model, &data, 2048, 4, 9).unwrap();
    assert!((loss - core::f64::consts::LN_2).abs() < 0.02, "held-out loss {loss}");
}

#[test]
fn logits_follow_row_order() {
    let data = sim1_data(64, 2, 3);
    let model = RegressionModel::new(data.layout.clone(), 2, PsiSpec::abs_mlp(), 1).unwrap();
    let rows: Vec<usize> = (0..64).rev().collect();
    let a = model.logits(&data.x).unwrap();
    let b = model.logits(&data.x.select_rows(&rows)).unwrap();
    for (i, &r) in rows.iter().enumerate() {
        assert_eq!(a[r], b[i]);
    }
}

#[test]
fn logits_invariant_to_matched_input_relabeling() {
    let data = sim1_data(32, 2, 4);
    for psi in [PsiSpec::abs_mlp(), PsiSpec::maxout_bilinear(), PsiSpec::tanh_mixture()] {
        let model = RegressionModel::new(data.layout.clone(), 2, psi, 2).unwrap();
        // swap inputs 0 and 3 of group 0, and the matching first-layer weight columns
        let perm = [3, 1, 2, 0, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14];
        let x = data.x.select_columns(&perm);
        let mut moved = model.clone();
        let first = &mut moved.features[0].layers_mut()[0];
        let din = first.spec.in_dim;
        for row in first.weights.chunks_mut(din) {
            row.swap(0, 3);
        }
        let a = model.logits(&data.x).unwrap();
        let b = moved.logits(&x).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12, "{}: {u} vs {v}", psi.name());
        }
    }
}

#[test]
fn training_is_deterministic_and_reduces_loss() {
    let data = sim1_data(2048, 1, 5);
    let cfg = TrainConfig { iterations: 200, batch_size: 128, seed: 3, eval_every: 50, ..TrainConfig::default() };
    let run = || train(RegressionModel::new(data.layout.clone(), 1, PsiSpec::abs_mlp(), 7).unwrap(), &data, &cfg).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.model, b.model);
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.trace[0].0, 0);
    assert!(a.final_loss < core::f64::consts::LN_2);
    let h = extract_latents(&a.model, &data).unwrap();
    assert_eq!((h.rows(), h.cols()), (2048, 15));
    let g = extract_graph(&a.model);
    assert!(!g.is_known(0, 4) && g.is_known(0, 5));
}

#[test]
fn invalid_config_rejected() {
    let data = sim1_data(64, 1, 6);
    let model = RegressionModel::new(data.layout.clone(), 1, PsiSpec::abs_mlp(), 0).unwrap();
    let cfg = TrainConfig { learning_rate: -1.0, ..TrainConfig::default() };
    assert!(matches!(train(model, &data, &cfg), Err(TrainError::InvalidConfig(_))));
}
