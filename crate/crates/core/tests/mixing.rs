use gcarl_core::diffnet::Network;
use gcarl_core::graphs::gen_dag_sim1;
use gcarl_core::matrix::{GroupLayout, Matrix};
use gcarl_core::mixing::*;
use gcarl_core::rng;
use gcarl_core::sampler::{ancestral_sample, CausalFunction, LatentSamples};
use nalgebra::DMatrix;
use rand::Rng as _;

fn jacobian(net: &Network, s: &[f64]) -> DMatrix<f64> {
    let d = s.len();
    let x = Matrix::from_vec(1, d, s.to_vec()).unwrap();
    let mut j = DMatrix::zeros(d, d);
    for out in 0..d {
        let (_, tape) = net.forward(&x).unwrap();
        let mut up = Matrix::zeros(1, d);
        up.set(0, out, 1.0);
        let (_, dx) = tape.backward(net, &up).unwrap();
        for i in 0..d {
            j[(out, i)] = dx.get(0, i);
        }
    }
    j
}

fn eval(net: &Network, s: &[f64]) -> Vec<f64> {
    net.predict(&Matrix::from_vec(1, s.len(), s.to_vec()).unwrap()).unwrap().into_vec()
}

/// Damped Newton solve of `f(s) = x` starting from zero.
fn invert(net: &Network, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let mut s = vec![0.0; d];
    let resid = |s: &[f64]| -> f64 { eval(net, s).iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() };
    for _ in 0..200 {
        let r = resid(&s);
        if r < 1e-12 {
            break;
        }
        let fx = eval(net, &s);
        let rhs = DMatrix::from_iterator(d, 1, fx.iter().zip(x).map(|(a, b)| b - a));
        let step = jacobian(net, &s).lu().solve(&rhs).expect("invertible Jacobian");
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = s.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect();
            if resid(&cand) < r || t < 1e-6 {
                s = cand;
                break;
            }
            t *= 0.5;
        }
    }
    s
}

fn latents(dims: &[usize], n: usize, seed: u64) -> LatentSamples {
    let layout = GroupLayout::new(dims.to_vec());
    let mut r = rng::seeded(seed);
    let mut v = Matrix::zeros(n, layout.total());
    for x in v.as_mut_slice() {
        *x = r.random_range(-3.0..3.0);
    }
    LatentSamples { values: v, layout }
}

#[test]
fn layer_weights_are_well_conditioned() {
    for seed in 0..20 {
        let m = gen_mixing(&[3, 5, 4], 3, seed).unwrap();
        for net in &m.networks {
            for layer in net.layers().iter().filter(|l| l.spec.weight_len() > 0) {
                let d = (layer.weights.len() as f64).sqrt() as usize;
                let w = DMatrix::from_row_slice(d, d, &layer.weights);
                let sv = w.singular_values();
                let cond = sv.max() / sv.min();
                assert!(cond <= MAX_CONDITION, "seed {seed}: condition {cond}");
            }
        }
    }
}

#[test]
fn mixing_is_invertible() {
    let m = gen_mixing(&[4, 4], 3, 11).unwrap();
    let s = latents(&[4, 4], 30, 1);
    let x = mix(&m, &s).unwrap();
    for i in 0..30 {
        for g in 0..2 {
            let range = m.layout.range(g);
            let net = &m.networks[g];
            let si = &s.values.row(i)[range.clone()];
            assert!(jacobian(net, si).determinant().abs() > 1e-12);
            let rec = invert(net, &x.x.row(i)[range]);
            let err = rec.iter().zip(si).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-6, "row {i} group {g}: error {err}");
        }
    }
}

#[test]
fn groups_mix_only_their_own_latents() {
    let m = gen_mixing(&[3, 2, 3], 2, 4).unwrap();
    let s = latents(&[3, 2, 3], 10, 2);
    let base = mix(&m, &s).unwrap();
    let mut t = s.clone();
    for i in 0..10 {
        t.values.row_mut(i)[3] += 1.0; // group 1 only
    }
    let moved = mix(&m, &t).unwrap();
    for i in 0..10 {
        for c in 0..8 {
            let same = base.x.get(i, c) == moved.x.get(i, c);
            assert_eq!(same, !(3..5).contains(&c), "row {i} column {c}");
        }
    }
}

#[test]
fn zero_layers_is_identity() {
    let m = gen_mixing(&[2, 3], 0, 0).unwrap();
    let s = latents(&[2, 3], 5, 3);
    assert_eq!(mix(&m, &s).unwrap().x, s.values);
}

#[test]
fn mixing_is_deterministic() {
    assert_eq!(gen_mixing(&[5, 5, 5], 2, 9).unwrap(), gen_mixing(&[5, 5, 5], 2, 9).unwrap());
    assert_ne!(gen_mixing(&[5, 5, 5], 2, 9).unwrap(), gen_mixing(&[5, 5, 5], 2, 10).unwrap());
    let g = gen_dag_sim1(3, 5, 0, [0.9, 1.0]).unwrap();
    let s = ancestral_sample(&g, &CausalFunction::laplace_tanh_default(), 100, 1).unwrap();
    let a = mix(&gen_mixing(&[5, 5, 5], 2, 9).unwrap(), &s).unwrap();
    let b = mix(&gen_mixing(&[5, 5, 5], 2, 9).unwrap(), &s).unwrap();
    assert_eq!(a, b);
    assert_eq!(graph_hash(&g), graph_hash(&gen_dag_sim1(3, 5, 0, [0.9, 1.0]).unwrap()));
    assert_ne!(graph_hash(&g), graph_hash(&gen_dag_sim1(3, 5, 1, [0.9, 1.0]).unwrap()));
}

#[test]
fn dimension_mismatch_rejected() {
    let m = gen_mixing(&[2, 2], 1, 0).unwrap();
    let s = latents(&[2, 3], 4, 0);
    assert!(matches!(mix(&m, &s), Err(MixingError::DimensionMismatch { .. })));
    assert!(matches!(gen_mixing(&[2, 0], 1, 0), Err(MixingError::EmptyGroup)));
}
