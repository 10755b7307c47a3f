//! The contrastive regression function: group-wise feature extractors,
//! intra-group terms, pairwise inter-group terms and a scalar bias.

use alloc::vec::Vec;

use thiserror::Error;

use super::psi::{PairPlan, PsiParams, PsiSpec};
use crate::diffnet::{build_network, DiffnetError, Gradients, LayerSpec, Network, ParamBlocks};
use crate::matrix::{GroupLayout, Matrix};
use crate::rng::{self, derive_seed};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("input has {found} columns, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid ψ configuration")]
    InvalidPsi,
    #[error(transparent)]
    Network(#[from] DiffnetError),
}

/// Feature extractor of width `dim`: maxout hidden layers of width `2·dim`
/// followed by a linear output. No layers at all for `layers == 0`, a single
/// linear layer for `layers == 1`.
pub fn feature_specs(dim: usize, layers: usize) -> Vec<LayerSpec> {
    match layers {
        0 => return Vec::new(),
        1 => return alloc::vec![LayerSpec::affine(dim, dim)],
        _ => {}
    }
    let hidden = 2 * dim;
    let mut specs = alloc::vec![LayerSpec::maxout(dim, hidden, 2)];
    for _ in 2..layers {
        specs.push(LayerSpec::maxout(hidden, hidden, 2));
    }
    specs.push(LayerSpec::affine(hidden, dim));
    specs
}

/// Intra-group term: `dim → 2·dim` tanh hidden layer, scalar output.
pub fn intra_specs(dim: usize) -> Vec<LayerSpec> {
    alloc::vec![LayerSpec::affine(dim, 2 * dim), LayerSpec::tanh(2 * dim), LayerSpec::affine(2 * dim, 1)]
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionModel {
    pub layout: GroupLayout,
    /// One extractor per group; empty when the features are the inputs themselves.
    pub features: Vec<Network>,
    pub intra: Vec<Network>,
    pub bias: f64,
    pub psi: PsiParams,
}

/// Gradients congruent with a [`RegressionModel`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelGradients {
    pub features: Vec<Gradients>,
    pub intra: Vec<Gradients>,
    pub bias: f64,
    pub psi: PsiParams,
}

impl RegressionModel {
    pub fn new(layout: GroupLayout, feature_layers: usize, psi: PsiSpec, seed: u64) -> Result<Self, ModelError> {
        if !psi.is_valid() {
            return Err(ModelError::InvalidPsi);
        }
        let mut features = Vec::new();
        let mut intra = Vec::new();
        for (m, &d) in layout.dims().iter().enumerate() {
            if feature_layers > 0 {
                features.push(build_network(&feature_specs(d, feature_layers), derive_seed(seed, 2 * m as u64))?);
            }
            let mut net = build_network(&intra_specs(d), derive_seed(seed, 2 * m as u64 + 1))?;
            // start the intra-group terms at zero output
            let last = net.layers_mut().last_mut().unwrap();
            last.weights.fill(0.0);
            intra.push(net);
        }
        let mut r = rng::seeded(derive_seed(seed, 0x7073_69));
        let psi = PsiParams::random(psi, &layout, &mut r);
        Ok(Self { layout, features, intra, bias: 0.0, psi })
    }

    pub fn feature_layers(&self) -> usize {
        self.features.first().map_or(0, |n| n.layers().iter().filter(|l| l.spec.weight_len() > 0).count())
    }

    /// Makes every logit exactly zero: bias, pair weights and the intra-group
    /// output layers are cleared.
    pub fn zero_logits(&mut self) {
        self.bias = 0.0;
        self.psi.silence();
        for net in &mut self.intra {
            let last = net.layers_mut().last_mut().unwrap();
            last.weights.fill(0.0);
            last.biases.fill(0.0);
        }
    }

    pub fn param_count(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn zero_gradients(&self) -> ModelGradients {
        ModelGradients {
            features: self.features.iter().map(Network::zero_gradients).collect(),
            intra: self.intra.iter().map(Network::zero_gradients).collect(),
            bias: 0.0,
            psi: self.psi.zeros_like(),
        }
    }

    fn check(&self, x: &Matrix) -> Result<(), ModelError> {
        if x.cols() != self.layout.total() {
            return Err(ModelError::DimensionMismatch { expected: self.layout.total(), found: x.cols() });
        }
        Ok(())
    }

    /// Feature matrix `H = [h^1(x^1), …, h^M(x^M)]`.
    pub fn features_of(&self, x: &Matrix) -> Result<Matrix, ModelError> {
        self.check(x)?;
        if self.features.is_empty() {
            return Ok(x.clone());
        }
        let mut h = Matrix::zeros(x.rows(), self.layout.total());
        for (m, net) in self.features.iter().enumerate() {
            let out = net.predict(&x.column_block(self.layout.range(m)))?;
            h.set_column_block(self.layout.offset(m), &out);
        }
        Ok(h)
    }

    /// One logit per row.
    pub fn logits(&self, x: &Matrix) -> Result<Vec<f64>, ModelError> {
        let h = self.features_of(x)?;
        let plan = PairPlan::new(&self.layout);
        let mut cache = alloc::vec![0.0; plan.cache_len(&self.psi)];
        let mut r: Vec<f64> = (0..h.rows()).map(|i| self.bias + plan.forward_row(&self.psi, h.row(i), &mut cache)).collect();
        for (m, net) in self.intra.iter().enumerate() {
            let out = net.predict(&h.column_block(self.layout.range(m)))?;
            for (ri, o) in r.iter_mut().zip(out.as_slice()) {
                *ri += o;
            }
        }
        Ok(r)
    }

    /// Logits together with the gradient of `Σ_i upstream_i · r_i`, where
    /// `upstream` is produced from the logits by the caller.
    pub fn logits_and_gradients(
        &self,
        x: &Matrix,
        upstream: impl FnOnce(&[f64]) -> Vec<f64>,
    ) -> Result<(Vec<f64>, ModelGradients), ModelError> {
        self.check(x)?;
        let n = x.rows();
        let mut h = if self.features.is_empty() { x.clone() } else { Matrix::zeros(n, self.layout.total()) };
        let mut feature_tapes = Vec::with_capacity(self.features.len());
        for (m, net) in self.features.iter().enumerate() {
            let (out, tape) = net.forward(&x.column_block(self.layout.range(m)))?;
            h.set_column_block(self.layout.offset(m), &out);
            feature_tapes.push(tape);
        }
        let plan = PairPlan::new(&self.layout);
        let width = plan.cache_len(&self.psi);
        let mut cache = alloc::vec![0.0; width * n];
        let mut r: Vec<f64> =
            (0..n).map(|i| self.bias + plan.forward_row(&self.psi, h.row(i), &mut cache[i * width..(i + 1) * width])).collect();
        let mut intra_tapes = Vec::with_capacity(self.intra.len());
        for (m, net) in self.intra.iter().enumerate() {
            let (out, tape) = net.forward(&h.column_block(self.layout.range(m)))?;
            for (ri, o) in r.iter_mut().zip(out.as_slice()) {
                *ri += o;
            }
            intra_tapes.push(tape);
        }
        let g = upstream(&r);
        assert_eq!(g.len(), n, "one upstream value per row");

        let mut grads = self.zero_gradients();
        grads.bias = g.iter().sum();
        let mut dh = Matrix::zeros(n, self.layout.total());
        for i in 0..n {
            if g[i] != 0.0 {
                plan.backward_row(&self.psi, h.row(i), &cache[i * width..(i + 1) * width], g[i], &mut grads.psi, dh.row_mut(i));
            }
        }
        let up = Matrix::from_vec(n, 1, g).expect("column of upstream values");
        for (m, (net, tape)) in self.intra.iter().zip(intra_tapes).enumerate() {
            let (gr, dhm) = tape.backward(net, &up)?;
            grads.intra[m] = gr;
            let off = self.layout.offset(m);
            for i in 0..n {
                for (j, v) in dhm.row(i).iter().enumerate() {
                    dh.row_mut(i)[off + j] += v;
                }
            }
        }
        for (m, (net, tape)) in self.features.iter().zip(feature_tapes).enumerate() {
            let (gr, _) = tape.backward(net, &dh.column_block(self.layout.range(m)))?;
            grads.features[m] = gr;
        }
        Ok((r, grads))
    }

    /// Weighted inter-group adjacency estimate; intra-group entries are zero
    /// and flagged unknown by [`GraphEstimate::is_known`].
    pub fn graph_estimate(&self) -> GraphEstimate {
        let d = self.layout.total();
        let map = self.layout.group_map();
        let mut weights = Matrix::zeros(d, d);
        for a in 0..d {
            for b in 0..d {
                if map[a] != map[b] {
                    weights.set(a, b, self.psi.strength(a, b));
                }
            }
        }
        GraphEstimate { weights, layout: self.layout.clone() }
    }
}

/// Estimated inter-group strengths. Pairs inside a group are unknown.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphEstimate {
    pub weights: Matrix,
    pub layout: GroupLayout,
}

impl GraphEstimate {
    pub fn is_known(&self, a: usize, b: usize) -> bool {
        self.layout.group_of(a) != self.layout.group_of(b)
    }
}

impl ParamBlocks for RegressionModel {
    fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for n in self.features.iter().chain(&self.intra) {
            out.extend(n.blocks());
        }
        out.push(core::slice::from_ref(&self.bias));
        out.extend(self.psi.blocks());
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for n in self.features.iter_mut().chain(self.intra.iter_mut()) {
            out.extend(n.blocks_mut());
        }
        out.push(core::slice::from_mut(&mut self.bias));
        out.extend(self.psi.blocks_mut());
        out
    }
}

impl ParamBlocks for ModelGradients {
    fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for g in self.features.iter().chain(&self.intra) {
            out.extend(g.blocks());
        }
        out.push(core::slice::from_ref(&self.bias));
        out.extend(self.psi.blocks());
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for g in self.features.iter_mut().chain(self.intra.iter_mut()) {
            out.extend(g.blocks_mut());
        }
        out.push(core::slice::from_mut(&mut self.bias));
        out.extend(self.psi.blocks_mut());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_logit_from_bias() {
        let mut m = RegressionModel::new(GroupLayout::uniform(2, 3), 2, PsiSpec::abs_mlp(), 1).unwrap();
        m.zero_logits();
        m.bias = 1.5;
        let mut x = Matrix::zeros(4, 6);
        for (i, v) in x.as_mut_slice().iter_mut().enumerate() {
            *v = (i as f64).sin();
        }
        assert!(m.logits(&x).unwrap().iter().all(|&r| r == 1.5));
    }

    #[test]
    fn estimate_masks_intra_blocks() {
        let m = RegressionModel::new(GroupLayout::uniform(3, 2), 1, PsiSpec::maxout_bilinear(), 0).unwrap();
        let g = m.graph_estimate();
        assert_eq!(g.weights.rows(), 6);
        assert!(!g.is_known(0, 1) && g.is_known(0, 2));
        assert_eq!(g.weights.get(0, 1), 0.0);
    }

    #[test]
    fn feature_depths() {
        assert!(feature_specs(3, 0).is_empty());
        assert_eq!(feature_specs(3, 1).len(), 1);
        assert_eq!(feature_specs(3, 3).len(), 3);
        let m = RegressionModel::new(GroupLayout::uniform(2, 2), 3, PsiSpec::abs_mlp(), 0).unwrap();
        assert_eq!(m.feature_layers(), 3);
        let m = RegressionModel::new(GroupLayout::uniform(2, 2), 0, PsiSpec::abs_mlp(), 0).unwrap();
        assert_eq!(m.feature_layers(), 0);
        let x = Matrix::from_rows(&[alloc::vec![1.0, 2.0, 3.0, 4.0]]).unwrap();
        assert_eq!(m.features_of(&x).unwrap(), x);
    }
}
