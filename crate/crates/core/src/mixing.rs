//! Group-wise invertible observation models and grouped datasets.

use alloc::string::String;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::diffnet::{DiffnetError, Layer, LayerSpec, Network};
use crate::graphs::GroupedGraph;
use crate::linalg;
use crate::matrix::{GroupLayout, Matrix};
use crate::rng;
use crate::sampler::LatentSamples;

pub const LEAKY_SLOPE: f64 = 0.2;
pub const MAX_CONDITION: f64 = 1e3;
const REDRAW_BUDGET: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MixingError {
    #[error("could not draw a well-conditioned layer in {0} attempts")]
    RedrawBudget(usize),
    #[error("latent columns {found} do not match model dims {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("group dimension must be positive")]
    EmptyGroup,
    #[error(transparent)]
    Network(#[from] DiffnetError),
}

/// One square network per group; `layers == 0` is the identity map.
#[derive(Clone, Debug, PartialEq)]
pub struct MixingModel {
    pub networks: Vec<Network>,
    pub layout: GroupLayout,
    pub layers: usize,
}

/// Where a dataset came from.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Provenance {
    pub graph_hash: u64,
    pub mixing_seed: u64,
    pub phi_kind: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupedDataset {
    pub x: Matrix,
    pub layout: GroupLayout,
    pub provenance: Provenance,
}

impl GroupedDataset {
    pub fn new(x: Matrix, layout: GroupLayout) -> Result<Self, MixingError> {
        if x.cols() != layout.total() {
            return Err(MixingError::DimensionMismatch { expected: layout.total(), found: x.cols() });
        }
        Ok(Self { x, layout, provenance: Provenance::default() })
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn group(&self, m: usize) -> Matrix {
        self.x.column_block(self.layout.range(m))
    }
}

/// Layer specs of a depth-`layers` square mixing network of width `dim`.
pub fn mixing_specs(dim: usize, layers: usize) -> Vec<LayerSpec> {
    let mut specs = Vec::new();
    for l in 0..layers {
        specs.push(LayerSpec::affine(dim, dim));
        if l + 1 < layers {
            specs.push(LayerSpec::leaky_relu(dim, LEAKY_SLOPE));
        }
    }
    specs
}

fn draw_square(dim: usize, rng: &mut rng::Rng) -> Result<Matrix, MixingError> {
    for _ in 0..REDRAW_BUDGET {
        let mut g = Matrix::zeros(dim, dim);
        for v in g.as_mut_slice() {
            *v = StandardNormal.sample(rng);
        }
        let q = linalg::orthogonal_factor(&g);
        if q.is_finite() && linalg::condition_number(&q) <= MAX_CONDITION {
            return Ok(q);
        }
    }
    Err(MixingError::RedrawBudget(REDRAW_BUDGET))
}

pub fn gen_mixing(dims: &[usize], layers: usize, seed: u64) -> Result<MixingModel, MixingError> {
    if dims.contains(&0) {
        return Err(MixingError::EmptyGroup);
    }
    let layout = GroupLayout::new(dims.to_vec());
    let mut networks = Vec::with_capacity(dims.len());
    for (m, &d) in dims.iter().enumerate() {
        let mut rng = rng::seeded(rng::derive_seed(seed, m as u64));
        let mut net_layers = Vec::new();
        for spec in mixing_specs(d, layers) {
            let weights = if spec.weight_len() > 0 { draw_square(d, &mut rng)?.into_vec() } else { Vec::new() };
            let biases = alloc::vec![0.0; spec.bias_len()];
            net_layers.push(Layer { spec, weights, biases });
        }
        if net_layers.is_empty() {
            networks.push(Network::identity(d));
        } else {
            networks.push(Network::from_layers(net_layers)?);
        }
    }
    Ok(MixingModel { networks, layout, layers })
}

/// `X^m = f^m(S^m)` for every group independently.
pub fn mix(model: &MixingModel, s: &LatentSamples) -> Result<GroupedDataset, MixingError> {
    if s.values.cols() != model.layout.total() || s.layout.dims() != model.layout.dims() {
        return Err(MixingError::DimensionMismatch { expected: model.layout.total(), found: s.values.cols() });
    }
    let mut x = Matrix::zeros(s.values.rows(), model.layout.total());
    for (m, net) in model.networks.iter().enumerate() {
        let block = s.values.column_block(model.layout.range(m));
        let out = if model.layers == 0 { block } else { net.predict(&block)? };
        x.set_column_block(model.layout.offset(m), &out);
    }
    Ok(GroupedDataset { x, layout: model.layout.clone(), provenance: Provenance::default() })
}

/// FNV-1a over the graph's shape, weights and mask.
pub fn graph_hash(g: &GroupedGraph) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    for &d in g.layout().dims() {
        feed(&(d as u64).to_le_bytes());
    }
    for &w in g.adjacency().as_slice() {
        feed(&w.to_bits().to_le_bytes());
    }
    for &c in g.confounder_mask() {
        feed(&[c as u8]);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_when_no_layers() {
        let m = gen_mixing(&[2, 3], 0, 1).unwrap();
        let mut s = Matrix::zeros(4, 5);
        for (i, v) in s.as_mut_slice().iter_mut().enumerate() {
            *v = i as f64 * 0.3 - 1.0;
        }
        let lat = LatentSamples { values: s.clone(), layout: GroupLayout::new(alloc::vec![2, 3]) };
        assert_eq!(mix(&m, &lat).unwrap().x, s);
    }

    #[test]
    fn zero_maps_to_zero() {
        let m = gen_mixing(&[3, 3], 3, 2).unwrap();
        let lat = LatentSamples { values: Matrix::zeros(2, 6), layout: GroupLayout::uniform(2, 3) };
        assert!(mix(&m, &lat).unwrap().x.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_wrong_width() {
        let m = gen_mixing(&[2, 2], 2, 0).unwrap();
        let lat = LatentSamples { values: Matrix::zeros(2, 5), layout: GroupLayout::new(alloc::vec![2, 3]) };
        assert!(mix(&m, &lat).is_err());
    }
}
