//! A small dense network engine: sequential layer stacks with exact
//! reverse-mode gradients and SGD with classical momentum.
//!
//! Networks operate on batches stored as [`Matrix`] rows. A forward pass
//! returns a [`Tape`] holding the intermediates; [`Tape::backward`] consumes
//! it, so a tape can be replayed at most once.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use thiserror::Error;

use crate::matrix::Matrix;
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffnetError {
    #[error("layer {layer}: expected input dimension {expected}, found {found}")]
    DimensionMismatch { layer: usize, expected: usize, found: usize },
    #[error("invalid layer {layer}: {reason}")]
    InvalidLayer { layer: usize, reason: &'static str },
    #[error("network has no layers")]
    Empty,
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: usize },
    #[error("non-finite gradient in parameter block {block}")]
    NonFiniteBlock { block: usize },
    #[error("tape was recorded on a different network")]
    TapeMismatch,
    #[error("gradient blocks are not congruent with the parameters")]
    Incongruent,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LayerKind {
    Affine,
    LeakyRelu { slope: f64 },
    /// `out_dim` units, each the maximum over `pieces` affine maps of the input.
    Maxout { pieces: usize },
    Tanh,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl LayerSpec {
    pub fn affine(in_dim: usize, out_dim: usize) -> Self {
        Self { kind: LayerKind::Affine, in_dim, out_dim }
    }

    pub fn maxout(in_dim: usize, out_dim: usize, pieces: usize) -> Self {
        Self { kind: LayerKind::Maxout { pieces }, in_dim, out_dim }
    }

    pub fn leaky_relu(dim: usize, slope: f64) -> Self {
        Self { kind: LayerKind::LeakyRelu { slope }, in_dim: dim, out_dim: dim }
    }

    pub fn tanh(dim: usize) -> Self {
        Self { kind: LayerKind::Tanh, in_dim: dim, out_dim: dim }
    }

    /// Number of stored weight entries (`rows × in_dim`).
    pub fn weight_len(&self) -> usize {
        self.weight_rows() * self.in_dim
    }

    pub fn bias_len(&self) -> usize {
        self.weight_rows()
    }

    fn weight_rows(&self) -> usize {
        match self.kind {
            LayerKind::Affine => self.out_dim,
            LayerKind::Maxout { pieces } => self.out_dim * pieces,
            LayerKind::LeakyRelu { .. } | LayerKind::Tanh => 0,
        }
    }

    fn validate(&self, layer: usize) -> Result<(), DiffnetError> {
        if self.in_dim == 0 || self.out_dim == 0 {
            return Err(DiffnetError::InvalidLayer { layer, reason: "zero width" });
        }
        match self.kind {
            LayerKind::LeakyRelu { slope } if !slope.is_finite() => {
                Err(DiffnetError::InvalidLayer { layer, reason: "non-finite slope" })
            }
            LayerKind::Maxout { pieces: 0 } => {
                Err(DiffnetError::InvalidLayer { layer, reason: "maxout needs at least one piece" })
            }
            LayerKind::LeakyRelu { .. } | LayerKind::Tanh if self.in_dim != self.out_dim => {
                Err(DiffnetError::InvalidLayer { layer, reason: "activation must be square" })
            }
            _ => Ok(()),
        }
    }
}

/// A layer with its parameters. Weight row `r` (row-major, `in_dim` wide)
/// feeds output unit `r` for affine layers and unit `r % out_dim` of piece
/// `r / out_dim` for maxout layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

/// Builds a network with weights uniform on `±sqrt(1/fan_in)` and zero biases.
pub fn build_network(specs: &[LayerSpec], init_seed: u64) -> Result<Network, DiffnetError> {
    check_chain(specs.iter())?;
    let mut rng = rng::seeded(init_seed);
    let layers = specs
        .iter()
        .map(|spec| {
            let bound = libm::sqrt(1.0 / spec.in_dim as f64);
            let weights = (0..spec.weight_len()).map(|_| rng.random_range(-bound..=bound)).collect();
            Layer { spec: *spec, weights, biases: vec![0.0; spec.bias_len()] }
        })
        .collect();
    Ok(Network { layers })
}

fn check_chain<'a>(specs: impl Iterator<Item = &'a LayerSpec>) -> Result<(), DiffnetError> {
    let mut prev: Option<usize> = None;
    let mut any = false;
    for (i, spec) in specs.enumerate() {
        any = true;
        spec.validate(i)?;
        if let Some(p) = prev {
            if p != spec.in_dim {
                return Err(DiffnetError::DimensionMismatch { layer: i, expected: p, found: spec.in_dim });
            }
        }
        prev = Some(spec.out_dim);
    }
    if any { Ok(()) } else { Err(DiffnetError::Empty) }
}

impl Network {
    /// Assembles a network from explicit parameters, e.g. after deserialization.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, DiffnetError> {
        check_chain(layers.iter().map(|l| &l.spec))?;
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.spec.weight_len() || l.biases.len() != l.spec.bias_len() {
                return Err(DiffnetError::InvalidLayer { layer: i, reason: "parameter length" });
            }
            if l.weights.iter().chain(&l.biases).any(|v| !v.is_finite()) {
                return Err(DiffnetError::InvalidLayer { layer: i, reason: "non-finite parameter" });
            }
        }
        Ok(Self { layers })
    }

    /// Single affine layer computing the identity.
    pub fn identity(dim: usize) -> Self {
        let mut weights = vec![0.0; dim * dim];
        for i in 0..dim {
            weights[i * dim + i] = 1.0;
        }
        Self { layers: vec![Layer { spec: LayerSpec::affine(dim, dim), weights, biases: vec![0.0; dim] }] }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].spec.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.out_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    fn fingerprint(&self) -> (usize, usize) {
        (self.layers.len(), self.param_count())
    }

    /// Forward pass without recording a tape.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix, DiffnetError> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = layer_forward(layer, &cur, None);
        }
        Ok(cur)
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, Tape), DiffnetError> {
        self.check_input(x)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut winners = Vec::with_capacity(self.layers.len());
        acts.push(x.clone());
        for layer in &self.layers {
            let mut win = Vec::new();
            let out = layer_forward(layer, acts.last().unwrap(), Some(&mut win));
            acts.push(out);
            winners.push(win);
        }
        let output = acts.last().unwrap().clone();
        Ok((output, Tape { fingerprint: self.fingerprint(), acts, winners }))
    }

    fn check_input(&self, x: &Matrix) -> Result<(), DiffnetError> {
        if x.cols() != self.in_dim() {
            return Err(DiffnetError::DimensionMismatch { layer: 0, expected: self.in_dim(), found: x.cols() });
        }
        if !x.is_finite() {
            return Err(DiffnetError::NonFiniteInput);
        }
        Ok(())
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| LayerGrad { weights: vec![0.0; l.weights.len()], biases: vec![0.0; l.biases.len()] })
                .collect(),
        }
    }
}

fn layer_forward(layer: &Layer, x: &Matrix, winners: Option<&mut Vec<u32>>) -> Matrix {
    let spec = &layer.spec;
    let (n, din, dout) = (x.rows(), spec.in_dim, spec.out_dim);
    let mut out = Matrix::zeros(n, dout);
    match spec.kind {
        LayerKind::Affine => {
            for r in 0..n {
                let xr = x.row(r);
                let orow = out.row_mut(r);
                for (j, o) in orow.iter_mut().enumerate() {
                    let w = &layer.weights[j * din..(j + 1) * din];
                    *o = layer.biases[j] + dot(w, xr);
                }
            }
        }
        LayerKind::Maxout { pieces } => {
            let rec = winners;
            let mut idx = Vec::new();
            if rec.is_some() {
                idx = vec![0u32; n * dout];
            }
            for r in 0..n {
                let xr = x.row(r);
                for j in 0..dout {
                    let mut best = f64::NEG_INFINITY;
                    let mut arg = 0u32;
                    for p in 0..pieces {
                        let row = p * dout + j;
                        let v = layer.biases[row] + dot(&layer.weights[row * din..(row + 1) * din], xr);
                        // strict comparison keeps the lowest piece index on ties
                        if v > best {
                            best = v;
                            arg = p as u32;
                        }
                    }
                    out.set(r, j, best);
                    if !idx.is_empty() {
                        idx[r * dout + j] = arg;
                    }
                }
            }
            if let Some(w) = rec {
                *w = idx;
            }
        }
        LayerKind::LeakyRelu { slope } => {
            for (o, &v) in out.as_mut_slice().iter_mut().zip(x.as_slice()) {
                *o = if v > 0.0 { v } else { slope * v };
            }
        }
        LayerKind::Tanh => {
            for (o, &v) in out.as_mut_slice().iter_mut().zip(x.as_slice()) {
                *o = libm::tanh(v);
            }
        }
    }
    out
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Intermediates of one forward pass.
#[derive(Debug)]
pub struct Tape {
    fingerprint: (usize, usize),
    acts: Vec<Matrix>,
    winners: Vec<Vec<u32>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Parameter gradients, congruent with the network they were computed for.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Tape {
    pub fn output(&self) -> &Matrix {
        self.acts.last().unwrap()
    }

    /// Propagates `upstream` (dL/d output, one row per sample) back through the
    /// recorded pass. Returns gradients summed over the batch and dL/d input.
    pub fn backward(self, net: &Network, upstream: &Matrix) -> Result<(Gradients, Matrix), DiffnetError> {
        if self.fingerprint != net.fingerprint() {
            return Err(DiffnetError::TapeMismatch);
        }
        let out = self.output();
        if upstream.rows() != out.rows() || upstream.cols() != out.cols() {
            return Err(DiffnetError::DimensionMismatch {
                layer: net.layers.len() - 1,
                expected: out.cols(),
                found: upstream.cols(),
            });
        }
        let mut grads = net.zero_gradients();
        let mut delta = upstream.clone();
        for (k, layer) in net.layers.iter().enumerate().rev() {
            delta = layer_backward(layer, &self.acts[k], &self.acts[k + 1], &self.winners[k], &delta, &mut grads.layers[k]);
        }
        Ok((grads, delta))
    }
}

fn layer_backward(
    layer: &Layer,
    x: &Matrix,
    y: &Matrix,
    winners: &[u32],
    up: &Matrix,
    grad: &mut LayerGrad,
) -> Matrix {
    let spec = &layer.spec;
    let (n, din, dout) = (x.rows(), spec.in_dim, spec.out_dim);
    let mut dx = Matrix::zeros(n, din);
    match spec.kind {
        LayerKind::Affine => {
            for r in 0..n {
                let xr = x.row(r);
                let ur = up.row(r);
                let dxr = dx.row_mut(r);
                for (j, &u) in ur.iter().enumerate() {
                    if u == 0.0 {
                        continue;
                    }
                    grad.biases[j] += u;
                    let w = &layer.weights[j * din..(j + 1) * din];
                    let gw = &mut grad.weights[j * din..(j + 1) * din];
                    for i in 0..din {
                        gw[i] += u * xr[i];
                        dxr[i] += u * w[i];
                    }
                }
            }
        }
        LayerKind::Maxout { .. } => {
            for r in 0..n {
                let xr = x.row(r);
                let ur = up.row(r);
                let dxr = dx.row_mut(r);
                for (j, &u) in ur.iter().enumerate() {
                    if u == 0.0 {
                        continue;
                    }
                    let row = winners[r * dout + j] as usize * dout + j;
                    grad.biases[row] += u;
                    let w = &layer.weights[row * din..(row + 1) * din];
                    let gw = &mut grad.weights[row * din..(row + 1) * din];
                    for i in 0..din {
                        gw[i] += u * xr[i];
                        dxr[i] += u * w[i];
                    }
                }
            }
        }
        LayerKind::LeakyRelu { slope } => {
            for ((d, &v), &u) in dx.as_mut_slice().iter_mut().zip(x.as_slice()).zip(up.as_slice()) {
                *d = if v > 0.0 { u } else { slope * u };
            }
        }
        LayerKind::Tanh => {
            for ((d, &t), &u) in dx.as_mut_slice().iter_mut().zip(y.as_slice()).zip(up.as_slice()) {
                *d = u * (1.0 - t * t);
            }
        }
    }
    dx
}

/// Uniform view over trainable parameters as an ordered list of flat blocks.
pub trait ParamBlocks {
    fn blocks(&self) -> Vec<&[f64]>;
    fn blocks_mut(&mut self) -> Vec<&mut [f64]>;
}

impl ParamBlocks for Network {
    fn blocks(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| [l.weights.as_slice(), l.biases.as_slice()]).collect()
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| [l.weights.as_mut_slice(), l.biases.as_mut_slice()]).collect()
    }
}

impl ParamBlocks for Gradients {
    fn blocks(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| [l.weights.as_slice(), l.biases.as_slice()]).collect()
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| [l.weights.as_mut_slice(), l.biases.as_mut_slice()]).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub momentum: f64,
    velocity: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(learning_rate: f64, momentum: f64, params: &impl ParamBlocks) -> Self {
        let velocity = params.blocks().iter().map(|b| vec![0.0; b.len()]).collect();
        Self { learning_rate, momentum, velocity }
    }

    pub fn velocity(&self) -> &[Vec<f64>] {
        &self.velocity
    }

    /// `v ← momentum·v − lr·g; θ ← θ + v`. Nothing is updated when any
    /// gradient entry is non-finite.
    pub fn step(&mut self, params: &mut impl ParamBlocks, grads: &impl ParamBlocks) -> Result<(), DiffnetError> {
        let gb = grads.blocks();
        let mut pb = params.blocks_mut();
        if gb.len() != pb.len()
            || gb.len() != self.velocity.len()
            || gb.iter().zip(&pb).zip(&self.velocity).any(|((g, p), v)| g.len() != p.len() || v.len() != p.len())
        {
            return Err(DiffnetError::Incongruent);
        }
        if let Some(block) = gb.iter().position(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(DiffnetError::NonFiniteBlock { block });
        }
        let (lr, mom) = (self.learning_rate, self.momentum);
        for ((p, g), v) in pb.iter_mut().zip(&gb).zip(self.velocity.iter_mut()) {
            for ((pi, gi), vi) in p.iter_mut().zip(g.iter()).zip(v.iter_mut()) {
                *vi = mom * *vi - lr * gi;
                *pi += *vi;
            }
        }
        Ok(())
    }
}

/// One momentum step on a plain network; a non-finite gradient reports its layer.
pub fn sgd_step(net: &mut Network, grads: &Gradients, state: &mut OptimizerState) -> Result<(), DiffnetError> {
    state.step(net, grads).map_err(|e| match e {
        DiffnetError::NonFiniteBlock { block } => DiffnetError::NonFiniteGradient { layer: block / 2 },
        other => other,
    })
}
