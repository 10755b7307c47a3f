//! Pairwise terms of the regression function.
//!
//! Every variable pair `(a, b)` in different groups contributes
//! `w_ab · ψ(h_a, h_b)`, where `h_a` plays the parent role. The auxiliary
//! parameters of ψ are shared per ordered group pair or globally, see
//! [`PsiScope`]; the tanh mixture is always global.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::matrix::{GroupLayout, Matrix};
use crate::rng::Rng;

pub const DEFAULT_INNER_HIDDEN: usize = 8;
pub const DEFAULT_TANH_ORDER: usize = 5;

/// Which pairs share the auxiliary parameters of ψ.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PsiScope {
    /// One copy per ordered group pair `(m, m')`.
    PerGroupPair,
    /// One copy for all pairs.
    Global,
}

impl PsiScope {
    pub fn name(&self) -> &'static str {
        match self {
            PsiScope::PerGroupPair => "per_group_pair",
            PsiScope::Global => "global",
        }
    }

    fn copies(&self, groups: usize) -> usize {
        match self {
            PsiScope::PerGroupPair => (groups * groups.saturating_sub(1)).max(1),
            PsiScope::Global => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PsiSpec {
    /// `w1 |w2 y + |w2| MLP(x)|` with a 1→hidden→1 tanh MLP.
    AbsMlp { hidden: usize, scope: PsiScope },
    /// `w · y · max(a1 (x − b1), a2 (x − b2))`.
    MaxoutBilinear { scope: PsiScope },
    /// `w · y · Σ_k a_k tanh(b_k x + c_k)`, always shared by all pairs.
    TanhMixture { order: usize },
}

impl PsiSpec {
    pub fn abs_mlp() -> Self {
        PsiSpec::AbsMlp { hidden: DEFAULT_INNER_HIDDEN, scope: PsiScope::PerGroupPair }
    }

    pub fn maxout_bilinear() -> Self {
        PsiSpec::MaxoutBilinear { scope: PsiScope::PerGroupPair }
    }

    pub fn tanh_mixture() -> Self {
        PsiSpec::TanhMixture { order: DEFAULT_TANH_ORDER }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PsiSpec::AbsMlp { .. } => "abs_mlp",
            PsiSpec::MaxoutBilinear { .. } => "maxout_bilinear",
            PsiSpec::TanhMixture { .. } => "tanh_mixture",
        }
    }

    pub fn scope(&self) -> PsiScope {
        match *self {
            PsiSpec::AbsMlp { scope, .. } | PsiSpec::MaxoutBilinear { scope } => scope,
            PsiSpec::TanhMixture { .. } => PsiScope::Global,
        }
    }

    pub fn with_scope(self, scope: PsiScope) -> Self {
        match self {
            PsiSpec::AbsMlp { hidden, .. } => PsiSpec::AbsMlp { hidden, scope },
            PsiSpec::MaxoutBilinear { .. } => PsiSpec::MaxoutBilinear { scope },
            t @ PsiSpec::TanhMixture { .. } => t,
        }
    }

    pub fn is_valid(&self) -> bool {
        match *self {
            PsiSpec::AbsMlp { hidden, .. } => hidden >= 1,
            PsiSpec::MaxoutBilinear { .. } => true,
            PsiSpec::TanhMixture { order } => order >= 1,
        }
    }
}

/// Scalar network `x ↦ b_out + Σ_k w_out_k tanh(w_in_k x + b_in_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerMlp {
    pub w_in: Vec<f64>,
    pub b_in: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: [f64; 1],
}

impl InnerMlp {
    fn zeros(hidden: usize) -> Self {
        Self { w_in: vec![0.0; hidden], b_in: vec![0.0; hidden], w_out: vec![0.0; hidden], b_out: [0.0] }
    }

    fn random(hidden: usize, rng: &mut Rng) -> Self {
        let bound_out = libm::sqrt(1.0 / hidden as f64);
        Self {
            w_in: (0..hidden).map(|_| rng.random_range(-1.0..=1.0)).collect(),
            b_in: (0..hidden).map(|_| rng.random_range(-1.0..=1.0)).collect(),
            w_out: (0..hidden).map(|_| rng.random_range(-bound_out..=bound_out)).collect(),
            b_out: [0.0],
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let mut out = self.b_out[0];
        for k in 0..self.w_in.len() {
            out += self.w_out[k] * libm::tanh(self.w_in[k] * x + self.b_in[k]);
        }
        out
    }
}

/// Raw absolute-MLP form given the inner MLP value `u = MLP(x)`.
#[inline]
pub fn abs_mlp_term(w1: f64, w2: f64, u: f64, y: f64) -> f64 {
    w1 * (w2 * y + w2.abs() * u).abs()
}

#[inline]
pub fn maxout_bilinear_term(s: [f64; 4], x: f64, y: f64) -> f64 {
    y * maxout2(s, x).0
}

#[inline]
pub fn tanh_mixture_term(a: &[f64], b: &[f64], c: &[f64], x: f64, y: f64) -> f64 {
    y * tanh_mix(a, b, c, x)
}

/// `max(a1 (x − b1), a2 (x − b2))` and whether the second piece won.
#[inline]
fn maxout2(s: [f64; 4], x: f64) -> (f64, bool) {
    let v1 = s[0] * (x - s[1]);
    let v2 = s[2] * (x - s[3]);
    if v2 > v1 { (v2, true) } else { (v1, false) }
}

#[inline]
fn tanh_mix(a: &[f64], b: &[f64], c: &[f64], x: f64) -> f64 {
    a.iter().zip(b).zip(c).map(|((a, b), c)| a * libm::tanh(b * x + c)).sum()
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Parameters of all pair terms. Weight matrices are `D × D`; entries inside
/// a group's own block are never read and stay zero.
#[derive(Clone, Debug, PartialEq)]
pub enum PsiParams {
    AbsMlp { w1: Matrix, w2: Matrix, inner: Vec<InnerMlp> },
    MaxoutBilinear { w: Matrix, scalars: Vec<[f64; 4]> },
    TanhMixture { w: Matrix, a: Vec<f64>, b: Vec<f64>, c: Vec<f64> },
}

/// Index of the ordered group pair `(m, m')`, `m ≠ m'`.
#[inline]
pub fn pair_index(groups: usize, m: usize, mp: usize) -> usize {
    debug_assert!(m != mp);
    m * (groups - 1) + if mp < m { mp } else { mp - 1 }
}

/// Slot of the auxiliary parameters used by `(m, m')` when `copies` exist.
#[inline]
fn aux_index(groups: usize, copies: usize, m: usize, mp: usize) -> usize {
    if copies == 1 { 0 } else { pair_index(groups, m, mp) }
}

fn random_inter(layout: &GroupLayout, bound: f64, rng: &mut Rng) -> Matrix {
    let d = layout.total();
    let map = layout.group_map();
    let mut w = Matrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            if map[a] != map[b] {
                w.set(a, b, rng.random_range(-bound..=bound));
            }
        }
    }
    w
}

impl PsiParams {
    pub fn random(spec: PsiSpec, layout: &GroupLayout, rng: &mut Rng) -> Self {
        let pairs = spec.scope().copies(layout.num_groups());
        match spec {
            PsiSpec::AbsMlp { hidden, .. } => PsiParams::AbsMlp {
                w1: random_inter(layout, 0.1, rng),
                w2: random_inter(layout, 1.0, rng),
                inner: (0..pairs).map(|_| InnerMlp::random(hidden, rng)).collect(),
            },
            PsiSpec::MaxoutBilinear { .. } => PsiParams::MaxoutBilinear {
                w: random_inter(layout, 0.1, rng),
                scalars: (0..pairs)
                    .map(|_| {
                        [rng.random_range(0.5..=1.5), rng.random_range(-0.5..=0.5), rng.random_range(-1.5..=-0.5), rng.random_range(-0.5..=0.5)]
                    })
                    .collect(),
            },
            PsiSpec::TanhMixture { order } => PsiParams::TanhMixture {
                w: random_inter(layout, 0.1, rng),
                a: (0..order).map(|_| rng.random_range(-1.0..=1.0)).collect(),
                b: (0..order).map(|_| rng.random_range(-1.0..=1.0)).collect(),
                c: (0..order).map(|_| rng.random_range(-1.0..=1.0)).collect(),
            },
        }
    }

    /// Same shape, all zeros.
    pub fn zeros_like(&self) -> Self {
        let zm = |m: &Matrix| Matrix::zeros(m.rows(), m.cols());
        match self {
            PsiParams::AbsMlp { w1, w2, inner } => PsiParams::AbsMlp {
                w1: zm(w1),
                w2: zm(w2),
                inner: inner.iter().map(|i| InnerMlp::zeros(i.w_in.len())).collect(),
            },
            PsiParams::MaxoutBilinear { w, scalars } => {
                PsiParams::MaxoutBilinear { w: zm(w), scalars: vec![[0.0; 4]; scalars.len()] }
            }
            PsiParams::TanhMixture { w, a, .. } => {
                PsiParams::TanhMixture { w: zm(w), a: vec![0.0; a.len()], b: vec![0.0; a.len()], c: vec![0.0; a.len()] }
            }
        }
    }

    pub fn spec(&self) -> PsiSpec {
        let scope = |n: usize| if n == 1 { PsiScope::Global } else { PsiScope::PerGroupPair };
        match self {
            PsiParams::AbsMlp { inner, .. } => PsiSpec::AbsMlp {
                hidden: inner.first().map_or(DEFAULT_INNER_HIDDEN, |i| i.w_in.len()),
                scope: scope(inner.len()),
            },
            PsiParams::MaxoutBilinear { scalars, .. } => PsiSpec::MaxoutBilinear { scope: scope(scalars.len()) },
            PsiParams::TanhMixture { a, .. } => PsiSpec::TanhMixture { order: a.len() },
        }
    }

    /// The pair weight read off as the causal-strength estimate.
    pub fn strength(&self, a: usize, b: usize) -> f64 {
        match self {
            PsiParams::AbsMlp { w1, w2, .. } => w1.get(a, b) * w2.get(a, b).abs(),
            PsiParams::MaxoutBilinear { w, .. } | PsiParams::TanhMixture { w, .. } => w.get(a, b),
        }
    }

    /// Sets every pair weight to zero so the pair terms vanish.
    pub fn silence(&mut self) {
        match self {
            PsiParams::AbsMlp { w1, .. } => w1.as_mut_slice().fill(0.0),
            PsiParams::MaxoutBilinear { w, .. } | PsiParams::TanhMixture { w, .. } => w.as_mut_slice().fill(0.0),
        }
    }

    /// `w_ab ψ(x, y)` for one pair.
    pub fn pair_term(&self, layout: &GroupLayout, a: usize, b: usize, x: f64, y: f64) -> f64 {
        let (m, mp) = (layout.group_of(a), layout.group_of(b));
        if m == mp {
            return 0.0;
        }
        let copies = match self {
            PsiParams::AbsMlp { inner, .. } => inner.len(),
            PsiParams::MaxoutBilinear { scalars, .. } => scalars.len(),
            PsiParams::TanhMixture { .. } => 1,
        };
        let p = aux_index(layout.num_groups(), copies, m, mp);
        match self {
            PsiParams::AbsMlp { w1, w2, inner } => abs_mlp_term(w1.get(a, b), w2.get(a, b), inner[p].eval(x), y),
            PsiParams::MaxoutBilinear { w, scalars } => w.get(a, b) * maxout_bilinear_term(scalars[p], x, y),
            PsiParams::TanhMixture { w, a: ka, b: kb, c: kc } => w.get(a, b) * tanh_mixture_term(ka, kb, kc, x, y),
        }
    }

    pub fn blocks(&self) -> Vec<&[f64]> {
        match self {
            PsiParams::AbsMlp { w1, w2, inner } => {
                let mut out = vec![w1.as_slice(), w2.as_slice()];
                for i in inner {
                    out.extend([i.w_in.as_slice(), i.b_in.as_slice(), i.w_out.as_slice(), &i.b_out[..]]);
                }
                out
            }
            PsiParams::MaxoutBilinear { w, scalars } => {
                let mut out = vec![w.as_slice()];
                out.extend(scalars.iter().map(|s| &s[..]));
                out
            }
            PsiParams::TanhMixture { w, a, b, c } => vec![w.as_slice(), a, b, c],
        }
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            PsiParams::AbsMlp { w1, w2, inner } => {
                let mut out = vec![w1.as_mut_slice(), w2.as_mut_slice()];
                for i in inner {
                    out.extend([i.w_in.as_mut_slice(), i.b_in.as_mut_slice(), i.w_out.as_mut_slice(), &mut i.b_out[..]]);
                }
                out
            }
            PsiParams::MaxoutBilinear { w, scalars } => {
                let mut out = vec![w.as_mut_slice()];
                out.extend(scalars.iter_mut().map(|s| &mut s[..]));
                out
            }
            PsiParams::TanhMixture { w, a, b, c } => vec![w.as_mut_slice(), a, b, c],
        }
    }
}

/// Precomputed group-membership tables for the pair loops.
#[derive(Clone, Debug)]
pub(crate) struct PairPlan {
    groups: usize,
    ranges: Vec<core::ops::Range<usize>>,
    group_of: Vec<usize>,
    /// partner groups of each group, in increasing order
    partners: Vec<Vec<usize>>,
}

impl PairPlan {
    pub(crate) fn new(layout: &GroupLayout) -> Self {
        let groups = layout.num_groups();
        Self {
            groups,
            ranges: (0..groups).map(|m| layout.range(m)).collect(),
            group_of: layout.group_map(),
            partners: (0..groups).map(|m| (0..groups).filter(|&mp| mp != m).collect()).collect(),
        }
    }

    /// Scratch entries per row kept between the forward and backward pass.
    pub(crate) fn cache_len(&self, params: &PsiParams) -> usize {
        let d = self.group_of.len();
        match params {
            PsiParams::AbsMlp { inner, .. } => {
                d * self.groups.saturating_sub(1) * (inner.first().map_or(0, |i| i.w_in.len()) + 1)
            }
            PsiParams::MaxoutBilinear { .. } => 0,
            PsiParams::TanhMixture { a, .. } => d * (a.len() + 1),
        }
    }

    /// Sum of all pair terms for one feature row; fills `cache` for [`Self::backward_row`].
    pub(crate) fn forward_row(&self, params: &PsiParams, h: &[f64], cache: &mut [f64]) -> f64 {
        let d = h.len();
        let mut total = 0.0;
        match params {
            PsiParams::AbsMlp { w1, w2, inner } => {
                let hidden = inner[0].w_in.len();
                let mut slot = 0;
                for (a, &x) in h.iter().enumerate() {
                    let m = self.group_of[a];
                    let (r1, r2) = (&w1.as_slice()[a * d..(a + 1) * d], &w2.as_slice()[a * d..(a + 1) * d]);
                    for &mp in &self.partners[m] {
                        let mlp = &inner[aux_index(self.groups, inner.len(), m, mp)];
                        let c = &mut cache[slot..slot + hidden + 1];
                        let mut u = mlp.b_out[0];
                        for k in 0..hidden {
                            let t = libm::tanh(mlp.w_in[k] * x + mlp.b_in[k]);
                            c[k + 1] = t;
                            u += mlp.w_out[k] * t;
                        }
                        c[0] = u;
                        slot += hidden + 1;
                        for b in self.ranges[mp].clone() {
                            total += abs_mlp_term(r1[b], r2[b], u, h[b]);
                        }
                    }
                }
            }
            PsiParams::MaxoutBilinear { w, scalars } => {
                for (a, &x) in h.iter().enumerate() {
                    let m = self.group_of[a];
                    let row = &w.as_slice()[a * d..(a + 1) * d];
                    for &mp in &self.partners[m] {
                        let s: f64 = self.ranges[mp].clone().map(|b| row[b] * h[b]).sum();
                        total += s * maxout2(scalars[aux_index(self.groups, scalars.len(), m, mp)], x).0;
                    }
                }
            }
            PsiParams::TanhMixture { w, a: ka, b: kb, c: kc } => {
                let order = ka.len();
                for (a, &x) in h.iter().enumerate() {
                    let m = self.group_of[a];
                    let row = &w.as_slice()[a * d..(a + 1) * d];
                    let c = &mut cache[a * (order + 1)..(a + 1) * (order + 1)];
                    let mut gx = 0.0;
                    for k in 0..order {
                        let t = libm::tanh(kb[k] * x + kc[k]);
                        c[k + 1] = t;
                        gx += ka[k] * t;
                    }
                    c[0] = gx;
                    let s: f64 = (0..d).filter(|&b| self.group_of[b] != m).map(|b| row[b] * h[b]).sum();
                    total += s * gx;
                }
            }
        }
        total
    }

    /// Accumulates `g · ∂/∂θ` of the row's pair sum into `grad` and
    /// `g · ∂/∂h` into `dh`, reading the values cached by the forward pass.
    pub(crate) fn backward_row(&self, params: &PsiParams, h: &[f64], cache: &[f64], g: f64, grad: &mut PsiParams, dh: &mut [f64]) {
        let d = h.len();
        match (params, grad) {
            (PsiParams::AbsMlp { w1, w2, inner }, PsiParams::AbsMlp { w1: g1, w2: g2, inner: gi }) => {
                let hidden = inner[0].w_in.len();
                let mut slot = 0;
                for (a, &x) in h.iter().enumerate() {
                    let m = self.group_of[a];
                    let base = a * d;
                    let (r1, r2) = (&w1.as_slice()[base..base + d], &w2.as_slice()[base..base + d]);
                    for &mp in &self.partners[m] {
                        let p = aux_index(self.groups, inner.len(), m, mp);
                        let c = &cache[slot..slot + hidden + 1];
                        slot += hidden + 1;
                        let u = c[0];
                        let mut gu = 0.0;
                        {
                            let (g1s, g2s) = (g1.as_mut_slice(), g2.as_mut_slice());
                            for b in self.ranges[mp].clone() {
                                let (v1, v2, y) = (r1[b], r2[b], h[b]);
                                let z = v2 * y + v2.abs() * u;
                                g1s[base + b] += g * z.abs();
                                let dz = g * v1 * sign(z);
                                g2s[base + b] += dz * (y + sign(v2) * u);
                                dh[b] += dz * v2;
                                gu += dz * v2.abs();
                            }
                        }
                        if gu != 0.0 {
                            let (mlp, gm) = (&inner[p], &mut gi[p]);
                            gm.b_out[0] += gu;
                            let mut dx = 0.0;
                            for k in 0..hidden {
                                let t = c[k + 1];
                                gm.w_out[k] += gu * t;
                                let dpre = gu * mlp.w_out[k] * (1.0 - t * t);
                                gm.w_in[k] += dpre * x;
                                gm.b_in[k] += dpre;
                                dx += dpre * mlp.w_in[k];
                            }
                            dh[a] += dx;
                        }
                    }
                }
            }
            (PsiParams::MaxoutBilinear { w, scalars }, PsiParams::MaxoutBilinear { w: gw, scalars: gs }) => {
                for (a, &x) in h.iter().enumerate() {
                    let m = self.group_of[a];
                    let row = &w.as_slice()[a * d..(a + 1) * d];
                    for &mp in &self.partners[m] {
                        let p = aux_index(self.groups, scalars.len(), m, mp);
                        let sc = scalars[p];
                        let (gx, second) = maxout2(sc, x);
                        let mut s = 0.0;
                        let gws = gw.as_mut_slice();
                        for b in self.ranges[mp].clone() {
                            s += row[b] * h[b];
                            gws[a * d + b] += g * gx * h[b];
                            dh[b] += g * gx * row[b];
                        }
                        let gs_total = g * s;
                        let k = if second { 2 } else { 0 };
                        gs[p][k] += gs_total * (x - sc[k + 1]);
                        gs[p][k + 1] -= gs_total * sc[k];
                        dh[a] += gs_total * sc[k];
                    }
                }
            }
            (PsiParams::TanhMixture { w, a: ka, b: kb, .. }, PsiParams::TanhMixture { w: gw, a: ga, b: gb, c: gc }) => {
                let order = ka.len();
                for (a, &x) in h.iter().enumerate() {
                    let m = self.group_of[a];
                    let row = &w.as_slice()[a * d..(a + 1) * d];
                    let c = &cache[a * (order + 1)..(a + 1) * (order + 1)];
                    let gx = c[0];
                    let mut s = 0.0;
                    let gws = gw.as_mut_slice();
                    for b in (0..d).filter(|&b| self.group_of[b] != m) {
                        s += row[b] * h[b];
                        gws[a * d + b] += g * gx * h[b];
                        dh[b] += g * gx * row[b];
                    }
                    let gs_total = g * s;
                    for k in 0..order {
                        let t = c[k + 1];
                        ga[k] += gs_total * t;
                        let dpre = gs_total * ka[k] * (1.0 - t * t);
                        gb[k] += dpre * x;
                        gc[k] += dpre;
                        dh[a] += dpre * kb[k];
                    }
                }
            }
            _ => panic!("gradient buffer has a different ψ kind"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_reduction() {
        for &(x, y) in &[(0.3, -1.2), (-2.0, 0.5), (1.0, 1.0)] {
            assert!((maxout_bilinear_term([1.0, 0.0, 1.0, 0.0], x, y) - x * y).abs() < 1e-15);
        }
    }

    #[test]
    fn abs_form_reduces_to_abs_y() {
        for y in [-2.0, -0.1, 0.0, 3.0] {
            assert_eq!(abs_mlp_term(1.0, 1.0, 0.0, y), y.abs());
        }
    }

    #[test]
    fn tanh_mixture_sign_limit() {
        for &(x, y) in &[(0.5, 2.0), (-0.3, 1.5), (2.0, -1.0)] {
            let v = tanh_mixture_term(&[1.0], &[1e6], &[0.0], x, y);
            assert!((v - y * sign(x)).abs() < 1e-9);
        }
    }

    #[test]
    fn pair_index_is_dense() {
        let mut seen = vec![false; 12];
        for m in 0..4 {
            for mp in (0..4).filter(|&mp| mp != m) {
                seen[pair_index(4, m, mp)] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }
}
