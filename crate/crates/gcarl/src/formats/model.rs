use gcarl_core::estimator::{InnerMlp, PsiParams, PsiScope, RegressionModel, TrainConfig};
use gcarl_core::mixing::MixingModel;
use gcarl_core::{GroupLayout, Matrix};
use serde::{Deserialize, Serialize};

use super::{check_version, decode_f64s, decode_len, encode_f64s, NetworkFile};

pub const MIXING_VERSION: &str = "gcarl-mixing/1";
pub const MODEL_VERSION: &str = "gcarl-model/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupEntry {
    pub group: usize,
    pub offset: usize,
    pub dim: usize,
}

fn manifest(layout: &GroupLayout) -> Vec<GroupEntry> {
    (0..layout.num_groups()).map(|m| GroupEntry { group: m, offset: layout.offset(m), dim: layout.dims()[m] }).collect()
}

fn layout_of(groups: &[GroupEntry]) -> Result<GroupLayout, String> {
    let mut offset = 0;
    for (m, g) in groups.iter().enumerate() {
        if g.group != m || g.offset != offset || g.dim == 0 {
            return Err(format!("group manifest entry {m} is inconsistent"));
        }
        offset += g.dim;
    }
    Ok(GroupLayout::new(groups.iter().map(|g| g.dim).collect()))
}

/// Mixing checkpoint: one network per group plus the group manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingFile {
    pub version: String,
    pub layers: usize,
    pub seed: u64,
    pub groups: Vec<GroupEntry>,
    pub networks: Vec<NetworkFile>,
}

impl MixingFile {
    pub fn from_model(m: &MixingModel, seed: u64) -> Self {
        Self {
            version: MIXING_VERSION.into(),
            layers: m.layers,
            seed,
            groups: manifest(&m.layout),
            networks: m.networks.iter().map(NetworkFile::from_network).collect(),
        }
    }

    pub fn to_model(&self) -> Result<MixingModel, String> {
        check_version(&self.version, MIXING_VERSION)?;
        let layout = layout_of(&self.groups)?;
        if self.networks.len() != layout.num_groups() {
            return Err("one network per group expected".into());
        }
        let networks = self.networks.iter().map(NetworkFile::to_network).collect::<Result<Vec<_>, _>>()?;
        for (net, &d) in networks.iter().zip(layout.dims()) {
            if net.in_dim() != d || net.out_dim() != d {
                return Err("mixing network width does not match its group".into());
            }
        }
        Ok(MixingModel { networks, layout, layers: self.layers })
    }
}

/// ψ parameters. Inner-network blocks of all copies are concatenated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PsiFile {
    AbsMlp { scope: String, hidden: usize, w1: String, w2: String, w_in: String, b_in: String, w_out: String, b_out: String },
    MaxoutBilinear { scope: String, w: String, scalars: String },
    TanhMixture { w: String, a: String, b: String, c: String },
}

fn scope_from(name: &str) -> Result<PsiScope, String> {
    [PsiScope::PerGroupPair, PsiScope::Global]
        .into_iter()
        .find(|s| s.name() == name)
        .ok_or_else(|| format!("unknown ψ scope {name:?}"))
}

fn copies(scope: PsiScope, groups: usize) -> usize {
    match scope {
        PsiScope::PerGroupPair => (groups * groups.saturating_sub(1)).max(1),
        PsiScope::Global => 1,
    }
}

impl PsiFile {
    pub fn from_params(p: &PsiParams) -> Self {
        let scope = p.spec().scope().name().to_string();
        match p {
            PsiParams::AbsMlp { w1, w2, inner } => {
                let cat = |f: fn(&InnerMlp) -> &[f64]| encode_f64s(&inner.iter().flat_map(|m| f(m).to_vec()).collect::<Vec<_>>());
                PsiFile::AbsMlp {
                    scope,
                    hidden: inner[0].w_in.len(),
                    w1: encode_f64s(w1.as_slice()),
                    w2: encode_f64s(w2.as_slice()),
                    w_in: cat(|m| &m.w_in),
                    b_in: cat(|m| &m.b_in),
                    w_out: cat(|m| &m.w_out),
                    b_out: cat(|m| &m.b_out),
                }
            }
            PsiParams::MaxoutBilinear { w, scalars } => PsiFile::MaxoutBilinear {
                scope,
                w: encode_f64s(w.as_slice()),
                scalars: encode_f64s(&scalars.iter().flatten().copied().collect::<Vec<_>>()),
            },
            PsiParams::TanhMixture { w, a, b, c } => PsiFile::TanhMixture {
                w: encode_f64s(w.as_slice()),
                a: encode_f64s(a),
                b: encode_f64s(b),
                c: encode_f64s(c),
            },
        }
    }

    pub fn to_params(&self, layout: &GroupLayout) -> Result<PsiParams, String> {
        let d = layout.total();
        let square = |s: &str, what: &str| decode_len(s, d * d, what).map(|v| Matrix::from_vec(d, d, v).unwrap());
        match self {
            PsiFile::AbsMlp { scope, hidden, w1, w2, w_in, b_in, w_out, b_out } => {
                let k = copies(scope_from(scope)?, layout.num_groups());
                if *hidden == 0 {
                    return Err("ψ hidden width must be positive".into());
                }
                let (w_in, b_in, w_out) =
                    (decode_len(w_in, k * hidden, "w_in")?, decode_len(b_in, k * hidden, "b_in")?, decode_len(w_out, k * hidden, "w_out")?);
                let b_out = decode_len(b_out, k, "b_out")?;
                let inner = (0..k)
                    .map(|i| {
                        let r = i * hidden..(i + 1) * hidden;
                        InnerMlp { w_in: w_in[r.clone()].to_vec(), b_in: b_in[r.clone()].to_vec(), w_out: w_out[r].to_vec(), b_out: [b_out[i]] }
                    })
                    .collect();
                Ok(PsiParams::AbsMlp { w1: square(w1, "w1")?, w2: square(w2, "w2")?, inner })
            }
            PsiFile::MaxoutBilinear { scope, w, scalars } => {
                let k = copies(scope_from(scope)?, layout.num_groups());
                let flat = decode_len(scalars, 4 * k, "scalars")?;
                let scalars = flat.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]).collect();
                Ok(PsiParams::MaxoutBilinear { w: square(w, "w")?, scalars })
            }
            PsiFile::TanhMixture { w, a, b, c } => {
                let a = decode_f64s(a)?;
                if a.is_empty() {
                    return Err("tanh mixture needs at least one term".into());
                }
                let (b, c) = (decode_len(b, a.len(), "b")?, decode_len(c, a.len(), "c")?);
                Ok(PsiParams::TanhMixture { w: square(w, "w")?, a, b, c })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingMeta {
    pub seed: u64,
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub lr_decay: f64,
    pub decay_at: f64,
    pub eval_every: usize,
    pub final_loss: f64,
}

impl TrainingMeta {
    pub fn new(cfg: &TrainConfig, final_loss: f64) -> Self {
        Self {
            seed: cfg.seed,
            iterations: cfg.iterations,
            batch_size: cfg.batch_size,
            learning_rate: cfg.learning_rate,
            momentum: cfg.momentum,
            lr_decay: cfg.lr_decay,
            decay_at: cfg.decay_at,
            eval_every: cfg.eval_every,
            final_loss,
        }
    }
}

/// Model checkpoint: feature and intra-group networks per group, ψ arrays,
/// the logit bias and how the model was trained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub version: String,
    pub groups: Vec<GroupEntry>,
    pub feature_layers: usize,
    pub features: Vec<NetworkFile>,
    pub intra: Vec<NetworkFile>,
    pub bias: String,
    pub psi: PsiFile,
    pub training: TrainingMeta,
}

impl ModelFile {
    pub fn from_model(m: &RegressionModel, training: TrainingMeta) -> Self {
        Self {
            version: MODEL_VERSION.into(),
            groups: manifest(&m.layout),
            feature_layers: m.feature_layers(),
            features: m.features.iter().map(NetworkFile::from_network).collect(),
            intra: m.intra.iter().map(NetworkFile::from_network).collect(),
            bias: encode_f64s(&[m.bias]),
            psi: PsiFile::from_params(&m.psi),
            training,
        }
    }

    pub fn to_model(&self) -> Result<RegressionModel, String> {
        check_version(&self.version, MODEL_VERSION)?;
        let layout = layout_of(&self.groups)?;
        let groups = layout.num_groups();
        let features = self.features.iter().map(NetworkFile::to_network).collect::<Result<Vec<_>, _>>()?;
        let intra = self.intra.iter().map(NetworkFile::to_network).collect::<Result<Vec<_>, _>>()?;
        if !(features.is_empty() || features.len() == groups) || intra.len() != groups {
            return Err("one feature and one intra-group network per group expected".into());
        }
        for (m, &d) in layout.dims().iter().enumerate() {
            if features.get(m).is_some_and(|f| f.in_dim() != d || f.out_dim() != d) || intra[m].in_dim() != d || intra[m].out_dim() != 1 {
                return Err(format!("network widths for group {m} do not match"));
            }
        }
        let psi = self.psi.to_params(&layout)?;
        let bias = decode_len(&self.bias, 1, "bias")?[0];
        let model = RegressionModel { layout, features, intra, bias, psi };
        if model.feature_layers() != self.feature_layers {
            return Err("feature_layers does not match the stored networks".into());
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gcarl_core::estimator::PsiSpec;
    use gcarl_core::mixing::gen_mixing;

    #[test]
    fn models_round_trip_for_every_head() {
        let layout = GroupLayout::new(vec![2, 3, 2]);
        for (layers, psi) in [
            (2, PsiSpec::abs_mlp()),
            (0, PsiSpec::abs_mlp().with_scope(PsiScope::Global)),
            (1, PsiSpec::maxout_bilinear()),
            (3, PsiSpec::tanh_mixture()),
        ] {
            let model = RegressionModel::new(layout.clone(), layers, psi, 4).unwrap();
            let meta = TrainingMeta::new(&TrainConfig::default(), 0.5);
            let text = serde_json::to_string(&ModelFile::from_model(&model, meta)).unwrap();
            let back: ModelFile = serde_json::from_str(&text).unwrap();
            assert_eq!(back.to_model().unwrap(), model, "{}", psi.name());
        }
    }

    #[test]
    fn mixing_round_trips() {
        let m = gen_mixing(&[3, 2], 2, 1).unwrap();
        let text = serde_json::to_string(&MixingFile::from_model(&m, 1)).unwrap();
        let back: MixingFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_model().unwrap(), m);
    }

    #[test]
    fn bad_manifest_rejected() {
        let m = gen_mixing(&[3, 2], 1, 1).unwrap();
        let mut f = MixingFile::from_model(&m, 1);
        f.groups[1].offset = 2;
        assert!(f.to_model().is_err());
    }
}
