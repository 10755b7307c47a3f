//! Grouped contrastive estimator of latents and inter-group causal strengths.

mod model;
mod psi;
mod train;

pub use model::{feature_specs, intra_specs, GraphEstimate, ModelError, ModelGradients, RegressionModel};
pub use psi::{
    abs_mlp_term, maxout_bilinear_term, pair_index, tanh_mixture_term, InnerMlp, PsiParams, PsiScope, PsiSpec,
    DEFAULT_INNER_HIDDEN, DEFAULT_TANH_ORDER,
};
pub use train::{
    batch_loss, build_shuffled_batch, cross_entropy, evaluate_loss, extract_graph, extract_latents, train, train_with,
    ShuffledBatch, TrainConfig, TrainError, TrainOutcome, DIVERGENCE_PATIENCE,
};
