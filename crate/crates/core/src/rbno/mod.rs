//! Neural map from parameter features to reduced-basis coefficients.

mod features;
mod mlp;
mod train;

pub use features::{input_features, FeatureCodec, DEFAULT_PCA_DIM};
pub use mlp::{flatten, ForwardCache, Gradients, Layer, Mlp, LEAKY_SLOPE};
pub use train::{
    evaluate, histogram, layer_matrices, log_edges, loss_and_grad, loss_bound, mean_objective, model_from_matrices, split_indices, train,
    AdamW, Dataset, LossMode, RbMetrics, TrainConfig, TrainedModel, DIVERGENCE_FACTOR,
};

#[cfg(test)]
mod tests;
