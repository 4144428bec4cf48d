//! Shared fixtures for the benchmarks.

use rbno_core::fosls::{Problem, ProblemConfig, ProblemKind};
use rbno_core::rbno::{Dataset, FeatureCodec};
use rbno_core::rom::{compute_snapshots, pod, reduce_weights, PodBasis, RankTarget};
use rbno_core::{seeds, Result};

/// Heat conduction on an `n x n` mesh with lowest-order elements.
pub fn heat(n: usize) -> Result<Problem> {
    Problem::new(ProblemConfig::new(ProblemKind::HeatConduction, n, 0))
}

/// POD basis of rank `r` from `n_pod` snapshots.
pub fn basis(p: &Problem, n_pod: usize, r: usize) -> Result<PodBasis> {
    let samples = (0..n_pod).map(|i| p.sample(seeds::stage(0, seeds::POD, i))).collect::<Result<Vec<_>>>()?;
    pod(&compute_snapshots(p, &samples)?, &p.gram_xh(), RankTarget::Rank(r))
}

/// `n` training samples with optimal labels.
pub fn dataset(p: &Problem, b: &PodBasis, n: usize) -> Result<Dataset> {
    let samples = (0..n).map(|i| p.sample(seeds::stage(0, seeds::TRAIN, i))).collect::<Result<Vec<_>>>()?;
    let weights = samples.iter().map(|s| reduce_weights(&p.loss_weights(s), b)).collect::<Result<Vec<_>>>()?;
    let codec = FeatureCodec::fit(&samples, 64)?;
    Dataset::with_optimal_labels(codec.encode_all(&samples)?, weights)
}
