//! Parameter features fed to the network.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::fields::{ParamKind, ParamSample};
use crate::linalg::{sym_eig, DenseMatrix};

/// Default number of PCA coordinates for nodal fields.
pub const DEFAULT_PCA_DIM: usize = 64;

/// Maps a parameter sample to a fixed-length feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "codec", rename_all = "snake_case")]
pub enum FeatureCodec {
    /// Raw parameter vector.
    Identity { dim: usize },
    /// Centered Euclidean PCA of nodal values. Coordinates are divided by
    /// `scale`, the standard deviation along the leading component.
    Pca {
        mean: Vec<f64>,
        /// Row-major `dim x n_nodes`, orthonormal rows.
        components: Vec<f64>,
        dim: usize,
        scale: f64,
        /// Share of the training variance captured by the kept components.
        retained: f64,
    },
}

impl FeatureCodec {
    /// Identity codec for mini-square samples, PCA with `pca_dim` coordinates
    /// for nodal fields.
    pub fn fit(samples: &[ParamSample], pca_dim: usize) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::invalid("no samples to fit features on"))?;
        let n = first.feature_vector().len();
        let mini = matches!(first.kind, ParamKind::MiniSquare(_));
        for s in samples {
            if matches!(s.kind, ParamKind::MiniSquare(_)) != mini {
                return Err(Error::invalid("samples mix parameter kinds"));
            }
            check_dim("feature length", n, s.feature_vector().len())?;
        }
        if mini {
            Ok(FeatureCodec::Identity { dim: n })
        } else {
            Self::fit_pca(samples, pca_dim)
        }
    }

    fn fit_pca(samples: &[ParamSample], dim: usize) -> Result<Self> {
        let ns = samples.len();
        if dim == 0 || dim >= ns {
            return Err(Error::invalid(format!(
                "PCA dimension {dim} needs more than {dim} training fields, got {ns}"
            )));
        }
        let n = samples[0].feature_vector().len();
        let mut mean = vec![0.0; n];
        for s in samples {
            for (m, v) in mean.iter_mut().zip(s.feature_vector()) {
                *m += v / ns as f64;
            }
        }
        // Centered data, one row per sample.
        let mut x = DenseMatrix::zeros(ns, n);
        for (i, s) in samples.iter().enumerate() {
            for (j, v) in s.feature_vector().iter().enumerate() {
                x[(i, j)] = v - mean[j];
            }
        }
        let total: f64 = x.data.iter().map(|v| v * v).sum();
        let mut components = Vec::with_capacity(dim * n);
        let lambda = if ns <= n {
            // Snapshot method on the ns x ns Gram matrix.
            let mut g = x.matmul(&x.transpose())?;
            g.symmetrize();
            let eig = sym_eig(&g)?;
            check_rank(&eig.values, dim)?;
            for k in 0..dim {
                let v = eig.vectors.column(k);
                let u = x.t_matvec(&v)?;
                let norm = eig.values[k].sqrt();
                components.extend(u.iter().map(|c| c / norm));
            }
            eig.values
        } else {
            let mut c = x.t_matmul(&x)?;
            c.symmetrize();
            let eig = sym_eig(&c)?;
            check_rank(&eig.values, dim)?;
            for k in 0..dim {
                components.extend(eig.vectors.column(k));
            }
            eig.values
        };
        let kept: f64 = lambda[..dim].iter().sum();
        let retained = if total > 0.0 { (kept / total).min(1.0) } else { 1.0 };
        let scale = (lambda[0] / ns as f64).sqrt();
        Ok(FeatureCodec::Pca {
            mean,
            components,
            dim,
            scale,
            retained,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureCodec::Identity { dim } | FeatureCodec::Pca { dim, .. } => *dim,
        }
    }

    /// Short name stored in checkpoints.
    pub fn id(&self) -> &'static str {
        match self {
            FeatureCodec::Identity { .. } => "identity",
            FeatureCodec::Pca { .. } => "pca",
        }
    }

    /// Retained variance fraction; 1 for the identity codec.
    pub fn retained_variance(&self) -> f64 {
        match self {
            FeatureCodec::Identity { .. } => 1.0,
            FeatureCodec::Pca { retained, .. } => *retained,
        }
    }

    pub fn encode_raw(&self, raw: &[f64]) -> Result<Vec<f64>> {
        match self {
            FeatureCodec::Identity { dim } => {
                check_dim("feature length", *dim, raw.len())?;
                Ok(raw.to_vec())
            }
            FeatureCodec::Pca {
                mean,
                components,
                dim,
                scale,
                ..
            } => {
                check_dim("nodal field length", mean.len(), raw.len())?;
                let n = mean.len();
                let centered: Vec<f64> = raw.iter().zip(mean).map(|(v, m)| v - m).collect();
                Ok((0..*dim)
                    .map(|k| {
                        let row = &components[k * n..(k + 1) * n];
                        row.iter().zip(&centered).map(|(a, b)| a * b).sum::<f64>() / scale
                    })
                    .collect())
            }
        }
    }

    pub fn encode(&self, sample: &ParamSample) -> Result<Vec<f64>> {
        self.encode_raw(sample.feature_vector())
    }

    /// Feature matrix, one row per sample.
    pub fn encode_all(&self, samples: &[ParamSample]) -> Result<Array2<f64>> {
        let d = self.dim();
        let mut out = Array2::zeros((samples.len(), d));
        for (i, s) in samples.iter().enumerate() {
            let f = self.encode(s).map_err(|e| e.for_sample(i))?;
            out.row_mut(i).iter_mut().zip(f).for_each(|(o, v)| *o = v);
        }
        Ok(out)
    }
}

fn check_rank(lambda: &[f64], dim: usize) -> Result<()> {
    if !(lambda[dim - 1] > 1e-13 * lambda[0]) {
        return Err(Error::invalid(format!(
            "training fields span fewer than {dim} directions"
        )));
    }
    Ok(())
}

/// Encodes samples with a codec fitted on the same samples.
pub fn input_features(samples: &[ParamSample], pca_dim: usize) -> Result<(Array2<f64>, FeatureCodec)> {
    let codec = FeatureCodec::fit(samples, pca_dim)?;
    Ok((codec.encode_all(samples)?, codec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{rng_for, sample_minisquares, FieldLaw};
    use rand::Rng;

    fn nodal(values: Vec<f64>, seed: u64) -> ParamSample {
        ParamSample {
            kind: ParamKind::NodalField(values),
            law: FieldLaw::LogNormal { floor: 0.0 },
            seed,
        }
    }

    fn random_fields(ns: usize, n: usize, seed: u64) -> Vec<ParamSample> {
        let mut rng = rng_for(seed);
        (0..ns)
            .map(|i| nodal((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(), i as u64))
            .collect()
    }

    #[test]
    fn mini_squares_pass_through() {
        let samples: Vec<_> = (0..3).map(sample_minisquares).collect();
        let (f, codec) = input_features(&samples, 64).unwrap();
        assert_eq!(codec, FeatureCodec::Identity { dim: 16 });
        assert_eq!(f.shape(), &[3, 16]);
        assert_eq!(f.row(1).to_vec(), samples[1].feature_vector());
    }

    #[test]
    fn training_mean_maps_to_zero() {
        for (ns, n) in [(8, 20), (20, 6)] {
            let samples = random_fields(ns, n, 3);
            let codec = FeatureCodec::fit(&samples, 4).unwrap();
            let FeatureCodec::Pca { mean, .. } = &codec else { panic!("expected PCA") };
            let f = codec.encode_raw(mean).unwrap();
            assert!(f.iter().all(|v| v.abs() < 1e-12), "{f:?}");
        }
    }

    #[test]
    fn components_are_orthonormal_and_agree_across_methods() {
        // Same data through the Gram path (ns <= n) and the covariance path.
        let wide = random_fields(6, 9, 5);
        let tall: Vec<_> = wide.iter().chain(wide.iter()).cloned().collect();
        let a = FeatureCodec::fit(&wide, 3).unwrap();
        let b = FeatureCodec::fit(&tall, 3).unwrap();
        let (FeatureCodec::Pca { components: ca, retained: ra, .. }, FeatureCodec::Pca { components: cb, retained: rb, .. }) = (&a, &b) else {
            panic!("expected PCA")
        };
        for k in 0..3 {
            for l in 0..3 {
                let d: f64 = (0..9).map(|j| ca[k * 9 + j] * ca[l * 9 + j]).sum();
                assert!((d - if k == l { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
            let d: f64 = (0..9).map(|j| ca[k * 9 + j] * cb[k * 9 + j]).sum();
            assert!((d.abs() - 1.0).abs() < 1e-8, "component {k}: {d}");
        }
        assert!((ra - rb).abs() < 1e-10);
    }

    #[test]
    fn full_rank_keeps_all_variance() {
        // Fields confined to a 2-dimensional affine subspace.
        let base = [1.0, 2.0, 0.5, -1.0, 0.0];
        let dir = [[1.0, 0.0, 1.0, 0.0, 1.0], [0.0, 1.0, 0.0, -1.0, 0.0]];
        let mut rng = rng_for(9);
        let samples: Vec<_> = (0..7)
            .map(|i| {
                let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                nodal((0..5).map(|j| base[j] + a * dir[0][j] + b * dir[1][j]).collect(), i)
            })
            .collect();
        let codec = FeatureCodec::fit(&samples, 2).unwrap();
        assert!((codec.retained_variance() - 1.0).abs() < 1e-10);
        assert!(FeatureCodec::fit(&samples, 3).is_err());
    }

    #[test]
    fn dimension_limited_by_sample_count() {
        let samples = random_fields(4, 10, 1);
        assert!(FeatureCodec::fit(&samples, 4).is_err());
        assert!(FeatureCodec::fit(&samples, 3).is_ok());
        assert!(FeatureCodec::fit(&[], 3).is_err());
    }

    #[test]
    fn mixed_kinds_rejected() {
        let mut samples = random_fields(3, 16, 1);
        samples.push(sample_minisquares(0));
        assert!(FeatureCodec::fit(&samples, 2).is_err());
    }
}
