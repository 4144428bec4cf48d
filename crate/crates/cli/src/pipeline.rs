//! Experiment stages. Each command writes its outputs under the configured
//! directory and returns the rows it wrote. Intermediate results (FE and
//! reference solutions, bases, reduced weights) are cached under `cache/`
//! keyed by a hash of everything they depend on.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use rayon::prelude::*;
use rbno_core::fields::ParamSample;
use rbno_core::fosls::{residual_ratio, Problem, ProblemConfig, ProblemKind};
use rbno_core::io::{load_matrix, load_vector, save_matrix, save_vector};
use rbno_core::linalg::CsrMatrix;
use rbno_core::rbno::{
    evaluate, histogram, layer_matrices, log_edges, model_from_matrices, split_indices, train, Dataset, FeatureCodec, Mlp,
    TrainedModel,
};
use rbno_core::rom::{pod, pod_tail, reduce_weights, solve_rb, PodBasis, ReducedWeights};
use rbno_core::{seeds, Error, Result};
use serde::{Deserialize, Serialize};

use crate::artifacts::{
    cache_key, loglog_slope, matrix_rows, mean_std, pack_weights, rows_to_matrix, unpack_weights, write_csv, write_json,
};
use crate::config::ExperimentConfig;

/// Sample sets, each drawn from its own seed range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Pod,
    Train,
    Val,
    Test,
}

impl Split {
    pub fn offset(self) -> u64 {
        match self {
            Split::Pod => seeds::POD,
            Split::Train => seeds::TRAIN,
            Split::Val => seeds::VAL,
            Split::Test => seeds::TEST,
        }
    }
}

/// Ranks 8, 16, 32, ... up to `rank`, plus `rank` itself.
pub fn rank_sweep(rank: usize) -> Vec<usize> {
    let mut out: Vec<usize> = std::iter::successors(Some(8usize), |r| Some(r * 2)).take_while(|&r| r <= rank).collect();
    if out.last() != Some(&rank) {
        out.push(rank);
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveRow {
    pub sample: usize,
    pub seed: u64,
    pub n_free: usize,
    pub loss: f64,
    pub error: Option<f64>,
    pub ratio: Option<f64>,
    pub assemble_s: Option<f64>,
    pub solve_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionRow {
    pub r: usize,
    pub mean_sq_error: f64,
    pub tail: f64,
    pub ratio: f64,
}

pub struct PodOutput {
    pub basis: PodBasis,
    pub projection: Vec<ProjectionRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReduceRow {
    pub sample: usize,
    pub seed: u64,
    pub fe_loss: f64,
    pub rb_loss: f64,
    pub error_rb_fe: f64,
    pub projection_error: f64,
    pub quasi_optimality: f64,
    pub error_reference: Option<f64>,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub r: usize,
    pub mean_fe_loss: f64,
    pub mean_rb_loss: f64,
    pub mean_error_rb_fe: f64,
    pub mean_projection_error: f64,
    pub max_quasi_optimality: f64,
}

pub struct ReduceOutput {
    pub rows: Vec<ReduceRow>,
    pub sweep: Vec<SweepRow>,
}

pub struct TrainOutput {
    pub trained: TrainedModel,
    pub codec: FeatureCodec,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalRow {
    pub sample: usize,
    pub seed: u64,
    pub loss: f64,
    pub optimal_loss: f64,
    pub error_rb: f64,
    pub error_reference: Option<f64>,
    pub rel_l2: Option<f64>,
    pub rel_h: Option<f64>,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub metric: &'static str,
    pub mean: f64,
    pub std: f64,
}

pub struct EvalOutput {
    pub rows: Vec<EvalRow>,
    pub summary: Vec<SummaryRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateRow {
    pub k: usize,
    pub n: usize,
    pub h: f64,
    pub n_free: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    pub k: usize,
    pub slope: f64,
    pub expected: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioRow {
    pub sample: usize,
    pub seed: u64,
    pub loss: f64,
    pub error: f64,
    pub loss_over_error_sq: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    widths: Vec<usize>,
    slope: f64,
    clip: Option<f64>,
    codec: String,
    basis_hash: String,
    best_iter: usize,
    best_val: f64,
}

/// Errors of a coarse vector against a reference on the refined mesh.
struct RefErrors {
    abs_h: f64,
    rel_h: f64,
    rel_l2: f64,
}

pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub problem: Problem,
    gram: OnceLock<CsrMatrix>,
    reference: OnceLock<(Problem, CsrMatrix, CsrMatrix)>,
}

impl Experiment {
    /// Validates the config, creates the output directory and echoes the
    /// resolved config into it.
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        std::fs::create_dir_all(cfg.out.join("cache"))?;
        let echo = serde_json::json!({ "config": cfg, "domain": cfg.domain(), "problem": cfg.problem_config() });
        write_json(&cfg.out.join("config.json"), &echo)?;
        let problem = Problem::new(cfg.problem_config())?;
        Ok(Experiment {
            cfg,
            problem,
            gram: OnceLock::new(),
            reference: OnceLock::new(),
        })
    }

    pub fn out(&self) -> &Path {
        &self.cfg.out
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    fn cache_path(&self, what: &str, key: &str) -> PathBuf {
        self.cfg.out.join("cache").join(format!("{what}_{key}.rbno"))
    }

    pub fn gram(&self) -> &CsrMatrix {
        self.gram.get_or_init(|| self.problem.gram_xh())
    }

    /// Refined problem with its X_h and L² Gram matrices.
    fn reference(&self) -> Result<&(Problem, CsrMatrix, CsrMatrix)> {
        if let Some(r) = self.reference.get() {
            return Ok(r);
        }
        let fine = self.problem.reference()?;
        let (x, l) = (fine.gram_xh(), fine.gram_l2());
        Ok(self.reference.get_or_init(|| (fine, x, l)))
    }

    pub fn seeds(&self, split: Split, n: usize) -> Vec<u64> {
        (0..n).map(|i| seeds::stage(self.cfg.seed, split.offset(), i)).collect()
    }

    pub fn samples(&self, split: Split, n: usize) -> Result<Vec<ParamSample>> {
        self.seeds(split, n)
            .par_iter()
            .enumerate()
            .map(|(i, &s)| self.problem.sample(s).map_err(|e| e.for_sample(i)))
            .collect()
    }

    fn split_key(&self, split: Split, n: usize) -> String {
        cache_key(&(self.cfg.problem_config(), self.cfg.seed, split, n))
    }

    /// FE solutions (one row each) and their losses.
    pub fn fe_solutions(&self, split: Split, n: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let key = self.split_key(split, n);
        let (sp, lp) = (self.cache_path("fe", &key), self.cache_path("fe_loss", &key));
        if sp.exists() && lp.exists() {
            return Ok((matrix_rows(&load_matrix(&sp)?), load_vector(&lp)?));
        }
        let samples = self.samples(split, n)?;
        let sols: Vec<(Vec<f64>, f64)> = samples
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let sol = self.problem.solve(s).map_err(|e| e.for_sample(i))?;
                Ok((sol.coefficients, sol.loss))
            })
            .collect::<Result<_>>()?;
        let (rows, losses): (Vec<_>, Vec<_>) = sols.into_iter().unzip();
        save_matrix(&sp, &rows_to_matrix(&rows, self.problem.disc.n_free())?)?;
        save_vector(&lp, &losses)?;
        Ok((rows, losses))
    }

    /// Solutions on the refined mesh, one row each.
    pub fn references(&self, split: Split, n: usize) -> Result<Vec<Vec<f64>>> {
        let path = self.cache_path("reference", &self.split_key(split, n));
        if path.exists() {
            return Ok(matrix_rows(&load_matrix(&path)?));
        }
        let (fine, _, _) = self.reference()?;
        let samples = self.samples(split, n)?;
        let rows: Vec<Vec<f64>> = samples
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let fs = fine.transfer_sample(s, &self.problem)?;
                Ok(fine.solve(&fs).map_err(|e| e.for_sample(i))?.coefficients)
            })
            .collect::<Result<_>>()?;
        save_matrix(&path, &rows_to_matrix(&rows, fine.disc.n_free())?)?;
        Ok(rows)
    }

    fn reference_errors(&self, s: &[f64], s_ref: &[f64]) -> Result<RefErrors> {
        let (fine, x, l) = self.reference()?;
        let d: Vec<f64> = self.problem.prolongate_to(s, fine)?.iter().zip(s_ref).map(|(a, b)| a - b).collect();
        let abs_h = x.quad_form(&d).max(0.0).sqrt();
        Ok(RefErrors {
            abs_h,
            rel_h: abs_h / x.quad_form(s_ref).sqrt(),
            rel_l2: (l.quad_form(&d).max(0.0) / l.quad_form(s_ref)).sqrt(),
        })
    }

    fn x_dist(&self, a: &[f64], b: &[f64]) -> f64 {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        self.gram().quad_form(&d).max(0.0).sqrt()
    }

    /// Per-sample FE solve with diagnostics; writes `solve.csv`.
    pub fn solve(&self) -> Result<Vec<SolveRow>> {
        let n = self.cfg.counts.n_solve;
        let samples = self.samples(Split::Test, n)?;
        let refs = if self.cfg.reference && n > 0 {
            Some(self.references(Split::Test, n)?)
        } else {
            None
        };
        let seeds = self.seeds(Split::Test, n);
        let rows: Vec<SolveRow> = samples
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let t0 = Instant::now();
                let w = self.problem.loss_weights(s);
                let t1 = Instant::now();
                let sol = self.problem.solve_weights(&w).map_err(|e| e.for_sample(i))?;
                let t2 = Instant::now();
                let error = match &refs {
                    Some(r) => Some(self.reference_errors(&sol.coefficients, &r[i])?.abs_h),
                    None => None,
                };
                let timed = self.cfg.timings;
                Ok(SolveRow {
                    sample: i,
                    seed: seeds[i],
                    n_free: w.n(),
                    loss: sol.loss,
                    error,
                    ratio: error.map(|e| residual_ratio(e, sol.loss)),
                    assemble_s: timed.then(|| (t1 - t0).as_secs_f64()),
                    solve_s: timed.then(|| (t2 - t1).as_secs_f64()),
                })
            })
            .collect::<Result<_>>()?;
        write_csv(
            &self.path("solve.csv"),
            &["sample", "seed", "n_free", "loss", "error", "ratio", "assemble_s", "solve_s"],
            &rows,
        )?;
        Ok(rows)
    }

    fn basis_key(&self) -> String {
        cache_key(&(self.cfg.problem_config(), self.cfg.seed, &self.cfg.pod))
    }

    /// Snapshots, POD basis, eigenvalue spectrum and held-out projection
    /// errors; writes `pod_*` files.
    pub fn pod(&self) -> Result<PodOutput> {
        let n = self.cfg.pod.n_pod;
        let (rows, _) = self.fe_solutions(Split::Pod, n)?;
        let snapshots = rows_to_matrix(&rows, self.problem.disc.n_free())?.transpose();
        let basis = pod(&snapshots, self.gram(), self.cfg.pod.target()?)?;
        let key = self.basis_key();
        save_matrix(self.cache_path("basis", &key), &basis.modes)?;
        save_vector(self.cache_path("eigenvalues", &key), &basis.eigenvalues)?;
        save_matrix(self.path("pod_snapshots.rbno"), &snapshots)?;
        save_matrix(self.path("pod_basis.rbno"), &basis.modes)?;
        let samples = self.samples(Split::Pod, n)?;
        let feats: Vec<Vec<f64>> = samples.iter().map(|s| s.feature_vector().to_vec()).collect();
        let width = feats.first().map_or(0, |f| f.len());
        save_matrix(self.path("pod_samples.rbno"), &rows_to_matrix(&feats, width)?)?;
        write_json(
            &self.path("pod_samples.json"),
            &serde_json::json!({ "seeds": self.seeds(Split::Pod, n), "problem": self.cfg.problem_config(), "basis_hash": basis.hash() }),
        )?;
        let lambda = &basis.eigenvalues;
        write_csv(
            &self.path("pod_eigenvalues.csv"),
            &["k", "eigenvalue", "tail", "rel_tail"],
            lambda.iter().enumerate().map(|(k, &l)| {
                let (t, rt) = pod_tail(lambda, k + 1);
                (k + 1, l, t, rt)
            }),
        )?;
        let (held, _) = self.fe_solutions(Split::Test, self.cfg.counts.n_test)?;
        let mut projection = Vec::new();
        if !held.is_empty() {
            for r in rank_sweep(basis.rank()) {
                let b = basis.truncate(r)?;
                let errs: Vec<f64> = held
                    .par_iter()
                    .map(|s| Ok(self.x_dist(s, &b.expand(&b.project(self.gram(), s)?)?).powi(2)))
                    .collect::<Result<_>>()?;
                let (mean, _) = mean_std(&errs);
                let tail = pod_tail(lambda, r).0;
                projection.push(ProjectionRow {
                    r,
                    mean_sq_error: mean,
                    tail,
                    ratio: mean / tail,
                });
            }
        }
        write_csv(&self.path("pod_projection.csv"), &["r", "mean_sq_error", "tail", "ratio"], &projection)?;
        Ok(PodOutput { basis, projection })
    }

    /// Cached basis, computing it when absent.
    pub fn basis(&self) -> Result<PodBasis> {
        let key = self.basis_key();
        let (mp, ep) = (self.cache_path("basis", &key), self.cache_path("eigenvalues", &key));
        if mp.exists() && ep.exists() {
            return Ok(PodBasis {
                modes: load_matrix(&mp)?,
                eigenvalues: load_vector(&ep)?,
                n_snapshots: self.cfg.pod.n_pod,
            });
        }
        Ok(self.pod()?.basis)
    }

    /// Samples of a split with their reduced loss weights.
    pub fn reduced(&self, split: Split, n: usize, basis: &PodBasis) -> Result<(Vec<ParamSample>, Vec<ReducedWeights>)> {
        let samples = self.samples(split, n)?;
        let seeds = self.seeds(split, n);
        let path = self.cache_path("reduced", &cache_key(&(self.split_key(split, n), basis.hash())));
        if path.exists() {
            return Ok((samples, unpack_weights(&load_matrix(&path)?, &seeds)?));
        }
        let weights: Vec<ReducedWeights> = samples
            .par_iter()
            .enumerate()
            .map(|(i, s)| reduce_weights(&self.problem.loss_weights(s), basis).map_err(|e| e.for_sample(i)))
            .collect::<Result<_>>()?;
        if !weights.is_empty() {
            save_matrix(&path, &pack_weights(&weights)?)?;
        }
        Ok((samples, weights))
    }

    /// Reduced-basis solves of the test set; writes `reduce.csv` and
    /// `reduce_sweep.csv`.
    pub fn reduce(&self) -> Result<ReduceOutput> {
        let basis = self.basis()?;
        let n = self.cfg.counts.n_test;
        let (_, weights) = self.reduced(Split::Test, n, &basis)?;
        let (fe, fe_loss) = self.fe_solutions(Split::Test, n)?;
        let refs = if self.cfg.reference && n > 0 {
            Some(self.references(Split::Test, n)?)
        } else {
            None
        };
        let seeds = self.seeds(Split::Test, n);
        let mut sweep = Vec::new();
        let mut rows = Vec::new();
        for r in rank_sweep(basis.rank()) {
            let b = basis.truncate(r)?;
            let full = r == basis.rank();
            let per: Vec<ReduceRow> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let rw = weights[i].truncate(r)?;
                    let sr = solve_rb(&rw).map_err(|e| e.for_sample(i))?;
                    let s = b.expand(&sr)?;
                    let rb_loss = rw.eval(&sr)?;
                    let err = self.x_dist(&fe[i], &s);
                    let proj = self.x_dist(&fe[i], &b.expand(&b.project(self.gram(), &fe[i])?)?);
                    let error_reference = match (&refs, full) {
                        (Some(refs), true) => Some(self.reference_errors(&s, &refs[i])?.abs_h),
                        _ => None,
                    };
                    Ok(ReduceRow {
                        sample: i,
                        seed: seeds[i],
                        fe_loss: fe_loss[i],
                        rb_loss,
                        error_rb_fe: err,
                        projection_error: proj,
                        quasi_optimality: residual_ratio(err, proj * proj),
                        error_reference,
                        ratio: error_reference.map(|e| residual_ratio(e, rb_loss)),
                    })
                })
                .collect::<Result<_>>()?;
            let col = |f: fn(&ReduceRow) -> f64| mean_std(&per.iter().map(f).collect::<Vec<_>>()).0;
            sweep.push(SweepRow {
                r,
                mean_fe_loss: col(|x| x.fe_loss),
                mean_rb_loss: col(|x| x.rb_loss),
                mean_error_rb_fe: col(|x| x.error_rb_fe),
                mean_projection_error: col(|x| x.projection_error),
                max_quasi_optimality: per.iter().map(|x| x.quasi_optimality).fold(0.0, f64::max),
            });
            if full {
                rows = per;
            }
        }
        write_csv(
            &self.path("reduce.csv"),
            &[
                "sample",
                "seed",
                "fe_loss",
                "rb_loss",
                "error_rb_fe",
                "projection_error",
                "quasi_optimality",
                "error_reference",
                "ratio",
            ],
            &rows,
        )?;
        write_csv(
            &self.path("reduce_sweep.csv"),
            &["r", "mean_fe_loss", "mean_rb_loss", "mean_error_rb_fe", "mean_projection_error", "max_quasi_optimality"],
            &sweep,
        )?;
        Ok(ReduceOutput { rows, sweep })
    }

    /// Training and validation datasets with the fitted feature codec.
    pub fn datasets(&self, basis: &PodBasis) -> Result<(Dataset, Dataset, FeatureCodec)> {
        let c = &self.cfg.counts;
        let (tr_samples, tr_weights) = self.reduced(Split::Train, c.n_train, basis)?;
        let (train_idx, val_idx) = if c.n_val == 0 {
            split_indices(c.n_train, self.cfg.train.val_fraction, seeds::stage(self.cfg.seed, seeds::SHUFFLE, 1))
        } else {
            ((0..c.n_train).collect(), Vec::new())
        };
        let pick = |idx: &[usize]| -> (Vec<ParamSample>, Vec<ReducedWeights>) {
            (idx.iter().map(|&i| tr_samples[i].clone()).collect(), idx.iter().map(|&i| tr_weights[i].clone()).collect())
        };
        let (ts, tw) = pick(&train_idx);
        let (vs, vw) = if c.n_val == 0 { pick(&val_idx) } else { self.reduced(Split::Val, c.n_val, basis)? };
        let codec = FeatureCodec::fit(&ts, self.cfg.pca_dim)?;
        let train_set = Dataset::with_optimal_labels(codec.encode_all(&ts)?, tw)?;
        let val_set = Dataset::with_optimal_labels(codec.encode_all(&vs)?, vw)?;
        Ok((train_set, val_set, codec))
    }

    /// Trains the network; writes the checkpoint under `model/` and
    /// `train_history.csv`.
    pub fn train(&self) -> Result<TrainOutput> {
        let basis = self.basis()?;
        let (train_set, val_set, codec) = self.datasets(&basis)?;
        let mut tc = self.cfg.train.clone();
        tc.seed = self.cfg.seed;
        let trained = train(&train_set, &val_set, &tc)?;
        self.save_model(&trained, &codec, &basis)?;
        let val: BTreeMap<usize, f64> = trained.val_history.iter().copied().collect();
        let rows = (0..=trained.train_history.len()).map(|it| {
            let train_loss = it.checked_sub(1).map(|k| trained.train_history[k]);
            (it, train_loss, val.get(&it).copied())
        });
        write_csv(&self.path("train_history.csv"), &["iteration", "train_loss", "val_loss"], rows)?;
        Ok(TrainOutput { trained, codec })
    }

    fn model_dir(&self) -> PathBuf {
        self.path("model")
    }

    fn save_model(&self, trained: &TrainedModel, codec: &FeatureCodec, basis: &PodBasis) -> Result<()> {
        let dir = self.model_dir();
        std::fs::create_dir_all(&dir)?;
        for (k, (w, b)) in layer_matrices(&trained.model).iter().enumerate() {
            save_matrix(dir.join(format!("layer{k}_w.rbno")), w)?;
            save_matrix(dir.join(format!("layer{k}_b.rbno")), b)?;
        }
        write_json(&dir.join("codec.json"), codec)?;
        write_json(
            &dir.join("manifest.json"),
            &Manifest {
                widths: trained.model.widths(),
                slope: trained.model.slope,
                clip: trained.model.clip,
                codec: codec.id().into(),
                basis_hash: basis.hash(),
                best_iter: trained.best_iter,
                best_val: trained.best_val,
            },
        )
    }

    /// Loads the checkpoint, if any, checking it matches `basis`.
    pub fn load_model(&self, basis: &PodBasis) -> Result<Option<(Mlp, FeatureCodec)>> {
        let dir = self.model_dir();
        let mp = dir.join("manifest.json");
        if !mp.exists() {
            return Ok(None);
        }
        let bad = |e: serde_json::Error| Error::Format(e.to_string());
        let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(&mp)?).map_err(bad)?;
        if manifest.basis_hash != basis.hash() {
            return Err(Error::InvalidInput("checkpoint was trained on a different reduced basis".into()));
        }
        let codec: FeatureCodec = serde_json::from_str(&std::fs::read_to_string(dir.join("codec.json"))?).map_err(bad)?;
        let layers = (0..manifest.widths.len().saturating_sub(1))
            .map(|k| Ok((load_matrix(dir.join(format!("layer{k}_w.rbno")))?, load_matrix(dir.join(format!("layer{k}_b.rbno")))?)))
            .collect::<Result<Vec<_>>>()?;
        let model = model_from_matrices(&layers, manifest.slope, manifest.clip)?;
        if model.widths() != manifest.widths {
            return Err(Error::Format("checkpoint layers disagree with the manifest".into()));
        }
        Ok(Some((model, codec)))
    }

    /// Test-set metrics of the checkpoint (trained first when absent);
    /// writes `metrics.csv`, `metrics_summary.csv` and `ratio_hist.csv`.
    pub fn eval(&self) -> Result<EvalOutput> {
        let basis = self.basis()?;
        let (model, codec) = match self.load_model(&basis)? {
            Some(m) => m,
            None => {
                let t = self.train()?;
                (t.trained.model, t.codec)
            }
        };
        self.eval_model(&model, &codec, &basis)
    }

    pub fn eval_model(&self, model: &Mlp, codec: &FeatureCodec, basis: &PodBasis) -> Result<EvalOutput> {
        let n = self.cfg.counts.n_test;
        let (samples, weights) = self.reduced(Split::Test, n, basis)?;
        let data = Dataset::with_optimal_labels(codec.encode_all(&samples)?, weights)?;
        let (pred, metrics) = evaluate(model, &data)?;
        let refs = if self.cfg.reference && n > 0 {
            Some(self.references(Split::Test, n)?)
        } else {
            None
        };
        let seeds = self.seeds(Split::Test, n);
        let rows: Vec<EvalRow> = (0..n)
            .into_par_iter()
            .map(|i| {
                let m = metrics[i];
                let e = match &refs {
                    Some(r) => Some(self.reference_errors(&basis.expand(&pred.row(i).to_vec())?, &r[i])?),
                    None => None,
                };
                Ok(EvalRow {
                    sample: i,
                    seed: seeds[i],
                    loss: m.loss,
                    optimal_loss: m.optimal_loss,
                    error_rb: m.error_rb,
                    error_reference: e.as_ref().map(|e| e.abs_h),
                    rel_l2: e.as_ref().map(|e| e.rel_l2),
                    rel_h: e.as_ref().map(|e| e.rel_h),
                    ratio: e.as_ref().map(|e| residual_ratio(e.abs_h, m.loss)),
                })
            })
            .collect::<Result<_>>()?;
        let stat = |metric: &'static str, f: fn(&EvalRow) -> Option<f64>| {
            let v: Vec<f64> = rows.iter().filter_map(f).collect();
            let (mean, std) = mean_std(&v);
            SummaryRow { metric, mean, std }
        };
        let summary = vec![
            stat("rel_l2", |r| r.rel_l2),
            stat("rel_h", |r| r.rel_h),
            stat("loss", |r| Some(r.loss)),
            stat("optimal_loss", |r| Some(r.optimal_loss)),
            stat("error_rb", |r| Some(r.error_rb)),
            stat("ratio", |r| r.ratio),
        ];
        write_csv(
            &self.path("metrics.csv"),
            &["sample", "seed", "loss", "optimal_loss", "error_rb", "error_reference", "rel_l2", "rel_h", "ratio"],
            &rows,
        )?;
        write_csv(&self.path("metrics_summary.csv"), &["metric", "mean", "std"], &summary)?;
        let edges = log_edges(0.1, 10.0, 20);
        let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
        let counts = histogram(&ratios, &edges);
        write_csv(
            &self.path("ratio_hist.csv"),
            &["bin_lo", "bin_hi", "count"],
            counts.iter().enumerate().map(|(k, &c)| (edges[k], edges[k + 1], c)),
        )?;
        Ok(EvalOutput { rows, summary })
    }

    /// FE losses of a manufactured problem over mesh levels and degrees;
    /// writes `rates.csv` and `rates_fit.csv`.
    pub fn rates(&self) -> Result<(Vec<RateRow>, Vec<RateFit>)> {
        let kind = self.cfg.problem;
        if !matches!(kind, ProblemKind::ManufacturedDiffusion | ProblemKind::ManufacturedElasticity) {
            return Err(Error::InvalidInput(format!("rates need a manufactured problem, got {}", kind.name())));
        }
        let mut rows = Vec::new();
        let mut fits = Vec::new();
        for &k in &self.cfg.rates.degrees {
            let mut level_rows: Vec<RateRow> = self
                .cfg
                .rates
                .levels
                .par_iter()
                .map(|&n| {
                    let pc = ProblemConfig {
                        nu: self.cfg.nu,
                        ..ProblemConfig::new(kind, n, k)
                    };
                    let p = Problem::new(pc)?;
                    let sol = p.solve(&p.sample(seeds::stage(self.cfg.seed, seeds::TEST, 0))?)?;
                    Ok(RateRow {
                        k,
                        n,
                        h: 1.0 / n as f64,
                        n_free: p.disc.n_free(),
                        loss: sol.loss,
                    })
                })
                .collect::<Result<_>>()?;
            let h: Vec<f64> = level_rows.iter().map(|r| r.h).collect();
            let l: Vec<f64> = level_rows.iter().map(|r| r.loss).collect();
            fits.push(RateFit {
                k,
                slope: if h.len() > 1 { loglog_slope(&h, &l) } else { f64::NAN },
                expected: 2.0 * (k + 1) as f64,
            });
            rows.append(&mut level_rows);
        }
        write_csv(&self.path("rates.csv"), &["k", "n", "h", "n_free", "loss"], &rows)?;
        write_csv(&self.path("rates_fit.csv"), &["k", "slope", "expected"], &fits)?;
        Ok((rows, fits))
    }

    /// FE loss against squared error to the refined-mesh solution; writes
    /// `ratios.csv`.
    pub fn ratios(&self) -> Result<Vec<RatioRow>> {
        let n = self.cfg.counts.n_test;
        let (fe, losses) = self.fe_solutions(Split::Test, n)?;
        let refs = self.references(Split::Test, n)?;
        let seeds = self.seeds(Split::Test, n);
        let rows: Vec<RatioRow> = (0..n)
            .into_par_iter()
            .map(|i| {
                let error = self.reference_errors(&fe[i], &refs[i])?.abs_h;
                Ok(RatioRow {
                    sample: i,
                    seed: seeds[i],
                    loss: losses[i],
                    error,
                    loss_over_error_sq: losses[i] / (error * error),
                })
            })
            .collect::<Result<_>>()?;
        write_csv(&self.path("ratios.csv"), &["sample", "seed", "loss", "error", "loss_over_error_sq"], &rows)?;
        Ok(rows)
    }
}
