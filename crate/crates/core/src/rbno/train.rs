//! Residual-loss training with AdamW, step decay and early stopping.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Layer, Mlp};
use crate::error::{check_dim, Error, Result};
use crate::fields::rng_for;
use crate::linalg::{sym_eig, DenseMatrix};
use crate::rom::{solve_rb, ReducedWeights};
use crate::seeds;

/// Training aborts once the loss exceeds this multiple of the first loss.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// Reduced residual loss `sᵀW s + 2sᵀα + β`.
    Residual,
    /// Squared distance to the reduced-basis optimum.
    CoefMse,
    /// Residual plus `mse_weight` times the coefficient error.
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub loss_mode: LossMode,
    pub mse_weight: f64,
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled decay applied to weight matrices (not biases).
    pub weight_decay: f64,
    pub gamma: f64,
    /// Iterations between learning-rate decays.
    pub step_size: usize,
    /// Full batch when the training set is not larger than this.
    pub batch_size: usize,
    pub max_iters: usize,
    /// Iterations between validation checks.
    pub eval_every: usize,
    /// Stop after this many validation checks without improvement.
    pub patience: Option<usize>,
    pub val_fraction: f64,
    /// Clip outputs to twice the largest training optimum.
    pub clip: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss_mode: LossMode::Residual,
            mse_weight: 1.0,
            hidden: vec![256, 256],
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-2,
            gamma: 0.9,
            step_size: 50,
            batch_size: 4096,
            max_iters: 2000,
            eval_every: 10,
            patience: None,
            val_fraction: 0.2,
            clip: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.weight_decay >= 0.0
            && self.gamma > 0.0
            && self.gamma <= 1.0
            && self.step_size > 0
            && self.batch_size > 0
            && self.eval_every > 0
            && (0.0..1.0).contains(&self.val_fraction)
            && !self.hidden.contains(&0);
        if !ok {
            return Err(Error::invalid("training hyperparameters out of range"));
        }
        if self.loss_mode == LossMode::Both && !(self.mse_weight > 0.0) {
            return Err(Error::invalid("loss mode `both` needs a positive mse_weight"));
        }
        Ok(())
    }

    /// Learning rate used at iteration `it` (1-based).
    pub fn lr_at(&self, it: usize) -> f64 {
        self.lr * self.gamma.powi(((it - 1) / self.step_size) as i32)
    }
}

/// Features, reduced weights and optional reduced optima for a sample set.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub weights: Vec<ReducedWeights>,
    pub labels: Option<Array2<f64>>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, weights: Vec<ReducedWeights>, labels: Option<Array2<f64>>) -> Result<Self> {
        check_dim("reduced weights per feature row", features.nrows(), weights.len())?;
        let r = weights.first().map_or(0, |w| w.rank());
        for w in &weights {
            check_dim("reduced rank", r, w.rank())?;
        }
        if let Some(l) = &labels {
            check_dim("label rows", features.nrows(), l.nrows())?;
            if !weights.is_empty() {
                check_dim("label width", r, l.ncols())?;
            }
        }
        Ok(Dataset { features, weights, labels })
    }

    /// Dataset labelled with each sample's reduced minimizer.
    pub fn with_optimal_labels(features: Array2<f64>, weights: Vec<ReducedWeights>) -> Result<Self> {
        let r = weights.first().map_or(0, |w| w.rank());
        let mut labels = Array2::zeros((weights.len(), r));
        for (i, w) in weights.iter().enumerate() {
            let s = solve_rb(w).map_err(|e| e.for_sample(i))?;
            labels.row_mut(i).iter_mut().zip(s).for_each(|(o, v)| *o = v);
        }
        Dataset::new(features, weights, Some(labels))
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.weights.first().map_or(0, |w| w.rank())
    }

    pub fn d_in(&self) -> usize {
        self.features.ncols()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), idx),
            weights: idx.iter().map(|&i| self.weights[i].clone()).collect(),
            labels: self.labels.as_ref().map(|l| l.select(Axis(0), idx)),
        }
    }

    fn label(&self, mode: LossMode, i: usize) -> Result<Option<ndarray::ArrayView1<'_, f64>>> {
        match mode {
            LossMode::Residual => Ok(None),
            _ => self
                .labels
                .as_ref()
                .map(|l| Some(l.row(i)))
                .ok_or_else(|| Error::invalid("coefficient loss modes need labels")),
        }
    }
}

/// Seeded split of `0..n` into (train, validation) index lists.
pub fn split_indices(n: usize, val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_for(seed));
    let n_val = ((n as f64) * val_fraction).round() as usize;
    let n_val = n_val.min(n.saturating_sub(1));
    let val = idx.split_off(n - n_val);
    (idx, val)
}

/// Per-sample objective and its gradient with respect to the prediction.
fn sample_terms(
    data: &Dataset,
    i: usize,
    s: &[f64],
    mode: LossMode,
    mse_weight: f64,
    grad: Option<&mut [f64]>,
) -> Result<f64> {
    let mut loss = 0.0;
    let mut g = vec![0.0; s.len()];
    if mode != LossMode::CoefMse {
        let w = &data.weights[i];
        loss += w.eval(s)?;
        g.iter_mut().zip(w.gradient(s)).for_each(|(a, b)| *a += b);
    }
    if let Some(label) = data.label(mode, i)? {
        let scale = if mode == LossMode::Both { mse_weight } else { 1.0 };
        for ((gk, sk), yk) in g.iter_mut().zip(s).zip(label.iter()) {
            let d = sk - yk;
            loss += scale * d * d;
            *gk += 2.0 * scale * d;
        }
    }
    if let Some(out) = grad {
        out.copy_from_slice(&g);
    }
    Ok(loss)
}

/// Mean objective over the rows `idx` and its parameter gradient.
pub fn loss_and_grad(model: &Mlp, data: &Dataset, idx: &[usize], mode: LossMode, mse_weight: f64) -> Result<(f64, Gradients)> {
    if idx.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    check_dim("network output width", data.rank(), model.d_out())?;
    let x = data.features.select(Axis(0), idx);
    let cache = model.forward_cached(x.view())?;
    let n = idx.len() as f64;
    let mut d_out = Array2::zeros(cache.output.dim());
    let mut loss = 0.0;
    for (k, &i) in idx.iter().enumerate() {
        let s = cache.output.row(k).to_vec();
        let mut g = vec![0.0; s.len()];
        loss += sample_terms(data, i, &s, mode, mse_weight, Some(&mut g))?;
        d_out.row_mut(k).iter_mut().zip(g).for_each(|(o, v)| *o = v / n);
    }
    let grads = model.backward(&cache, &d_out)?;
    Ok((loss / n, grads))
}

/// Mean objective over the whole dataset.
pub fn mean_objective(model: &Mlp, data: &Dataset, mode: LossMode, mse_weight: f64) -> Result<f64> {
    let y = model.forward(data.features.view())?;
    let mut total = 0.0;
    for i in 0..data.len() {
        let s = y.row(i).to_vec();
        total += sample_terms(data, i, &s, mode, mse_weight, None)?;
    }
    Ok(total / data.len() as f64)
}

/// Adam with decoupled weight decay on the weight matrices.
pub struct AdamW {
    m: Gradients,
    v: Gradients,
    t: i32,
}

impl AdamW {
    pub fn new(model: &Mlp) -> Self {
        let zeros: Gradients = model.layers.iter().map(|l| Layer::zeros(l.w.ncols(), l.w.nrows())).collect();
        AdamW {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn step(&mut self, model: &mut Mlp, grads: &Gradients, lr: f64, cfg: &TrainConfig) {
        self.t += 1;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let update = |p: f64, g: f64, m: &mut f64, v: &mut f64| -> f64 {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            p - lr * (*m / c1) / ((*v / c2).sqrt() + cfg.eps)
        };
        for (((layer, g), m), v) in model.layers.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            let decay = 1.0 - lr * cfg.weight_decay;
            Zip::from(&mut layer.w).and(&g.w).and(&mut m.w).and(&mut v.w).for_each(|p, &g, m, v| {
                *p = update(*p * decay, g, m, v);
            });
            Zip::from(&mut layer.b).and(&g.b).and(&mut m.b).and(&mut v.b).for_each(|p, &g, m, v| {
                *p = update(*p, g, m, v);
            });
        }
    }
}

/// Best-validation network and the loss histories that led to it.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: Mlp,
    pub best_iter: usize,
    pub best_val: f64,
    /// Batch objective before each update.
    pub train_history: Vec<f64>,
    /// `(iteration, validation objective)`, starting at iteration 0.
    pub val_history: Vec<(usize, f64)>,
}

/// Trains a fresh network on `train`, keeping the snapshot with the lowest
/// validation objective.
pub fn train(train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<TrainedModel> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::invalid("training and validation sets must be nonempty"));
    }
    check_dim("validation feature width", train.d_in(), val.d_in())?;
    check_dim("validation rank", train.rank(), val.rank())?;
    let mut widths = vec![train.d_in()];
    widths.extend(&cfg.hidden);
    widths.push(train.rank());
    let mut model = Mlp::xavier(&widths, &mut rng_for(seeds::stage(cfg.seed, seeds::NET_INIT, 0)))?;
    if cfg.clip {
        model.clip = Some(2.0 * max_optimum_norm(train)?);
    }
    let (mode, wm) = (cfg.loss_mode, cfg.mse_weight);
    let mut opt = AdamW::new(&model);
    let v0 = mean_objective(&model, val, mode, wm)?;
    let mut best = TrainedModel {
        model: model.clone(),
        best_iter: 0,
        best_val: v0,
        train_history: Vec::with_capacity(cfg.max_iters),
        val_history: vec![(0, v0)],
    };
    let n = train.len();
    let mut order: Vec<usize> = (0..n).collect();
    let full = n <= cfg.batch_size;
    let mut rng = rng_for(seeds::stage(cfg.seed, seeds::SHUFFLE, 0));
    let mut pos = n;
    let mut initial = None;
    let mut stale = 0;
    for it in 1..=cfg.max_iters {
        let idx: &[usize] = if full {
            &order
        } else {
            if pos + cfg.batch_size > n {
                order.shuffle(&mut rng);
                pos = 0;
            }
            pos += cfg.batch_size;
            &order[pos - cfg.batch_size..pos]
        };
        let (loss, grads) = loss_and_grad(&model, train, idx, mode, wm)?;
        let first = *initial.get_or_insert(loss);
        if !loss.is_finite() || (first > 0.0 && loss > DIVERGENCE_FACTOR * first) {
            return Err(Error::Diverged { iteration: it, loss });
        }
        best.train_history.push(loss);
        opt.step(&mut model, &grads, cfg.lr_at(it), cfg);
        if it % cfg.eval_every == 0 || it == cfg.max_iters {
            let v = mean_objective(&model, val, mode, wm)?;
            best.val_history.push((it, v));
            if v < best.best_val {
                best.best_val = v;
                best.best_iter = it;
                best.model = model.clone();
                stale = 0;
            } else {
                stale += 1;
                if cfg.patience.is_some_and(|p| stale >= p) {
                    break;
                }
            }
        }
    }
    Ok(best)
}

fn max_optimum_norm(data: &Dataset) -> Result<f64> {
    let mut best = 0.0f64;
    for (i, w) in data.weights.iter().enumerate() {
        let s = match &data.labels {
            Some(l) => l.row(i).to_vec(),
            None => solve_rb(w).map_err(|e| e.for_sample(i))?,
        };
        best = best.max(s.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    Ok(best)
}

/// Loss at a prediction against the reduced optimum of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RbMetrics {
    pub loss: f64,
    pub optimal_loss: f64,
    /// Euclidean (= X_h) distance to the reduced optimum.
    pub error_rb: f64,
}

/// Predictions and per-sample reduced-space metrics.
pub fn evaluate(model: &Mlp, data: &Dataset) -> Result<(Array2<f64>, Vec<RbMetrics>)> {
    check_dim("network output width", data.rank(), model.d_out())?;
    let y = model.forward(data.features.view())?;
    let mut out = Vec::with_capacity(data.len());
    for (i, w) in data.weights.iter().enumerate() {
        let s = y.row(i).to_vec();
        let opt = match &data.labels {
            Some(l) => l.row(i).to_vec(),
            None => solve_rb(w).map_err(|e| e.for_sample(i))?,
        };
        let error_rb = s.iter().zip(&opt).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        out.push(RbMetrics {
            loss: w.eval(&s)?,
            optimal_loss: w.eval(&opt)?,
            error_rb,
        });
    }
    Ok((y, out))
}

/// Upper bound `(√γ₊ B + S_max)²` on the reduced loss of any output with
/// norm at most `bound`, where `γ₊` is the largest eigenvalue of the `W_r`
/// and `S_max² = max β` is the loss at zero.
pub fn loss_bound(weights: &[ReducedWeights], bound: f64) -> Result<f64> {
    let mut gamma = 0.0f64;
    let mut s_max = 0.0f64;
    for w in weights {
        gamma = gamma.max(sym_eig(&w.matrix())?.values.first().copied().unwrap_or(0.0));
        s_max = s_max.max(w.beta.max(0.0).sqrt());
    }
    Ok((gamma.sqrt() * bound + s_max).powi(2))
}

/// Counts of `values` in the bins `[edges[i], edges[i+1])`; the outermost
/// bins also catch values below and above the range.
pub fn histogram(values: &[f64], edges: &[f64]) -> Vec<usize> {
    let nb = edges.len().saturating_sub(1);
    let mut counts = vec![0; nb];
    if nb == 0 {
        return counts;
    }
    for &v in values.iter().filter(|v| !v.is_nan()) {
        let k = edges[1..nb].partition_point(|&e| e <= v);
        counts[k] += 1;
    }
    counts
}

/// Logarithmically spaced edges from `lo` to `hi`.
pub fn log_edges(lo: f64, hi: f64, n_bins: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..=n_bins).map(|i| (a + (b - a) * i as f64 / n_bins as f64).exp()).collect()
}

/// Stored model as dense matrices, for checkpoint files.
pub fn layer_matrices(model: &Mlp) -> Vec<(DenseMatrix, DenseMatrix)> {
    model
        .layers
        .iter()
        .map(|l| {
            let (o, i) = l.w.dim();
            (
                DenseMatrix::from_vec(o, i, l.w.iter().copied().collect()).expect("layer shape"),
                DenseMatrix::from_vec(o, 1, l.b.to_vec()).expect("bias shape"),
            )
        })
        .collect()
}

/// Inverse of [`layer_matrices`].
pub fn model_from_matrices(layers: &[(DenseMatrix, DenseMatrix)], slope: f64, clip: Option<f64>) -> Result<Mlp> {
    if layers.is_empty() {
        return Err(Error::Format("checkpoint has no layers".into()));
    }
    let mut out = Vec::with_capacity(layers.len());
    for (k, (w, b)) in layers.iter().enumerate() {
        check_dim("bias length", w.n_rows, b.data.len())?;
        if k > 0 {
            check_dim("layer input width", layers[k - 1].0.n_rows, w.n_cols)?;
        }
        out.push(Layer {
            w: Array2::from_shape_vec((w.n_rows, w.n_cols), w.data.clone()).map_err(|e| Error::Format(e.to_string()))?,
            b: Array1::from(b.data.clone()),
        });
    }
    Ok(Mlp { layers: out, slope, clip })
}
