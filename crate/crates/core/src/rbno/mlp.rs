//! Fully connected network with LeakyReLU hidden layers and an affine output.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};

pub const LEAKY_SLOPE: f64 = 0.01;

/// One affine map `x ↦ W x + b` with `W` stored `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Layer {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Layer {
            w: Array2::zeros((n_out, n_in)),
            b: Array1::zeros(n_out),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    pub slope: f64,
    /// Output rescaled onto the ball of this radius when longer.
    pub clip: Option<f64>,
}

/// Per-layer gradients, shaped like the network.
pub type Gradients = Vec<Layer>;

/// Intermediate values of a forward pass.
pub struct ForwardCache {
    /// Layer inputs: features, then each hidden activation.
    inputs: Vec<Array2<f64>>,
    /// Hidden pre-activations.
    pre: Vec<Array2<f64>>,
    /// Output before clipping.
    raw: Array2<f64>,
    pub output: Array2<f64>,
}

impl Mlp {
    /// Zero network with the given widths `[d_in, h_1, ..., r]`.
    pub fn zeros(widths: &[usize]) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::invalid("network needs at least two positive widths"));
        }
        Ok(Mlp {
            layers: widths.windows(2).map(|p| Layer::zeros(p[0], p[1])).collect(),
            slope: LEAKY_SLOPE,
            clip: None,
        })
    }

    /// Xavier-uniform weights, zero biases.
    pub fn xavier(widths: &[usize], rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut net = Mlp::zeros(widths)?;
        for layer in &mut net.layers {
            let (o, i) = layer.w.dim();
            let a = (6.0 / (i + o) as f64).sqrt();
            layer.w.iter_mut().for_each(|v| *v = rng.gen_range(-a..a));
        }
        Ok(net)
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.layers[0].w.ncols()];
        w.extend(self.layers.iter().map(|l| l.w.nrows()));
        w
    }

    pub fn d_in(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn d_out(&self) -> usize {
        self.layers.last().expect("nonempty network").w.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Predictions for a batch of feature rows.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(x)?.output)
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<ForwardCache> {
        check_dim("network input width", self.d_in(), x.ncols())?;
        let last = self.layers.len() - 1;
        let mut inputs = vec![x.to_owned()];
        let mut pre = Vec::with_capacity(last);
        for layer in &self.layers[..last] {
            let z = affine(layer, inputs.last().expect("input").view());
            inputs.push(z.mapv(|v| if v > 0.0 { v } else { self.slope * v }));
            pre.push(z);
        }
        let raw = affine(&self.layers[last], inputs.last().expect("input").view());
        let mut output = raw.clone();
        if let Some(bound) = self.clip {
            for mut row in output.rows_mut() {
                let n = row.dot(&row).sqrt();
                if n > bound {
                    row.mapv_inplace(|v| v * bound / n);
                }
            }
        }
        Ok(ForwardCache { inputs, pre, raw, output })
    }

    /// Parameter gradients of `Σ_rows ⟨d_out, output⟩`.
    pub fn backward(&self, cache: &ForwardCache, d_out: &Array2<f64>) -> Result<Gradients> {
        check_dim("output gradient rows", cache.output.nrows(), d_out.nrows())?;
        check_dim("output gradient width", self.d_out(), d_out.ncols())?;
        let mut dz = d_out.clone();
        if let Some(bound) = self.clip {
            for (mut g, y) in dz.rows_mut().into_iter().zip(cache.raw.rows()) {
                let n = y.dot(&y).sqrt();
                if n > bound {
                    // Jacobian (B/|y|)(I - y yᵀ/|y|²) is symmetric.
                    let proj = g.dot(&y) / (n * n);
                    Zip::from(&mut g).and(&y).for_each(|gi, &yi| *gi = bound / n * (*gi - proj * yi));
                }
            }
        }
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let a = &cache.inputs[l];
            let w_grad = dz.t().dot(a);
            let b_grad = dz.sum_axis(Axis(0));
            if l > 0 {
                let mut da = dz.dot(&self.layers[l].w);
                Zip::from(&mut da).and(&cache.pre[l - 1]).for_each(|d, &z| {
                    if z <= 0.0 {
                        *d *= self.slope
                    }
                });
                dz = da;
            }
            grads.push(Layer { w: w_grad, b: b_grad });
        }
        grads.reverse();
        Ok(grads)
    }

    /// All parameters, layer by layer, weights (row-major) before biases.
    pub fn params(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        check_dim("parameter vector", self.n_params(), p.len())?;
        let mut k = 0;
        for layer in &mut self.layers {
            for v in layer.w.iter_mut().chain(layer.b.iter_mut()) {
                *v = p[k];
                k += 1;
            }
        }
        Ok(())
    }
}

fn affine(layer: &Layer, x: ArrayView2<f64>) -> Array2<f64> {
    let mut z = x.dot(&layer.w.t());
    z += &layer.b;
    z
}

/// Concatenates layer parameters in [`Mlp::params`] order.
pub fn flatten(layers: &[Layer]) -> Vec<f64> {
    layers.iter().flat_map(|l| l.w.iter().chain(l.b.iter()).copied()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::rng_for;
    use ndarray::array;

    #[test]
    fn zero_weights_give_zero() {
        let net = Mlp::zeros(&[3, 5, 2]).unwrap();
        let y = net.forward(array![[1.0, -2.0, 3.0]].view()).unwrap();
        assert_eq!(y, array![[0.0, 0.0]]);
    }

    #[test]
    fn zero_final_layer_gives_zero() {
        let mut net = Mlp::xavier(&[3, 8, 8, 2], &mut rng_for(1)).unwrap();
        *net.layers.last_mut().unwrap() = Layer::zeros(8, 2);
        let y = net.forward(array![[1.0, -2.0, 3.0], [0.1, 0.2, 0.3]].view()).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_passthrough_on_positive_inputs() {
        let mut net = Mlp::zeros(&[3, 3, 3]).unwrap();
        net.layers[0].w = Array2::eye(3);
        net.layers[1].w = Array2::eye(3);
        let x = array![[0.5, 2.0, 7.0]];
        assert_eq!(net.forward(x.view()).unwrap(), x);
        // Negative inputs are damped by the slope.
        let y = net.forward(array![[-1.0, 1.0, 0.0]].view()).unwrap();
        assert_eq!(y, array![[-LEAKY_SLOPE, 1.0, 0.0]]);
    }

    #[test]
    fn duplicated_rows_duplicate_outputs() {
        let net = Mlp::xavier(&[2, 6, 3], &mut rng_for(4)).unwrap();
        let y = net.forward(array![[0.3, -0.7], [0.3, -0.7]].view()).unwrap();
        assert_eq!(y.row(0), y.row(1));
    }

    #[test]
    fn xavier_bounds_and_determinism() {
        let a = Mlp::xavier(&[16, 32, 4], &mut rng_for(7)).unwrap();
        let b = Mlp::xavier(&[16, 32, 4], &mut rng_for(7)).unwrap();
        assert_eq!(a, b);
        let lim = (6.0f64 / 48.0).sqrt();
        assert!(a.layers[0].w.iter().all(|v| v.abs() <= lim));
        assert!(a.layers[0].b.iter().all(|&v| v == 0.0));
        assert_eq!(a.widths(), vec![16, 32, 4]);
        assert_eq!(a.n_params(), 16 * 32 + 32 + 32 * 4 + 4);
    }

    #[test]
    fn clip_bounds_output() {
        let mut net = Mlp::xavier(&[2, 16, 3], &mut rng_for(2)).unwrap();
        net.clip = Some(0.1);
        let y = net.forward(array![[30.0, -40.0], [1e-4, 0.0]].view()).unwrap();
        for row in y.rows() {
            assert!(row.dot(&row).sqrt() <= 0.1 + 1e-15);
        }
    }

    #[test]
    fn params_round_trip() {
        let a = Mlp::xavier(&[3, 4, 2], &mut rng_for(3)).unwrap();
        let mut b = Mlp::zeros(&[3, 4, 2]).unwrap();
        b.set_params(&a.params()).unwrap();
        assert_eq!(a, b);
        assert!(b.set_params(&[0.0]).is_err());
    }

    #[test]
    fn width_mismatch_rejected() {
        let net = Mlp::zeros(&[3, 2]).unwrap();
        assert!(net.forward(array![[1.0, 2.0]].view()).is_err());
        assert!(Mlp::zeros(&[3]).is_err());
        assert!(Mlp::zeros(&[3, 0, 2]).is_err());
    }
}
