//! Parameter fields and material laws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{assemble_matrix, Coef, Family, FormKind, FunctionSpace, QuadratureRule, triangle_rule};
use crate::linalg::{solve_spd_with, CgOptions, CsrMatrix};
use crate::mesh::Mesh;

/// Lamé parameters at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lame {
    pub mu: f64,
    pub lambda: f64,
}

/// Spatial dimension of all problems.
pub const DIM: f64 = 2.0;

/// `μ = E / (2(1+ν))`, `λ = νE / ((1+ν)(1-2ν))`.
pub fn lame_from_young(e: f64, nu: f64) -> Result<Lame> {
    if !(nu > 0.0 && nu < 0.5) {
        return Err(Error::invalid(format!("Poisson ratio {nu} outside (0, 1/2)")));
    }
    Ok(Lame {
        mu: e / (2.0 * (1.0 + nu)),
        lambda: nu * e / ((1.0 + nu) * (1.0 - 2.0 * nu)),
    })
}

/// Power `s` of the isotropic stiffness applied to a 2x2 tensor.
///
/// The deviatoric and spherical parts are eigenspaces with eigenvalues `2μ`
/// and `2μ + dλ`, so `C^s τ = (2μ)^s dev τ + (2μ + dλ)^s (tr τ / d) I`.
#[inline]
pub fn stiffness_pow(l: &Lame, s: f64, tau: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let (a, b) = (2.0 * l.mu, 2.0 * l.mu + DIM * l.lambda);
    let (fa, fb) = if s == 1.0 {
        (a, b)
    } else if s == -1.0 {
        (1.0 / a, 1.0 / b)
    } else {
        (a.powf(s), b.powf(s))
    };
    let m = 0.5 * (tau[0][0] + tau[1][1]);
    [
        [fa * (tau[0][0] - m) + fb * m, fa * tau[0][1]],
        [fa * tau[1][0], fa * (tau[1][1] - m) + fb * m],
    ]
}

/// Mini-square geometry: squares `[m/8 ± 1/16] x [n/8 ± 1/16]`, `m, n ∈ {1,3,5,7}`.
/// Square `i = 4 a + b` has centre `((2b+1)/8, (2a+1)/8)`.
pub const MINI_SQUARE_HALF: f64 = 1.0 / 16.0;

/// Index of the mini-square containing `x`, if any.
pub fn mini_square_index(x: [f64; 2]) -> Option<usize> {
    let locate = |t: f64| -> Option<usize> {
        // Squares occupy [k/8 - 1/16, k/8 + 1/16] for odd k, i.e. t*8 in [k - 1/2, k + 1/2].
        let s = t * 8.0;
        let k = s.round();
        let odd = (k as i64) % 2 == 1;
        if odd && (1.0..=7.0).contains(&k) && (s - k).abs() < 0.5 {
            Some(((k as usize) - 1) / 2)
        } else {
            None
        }
    };
    Some(4 * locate(x[1])? + locate(x[0])?)
}

/// How a sample's raw values map to the PDE coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FieldLaw {
    /// `p = 10^{μ_i}` on square `i`, 1 elsewhere.
    MiniSquare,
    /// `p = floor + exp(m)`.
    LogNormal { floor: f64 },
    /// Young's modulus `E = exp(m) + 1`.
    Young,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ParamKind {
    MiniSquare(Vec<f64>),
    /// CG1 nodal values of the underlying Gaussian field.
    NodalField(Vec<f64>),
}

/// One parameter instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSample {
    pub kind: ParamKind,
    pub law: FieldLaw,
    pub seed: u64,
}

impl ParamSample {
    /// Raw inputs for the neural map.
    pub fn feature_vector(&self) -> &[f64] {
        match &self.kind {
            ParamKind::MiniSquare(mu) => mu,
            ParamKind::NodalField(m) => m,
        }
    }

    /// Coefficient value at a point of `cell` with barycentric coordinates `bary`.
    #[inline]
    pub fn coefficient(&self, mesh: &Mesh, cell: usize, bary: [f64; 3], x: [f64; 2]) -> f64 {
        match (&self.kind, self.law) {
            (ParamKind::MiniSquare(mu), _) => match mini_square_index(x) {
                Some(i) => 10f64.powf(mu[i]),
                None => 1.0,
            },
            (ParamKind::NodalField(m), law) => {
                let [a, b, c] = mesh.cells[cell];
                let v = bary[0] * m[a] + bary[1] * m[b] + bary[2] * m[c];
                match law {
                    FieldLaw::LogNormal { floor } => floor + v.exp(),
                    FieldLaw::Young => v.exp() + 1.0,
                    FieldLaw::MiniSquare => v,
                }
            }
        }
    }

    /// Coefficient at a physical point (locates the cell).
    pub fn coefficient_at(&self, mesh: &Mesh, x: [f64; 2]) -> f64 {
        let cell = mesh.locate(x).expect("point inside the mesh");
        let xi = mesh.cell_geometry(cell).pullback(x);
        self.coefficient(mesh, cell, [1.0 - xi[0] - xi[1], xi[0], xi[1]], x)
    }
}

/// Seeded generator used for every random draw in the crate.
pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws `μ_i ~ U(-1, 1)` for the 16 squares.
pub fn sample_minisquares(seed: u64) -> ParamSample {
    let mut rng = rng_for(seed);
    let mu = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ParamSample {
        kind: ParamKind::MiniSquare(mu),
        law: FieldLaw::MiniSquare,
        seed,
    }
}

/// Covariance parameters of `(δ I - γ Δ)^{-α}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrfConfig {
    pub delta: f64,
    pub gamma: f64,
    pub alpha: f64,
    /// Optional boundary mass coefficient; 0 gives natural boundary conditions.
    #[serde(default)]
    pub robin: f64,
}

impl Default for GrfConfig {
    fn default() -> Self {
        GrfConfig {
            delta: 1.5,
            gamma: 0.15,
            alpha: 2.0,
            robin: 0.0,
        }
    }
}

/// Samples nodal Gaussian fields by solving `(δM + γK) m = L ξ`, `L = diag(√lumped M)`.
#[derive(Debug, Clone)]
pub struct GrfSampler {
    pub cfg: GrfConfig,
    operator: CsrMatrix,
    lumped_sqrt: Vec<f64>,
}

impl GrfSampler {
    pub fn new(cfg: GrfConfig, space: &FunctionSpace) -> Result<Self> {
        if !(cfg.delta > 0.0 && cfg.gamma > 0.0) {
            return Err(Error::invalid("GRF needs delta > 0 and gamma > 0"));
        }
        if cfg.alpha != 2.0 {
            return Err(Error::invalid(format!("only alpha = 2 is supported, got {}", cfg.alpha)));
        }
        if space.family != Family::Cg || space.degree != 1 || space.n_components() != 1 {
            return Err(Error::invalid("GRF sampling needs a scalar CG1 space"));
        }
        let rule: QuadratureRule = triangle_rule(2);
        let m = assemble_matrix(space, space, FormKind::Mass(Coef::Const(1.0)), &rule)?;
        let k = assemble_matrix(space, space, FormKind::Stiffness(Coef::Const(1.0)), &rule)?;
        let mut a = m.clone();
        a.values.iter_mut().for_each(|v| *v *= cfg.delta);
        let mut a = a.add_scaled(cfg.gamma, &k)?;
        if cfg.robin != 0.0 {
            let all = crate::mesh::BoundaryTag::ALL;
            let b = assemble_matrix(space, space, FormKind::BoundaryMass(&all), &rule)?;
            a = a.add_scaled(cfg.robin, &b)?;
        }
        let mut lumped = vec![0.0; m.n_rows];
        for (i, l) in lumped.iter_mut().enumerate() {
            *l = m.values[m.row_ptr[i]..m.row_ptr[i + 1]].iter().sum::<f64>().sqrt();
        }
        Ok(GrfSampler {
            cfg,
            operator: a,
            lumped_sqrt: lumped,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.lumped_sqrt.len()
    }

    /// Nodal values of one zero-mean field.
    pub fn sample_nodal(&self, seed: u64) -> Result<Vec<f64>> {
        let mut rng = rng_for(seed);
        let b: Vec<f64> = self
            .lumped_sqrt
            .iter()
            .map(|l| l * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let (m, _) = solve_spd_with(&self.operator, &b, CgOptions { tol: 1e-12, max_iter: None })?;
        Ok(m)
    }

    pub fn sample(&self, seed: u64, law: FieldLaw) -> Result<ParamSample> {
        Ok(ParamSample {
            kind: ParamKind::NodalField(self.sample_nodal(seed)?),
            law,
            seed,
        })
    }
}

/// One-shot form of [`GrfSampler`].
pub fn sample_grf(seed: u64, cfg: GrfConfig, space: &FunctionSpace, law: FieldLaw) -> Result<ParamSample> {
    GrfSampler::new(cfg, space)?.sample(seed, law)
}
