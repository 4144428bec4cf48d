//! Benchmark configurations: domains, boundary data, sources and parameter laws.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{build_space, prolongate, CellBasis, ElementTable, Family, FeFunction, FunctionSpace, ValueShape};
use crate::fields::{lame_from_young, mini_square_index, sample_minisquares, FieldLaw, GrfConfig, GrfSampler, Lame, ParamKind, ParamSample};
use crate::lifts::{unconstrained_twin, BoundaryFn, LiftData};
use crate::mesh::{build_rect_mesh, BoundaryTag, Mesh};

use super::discretization::Discretization;

/// Values stored per quadrature point; diffusion uses the first 7.
pub(crate) const DATA_STRIDE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    HeatConduction,
    Darcy,
    Elasticity,
    ManufacturedDiffusion,
    ManufacturedElasticity,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 5] = [
        ProblemKind::HeatConduction,
        ProblemKind::Darcy,
        ProblemKind::Elasticity,
        ProblemKind::ManufacturedDiffusion,
        ProblemKind::ManufacturedElasticity,
    ];

    pub fn is_elasticity(self) -> bool {
        matches!(self, ProblemKind::Elasticity | ProblemKind::ManufacturedElasticity)
    }

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::HeatConduction => "heat_conduction",
            ProblemKind::Darcy => "darcy",
            ProblemKind::Elasticity => "elasticity",
            ProblemKind::ManufacturedDiffusion => "manufactured_diffusion",
            ProblemKind::ManufacturedElasticity => "manufactured_elasticity",
        }
    }

    /// Rectangle `[x0, y0, x1, y1]`.
    pub fn domain(self) -> [f64; 4] {
        if self == ProblemKind::Elasticity {
            [0.0, 0.0, 2.0, 1.0]
        } else {
            [0.0, 0.0, 1.0, 1.0]
        }
    }

    pub fn dirichlet_tags(self) -> Vec<BoundaryTag> {
        use BoundaryTag::*;
        match self {
            ProblemKind::HeatConduction | ProblemKind::Darcy => vec![Left, Right],
            ProblemKind::Elasticity => vec![Left],
            ProblemKind::ManufacturedDiffusion | ProblemKind::ManufacturedElasticity => BoundaryTag::ALL.to_vec(),
        }
    }

    pub fn neumann_tags(self) -> Vec<BoundaryTag> {
        let d = self.dirichlet_tags();
        BoundaryTag::ALL.into_iter().filter(|t| !d.contains(t)).collect()
    }

    /// Pointwise coefficient law of this problem's parameter samples.
    pub fn law(self) -> FieldLaw {
        match self {
            ProblemKind::HeatConduction => FieldLaw::MiniSquare,
            ProblemKind::Darcy => FieldLaw::LogNormal { floor: 0.01 },
            ProblemKind::ManufacturedDiffusion => FieldLaw::LogNormal { floor: 0.0 },
            ProblemKind::Elasticity | ProblemKind::ManufacturedElasticity => FieldLaw::Young,
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown problem '{s}'")))
    }
}

fn default_nu() -> f64 {
    0.4
}

/// Mesh and element choice for one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    pub nx: usize,
    pub ny: usize,
    /// RT degree.
    pub k: usize,
    /// CG degree; `k + 1` when absent.
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub grf: GrfConfig,
    #[serde(default = "default_nu")]
    pub nu: f64,
}

impl ProblemConfig {
    /// Square cells of size `1/n` on the problem's domain.
    pub fn new(kind: ProblemKind, n: usize, k: usize) -> Self {
        let [x0, _, x1, _] = kind.domain();
        ProblemConfig {
            kind,
            nx: n * (x1 - x0).round() as usize,
            ny: n,
            k,
            m: None,
            grf: GrfConfig::default(),
            nu: default_nu(),
        }
    }

    pub fn m(&self) -> usize {
        self.m.unwrap_or(self.k + 1)
    }

    /// Same configuration on the uniformly refined mesh.
    pub fn refined(&self) -> Self {
        ProblemConfig {
            nx: 2 * self.nx,
            ny: 2 * self.ny,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::invalid("mesh counts must be positive"));
        }
        if self.k > 1 || !(1..=2).contains(&self.m()) {
            return Err(Error::invalid(format!("unsupported pair RT{} x CG{}", self.k, self.m())));
        }
        if self.kind == ProblemKind::HeatConduction && (self.nx % 16 != 0 || self.ny % 16 != 0) {
            return Err(Error::invalid("heat conduction needs nx, ny divisible by 16"));
        }
        if self.kind.is_elasticity() {
            lame_from_young(1.0, self.nu)?;
        }
        if !(self.grf.delta > 0.0 && self.grf.gamma > 0.0) || self.grf.alpha != 2.0 {
            return Err(Error::invalid("GRF needs delta, gamma > 0 and alpha = 2"));
        }
        Ok(())
    }
}

/// Mean-parameter Young's modulus used by the elasticity X_h norm.
pub const MEAN_YOUNG: f64 = 2.0;

/// Exact solution of the manufactured problems: `(u, grad u)` per component.
pub fn manufactured_solution(x: [f64; 2]) -> (f64, [f64; 2]) {
    let (sx, cx) = (PI * x[0]).sin_cos();
    let (sy, cy) = (PI * x[1]).sin_cos();
    (sx * sy, [PI * cx * sy, PI * sx * cy])
}

fn heat_dirichlet(x: [f64; 2], v: &mut [f64]) {
    v[0] = 0.1 * (1.0 - x[0]) * (4.0 * PI * x[1]).sin();
}

fn heat_neumann(x: [f64; 2], v: &mut [f64]) {
    v[0] = 0.1 * (1.0 - x[1]) * (2.0 * PI * x[0]).cos();
}

fn darcy_dirichlet(x: [f64; 2], v: &mut [f64]) {
    v[0] = 1.0 - x[0];
}

fn elasticity_traction(x: [f64; 2], v: &mut [f64]) {
    if x[0] > 2.0 - 1e-9 {
        v[0] = 0.6 * (-(x[1] - 0.5).powi(2) / 4.0).exp();
        v[1] = 0.3 * (1.0 + x[1] / 10.0);
    } else {
        v[0] = 0.0;
        v[1] = 0.0;
    }
}

fn darcy_source(x: [f64; 2]) -> f64 {
    let w = 1.0 / 32.0;
    let mut f = 0.0;
    for m in 1..=3 {
        for n in 1..=3 {
            let d2 = (x[0] - m as f64 / 4.0).powi(2) + (x[1] - n as f64 / 4.0).powi(2);
            f += 100.0 * (-d2 / (w * w)).exp();
        }
    }
    f
}

/// Source pair at `x`: `(f1, f2)` for diffusion, `(f, unused)` for elasticity.
fn source(kind: ProblemKind, nu: f64, x: [f64; 2]) -> ([f64; 2], f64) {
    match kind {
        ProblemKind::HeatConduction => {
            let f1 = if mini_square_index(x).is_some() { [0.5, -0.5] } else { [0.0, 0.0] };
            (f1, 1.0)
        }
        ProblemKind::Darcy => ([0.0, 0.0], darcy_source(x)),
        ProblemKind::Elasticity => ([0.0, 0.0], 0.0),
        ProblemKind::ManufacturedDiffusion => ([0.0, 0.0], 2.0 * PI * PI * manufactured_solution(x).0),
        ProblemKind::ManufacturedElasticity => {
            let l = lame_from_young(MEAN_YOUNG, nu).expect("validated Poisson ratio");
            let phi = manufactured_solution(x).0;
            let cc = (PI * x[0]).cos() * (PI * x[1]).cos();
            let p2 = PI * PI;
            let f = [
                2.0 * p2 * l.mu * phi - (l.mu + l.lambda) * (-p2 * phi + p2 * cc),
                2.0 * p2 * l.mu * phi - (l.mu + l.lambda) * (p2 * cc - p2 * phi),
            ];
            (f, 0.0)
        }
    }
}

/// A fully set up problem: mesh, spaces, lifts, samplers and the
/// parameter-independent data at every quadrature point.
#[derive(Debug)]
pub struct Problem {
    pub config: ProblemConfig,
    pub mesh: Arc<Mesh>,
    pub disc: Discretization,
    pub lifts: LiftData,
    /// Unconstrained scalar CG1 space carrying nodal parameter fields.
    pub param_space: Arc<FunctionSpace>,
    sampler: Option<GrfSampler>,
    data: Vec<f64>,
}

impl Problem {
    pub fn new(config: ProblemConfig) -> Result<Self> {
        Self::build(config, None)
    }

    /// Same problem on the refined mesh, reusing this problem's lifts so that
    /// both levels discretize identical data.
    pub fn reference(&self) -> Result<Self> {
        Self::build(self.config.refined(), Some(&self.lifts))
    }

    fn build(config: ProblemConfig, lifts: Option<&LiftData>) -> Result<Self> {
        config.validate()?;
        let kind = config.kind;
        let [x0, y0, x1, y1] = kind.domain();
        let mesh = Arc::new(build_rect_mesh(x0, y0, x1, y1, config.nx, config.ny)?);
        let (rt_shape, cg_shape) = if kind.is_elasticity() {
            (ValueShape::Tensor, ValueShape::Vector)
        } else {
            (ValueShape::Scalar, ValueShape::Scalar)
        };
        let sigma = Arc::new(build_space(mesh.clone(), Family::Rt, config.k, rt_shape, &kind.neumann_tags())?);
        let u = Arc::new(build_space(mesh.clone(), Family::Cg, config.m(), cg_shape, &kind.dirichlet_tags())?);
        let lifts = match lifts {
            Some(l) => LiftData {
                w: prolongate(&l.w, &unconstrained_twin(&u)?)?,
                q: prolongate(&l.q, &u)?,
            },
            None => {
                let (u0, g): (Option<BoundaryFn>, Option<BoundaryFn>) = match kind {
                    ProblemKind::HeatConduction => (Some(&heat_dirichlet), Some(&heat_neumann)),
                    ProblemKind::Darcy => (Some(&darcy_dirichlet), None),
                    ProblemKind::Elasticity => (None, Some(&elasticity_traction)),
                    _ => (None, None),
                };
                LiftData::compute(&u, u0, g, &kind.neumann_tags())?
            }
        };
        let param_space = Arc::new(build_space(mesh.clone(), Family::Cg, 1, ValueShape::Scalar, &[])?);
        let sampler = match kind {
            ProblemKind::Darcy | ProblemKind::Elasticity => Some(GrfSampler::new(config.grf, &param_space)?),
            _ => None,
        };
        let disc = Discretization::new(sigma, u)?;
        let data = precompute(&config, &disc, &lifts);
        Ok(Problem {
            config,
            mesh,
            disc,
            lifts,
            param_space,
            sampler,
            data,
        })
    }

    pub fn kind(&self) -> ProblemKind {
        self.config.kind
    }

    /// Parameter sample for `seed` under this problem's law.
    pub fn sample(&self, seed: u64) -> Result<ParamSample> {
        let law = self.kind().law();
        match self.kind() {
            ProblemKind::HeatConduction => Ok(sample_minisquares(seed)),
            ProblemKind::Darcy | ProblemKind::Elasticity => {
                self.sampler.as_ref().expect("sampler built for random-field problems").sample(seed, law)
            }
            ProblemKind::ManufacturedDiffusion | ProblemKind::ManufacturedElasticity => Ok(ParamSample {
                kind: ParamKind::NodalField(vec![0.0; self.mesh.n_vertices()]),
                law,
                seed,
            }),
        }
    }

    /// Transfers a sample drawn on `coarse` to this (refined) problem. Nodal
    /// fields are prolongated, which leaves the coefficient field unchanged.
    pub fn transfer_sample(&self, sample: &ParamSample, coarse: &Problem) -> Result<ParamSample> {
        match &sample.kind {
            ParamKind::MiniSquare(_) => Ok(sample.clone()),
            ParamKind::NodalField(m) => {
                if m.len() == self.mesh.n_vertices() {
                    return Ok(sample.clone());
                }
                let f = FeFunction::new(coarse.param_space.clone(), m.clone())?;
                let fine = prolongate(&f, &self.param_space)?;
                Ok(ParamSample {
                    kind: ParamKind::NodalField(fine.coefficients),
                    law: sample.law,
                    seed: sample.seed,
                })
            }
        }
    }

    /// Lamé parameters at a quadrature point.
    #[inline]
    pub(crate) fn lame(&self, e: f64) -> Lame {
        let nu = self.config.nu;
        Lame {
            mu: e / (2.0 * (1.0 + nu)),
            lambda: nu * e / ((1.0 + nu) * (1.0 - 2.0 * nu)),
        }
    }

    #[inline]
    pub(crate) fn point_data(&self, cell: usize, q: usize) -> &[f64] {
        let k = (cell * self.disc.rule.len() + q) * DATA_STRIDE;
        &self.data[k..k + DATA_STRIDE]
    }

    /// Source `(f1, f2)` (diffusion) or `(f, 0)` (elasticity) at `x`.
    pub fn source_at(&self, x: [f64; 2]) -> ([f64; 2], f64) {
        source(self.kind(), self.config.nu, x)
    }
}

/// Lift gradients, flux lift and sources at every quadrature point.
fn precompute(config: &ProblemConfig, disc: &Discretization, lifts: &LiftData) -> Vec<f64> {
    let mesh = &disc.u.mesh;
    let nq = disc.rule.len();
    let mut out = vec![0.0; mesh.n_cells() * nq * DATA_STRIDE];
    let table = ElementTable::for_space(&disc.u, &disc.rule);
    let mut cb = CellBasis::new(&table);
    for cell in 0..mesh.n_cells() {
        cb.fill(&table, &mesh.cell_geometry(cell), disc.u.cell_signs(cell));
        for q in 0..nq {
            let d = &mut out[(cell * nq + q) * DATA_STRIDE..(cell * nq + q + 1) * DATA_STRIDE];
            let gw = lifts.w.eval_basis(cell, &cb, q).grad;
            let gq = lifts.q.eval_basis(cell, &cb, q).grad;
            let (f1, f2) = source(config.kind, config.nu, cb.points[q]);
            if config.kind.is_elasticity() {
                // eps(w), grad q, f
                let e01 = 0.5 * (gw[0][1] + gw[1][0]);
                d[..4].copy_from_slice(&[gw[0][0], e01, e01, gw[1][1]]);
                d[4..8].copy_from_slice(&[gq[0][0], gq[0][1], gq[1][0], gq[1][1]]);
                d[8..10].copy_from_slice(&f1);
            } else {
                d[..2].copy_from_slice(&gw[0]);
                d[2..4].copy_from_slice(&gq[0]);
                d[4..6].copy_from_slice(&f1);
                d[6] = f2;
            }
        }
    }
    out
}
