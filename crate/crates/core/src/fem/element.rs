//! Reference shape functions on `{(0,0), (1,0), (0,1)}`.
//!
//! Local edge `i` joins local vertices `i+1` and `i+2` (mod 3), traversed
//! counterclockwise. Lagrange DOFs are ordered vertices first, then edge
//! midpoints. Raviart-Thomas DOFs are ordered by edge, then by Legendre moment
//! `j`, followed (for `k = 1`) by the two interior moments.

use std::sync::OnceLock;

use crate::linalg::{lu_solve, DenseMatrix};

use super::quadrature::{edge_rule, triangle_rule};

const BARY_GRAD: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

#[inline]
fn bary(xi: [f64; 2]) -> [f64; 3] {
    [1.0 - xi[0] - xi[1], xi[0], xi[1]]
}

/// Number of local Lagrange basis functions of degree `m`.
pub fn cg_local_dim(m: usize) -> usize {
    (m + 1) * (m + 2) / 2
}

/// Number of local Raviart-Thomas basis functions of order `k`.
pub fn rt_local_dim(k: usize) -> usize {
    (k + 1) * (k + 3)
}

/// Lagrange values and reference gradients at `xi`.
pub fn cg_reference(m: usize, xi: [f64; 2], val: &mut [f64], grad: &mut [[f64; 2]]) {
    let l = bary(xi);
    match m {
        1 => {
            val[..3].copy_from_slice(&l);
            grad[..3].copy_from_slice(&BARY_GRAD);
        }
        2 => {
            for i in 0..3 {
                val[i] = l[i] * (2.0 * l[i] - 1.0);
                let f = 4.0 * l[i] - 1.0;
                grad[i] = [f * BARY_GRAD[i][0], f * BARY_GRAD[i][1]];
                let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                val[3 + i] = 4.0 * l[j] * l[k];
                grad[3 + i] = [
                    4.0 * (l[j] * BARY_GRAD[k][0] + l[k] * BARY_GRAD[j][0]),
                    4.0 * (l[j] * BARY_GRAD[k][1] + l[k] * BARY_GRAD[j][1]),
                ];
            }
        }
        _ => panic!("unsupported Lagrange degree {m}"),
    }
}

/// Reference coordinates of the Lagrange nodes.
pub fn cg_nodes(m: usize) -> Vec<[f64; 2]> {
    let v = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let mut out = v.to_vec();
    if m == 2 {
        for i in 0..3 {
            let (a, b) = (v[(i + 1) % 3], v[(i + 2) % 3]);
            out.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
        }
    }
    out
}

/// Monomial spanning set of RT_k: values and divergences.
fn rt_span(k: usize, xi: [f64; 2], val: &mut [[f64; 2]], div: &mut [f64]) {
    let [x, y] = xi;
    match k {
        0 => {
            val[..3].copy_from_slice(&[[1.0, 0.0], [0.0, 1.0], [x, y]]);
            div[..3].copy_from_slice(&[0.0, 0.0, 2.0]);
        }
        1 => {
            val[..8].copy_from_slice(&[
                [1.0, 0.0],
                [x, 0.0],
                [y, 0.0],
                [0.0, 1.0],
                [0.0, x],
                [0.0, y],
                [x * x, x * y],
                [x * y, y * y],
            ]);
            div[..8].copy_from_slice(&[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 3.0 * x, 3.0 * y]);
        }
        _ => panic!("unsupported Raviart-Thomas order {k}"),
    }
}

/// Shifted Legendre polynomial of degree `j` on `[0, 1]`.
#[inline]
pub fn legendre01(j: usize, s: f64) -> f64 {
    match j {
        0 => 1.0,
        1 => 2.0 * s - 1.0,
        _ => panic!("edge moments above degree 1 are not supported"),
    }
}

/// Coefficients of the nodal RT basis in the monomial spanning set.
fn rt_coefficients(k: usize) -> &'static DenseMatrix {
    static RT0: OnceLock<DenseMatrix> = OnceLock::new();
    static RT1: OnceLock<DenseMatrix> = OnceLock::new();
    let cell = match k {
        0 => &RT0,
        1 => &RT1,
        _ => panic!("unsupported Raviart-Thomas order {k}"),
    };
    cell.get_or_init(|| {
        let n = rt_local_dim(k);
        let verts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let mut dofs = DenseMatrix::zeros(n, n);
        let mut val = vec![[0.0; 2]; n];
        let mut div = vec![0.0; n];
        let (gx, gw) = edge_rule();
        for i in 0..3 {
            let (a, b) = (verts[(i + 1) % 3], verts[(i + 2) % 3]);
            let t = [b[0] - a[0], b[1] - a[1]];
            // Outward normal scaled by the edge length, so ds needs no extra factor.
            let nl = [t[1], -t[0]];
            for j in 0..=k {
                let row = i * (k + 1) + j;
                for (s, w) in gx.iter().zip(&gw) {
                    let p = [a[0] + s * t[0], a[1] + s * t[1]];
                    rt_span(k, p, &mut val, &mut div);
                    let lj = legendre01(j, *s);
                    for b in 0..n {
                        dofs[(row, b)] += w * lj * (val[b][0] * nl[0] + val[b][1] * nl[1]);
                    }
                }
            }
        }
        if k == 1 {
            let rule = triangle_rule(4);
            for q in 0..rule.len() {
                rt_span(k, rule.xi(q), &mut val, &mut div);
                for b in 0..n {
                    dofs[(6, b)] += rule.weights[q] * val[b][0];
                    dofs[(7, b)] += rule.weights[q] * val[b][1];
                }
            }
        }
        let mut coef = DenseMatrix::zeros(n, n);
        for a in 0..n {
            let mut e = vec![0.0; n];
            e[a] = 1.0;
            let c = lu_solve(&dofs, &e).expect("RT degrees of freedom are unisolvent");
            for b in 0..n {
                coef[(a, b)] = c[b];
            }
        }
        coef
    })
}

/// Raviart-Thomas reference values and divergences at `xi`.
pub fn rt_reference(k: usize, xi: [f64; 2], val: &mut [[f64; 2]], div: &mut [f64]) {
    let n = rt_local_dim(k);
    let coef = rt_coefficients(k);
    let mut sv = [[0.0; 2]; 8];
    let mut sd = [0.0; 8];
    rt_span(k, xi, &mut sv, &mut sd);
    for a in 0..n {
        let (mut vx, mut vy, mut d) = (0.0, 0.0, 0.0);
        for b in 0..n {
            let c = coef[(a, b)];
            vx += c * sv[b][0];
            vy += c * sv[b][1];
            d += c * sd[b];
        }
        val[a] = [vx, vy];
        div[a] = d;
    }
}
