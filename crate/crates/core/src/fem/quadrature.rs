//! Quadrature on the reference triangle `{(0,0), (1,0), (0,1)}` and on `[0, 1]`.

/// Triangle rule with barycentric points; weights sum to the reference area 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Polynomials up to this total degree are integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Reference coordinates `(ξ, η)` of point `q`.
    pub fn xi(&self, q: usize) -> [f64; 2] {
        [self.points[q][1], self.points[q][2]]
    }
}

fn push_orbit3(rule: &mut QuadratureRule, a: f64, w: f64) {
    let b = 1.0 - 2.0 * a;
    for p in [[a, a, b], [a, b, a], [b, a, a]] {
        rule.points.push(p);
        rule.weights.push(0.5 * w);
    }
}

fn push_orbit6(rule: &mut QuadratureRule, a: f64, b: f64, w: f64) {
    let c = 1.0 - a - b;
    for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
        rule.points.push(p);
        rule.weights.push(0.5 * w);
    }
}

/// Symmetric (Dunavant) rules for degrees 1, 2, 4, 5, 6; collapsed Gauss rules otherwise.
pub fn triangle_rule(degree: usize) -> QuadratureRule {
    let mut rule = QuadratureRule {
        points: Vec::new(),
        weights: Vec::new(),
        degree,
    };
    match degree {
        0 | 1 => {
            rule.points.push([1.0 / 3.0; 3]);
            rule.weights.push(0.5);
            rule.degree = 1;
        }
        2 => push_orbit3(&mut rule, 1.0 / 6.0, 1.0 / 3.0),
        4 => {
            push_orbit3(&mut rule, 0.445948490915965, 0.223381589678011);
            push_orbit3(&mut rule, 0.091576213509771, 0.109951743655322);
        }
        5 => {
            rule.points.push([1.0 / 3.0; 3]);
            rule.weights.push(0.5 * 0.225);
            push_orbit3(&mut rule, 0.470142064105115, 0.132394152788506);
            push_orbit3(&mut rule, 0.101286507323456, 0.125939180544827);
        }
        6 => {
            push_orbit3(&mut rule, 0.249286745170910, 0.116786275726379);
            push_orbit3(&mut rule, 0.063089014491502, 0.050844906370207);
            push_orbit6(&mut rule, 0.310352451033785, 0.053145049844816, 0.082851075618374);
        }
        _ => return collapsed_rule(degree),
    }
    rule
}

/// Duffy-collapsed tensor Gauss rule exact to `degree`.
pub fn collapsed_rule(degree: usize) -> QuadratureRule {
    // The collapse adds one power of (1 - u), hence degree + 1 in u.
    let n = (degree + 2).div_ceil(2);
    let (gx, gw) = gauss_legendre(n);
    let mut rule = QuadratureRule {
        points: Vec::with_capacity(n * n),
        weights: Vec::with_capacity(n * n),
        degree,
    };
    for (u, wu) in gx.iter().zip(&gw) {
        for (v, wv) in gx.iter().zip(&gw) {
            let xi = *u;
            let eta = v * (1.0 - u);
            rule.points.push([1.0 - xi - eta, xi, eta]);
            rule.weights.push(wu * wv * (1.0 - u));
        }
    }
    rule
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one Gauss point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        // Chebyshev initial guess followed by Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let (pn, pnm1) = (p1, p0);
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[n - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Three-point Gauss rule on `[0, 1]` (exact to degree 5), used on edges.
pub fn edge_rule() -> (Vec<f64>, Vec<f64>) {
    gauss_legendre(3)
}
