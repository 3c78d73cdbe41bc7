//! Normalized (probabilists') Hermite polynomials `he_k = He_k / sqrt(k!)`,
//! Hermite expansions of activations, and a quadrature oracle for
//! `E he_m(X) he_n(Y)` over correlated standard-normal pairs.

use serde::Serialize;

use crate::activations::Activation;
use crate::quadrature::GaussianQuadrature;

pub const DEFAULT_TRUNCATION: usize = 60;
/// Tail mass above which an expansion is flagged as under-resolved.
pub const TAIL_WARNING: f64 = 1e-3;

/// `he_k(x)` by the three-term recurrence
/// `he_{k+1} = (x he_k - sqrt(k) he_{k-1}) / sqrt(k + 1)`.
pub fn he_eval(k: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if k == 0 {
        return prev;
    }
    let mut cur = x;
    for j in 1..k {
        let jf = j as f64;
        let next = (x * cur - jf.sqrt() * prev) / (jf + 1.0).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// Fill `out[k] = he_k(x)` for `k < out.len()`.
pub fn he_all(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() == 1 {
        return;
    }
    out[1] = x;
    for j in 1..out.len() - 1 {
        let jf = j as f64;
        out[j + 1] = (x * out[j] - jf.sqrt() * out[j - 1]) / (jf + 1.0).sqrt();
    }
}

/// Truncated Hermite expansion `c_0..c_K` of a unit-energy activation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HermiteExpansion {
    pub name: String,
    pub coeffs: Vec<f64>,
    /// `1 - sum_{k <= K} c_k^2`.
    pub tail_mass: f64,
    /// Set when `tail_mass` exceeds [`TAIL_WARNING`].
    pub tail_warning: bool,
}

impl HermiteExpansion {
    pub fn truncation(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// Rows `(k, c_k, c_k^2, cumulative energy)`.
    pub fn rows(&self) -> impl Iterator<Item = (usize, f64, f64, f64)> + '_ {
        let mut cumulative = 0.0;
        self.coeffs.iter().enumerate().map(move |(k, &c)| {
            cumulative += c * c;
            (k, c, c * c, cumulative)
        })
    }
}

/// `c_k = E[phi(X) he_k(X)]` for `k = 0..=truncation`.
pub fn expand(act: &Activation, truncation: usize, quad: &GaussianQuadrature) -> HermiteExpansion {
    let nodes = quad.nodes(act.breakpoints());
    let mut coeffs = vec![0.0; truncation + 1];
    let mut he = vec![0.0; truncation + 1];
    for (x, w) in nodes.iter() {
        let fx = act.eval(x);
        if fx == 0.0 {
            continue;
        }
        he_all(x, &mut he);
        let wf = w * fx;
        for (c, h) in coeffs.iter_mut().zip(&he) {
            *c += wf * h;
        }
    }
    let tail_mass = 1.0 - coeffs.iter().map(|c| c * c).sum::<f64>();
    HermiteExpansion {
        name: act.name().to_string(),
        coeffs,
        tail_mass,
        tail_warning: tail_mass > TAIL_WARNING,
    }
}

/// `E[he_m(X) he_n(Y)]` for a standard-normal pair with correlation `rho`,
/// integrated over `X` and an independent `Z` with
/// `Y = rho X + sqrt(1 - rho^2) Z`.
pub fn mehler_product(m: usize, n: usize, rho: f64, quad: &GaussianQuadrature) -> f64 {
    quad.expect_pair(|x| he_eval(m, x), &[], |y| he_eval(n, y), &[], rho)
}

/// All `E[he_m(X) he_n(Y)]` for `m, n <= max_degree` in one tensor sweep.
pub fn mehler_table(max_degree: usize, rho: f64, quad: &GaussianQuadrature) -> Vec<Vec<f64>> {
    let rho = rho.clamp(-1.0, 1.0);
    let s = (1.0 - rho * rho).max(0.0).sqrt();
    let size = max_degree + 1;
    let nodes = quad.nodes(&[]);
    let mut table = vec![vec![0.0; size]; size];
    let mut hx = vec![0.0; size];
    let mut hy = vec![0.0; size];
    let mut inner = vec![0.0; size];
    for (x, wx) in nodes.iter() {
        he_all(x, &mut hx);
        if s == 0.0 {
            he_all(rho * x, &mut hy);
            inner.copy_from_slice(&hy);
        } else {
            inner.iter_mut().for_each(|v| *v = 0.0);
            for (z, wz) in nodes.iter() {
                he_all(rho * x + s * z, &mut hy);
                for (acc, h) in inner.iter_mut().zip(&hy) {
                    *acc += wz * h;
                }
            }
        }
        for (row, &a) in table.iter_mut().zip(&hx) {
            for (cell, &b) in row.iter_mut().zip(&inner) {
                *cell += wx * a * b;
            }
        }
    }
    table
}
