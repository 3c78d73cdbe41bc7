//! Composite Gauss-Legendre rules for expectations under the standard normal
//! measure.
//!
//! The real line is truncated to `[-half_width, half_width]` (the density is
//! below 1e-31 beyond 12), cut into panels of `panel_width`, and every panel
//! is further split at the caller's breakpoints so that kinks of the
//! integrand always fall on panel edges. Each panel carries the same
//! `nodes_per_panel`-point Gauss-Legendre rule; the returned weights already
//! include the Gaussian density.

use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_HALF_WIDTH: f64 = 12.0;
pub const DEFAULT_NODES_PER_PANEL: usize = 64;
pub const DEFAULT_PANEL_WIDTH: f64 = 2.0;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// Panel edges closer than this are merged.
const EDGE_MERGE_TOL: f64 = 1e-12;

pub fn standard_normal_density(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Nodes and density-weighted weights of a concrete rule.
#[derive(Debug, Clone, Default)]
pub struct Nodes {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Nodes {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GaussianQuadrature {
    half_width: f64,
    panel_width: f64,
    nodes_per_panel: usize,
    #[serde(skip)]
    reference: Nodes,
}

impl Default for GaussianQuadrature {
    fn default() -> Self {
        Self::new(DEFAULT_HALF_WIDTH, DEFAULT_PANEL_WIDTH, DEFAULT_NODES_PER_PANEL)
            .expect("default quadrature parameters are valid")
    }
}

impl GaussianQuadrature {
    pub fn new(half_width: f64, panel_width: f64, nodes_per_panel: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "half width {half_width} must be positive"
            )));
        }
        if !(panel_width > 0.0 && panel_width.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "panel width {panel_width} must be positive"
            )));
        }
        if nodes_per_panel < 2 {
            return Err(Error::InvalidConfig("need at least two nodes per panel".into()));
        }
        Ok(Self {
            half_width,
            panel_width,
            nodes_per_panel,
            reference: gauss_legendre(nodes_per_panel),
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn nodes_per_panel(&self) -> usize {
        self.nodes_per_panel
    }

    /// Panel edges over the truncated line, split at `breakpoints`.
    pub fn panel_edges(&self, breakpoints: &[f64]) -> Vec<f64> {
        let hw = self.half_width;
        let panels = (2.0 * hw / self.panel_width).ceil().max(1.0) as usize;
        let step = 2.0 * hw / panels as f64;
        let mut edges: Vec<f64> = (0..=panels).map(|i| -hw + step * i as f64).collect();
        edges.extend(breakpoints.iter().copied().filter(|b| b.is_finite() && b.abs() < hw));
        edges.sort_by(f64::total_cmp);
        edges.dedup_by(|a, b| (*a - *b).abs() < EDGE_MERGE_TOL);
        edges
    }

    /// Nodes whose weights integrate against the standard-normal density.
    pub fn nodes(&self, breakpoints: &[f64]) -> Nodes {
        let edges = self.panel_edges(breakpoints);
        let n = self.nodes_per_panel * (edges.len() - 1);
        let mut out = Nodes {
            points: Vec::with_capacity(n),
            weights: Vec::with_capacity(n),
        };
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            for (t, w) in self.reference.iter() {
                let x = mid + half * t;
                out.points.push(x);
                out.weights.push(w * half * standard_normal_density(x));
            }
        }
        out
    }

    /// `E f(X)` for `X ~ N(0, 1)`.
    pub fn expect<F: FnMut(f64) -> f64>(&self, f: F, breakpoints: &[f64]) -> f64 {
        self.nodes(breakpoints).integrate(f)
    }

    /// `E f(X) g(Y)` for a standard bivariate normal pair with correlation
    /// `rho`, written as `Y = rho X + sqrt(1 - rho^2) Z` with `Z` independent.
    ///
    /// The inner integral over `Z` is split wherever `Y` crosses one of
    /// `g_breaks`, so kinked integrands keep full accuracy.
    pub fn expect_pair<F, G>(&self, f: F, f_breaks: &[f64], g: G, g_breaks: &[f64], rho: f64) -> f64
    where
        F: Fn(f64) -> f64,
        G: Fn(f64) -> f64,
    {
        let rho = rho.clamp(-1.0, 1.0);
        let s = (1.0 - rho * rho).max(0.0).sqrt();
        let outer = self.nodes(f_breaks);
        if s == 0.0 {
            return outer.integrate(|x| f(x) * g(rho * x));
        }
        if g_breaks.is_empty() {
            let inner = self.nodes(&[]);
            return outer.integrate(|x| {
                let fx = f(x);
                if fx == 0.0 {
                    return 0.0;
                }
                fx * inner.integrate(|z| g(rho * x + s * z))
            });
        }
        let mut mapped = vec![0.0; g_breaks.len()];
        outer.integrate(|x| {
            let fx = f(x);
            if fx == 0.0 {
                return 0.0;
            }
            for (m, b) in mapped.iter_mut().zip(g_breaks) {
                *m = (b - rho * x) / s;
            }
            fx * self.nodes(&mapped).integrate(|z| g(rho * x + s * z))
        })
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> Nodes {
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        points[i] = -x;
        points[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Nodes { points, weights }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        let rule = gauss_legendre(64);
        assert!((rule.weights.iter().sum::<f64>() - 2.0).abs() < 1e-13);
        assert!(rule.points.windows(2).all(|w| w[0] < w[1]));
        // int_{-1}^{1} x^126 dx = 2 / 127
        assert!((rule.integrate(|x| x.powi(126)) - 2.0 / 127.0).abs() < 1e-13);
        let odd = gauss_legendre(5);
        assert!(odd.points[2].abs() < 1e-15);
    }

    #[test]
    fn gaussian_moments() {
        let q = GaussianQuadrature::default();
        assert!((q.expect(|_| 1.0, &[]) - 1.0).abs() < 1e-14);
        assert!(q.expect(|x| x, &[]).abs() < 1e-14);
        assert!((q.expect(|x| x * x, &[]) - 1.0).abs() < 1e-13);
        assert!((q.expect(|x| x.powi(4), &[]) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn kinked_integrand_uses_breakpoint() {
        let q = GaussianQuadrature::default();
        // E max(X - 0.3, 0) = pdf(0.3) - 0.3 * (1 - Phi(0.3))
        let exact = standard_normal_density(0.3) - 0.3 * 0.382_088_577_811_047_1;
        let got = q.expect(|x| (x - 0.3).max(0.0), &[0.3]);
        assert!((got - exact).abs() < 1e-13, "{got} vs {exact}");
    }

    #[test]
    fn edges_are_sorted_and_deduplicated() {
        let q = GaussianQuadrature::default();
        let e = q.panel_edges(&[0.0, 0.0, 1.5, 40.0]);
        assert!(e.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(e.first(), Some(&-12.0));
        assert_eq!(e.last(), Some(&12.0));
        assert!(e.contains(&1.5));
    }

    #[test]
    fn pair_expectation_of_product_is_correlation() {
        let q = GaussianQuadrature::default();
        for rho in [-1.0, -0.4, 0.0, 0.8, 1.0] {
            let got = q.expect_pair(|x| x, &[], |y| y, &[], rho);
            assert!((got - rho).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(GaussianQuadrature::new(0.0, 1.0, 8).is_err());
        assert!(GaussianQuadrature::new(12.0, -1.0, 8).is_err());
        assert!(GaussianQuadrature::new(12.0, 1.0, 1).is_err());
    }
}
