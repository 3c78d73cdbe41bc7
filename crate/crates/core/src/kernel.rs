//! Kernel maps `kappa(rho) = sum_k c_k^2 rho^k`, their fixed points and
//! contraction rates, and the residual / normalization transforms.
//!
//! A [`KernelMap`] built from a truncated expansion is rescaled so that its
//! coefficients sum to one, i.e. it is the exact kernel of the unit-energy
//! truncated activation. This keeps `kappa(1) = 1` and makes `rho = 1` a
//! genuine fixed point of the stored map.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::activations::Activation;
use crate::error::{Error, Result};
use crate::hermite::{expand, HermiteExpansion};
use crate::quadrature::GaussianQuadrature;

/// `kappa(0) <= TOL_ZERO` counts as a centered activation.
pub const TOL_ZERO: f64 = 1e-7;
/// Band around one for comparing `kappa'(1)` with one.
pub const TOL_ONE: f64 = 1e-3;
/// Energy above degree one below which a map counts as linear.
const TOL_LINEAR: f64 = 1e-10;
const SCAN_STEP: f64 = 1e-3;
const BISECTION_ITERS: usize = 200;
const BISECTION_WIDTH: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelMap {
    name: String,
    /// Normalization constant of the source activation, if any.
    scale: Option<f64>,
    squared_coeffs: Vec<f64>,
    /// `kappa'(1)` from an exact route (`E phi'(X)^2`) when available.
    dkappa1_exact: Option<f64>,
    tail_mass: f64,
}

impl KernelMap {
    /// Build from raw squared coefficients. The coefficients are used as
    /// given (no rescaling).
    pub fn from_squared_coeffs(
        name: impl Into<String>,
        squared_coeffs: Vec<f64>,
        dkappa1_exact: Option<f64>,
        tail_mass: f64,
    ) -> Result<Self> {
        let name = name.into();
        if squared_coeffs.is_empty() {
            return Err(Error::InvalidConfig("kernel map needs at least one coefficient".into()));
        }
        if let Some(bad) = squared_coeffs.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "squared coefficients must be finite and non-negative, got {bad}"
            )));
        }
        let non_constant: f64 = squared_coeffs[1..].iter().sum();
        if non_constant <= TOL_LINEAR {
            return Err(Error::DegenerateActivation(name));
        }
        Ok(Self {
            name,
            scale: None,
            squared_coeffs,
            dkappa1_exact,
            tail_mass,
        })
    }

    /// Kernel map of `act` from its expansion, with `kappa'(1)` also computed
    /// as `E phi'(X)^2` by quadrature.
    pub fn from_expansion(act: &Activation, expansion: &HermiteExpansion, quad: &GaussianQuadrature) -> Result<Self> {
        let mut squared: Vec<f64> = expansion.coeffs.iter().map(|c| c * c).collect();
        let total: f64 = squared.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::DegenerateActivation(act.name().to_string()));
        }
        squared.iter_mut().for_each(|c| *c /= total);
        let dkappa1 = quad.expect(
            |x| {
                let d = act.derivative(x);
                d * d
            },
            act.breakpoints(),
        );
        let mut km = Self::from_squared_coeffs(act.name(), squared, Some(dkappa1), expansion.tail_mass)?;
        km.scale = Some(act.scale());
        Ok(km)
    }

    /// Expand `act` to degree `truncation` and build its kernel map.
    pub fn for_activation(act: &Activation, truncation: usize, quad: &GaussianQuadrature) -> Result<Self> {
        let expansion = expand(act, truncation, quad);
        Self::from_expansion(act, &expansion, quad)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn scale(&self) -> Option<f64> {
        self.scale
    }

    pub fn squared_coeffs(&self) -> &[f64] {
        &self.squared_coeffs
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn kappa0(&self) -> f64 {
        self.squared_coeffs[0]
    }

    pub fn dkappa0(&self) -> f64 {
        self.squared_coeffs.get(1).copied().unwrap_or(0.0)
    }

    /// `sum_k k c_k^2`.
    pub fn dkappa1_series(&self) -> f64 {
        self.squared_coeffs.iter().enumerate().map(|(k, c)| k as f64 * c).sum()
    }

    /// `kappa'(1)` from the exact route, falling back to the series.
    pub fn dkappa1_quad(&self) -> f64 {
        self.dkappa1_exact.unwrap_or_else(|| self.dkappa1_series())
    }

    /// True when the series and exact `kappa'(1)` differ by more than [`TOL_ONE`].
    pub fn dkappa1_discrepancy(&self) -> bool {
        (self.dkappa1_series() - self.dkappa1_quad()).abs() > TOL_ONE
    }

    /// Energy carried by degrees `k >= 2`.
    pub fn nonlinear_energy(&self) -> f64 {
        self.squared_coeffs.iter().skip(2).sum()
    }

    pub fn is_linear(&self) -> bool {
        self.nonlinear_energy() <= TOL_LINEAR
    }

    /// Horner evaluation, clamped to `[-1, 1]` against rounding overshoot.
    pub fn eval(&self, rho: f64) -> f64 {
        let v = self.squared_coeffs.iter().rev().fold(0.0, |acc, c| acc * rho + c);
        v.clamp(-1.0, 1.0)
    }

    /// Term-wise derivative of the series of the given order.
    pub fn derivative_series(&self, rho: f64, order: usize) -> f64 {
        let mut acc = 0.0;
        for (k, c) in self.squared_coeffs.iter().enumerate().skip(order).rev() {
            let falling: f64 = (0..order).map(|j| (k - j) as f64).product();
            acc = acc * rho + c * falling;
        }
        acc
    }

    /// First or second derivative. At `rho = 1` the first derivative also
    /// carries the exact value `E phi'(X)^2`.
    pub fn derivative(&self, rho: f64, order: DerivativeOrder) -> KernelDerivative {
        let series = self.derivative_series(rho, order as usize);
        let exact = match order {
            DerivativeOrder::First if rho == 1.0 => self.dkappa1_exact,
            _ => None,
        };
        KernelDerivative { series, exact }
    }

    /// `kappa_res(rho) = (1 - r^2) kappa(rho) + r^2 rho`.
    pub fn residual(&self, r: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Domain(format!("residual strength {r} outside [0, 1]")));
        }
        let r2 = r * r;
        let mut squared: Vec<f64> = self.squared_coeffs.iter().map(|c| (1.0 - r2) * c).collect();
        if squared.len() < 2 {
            squared.resize(2, 0.0);
        }
        squared[1] += r2;
        Ok(Self {
            name: format!("{}+res({r})", self.name),
            scale: self.scale,
            squared_coeffs: squared,
            dkappa1_exact: self.dkappa1_exact.map(|d| (1.0 - r2) * d + r2),
            tail_mass: (1.0 - r2) * self.tail_mass,
        })
    }

    /// Joint normalization-and-activation kernel. Only LN after the
    /// activation changes the map: `(kappa - kappa(0)) / (1 - kappa(0))`.
    pub fn normalized(&self, mode: NormalizationMode) -> Result<Self> {
        let k0 = self.kappa0();
        if 1.0 - k0 <= TOL_LINEAR {
            return Err(Error::DegenerateActivation(self.name.clone()));
        }
        if mode != NormalizationMode::LnAfter {
            return Ok(self.clone());
        }
        let denom = 1.0 - k0;
        let mut squared: Vec<f64> = self.squared_coeffs.iter().map(|c| c / denom).collect();
        squared[0] = 0.0;
        Ok(Self {
            name: format!("{}+{}", self.name, mode),
            scale: self.scale,
            squared_coeffs: squared,
            dkappa1_exact: self.dkappa1_exact.map(|d| d / denom),
            tail_mass: self.tail_mass / denom,
        })
    }

    /// Apply an optional normalization and then an optional residual branch,
    /// in the order a layer applies them.
    pub fn transformed(&self, norm: Option<NormalizationMode>, residual: Option<f64>) -> Result<Self> {
        let mut km = match norm {
            Some(mode) => self.normalized(mode)?,
            None => self.clone(),
        };
        if let Some(r) = residual {
            km = km.residual(r)?;
        }
        Ok(km)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeOrder {
    First = 1,
    Second = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelDerivative {
    pub series: f64,
    pub exact: Option<f64>,
}

/// `E phi(X) phi(Y)` by two-dimensional quadrature, independent of the
/// Hermite series.
pub fn kernel_oracle(act: &Activation, rho: f64, quad: &GaussianQuadrature) -> Result<f64> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::Domain(format!("correlation {rho} outside [-1, 1]")));
    }
    let bp = act.breakpoints();
    Ok(quad.expect_pair(|x| act.eval(x), bp, |y| act.eval(y), bp, rho))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    LnBefore,
    RnBefore,
    LnAfter,
    RnAfter,
}

impl NormalizationMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            NormalizationMode::LnBefore => "ln_before",
            NormalizationMode::RnBefore => "rn_before",
            NormalizationMode::LnAfter => "ln_after",
            NormalizationMode::RnAfter => "rn_after",
        }
    }
}

impl fmt::Display for NormalizationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NormalizationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ln_before" => Ok(Self::LnBefore),
            "rn_before" => Ok(Self::RnBefore),
            "ln_after" => Ok(Self::LnAfter),
            "rn_after" => Ok(Self::RnAfter),
            _ => Err(Error::InvalidConfig(format!(
                "unknown normalization mode `{s}` (expected ln_before, rn_before, ln_after or rn_after)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceCase {
    /// Centered activation, `rho* = 0`.
    Case1,
    /// `kappa'(1) < 1`, exponential convergence to one.
    Case2,
    /// `kappa'(1) = 1`, polynomial convergence to one.
    Case3,
    /// `kappa'(1) > 1`, interior fixed point.
    Case4,
}

impl ConvergenceCase {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConvergenceCase::Case1 => "case1",
            ConvergenceCase::Case2 => "case2",
            ConvergenceCase::Case3 => "case3",
            ConvergenceCase::Case4 => "case4",
        }
    }

    pub fn is_polynomial(&self) -> bool {
        *self == ConvergenceCase::Case3
    }
}

impl fmt::Display for ConvergenceCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classification computed from the series `kappa'(1)` when it disagrees with
/// the exact value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlternativeClassification {
    pub dkappa1_series: f64,
    pub case: ConvergenceCase,
    pub rho_star: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointReport {
    pub name: String,
    pub scale: Option<f64>,
    pub rho_star: f64,
    pub case: ConvergenceCase,
    pub alpha: f64,
    pub kappa_at_star: f64,
    pub dkappa_at_star: f64,
    pub kappa0: f64,
    pub dkappa0: f64,
    pub dkappa1_series: f64,
    pub dkappa1_quad: f64,
    pub tail_mass: f64,
    /// `kappa(0) - TOL_ZERO`; positive means not centered.
    pub kappa0_margin: f64,
    /// `kappa'(1) - 1` on the exact route.
    pub dkappa1_margin: f64,
    pub alternative: Option<AlternativeClassification>,
}

fn classify(km: &KernelMap, dkappa1: f64) -> Result<(ConvergenceCase, f64, f64)> {
    let k0 = km.kappa0();
    let dk0 = km.dkappa0();
    if k0 <= TOL_ZERO {
        return Ok((ConvergenceCase::Case1, 0.0, 1.0 / (2.0 - dk0)));
    }
    if dkappa1 < 1.0 - TOL_ONE {
        return Ok((ConvergenceCase::Case2, 1.0, dkappa1));
    }
    if dkappa1 <= 1.0 + TOL_ONE {
        return Ok((ConvergenceCase::Case3, 1.0, 1.0 - k0 - dk0));
    }
    let rho_star = interior_fixed_point(km)?;
    let slope = km.derivative_series(rho_star, 1);
    let alpha = (1.0 - k0).max(slope).max((1.0 - rho_star) / (2.0 - slope));
    Ok((ConvergenceCase::Case4, rho_star, alpha))
}

/// Root of `kappa(rho) - rho` on `[0, 1 - TOL_ONE]`: a grid scan for the
/// first sign change, refined by bisection.
fn interior_fixed_point(km: &KernelMap) -> Result<f64> {
    let upper = 1.0 - TOL_ONE;
    let gap = |r: f64| km.eval(r) - r;
    let steps = (upper / SCAN_STEP).round() as usize;
    let mut lo = 0.0;
    let mut bracket = None;
    for i in 1..=steps {
        let hi = (i as f64 * SCAN_STEP).min(upper);
        if gap(hi) <= 0.0 {
            bracket = Some((lo, hi));
            break;
        }
        lo = hi;
    }
    let (mut lo, mut hi) = bracket.ok_or(Error::NoBracket { upper })?;
    for _ in 0..BISECTION_ITERS {
        if hi - lo < BISECTION_WIDTH {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Locate and classify the globally attracting fixed point.
pub fn find_fixed_point(km: &KernelMap) -> Result<FixedPointReport> {
    if km.is_linear() {
        return Err(Error::LinearActivation(km.name().to_string()));
    }
    let dkappa1_quad = km.dkappa1_quad();
    let dkappa1_series = km.dkappa1_series();
    let (case, rho_star, alpha) = classify(km, dkappa1_quad)?;
    let alternative = if km.dkappa1_discrepancy() {
        let (alt_case, alt_rho, alt_alpha) = classify(km, dkappa1_series)?;
        Some(AlternativeClassification {
            dkappa1_series,
            case: alt_case,
            rho_star: alt_rho,
            alpha: alt_alpha,
        })
    } else {
        None
    };
    Ok(FixedPointReport {
        name: km.name().to_string(),
        scale: km.scale(),
        rho_star,
        case,
        alpha,
        kappa_at_star: km.eval(rho_star),
        dkappa_at_star: km.derivative_series(rho_star, 1),
        kappa0: km.kappa0(),
        dkappa0: km.dkappa0(),
        dkappa1_series,
        dkappa1_quad,
        tail_mass: km.tail_mass(),
        kappa0_margin: km.kappa0() - TOL_ZERO,
        dkappa1_margin: dkappa1_quad - 1.0,
        alternative,
    })
}

/// The quantity a contraction bound controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundFunctional {
    /// `|rho| / (1 - |rho|)`.
    OddsToZero,
    /// `|rho - 1|`.
    DistanceToOne,
    /// `|rho - rho*|`.
    DistanceToFixedPoint,
}

impl BoundFunctional {
    pub fn for_case(case: ConvergenceCase) -> Self {
        match case {
            ConvergenceCase::Case1 => Self::OddsToZero,
            ConvergenceCase::Case2 | ConvergenceCase::Case3 => Self::DistanceToOne,
            ConvergenceCase::Case4 => Self::DistanceToFixedPoint,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::OddsToZero => "odds_to_zero",
            Self::DistanceToOne => "distance_to_one",
            Self::DistanceToFixedPoint => "distance_to_fixed_point",
        }
    }

    /// Value of the functional at `rho`.
    pub fn measure(&self, rho: f64, rho_star: f64) -> f64 {
        match self {
            Self::OddsToZero => rho.abs() / (1.0 - rho.abs()),
            Self::DistanceToOne => (rho - 1.0).abs(),
            Self::DistanceToFixedPoint => (rho - rho_star).abs(),
        }
    }

    /// Convert a bound on the functional into a bound on `|rho - rho*|`.
    pub fn distance_bound(&self, bound: f64) -> f64 {
        match self {
            Self::OddsToZero => bound / (1.0 + bound),
            Self::DistanceToOne | Self::DistanceToFixedPoint => bound,
        }
    }
}

impl fmt::Display for BoundFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bound {
    pub functional: BoundFunctional,
    pub value: f64,
}

/// Upper bound at depth `ell` on the case's distance functional, starting
/// from `rho0`.
pub fn contraction_bound(report: &FixedPointReport, rho0: f64, ell: usize) -> Result<Bound> {
    if rho0.is_nan() || rho0.abs() >= 1.0 {
        return Err(Error::Domain(format!("initial kernel {rho0} must satisfy |rho0| < 1")));
    }
    let functional = BoundFunctional::for_case(report.case);
    let alpha = report.alpha;
    let l = ell as f64;
    let value = match report.case {
        ConvergenceCase::Case1 => functional.measure(rho0, 0.0) * alpha.powf(l),
        ConvergenceCase::Case2 => (rho0 - 1.0).abs() * alpha.powf(l),
        ConvergenceCase::Case3 => {
            let d0 = (rho0 - 1.0).abs();
            d0 / (l * alpha * d0 + 1.0)
        }
        ConvergenceCase::Case4 => (rho0 - report.rho_star).abs() / (1.0 - rho0.abs()) * alpha.powf(l),
    };
    Ok(Bound { functional, value })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DepthThreshold {
    Depth { layers: u64 },
    NotApplicable { case: ConvergenceCase },
}

/// `ceil(ln(1/eps) / ln(1/rate))`.
pub fn depth_threshold_for_rate(rate: f64, epsilon: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("precision {epsilon} outside (0, 1)")));
    }
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::Domain(format!("rate {rate} outside (0, 1)")));
    }
    Ok(((1.0 / epsilon).ln() / (1.0 / rate).ln()).ceil() as u64)
}

/// Depth after which two inputs become indistinguishable at precision
/// `epsilon`; defined only for the exponential-to-one case.
pub fn depth_threshold(report: &FixedPointReport, epsilon: f64) -> Result<DepthThreshold> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("precision {epsilon} outside (0, 1)")));
    }
    match report.case {
        ConvergenceCase::Case2 => Ok(DepthThreshold::Depth {
            layers: depth_threshold_for_rate(report.dkappa1_quad, epsilon)?,
        }),
        case => Ok(DepthThreshold::NotApplicable { case }),
    }
}
