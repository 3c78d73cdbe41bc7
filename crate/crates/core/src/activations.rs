//! Activation catalog.
//!
//! Every catalog entry is stored together with its energy-normalization
//! constant `C = sqrt(E f(X)^2)`, so that [`Activation::eval`] returns the
//! unit-energy activation `f(x) / C`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermite::he_eval;
use crate::quadrature::{standard_normal_density, GaussianQuadrature};

/// Self-normalizing constants.
pub const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_3;
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

/// Relative size of the boundary integrand that marks `f` as not
/// square-integrable on the truncated line.
const TAIL_REJECT_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActivationKind {
    Identity,
    Relu,
    LeakyRelu { slope: f64 },
    Tanh,
    Sigmoid,
    Exp,
    Gelu,
    Elu { alpha: f64 },
    Celu { alpha: f64 },
    Selu,
    Hermite { degree: usize },
}

impl ActivationKind {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            ActivationKind::Identity => x,
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::LeakyRelu { slope } => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Sigmoid => sigmoid(x),
            ActivationKind::Exp => x.exp(),
            ActivationKind::Gelu => x * normal_cdf(x),
            ActivationKind::Elu { alpha } => {
                if x > 0.0 {
                    x
                } else {
                    alpha * x.exp_m1()
                }
            }
            ActivationKind::Celu { alpha } => x.max(0.0) + (alpha * (x / alpha).exp_m1()).min(0.0),
            ActivationKind::Selu => {
                if x > 0.0 {
                    SELU_LAMBDA * x
                } else {
                    SELU_LAMBDA * SELU_ALPHA * x.exp_m1()
                }
            }
            ActivationKind::Hermite { degree } => he_eval(degree, x),
        }
    }

    /// Derivative; at a breakpoint the right derivative is returned.
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            ActivationKind::Identity => 1.0,
            ActivationKind::Relu => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::LeakyRelu { slope } => {
                if x >= 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            ActivationKind::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            ActivationKind::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            ActivationKind::Exp => x.exp(),
            ActivationKind::Gelu => normal_cdf(x) + x * standard_normal_density(x),
            ActivationKind::Elu { alpha } => {
                if x >= 0.0 {
                    1.0
                } else {
                    alpha * x.exp()
                }
            }
            ActivationKind::Celu { alpha } => {
                if x >= 0.0 {
                    1.0
                } else {
                    (x / alpha).exp()
                }
            }
            ActivationKind::Selu => {
                if x >= 0.0 {
                    SELU_LAMBDA
                } else {
                    SELU_LAMBDA * SELU_ALPHA * x.exp()
                }
            }
            ActivationKind::Hermite { degree } => {
                if degree == 0 {
                    0.0
                } else {
                    (degree as f64).sqrt() * he_eval(degree - 1, x)
                }
            }
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            ActivationKind::Relu
            | ActivationKind::LeakyRelu { .. }
            | ActivationKind::Elu { .. }
            | ActivationKind::Celu { .. }
            | ActivationKind::Selu => vec![0.0],
            _ => Vec::new(),
        }
    }

    /// Canonical CLI name, e.g. `leaky_relu:0.2` or `hermite:3`.
    pub fn name(&self) -> String {
        match *self {
            ActivationKind::Identity => "identity".into(),
            ActivationKind::Relu => "relu".into(),
            ActivationKind::LeakyRelu { slope } if slope == DEFAULT_LEAKY_SLOPE => "leaky_relu".into(),
            ActivationKind::LeakyRelu { slope } => format!("leaky_relu:{slope}"),
            ActivationKind::Tanh => "tanh".into(),
            ActivationKind::Sigmoid => "sigmoid".into(),
            ActivationKind::Exp => "exp".into(),
            ActivationKind::Gelu => "gelu".into(),
            ActivationKind::Elu { alpha: 1.0 } => "elu".into(),
            ActivationKind::Elu { alpha } => format!("elu:{alpha}"),
            ActivationKind::Celu { alpha: 1.0 } => "celu".into(),
            ActivationKind::Celu { alpha } => format!("celu:{alpha}"),
            ActivationKind::Selu => "selu".into(),
            ActivationKind::Hermite { degree } => format!("hermite:{degree}"),
        }
    }

    /// Whether `f` is odd, so that `E f(X) = 0`.
    pub fn is_odd(&self) -> bool {
        match *self {
            ActivationKind::Identity | ActivationKind::Tanh => true,
            ActivationKind::LeakyRelu { slope } => slope == 1.0,
            ActivationKind::Hermite { degree } => degree % 2 == 1,
            _ => false,
        }
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (base, param) = match s.split_once(':') {
            Some((b, p)) => (b, Some(p)),
            None => (s, None),
        };
        let parse_param = |p: &str| -> Result<f64> {
            p.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidParameter {
                    name: s.to_string(),
                    reason: format!("`{p}` is not a finite number"),
                })
        };
        let positive = |v: f64| -> Result<f64> {
            if v > 0.0 {
                Ok(v)
            } else {
                Err(Error::InvalidParameter {
                    name: s.to_string(),
                    reason: "parameter must be positive".into(),
                })
            }
        };
        let no_param = |kind: ActivationKind| -> Result<ActivationKind> {
            match param {
                None => Ok(kind),
                Some(_) => Err(Error::InvalidParameter {
                    name: s.to_string(),
                    reason: "this activation takes no parameter".into(),
                }),
            }
        };
        match base {
            "identity" | "linear" => no_param(ActivationKind::Identity),
            "relu" => no_param(ActivationKind::Relu),
            "tanh" => no_param(ActivationKind::Tanh),
            "sigmoid" => no_param(ActivationKind::Sigmoid),
            "exp" => no_param(ActivationKind::Exp),
            "gelu" => no_param(ActivationKind::Gelu),
            "selu" => no_param(ActivationKind::Selu),
            "leaky_relu" => {
                let slope = param.map(parse_param).transpose()?.unwrap_or(DEFAULT_LEAKY_SLOPE);
                Ok(ActivationKind::LeakyRelu { slope })
            }
            "elu" => {
                let alpha = param.map(parse_param).transpose()?.unwrap_or(1.0);
                Ok(ActivationKind::Elu {
                    alpha: positive(alpha)?,
                })
            }
            "celu" => {
                let alpha = param.map(parse_param).transpose()?.unwrap_or(1.0);
                Ok(ActivationKind::Celu {
                    alpha: positive(alpha)?,
                })
            }
            "hermite" => {
                let p = param.ok_or_else(|| Error::InvalidParameter {
                    name: s.to_string(),
                    reason: "hermite needs a degree, e.g. `hermite:2`".into(),
                })?;
                let degree = p.parse::<usize>().map_err(|_| Error::InvalidParameter {
                    name: s.to_string(),
                    reason: format!("`{p}` is not a non-negative integer degree"),
                })?;
                Ok(ActivationKind::Hermite { degree })
            }
            _ => Err(Error::UnknownActivation(s.to_string())),
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// A unit-energy activation `x -> f(x) / C`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Activation {
    name: String,
    kind: ActivationKind,
    scale: f64,
    breakpoints: Vec<f64>,
}

impl Activation {
    /// Normalize `kind` to unit energy under `quad`.
    pub fn new(kind: ActivationKind, quad: &GaussianQuadrature) -> Result<Self> {
        let breakpoints = kind.breakpoints();
        let scale = match kind {
            // he_m is unit-energy by orthonormality.
            ActivationKind::Hermite { .. } => 1.0,
            _ => normalization_constant(|x| kind.value(x), &breakpoints, quad)?,
        };
        Ok(Self {
            name: kind.name(),
            kind,
            scale,
            breakpoints,
        })
    }

    pub fn lookup(name: &str, quad: &GaussianQuadrature) -> Result<Self> {
        Self::new(name.parse()?, quad)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ActivationKind {
        self.kind
    }

    /// The normalization constant `C`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.kind.value(x) / self.scale
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.kind.derivative(x) / self.scale
    }

    pub fn raw_eval(&self, x: f64) -> f64 {
        self.kind.value(x)
    }

    pub fn is_odd(&self) -> bool {
        self.kind.is_odd()
    }
}

/// `C = sqrt(E f(X)^2)` for `X ~ N(0, 1)`.
///
/// Functions whose squared integrand has not decayed at the truncation edge
/// (for instance `exp(x^2)`) are rejected as not square-integrable.
pub fn normalization_constant<F: Fn(f64) -> f64>(f: F, breakpoints: &[f64], quad: &GaussianQuadrature) -> Result<f64> {
    let energy = quad.expect(|x| f(x) * f(x), breakpoints);
    if !energy.is_finite() || energy <= 0.0 {
        return Err(Error::NotSquareIntegrable);
    }
    let hw = quad.half_width();
    let edge = [-hw, hw]
        .iter()
        .map(|&x| f(x) * f(x) * standard_normal_density(x))
        .fold(0.0_f64, f64::max);
    if !edge.is_finite() || edge > TAIL_REJECT_RATIO * energy {
        return Err(Error::NotSquareIntegrable);
    }
    Ok(energy.sqrt())
}

/// Names of the default catalog entries.
pub const CATALOG_NAMES: &[&str] = &[
    "tanh",
    "selu",
    "relu",
    "sigmoid",
    "exp",
    "gelu",
    "celu",
    "elu",
    "leaky_relu",
    "identity",
    "hermite:2",
    "hermite:3",
];

/// The activations of the reference table, in table order.
pub const TABLE_NAMES: &[&str] = &["tanh", "selu", "relu", "sigmoid", "exp", "gelu", "celu", "elu"];

pub fn catalog(quad: &GaussianQuadrature) -> Result<Vec<Activation>> {
    CATALOG_NAMES.iter().map(|n| Activation::lookup(n, quad)).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> GaussianQuadrature {
        GaussianQuadrature::default()
    }

    #[test]
    fn normalization_constants() {
        let q = quad();
        let relu = Activation::lookup("relu", &q).unwrap();
        assert!((relu.scale() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        let exp = Activation::lookup("exp", &q).unwrap();
        assert!((exp.scale() - std::f64::consts::E).abs() < 1e-10);
        let id = Activation::lookup("identity", &q).unwrap();
        assert!((id.scale() - 1.0).abs() < 1e-13);
        let selu = Activation::lookup("selu", &q).unwrap();
        assert!((selu.scale() - 1.0).abs() < 5e-3);
    }

    #[test]
    fn rejects_non_square_integrable() {
        let q = quad();
        assert_eq!(
            normalization_constant(|x| (x * x).exp(), &[], &q),
            Err(Error::NotSquareIntegrable)
        );
        assert_eq!(
            normalization_constant(|_| 0.0, &[], &q),
            Err(Error::NotSquareIntegrable)
        );
    }

    #[test]
    fn lookup_and_parse() {
        let q = quad();
        assert!(matches!(
            Activation::lookup("swish", &q),
            Err(Error::UnknownActivation(_))
        ));
        assert!(matches!(
            Activation::lookup("hermite", &q),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            Activation::lookup("relu:2", &q),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            Activation::lookup("elu:-1", &q),
            Err(Error::InvalidParameter { .. })
        ));
        let lr = Activation::lookup("leaky_relu:0.2", &q).unwrap();
        assert_eq!(lr.kind(), ActivationKind::LeakyRelu { slope: 0.2 });
        assert_eq!(lr.name(), "leaky_relu:0.2");
        assert_eq!(Activation::lookup("leaky_relu", &q).unwrap().name(), "leaky_relu");

        let h2 = Activation::lookup("hermite:2", &q).unwrap();
        assert_eq!(h2.scale(), 1.0);
        for x in [-2.0, 0.3, 1.7] {
            let expected = (x * x - 1.0) / std::f64::consts::SQRT_2;
            assert!((h2.eval(x) - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn leaky_relu_with_unit_slope_is_identity() {
        let q = quad();
        let lr = Activation::lookup("leaky_relu:1", &q).unwrap();
        let id = Activation::lookup("identity", &q).unwrap();
        for i in -50..=50 {
            let x = i as f64 * 0.17;
            assert!((lr.eval(x) - id.eval(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn celu_with_unit_alpha_matches_elu() {
        let celu = ActivationKind::Celu { alpha: 1.0 };
        let elu = ActivationKind::Elu { alpha: 1.0 };
        for i in -40..=40 {
            let x = i as f64 * 0.1;
            assert!((celu.value(x) - elu.value(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn sigmoid_is_stable_in_the_tails() {
        assert_eq!(sigmoid(800.0), 1.0);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-16);
    }
}
