//! Per-activation summary of fixed points and contraction rates.

use serde::Serialize;

use crate::activations::{Activation, CATALOG_NAMES};
use crate::error::Result;
use crate::kernel::{find_fixed_point, ConvergenceCase, FixedPointReport, KernelMap};
use crate::quadrature::GaussianQuadrature;

/// Footnote for maps whose series and exact `kappa'(1)` disagree.
pub const NOTE_SERIES_VS_EXACT: &str = "series_vs_exact_dkappa1";
/// Footnote for the polynomial case, whose rate is `1 - kappa(0) - kappa'(0)`.
pub const NOTE_CASE3_ALPHA: &str = "case3_alpha_formula";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub name: String,
    #[serde(rename = "C")]
    pub scale: f64,
    pub alpha: f64,
    pub rho_star: f64,
    pub kappa_rho_star: f64,
    pub kappa0: f64,
    pub dkappa0: f64,
    pub dkappa1: f64,
    pub dkappa1_quad: f64,
    pub dkappa_rho_star: f64,
    pub case: ConvergenceCase,
    pub convergence: &'static str,
    pub alt_case: Option<ConvergenceCase>,
    pub alt_alpha: Option<f64>,
    pub tail_mass: f64,
    pub notes: String,
}

impl TableRow {
    pub fn from_report(report: &FixedPointReport) -> Self {
        let mut notes = Vec::new();
        if report.alternative.is_some() {
            notes.push(NOTE_SERIES_VS_EXACT);
        }
        if report.case == ConvergenceCase::Case3 {
            notes.push(NOTE_CASE3_ALPHA);
        }
        Self {
            name: report.name.clone(),
            scale: report.scale.unwrap_or(1.0),
            alpha: report.alpha,
            rho_star: report.rho_star,
            kappa_rho_star: report.kappa_at_star,
            kappa0: report.kappa0,
            dkappa0: report.dkappa0,
            dkappa1: report.dkappa1_series,
            dkappa1_quad: report.dkappa1_quad,
            dkappa_rho_star: report.dkappa_at_star,
            case: report.case,
            convergence: if report.case.is_polynomial() { "poly" } else { "exp" },
            alt_case: report.alternative.as_ref().map(|a| a.case),
            alt_alpha: report.alternative.as_ref().map(|a| a.alpha),
            tail_mass: report.tail_mass,
            notes: notes.join(";"),
        }
    }
}

pub fn analyze(name: &str, truncation: usize, quad: &GaussianQuadrature) -> Result<FixedPointReport> {
    let act = Activation::lookup(name, quad)?;
    let km = KernelMap::for_activation(&act, truncation, quad)?;
    find_fixed_point(&km)
}

/// One row per nonlinear catalog activation.
pub fn table(truncation: usize, quad: &GaussianQuadrature) -> Result<Vec<TableRow>> {
    let mut rows = Vec::new();
    for name in CATALOG_NAMES {
        let act = Activation::lookup(name, quad)?;
        let km = KernelMap::for_activation(&act, truncation, quad)?;
        if km.is_linear() {
            continue;
        }
        rows.push(TableRow::from_report(&find_fixed_point(&km)?));
    }
    Ok(rows)
}
