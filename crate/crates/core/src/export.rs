//! CSV and JSON encodings of expansions, reports, trajectories and
//! simulation results.

use std::io::Write;

use serde::Serialize;

use crate::dynamics::Trajectory;
use crate::hermite::HermiteExpansion;
use crate::kernel::FixedPointReport;
use crate::mc_sim::SimResult;
use crate::table::TableRow;

pub type ExportResult<T> = std::result::Result<T, csv::Error>;

/// The report object written as JSON.
#[derive(Debug, Clone, Serialize)]
pub struct ReportJson<'a> {
    pub name: &'a str,
    #[serde(rename = "C")]
    pub scale: Option<f64>,
    pub kappa0: f64,
    pub dkappa0: f64,
    pub dkappa1_series: f64,
    pub dkappa1_quad: f64,
    pub rho_star: f64,
    pub case: &'static str,
    pub alpha: f64,
    pub tail_mass: f64,
    pub kappa_rho_star: f64,
    pub dkappa_rho_star: f64,
    pub alternative: Option<AlternativeJson>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlternativeJson {
    pub case: &'static str,
    pub rho_star: f64,
    pub alpha: f64,
    pub dkappa1_series: f64,
}

impl<'a> From<&'a FixedPointReport> for ReportJson<'a> {
    fn from(r: &'a FixedPointReport) -> Self {
        Self {
            name: &r.name,
            scale: r.scale,
            kappa0: r.kappa0,
            dkappa0: r.dkappa0,
            dkappa1_series: r.dkappa1_series,
            dkappa1_quad: r.dkappa1_quad,
            rho_star: r.rho_star,
            case: r.case.as_str(),
            alpha: r.alpha,
            tail_mass: r.tail_mass,
            kappa_rho_star: r.kappa_at_star,
            dkappa_rho_star: r.dkappa_at_star,
            alternative: r.alternative.as_ref().map(|a| AlternativeJson {
                case: a.case.as_str(),
                rho_star: a.rho_star,
                alpha: a.alpha,
                dkappa1_series: a.dkappa1_series,
            }),
        }
    }
}

pub fn report_json(report: &FixedPointReport) -> serde_json::Value {
    serde_json::to_value(ReportJson::from(report)).expect("report serializes")
}

pub fn write_expansion_csv<W: Write>(w: W, exp: &HermiteExpansion) -> ExportResult<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["k", "c_k", "c_k_squared", "cumulative_energy"])?;
    for (k, c, c2, cum) in exp.rows() {
        wr.serialize((k, c, c2, cum))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_trajectory_csv<W: Write>(w: W, traj: &Trajectory) -> ExportResult<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["ell_or_t", "rho", "bound", "functional_name"])?;
    for (i, (t, rho)) in traj.times.iter().zip(&traj.values).enumerate() {
        let (bound, name) = match &traj.bounds {
            Some(b) => (b.values.get(i).copied(), b.functional.as_str()),
            None => (None, ""),
        };
        wr.serialize((t, rho, bound, name))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_sim_csv<W: Write>(w: W, result: &SimResult) -> ExportResult<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record([
        "layer",
        "mean_kernel",
        "stderr",
        "meanfield_kernel",
        "mean_norm_x",
        "mean_norm_y",
    ])?;
    for l in &result.layers {
        wr.serialize((
            l.layer,
            l.mean_kernel,
            l.stderr,
            l.meanfield_kernel,
            l.mean_norm_x,
            l.mean_norm_y,
        ))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_table_csv<W: Write>(w: W, rows: &[TableRow]) -> ExportResult<()> {
    let mut wr = csv::Writer::from_writer(w);
    for row in rows {
        wr.serialize(row)?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{find_fixed_point, KernelMap};

    #[test]
    fn expansion_csv_layout() {
        let exp = HermiteExpansion {
            name: "x".into(),
            coeffs: vec![0.6, 0.8],
            tail_mass: 0.0,
            tail_warning: false,
        };
        let mut buf = Vec::new();
        write_expansion_csv(&mut buf, &exp).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("k,c_k,c_k_squared,cumulative_energy"));
        assert!(lines.next().unwrap().starts_with("0,0.6,"));
    }

    #[test]
    fn report_json_keys() {
        let km = KernelMap::from_squared_coeffs("sq", vec![0.0, 0.0, 1.0], Some(2.0), 0.0).unwrap();
        let v = report_json(&find_fixed_point(&km).unwrap());
        for key in [
            "name",
            "C",
            "kappa0",
            "dkappa0",
            "dkappa1_series",
            "dkappa1_quad",
            "rho_star",
            "case",
            "alpha",
            "tail_mass",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["case"], "case1");
    }
}
