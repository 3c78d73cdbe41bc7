//! Kernel sequences: exact fixed-point iteration of a kernel map and the
//! kernel ODE `d rho / dt = kappa(rho) - rho`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{contraction_bound, find_fixed_point, BoundFunctional, FixedPointReport, KernelMap};

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_T_MAX: f64 = 500.0;
pub const DEFAULT_STOP_RATE: f64 = 1e-12;
/// Allowed excursion outside `[-1, 1]` before an ODE state is flagged.
const RANGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectorySource {
    Discrete,
    Ode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSeries {
    pub functional: BoundFunctional,
    pub rho_star: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub rho0: f64,
    pub source: TrajectorySource,
    /// Depth index for discrete sequences, time for ODE solutions.
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub bounds: Option<BoundSeries>,
    /// Set when an ODE state left `[-1, 1]` by more than 1e-9.
    pub out_of_range: bool,
}

impl Trajectory {
    pub fn last(&self) -> f64 {
        *self.values.last().expect("trajectories are never empty")
    }

    /// `|rho_ell - rho*|` for every stored value.
    pub fn distances(&self, rho_star: f64) -> Vec<f64> {
        self.values.iter().map(|r| (r - rho_star).abs()).collect()
    }
}

fn check_rho0(rho0: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&rho0) {
        Ok(())
    } else {
        Err(Error::Domain(format!("initial kernel {rho0} outside [-1, 1]")))
    }
}

/// `rho_0, kappa(rho_0), ...` up to depth `depth`, with contraction bounds
/// when the map is nonlinear and `|rho0| < 1`.
pub fn iterate(km: &KernelMap, rho0: f64, depth: usize) -> Result<Trajectory> {
    check_rho0(rho0)?;
    let report = find_fixed_point(km).ok();
    iterate_with_report(km, report.as_ref(), rho0, depth)
}

pub fn iterate_with_report(
    km: &KernelMap,
    report: Option<&FixedPointReport>,
    rho0: f64,
    depth: usize,
) -> Result<Trajectory> {
    check_rho0(rho0)?;
    let mut values = Vec::with_capacity(depth + 1);
    let mut rho = rho0;
    values.push(rho);
    for _ in 0..depth {
        rho = km.eval(rho);
        values.push(rho);
    }
    let bounds = match report {
        Some(r) if rho0.abs() < 1.0 => {
            let values = (0..=depth)
                .map(|ell| contraction_bound(r, rho0, ell).map(|b| b.value))
                .collect::<Result<Vec<_>>>()?;
            Some(BoundSeries {
                functional: BoundFunctional::for_case(r.case),
                rho_star: r.rho_star,
                values,
            })
        }
        _ => None,
    };
    Ok(Trajectory {
        rho0,
        source: TrajectorySource::Discrete,
        times: (0..=depth).map(|l| l as f64).collect(),
        values,
        bounds,
        out_of_range: false,
    })
}

/// Consecutive pairs `(rho_ell, rho_{ell+1})` for a cobweb diagram.
pub fn cobweb(km: &KernelMap, rho0: f64, steps: usize) -> Result<Vec<(f64, f64)>> {
    check_rho0(rho0)?;
    let mut pairs = Vec::with_capacity(steps);
    let mut rho = rho0;
    for _ in 0..steps {
        let next = km.eval(rho);
        pairs.push((rho, next));
        rho = next;
    }
    Ok(pairs)
}

/// Gaps `1 - rho_ell` of the sequence started at `1 - gap0`, computed
/// without forming `rho` so that gaps far below machine epsilon stay
/// resolved. Relies on `kappa(1) = 1` for the stored map:
/// `1 - kappa(1 - g) = sum_k c_k^2 (1 - (1 - g)^k)`.
pub fn gaps_to_one(km: &KernelMap, gap0: f64, depth: usize) -> Result<Vec<f64>> {
    if !(0.0..=2.0).contains(&gap0) {
        return Err(Error::Domain(format!("gap {gap0} outside [0, 2]")));
    }
    let coeffs = km.squared_coeffs();
    let total: f64 = coeffs.iter().sum();
    let mut gaps = Vec::with_capacity(depth + 1);
    let mut g = gap0;
    gaps.push(g);
    for _ in 0..depth {
        g = if g >= 1.0 {
            // rho <= 0: the direct form is accurate here.
            total - km.eval(1.0 - g)
        } else {
            let log_rho = (-g).ln_1p();
            coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| -c * (k as f64 * log_rho).exp_m1())
                .sum()
        };
        gaps.push(g);
    }
    Ok(gaps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeOptions {
    pub t_max: f64,
    pub dt: f64,
    /// Stop once `|d rho / dt|` falls below this rate.
    pub stop_rate: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            t_max: DEFAULT_T_MAX,
            dt: DEFAULT_DT,
            stop_rate: DEFAULT_STOP_RATE,
        }
    }
}

/// Classical fourth-order Runge-Kutta on the kernel ODE.
pub fn ode_solve(km: &KernelMap, rho0: f64, opts: OdeOptions) -> Result<Trajectory> {
    check_rho0(rho0)?;
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(Error::Domain(format!("step size {} must be positive", opts.dt)));
    }
    if !(opts.t_max >= 0.0 && opts.t_max.is_finite()) {
        return Err(Error::Domain(format!("horizon {} must be non-negative", opts.t_max)));
    }
    // kappa is evaluated unclamped so that excursions show up in the flag.
    let raw = |r: f64| km.squared_coeffs().iter().rev().fold(0.0, |acc, c| acc * r + c);
    let field = |r: f64| raw(r) - r;
    let steps = (opts.t_max / opts.dt).round() as usize;
    let mut times = vec![0.0];
    let mut values = vec![rho0];
    let mut out_of_range = false;
    let mut rho = rho0;
    for i in 1..=steps {
        if field(rho).abs() < opts.stop_rate {
            break;
        }
        let h = opts.dt;
        let k1 = field(rho);
        let k2 = field(rho + 0.5 * h * k1);
        let k3 = field(rho + 0.5 * h * k2);
        let k4 = field(rho + h * k3);
        let next = rho + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() {
            return Err(Error::IntegrationFailure {
                last_valid_t: *times.last().unwrap(),
            });
        }
        if next.abs() > 1.0 + RANGE_SLACK {
            out_of_range = true;
        }
        rho = next;
        times.push(i as f64 * h);
        values.push(rho);
    }
    Ok(Trajectory {
        rho0,
        source: TrajectorySource::Ode,
        times,
        values,
        bounds: None,
        out_of_range,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power_map(m: usize) -> KernelMap {
        let mut c = vec![0.0; m + 1];
        c[m] = 1.0;
        KernelMap::from_squared_coeffs(format!("hermite:{m}"), c, Some(m as f64), 0.0).unwrap()
    }

    #[test]
    fn square_map_iterates() {
        let t = iterate(&power_map(2), 0.5, 3).unwrap();
        assert_eq!(t.values, vec![0.5, 0.25, 0.0625, 0.00390625]);
        assert!(t.bounds.is_some());
    }

    #[test]
    fn cobweb_pairs() {
        let pairs = cobweb(&power_map(2), 0.5, 2).unwrap();
        assert_eq!(pairs, vec![(0.5, 0.25), (0.25, 0.0625)]);
        let id = KernelMap::from_squared_coeffs("identity", vec![0.0, 1.0], Some(1.0), 0.0).unwrap();
        assert!(cobweb(&id, -0.3, 5).unwrap().iter().all(|(a, b)| a == b));
    }

    #[test]
    fn rejects_bad_inputs() {
        let km = power_map(2);
        assert!(iterate(&km, 1.5, 3).is_err());
        let bad = OdeOptions {
            dt: 0.0,
            ..OdeOptions::default()
        };
        assert!(ode_solve(&km, 0.2, bad).is_err());
    }

    #[test]
    fn ode_at_equilibrium_is_constant() {
        let km = power_map(3);
        let t = ode_solve(&km, 0.0, OdeOptions::default()).unwrap();
        assert!(t.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gaps_match_direct_iteration_when_resolvable() {
        let km = KernelMap::from_squared_coeffs("mix", vec![0.3, 0.2, 0.5], None, 0.0).unwrap();
        let gaps = gaps_to_one(&km, 1.0, 6).unwrap();
        let direct = iterate(&km, 0.0, 6).unwrap();
        for (g, r) in gaps.iter().zip(&direct.values) {
            assert!((g - (1.0 - r)).abs() < 1e-14);
        }
    }
}
