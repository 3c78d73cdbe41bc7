use std::sync::OnceLock;

use kerneldyn::activations::{Activation, CATALOG_NAMES};
use kerneldyn::dynamics::iterate;
use kerneldyn::hermite::{expand, he_eval, mehler_table};
use kerneldyn::kernel::{contraction_bound, find_fixed_point, kernel_oracle, ConvergenceCase};
use kerneldyn::{GaussianQuadrature, KernelMap, NormalizationMode, DEFAULT_TRUNCATION};
use proptest::prelude::*;

struct Fixture {
    quad: GaussianQuadrature,
    maps: Vec<(Activation, KernelMap)>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let quad = GaussianQuadrature::default();
        let maps = CATALOG_NAMES
            .iter()
            .map(|n| {
                let act = Activation::lookup(n, &quad).unwrap();
                let km = KernelMap::for_activation(&act, DEFAULT_TRUNCATION, &quad).unwrap();
                (act, km)
            })
            .collect();
        Fixture { quad, maps }
    })
}

fn nonlinear() -> impl Iterator<Item = &'static (Activation, KernelMap)> {
    fixture().maps.iter().filter(|(_, km)| !km.is_linear())
}

#[test]
fn hermite_polynomials_are_orthonormal() {
    let quad = &fixture().quad;
    for m in 0..=10 {
        for n in 0..=10 {
            let got = quad.expect(|x| he_eval(m, x) * he_eval(n, x), &[]);
            let want = if m == n { 1.0 } else { 0.0 };
            assert!((got - want).abs() < 1e-10, "<he_{m}, he_{n}> = {got}");
        }
    }
}

#[test]
fn mehler_lemma_up_to_degree_ten() {
    for rho in [-1.0, -0.6, 0.1, 0.5, 1.0] {
        let t = mehler_table(10, rho, &fixture().quad);
        for (m, row) in t.iter().enumerate() {
            for (n, v) in row.iter().enumerate() {
                let want = if m == n { rho.powi(n as i32) } else { 0.0 };
                assert!((v - want).abs() < 1e-7, "m={m} n={n} rho={rho}: {v}");
            }
        }
    }
}

#[test]
fn parseval_tail_by_regularity() {
    let quad = &fixture().quad;
    for (act, _) in &fixture().maps {
        let e = expand(act, DEFAULT_TRUNCATION, quad);
        assert!((e.energy() + e.tail_mass - 1.0).abs() < 1e-12);
        let limit = match act.name() {
            "relu" | "leaky_relu" | "selu" | "elu" | "celu" => 1e-3,
            _ => 1e-6,
        };
        assert!(e.tail_mass <= limit, "{}: tail {:e}", act.name(), e.tail_mass);
    }
}

#[test]
fn odd_activations_have_even_coefficients_zero() {
    let quad = &fixture().quad;
    for (act, _) in fixture().maps.iter().filter(|(a, _)| a.is_odd()) {
        let e = expand(act, 20, quad);
        for k in (0..=20).step_by(2) {
            assert!(e.coeffs[k].abs() < 1e-12, "{} c_{k} = {}", act.name(), e.coeffs[k]);
        }
    }
}

#[test]
fn activation_derivatives_match_finite_differences() {
    let h = 1e-6;
    for (act, _) in &fixture().maps {
        for x in [-2.3, -0.7, 0.4, 1.9] {
            let fd = (act.eval(x + h) - act.eval(x - h)) / (2.0 * h);
            assert!((fd - act.derivative(x)).abs() < 1e-6, "{} at {x}", act.name());
        }
    }
}

#[test]
fn energy_is_normalized() {
    let quad = &fixture().quad;
    for (act, _) in &fixture().maps {
        let e = quad.expect(|x| act.eval(x).powi(2), act.breakpoints());
        assert!((e - 1.0).abs() < 1e-10, "{}: {e}", act.name());
    }
}

#[test]
fn series_agrees_with_two_dimensional_oracle() {
    let quad = &fixture().quad;
    for (act, km) in &fixture().maps {
        let tol = (2.0 * km.tail_mass()).max(1e-6);
        for rho in [-1.0, -0.5, 0.0, 0.2, 0.7, 1.0] {
            let diff = (km.eval(rho) - kernel_oracle(act, rho, quad).unwrap()).abs();
            assert!(diff <= tol, "{} rho={rho}: {diff:e}", act.name());
        }
    }
}

#[test]
fn no_fixed_point_on_negative_side() {
    for (act, km) in nonlinear() {
        for i in 1..1000 {
            let rho = -1.0 + i as f64 * 1e-3;
            assert!(km.eval(rho) > rho, "{} at {rho}", act.name());
        }
    }
}

#[test]
fn fixed_point_is_unique_and_attracting() {
    for (act, km) in nonlinear() {
        let r = find_fixed_point(km).unwrap();
        assert!((0.0..=1.0).contains(&r.rho_star));
        assert!((km.eval(r.rho_star) - r.rho_star).abs() < 1e-9, "{}", act.name());
        if r.case != ConvergenceCase::Case3 {
            assert!(r.dkappa_at_star < 1.0 - 1e-6, "{}: {}", act.name(), r.dkappa_at_star);
        }
        let crossings = (0..=999)
            .map(|i| i as f64 * 1e-3)
            .filter(|x| (x - r.rho_star).abs() > 2e-3)
            .filter(|x| (km.eval(*x) - x).abs() < 1e-9)
            .count();
        assert_eq!(crossings, 0, "{} has a second fixed point", act.name());
        if r.case != ConvergenceCase::Case3 {
            assert!(r.alpha > 0.0 && r.alpha < 1.0);
        }
    }
}

#[test]
fn ln_after_centers_and_keeps_one() {
    for (act, km) in nonlinear() {
        let Ok(ln) = km.normalized(NormalizationMode::LnAfter) else {
            continue;
        };
        assert!(ln.eval(0.0).abs() < 1e-12, "{}", act.name());
        assert!((ln.eval(1.0) - 1.0).abs() < 1e-12, "{}", act.name());
        for mode in [
            NormalizationMode::LnBefore,
            NormalizationMode::RnBefore,
            NormalizationMode::RnAfter,
        ] {
            assert_eq!(km.normalized(mode).unwrap().squared_coeffs(), km.squared_coeffs());
        }
    }
}

#[test]
fn hermite_maps_converge_double_exponentially() {
    for m in [2usize, 3] {
        let (_, km) = &fixture()
            .maps
            .iter()
            .find(|(a, _)| a.name() == format!("hermite:{m}"))
            .unwrap();
        let traj = iterate(km, 0.5, 5).unwrap();
        for (ell, rho) in traj.values.iter().enumerate() {
            let want = 0.5f64.powi(m.pow(ell as u32) as i32);
            assert!((rho - want).abs() < 1e-12);
        }
    }
}

fn map_strategy() -> impl Strategy<Value = usize> {
    let n = fixture().maps.iter().filter(|(_, km)| !km.is_linear()).count();
    0..n
}

fn nth_nonlinear(i: usize) -> &'static (Activation, KernelMap) {
    nonlinear().nth(i).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn kernel_is_monotone_and_convex_on_unit_interval(i in map_strategy(), a in 0.0..1.0f64, b in 0.0..1.0f64, t in 0.0..1.0f64) {
        let (_, km) = nth_nonlinear(i);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(km.eval(hi) >= km.eval(lo) - 1e-14);
        let mid = t * lo + (1.0 - t) * hi;
        prop_assert!(km.eval(mid) <= t * km.eval(lo) + (1.0 - t) * km.eval(hi) + 1e-12);
    }

    #[test]
    fn kernel_stays_in_range(i in map_strategy(), rho in -1.0..=1.0f64) {
        let (_, km) = nth_nonlinear(i);
        prop_assert!(km.eval(rho).abs() <= 1.0);
        prop_assert!(km.eval(rho) <= km.eval(rho.abs()) + 1e-14);
    }

    #[test]
    fn residual_preserves_fixed_point_and_slows_contraction(i in map_strategy(), r1 in 0.0..0.95f64, dr in 0.0..0.05f64) {
        let (_, km) = nth_nonlinear(i);
        let star = find_fixed_point(km).unwrap().rho_star;
        let a = km.residual(r1).unwrap();
        let b = km.residual(r1 + dr).unwrap();
        prop_assert!((a.eval(star) - star).abs() < 1e-9);
        prop_assert!(b.derivative_series(star, 1) >= a.derivative_series(star, 1) - 1e-12);
    }

    #[test]
    fn bounds_hold_along_trajectories(i in map_strategy(), rho0 in -0.99..0.99f64) {
        let (_, km) = nth_nonlinear(i);
        let report = find_fixed_point(km).unwrap();
        let traj = iterate(km, rho0, 60).unwrap();
        let f = traj.bounds.as_ref().unwrap().functional;
        for (ell, rho) in traj.values.iter().enumerate() {
            let bound = contraction_bound(&report, rho0, ell).unwrap().value;
            prop_assert!(f.measure(*rho, report.rho_star) <= bound * (1.0 + 1e-9) + 1e-15);
        }
    }

    #[test]
    fn random_power_series_are_handled(raw in prop::collection::vec(0.0..1.0f64, 3..12)) {
        let total: f64 = raw.iter().sum();
        prop_assume!(total > 1e-3);
        let c: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let dk1: f64 = c.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
        let km = KernelMap::from_squared_coeffs("random", c, Some(dk1), 0.0).unwrap();
        prop_assume!(!km.is_linear());
        let report = find_fixed_point(&km).unwrap();
        prop_assert!((0.0..=1.0).contains(&report.rho_star));
        prop_assert!((km.eval(report.rho_star) - report.rho_star).abs() < 1e-8);
    }
}
