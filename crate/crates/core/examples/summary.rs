//! Print the fixed-point summary of every nonlinear catalog activation.

use kerneldyn::table::table;
use kerneldyn::{GaussianQuadrature, DEFAULT_TRUNCATION};

fn main() -> kerneldyn::Result<()> {
    let quad = GaussianQuadrature::default();
    println!(
        "{:<12} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>7} {:>7} {:>7}  case",
        "name", "C", "alpha", "rho*", "k(r*)", "k(0)", "k'(0)", "k'(1)s", "k'(1)q", "k'(r*)"
    );
    for r in table(DEFAULT_TRUNCATION, &quad)? {
        println!(
            "{:<12} {:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>7.4} {:>7.4} {:>7.4}  {} {:?} {:?} tail={:.1e}",
            r.name,
            r.scale,
            r.alpha,
            r.rho_star,
            r.kappa_rho_star,
            r.kappa0,
            r.dkappa0,
            r.dkappa1,
            r.dkappa1_quad,
            r.dkappa_rho_star,
            r.case,
            r.alt_case,
            r.alt_alpha,
            r.tail_mass
        );
    }
    Ok(())
}
