//! e^{−tL}, (I + t²L)^{−1} and the Poisson semigroup applied to a point
//! mass, three ways of computing the heat flow, and off-diagonal decay.
//!
//! cargo run --example heat_semigroup

use hardy_lab::semigroup::{
    gaffney_profile, heat_apply, poisson_apply, resolvent_apply, set_distance, GaffneyFamily, HeatMethod, TimeGrid,
};
use hardy_lab::*;

fn main() -> Result<()> {
    let grid = Grid::unit_1d(128, Boundary::Periodic)?;
    let op = assemble_operator(&grid, &random_elliptic_coefficients(&grid, 0.5, 2.0, 3)?)?;
    let delta = ScalarField::indicator(&grid, &[64]);

    for t in [1e-4, 1e-3, 1e-2] {
        let exact = heat_apply(&op, t, &delta, HeatMethod::DenseOracle)?;
        let krylov = heat_apply(&op, t, &delta, HeatMethod::Krylov)?;
        let spectral = heat_apply(&op, t, &delta, HeatMethod::Spectral)?;
        println!(
            "t={t:.0e}  peak {:.4}  krylov err {:.1e}  spectral err {:.1e}",
            exact.max_abs(),
            krylov.sub(&exact).norm_l2(),
            spectral.sub(&exact).norm_l2()
        );
    }

    let t = 0.05;
    let r = resolvent_apply(&op, t, &delta)?;
    let p = poisson_apply(&op, t, &delta, 128)?;
    println!("resolvent peak {:.4}, poisson peak {:.4} at t={t}", r.max_abs(), p.max_abs());

    // How fast does heat leak from the left quarter to the opposite quarter?
    let e: Vec<usize> = (0..32).collect();
    let f: Vec<usize> = (64..96).collect();
    let d = set_distance(&grid, &e, &f)?;
    let times = TimeGrid::new(d * d / 32.0, d * d, 24)?;
    for family in GaffneyFamily::ALL {
        let prof = gaffney_profile(&op, family, &e, &f, &times)?;
        let beta = prof.fitted_beta.map_or("-".to_string(), |b| format!("{b:.2}"));
        println!("{:>16}: norm at t_min {:.2e}, fitted exponent {beta}", family.tag(), prof.measured_norms[0]);
    }
    Ok(())
}
