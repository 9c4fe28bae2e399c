//! ∇L^{−1/2} on a molecule corpus (its L¹ norms stay bounded) and the
//! off-diagonal commutator decay for g_h and the Riesz transform.
//!
//! cargo run --example riesz_transform

use hardy_lab::experiments::corpus::molecule_corpus;
use hardy_lab::riesz::{commutator_sweep, commutator_times, riesz_h1_experiment, CommutatorTarget};
use hardy_lab::semigroup::set_distance;
use hardy_lab::*;

fn main() -> Result<()> {
    let grid = Grid::unit_1d(64, Boundary::Periodic)?;
    let op = assemble_operator(&grid, &random_elliptic_coefficients(&grid, 0.5, 2.0, 1)?)?;

    let molecules = molecule_corpus(&op, 12, 5, 1)?;
    let report = riesz_h1_experiment(&molecules, &op, 128)?;
    for row in &report.rows {
        println!("{row:?}");
    }
    println!("sup {:.4}, spread {:?}", report.sup, report.spread);

    let e: Vec<usize> = (0..4).collect();
    let f: Vec<usize> = (24..40).collect();
    let ts = commutator_times(set_distance(&grid, &e, &f)?);
    for target in [CommutatorTarget::VerticalHeat, CommutatorTarget::Riesz] {
        for m in [1, 2] {
            let s = commutator_sweep(&op, target, m, &ts, &e, &f)?;
            println!("{target:?} M={m}: slopes {:.2} / {:.2}", s.slope_difference, s.slope_power);
        }
    }
    Ok(())
}
