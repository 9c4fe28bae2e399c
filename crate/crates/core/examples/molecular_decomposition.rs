//! Split a field into weighted molecules through the level sets of S_h f,
//! then check the molecules and the reconstruction.
//!
//! cargo run --example molecular_decomposition

use hardy_lab::decomposition::{calderon_constant, molecular_decompose, whitney_decompose, DecomposeParams};
use hardy_lab::semigroup::{heat_apply, HeatMethod, TimeGrid};
use hardy_lab::*;

fn main() -> Result<()> {
    let grid = Grid::unit_1d(64, Boundary::Periodic)?;
    let op = assemble_operator(&grid, &random_elliptic_coefficients(&grid, 0.5, 2.0, 1)?)?;
    let bump = ScalarField::from_fn(&grid, |i| c64::new(if (20..28).contains(&i) { 1.0 } else { 0.0 }, 0.0));
    let f = op.apply(&heat_apply(&op, 4e-4, &bump, HeatMethod::Spectral)?)?;

    let times = TimeGrid::new(grid.spacing() / 16.0, 4.0, 64)?;
    let params = DecomposeParams::default();
    println!("C_{} = {}", params.m, calderon_constant(params.m)?);
    let d = molecular_decompose(&f, &op, &params, &times)?;
    for level in &d.levels {
        println!("{level:?}");
    }
    for term in d.terms.iter().take(8) {
        println!(
            "k={:>3} cube {:>2}  lambda {:.3e}  valid {}  worst ratio {:.3}",
            term.level, term.cube_index, term.lambda, term.report.pass, term.report.worst_ratio
        );
    }
    println!("{} terms, sum lambda = {:.4e}, |S_h f|_1 = {:.4e}", d.terms.len(), d.weight_sum, d.sh_l1);
    println!("relative residual {:.2e}, all valid: {}", d.relative_residual(&f), d.all_valid());

    // The Whitney step on its own
    let set: Vec<usize> = (10..40).collect();
    let w = whitney_decompose(&set, &grid)?;
    println!("Whitney cubes of [10, 40): {}", w.cubes.len());
    Ok(())
}
