//! BMO norms (heat, resolvent and L^p variants), the Carleson functional and
//! the L² pairing that realizes H¹–BMO duality on the grid.
//!
//! cargo run --example bmo_and_carleson

use hardy_lab::semigroup::TimeGrid;
use hardy_lab::spaces::{bmo_norm, carleson_functional, duality_pair, john_nirenberg_compare, BmoVariant};
use hardy_lab::*;

fn main() -> Result<()> {
    let grid = Grid::unit_1d(64, Boundary::Periodic)?;
    let op = assemble_operator(&grid, &random_elliptic_coefficients(&grid, 0.5, 2.0, 2)?)?;
    let times = TimeGrid::for_grid(&grid, 64)?;
    // log-like profile, the usual BMO suspect
    let f = ScalarField::from_fn(&grid, |i| {
        let x = grid.coordinates(i)[0];
        c64::new((x - 0.5).abs().max(1.0 / 64.0).ln(), 0.0)
    });

    for variant in [BmoVariant::Heat, BmoVariant::Resolvent] {
        let r = bmo_norm(&f, &op, 1, variant, 2.0)?;
        println!("{variant:?}: {:.4} attained on {:?}", r.norm, r.argmax);
    }
    let table = john_nirenberg_compare(&f, &op, 1, &[1.5, 2.0, 3.0])?;
    for (p, n) in table.p_list.iter().zip(&table.norms) {
        println!("p = {p}: {n:.4}");
    }

    let c = carleson_functional(&f, &op, 1, &times)?;
    let b = bmo_norm(&f, &op, 1, BmoVariant::Heat, 2.0)?.norm;
    println!("Carleson {:.4e}, Carleson / BMO^2 = {:.3}", c.carleson_norm, c.carleson_norm / (b * b));

    // the pairing lives on mean-zero fields; constants are invisible to BMO anyway
    let f0 = f.remove_mean();
    let g = ScalarField::from_fn(&grid, |i| c64::new((i as f64 * 0.3).cos(), 0.0)).remove_mean();
    let paired = duality_pair(&g, &f0, &op, 1, &TimeGrid::new(grid.spacing() / 256.0, 4.0, 256)?)?;
    println!("pairing {:.6}  vs  <g, f> = {:.6}", paired, g.inner(&f0));
    Ok(())
}
