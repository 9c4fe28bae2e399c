//! Assemble L = −div(A∇) for a random complex coefficient field and poke at
//! the result: ellipticity, adjoint pairing, null space, JSON export.
//!
//! cargo run --example assemble_operator

use hardy_lab::operator::OperatorJson;
use hardy_lab::*;

fn main() -> Result<()> {
    let grid = Grid::unit_2d(16, Boundary::Periodic)?;
    let a = random_elliptic_coefficients(&grid, 0.5, 2.0, 7)?;
    let (lo, hi) = check_ellipticity(&a)?;
    println!("measured ellipticity on {} cells: [{lo:.3}, {hi:.3}]", a.cell_count());

    let op = assemble_operator(&grid, &a)?;
    println!("N = {}, nnz = {}, kernel dim = {}", op.len(), op.matrix.nnz(), op.kernel_dim);
    println!("gershgorin bound {:.1}, coercivity bound {:.3}", op.gershgorin_bound(), op.coercivity_bound());

    let u = ScalarField::from_fn(&grid, |i| c64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()));
    let v = ScalarField::from_fn(&grid, |i| c64::new((i % 5) as f64, -((i % 3) as f64)));
    let lhs = op.apply(&u)?.inner(&v);
    let rhs = u.inner(&op.apply_adjoint(&v)?);
    println!("<Lu, v> - <u, L*v> = {:.2e}", (lhs - rhs).norm());

    let one = ScalarField::constant(&grid, c64::new(1.0, 0.0));
    println!("|L 1|_inf = {:.2e}", op.apply(&one)?.max_abs());

    // Dirichlet grids have no kernel
    let dgrid = Grid::unit_1d(32, Boundary::Dirichlet)?;
    let dop = assemble_operator(&dgrid, &CoefficientField::identity(&dgrid))?;
    let smallest = dop.to_dense().singular_values().map_err(|e| Error::Numerical(format!("{e:?}")))?;
    println!("Dirichlet 1D, A=I: smallest singular value {:.4}", smallest.into_iter().fold(f64::INFINITY, f64::min));

    let json = serde_json::to_string(&OperatorJson::from(&op))?;
    println!("operator JSON: {} bytes", json.len());
    Ok(())
}
