//! Conical and vertical square functions, non-tangential maximal functions
//! and their L¹ norms for one mean-zero field.
//!
//! cargo run --example square_functions

use hardy_lab::functionals::{
    hl_maximal, nontangential_max, square_function, vertical_square_function, ConeSpec, MaximalKind, SquareKind,
    VerticalKind,
};
use hardy_lab::semigroup::TimeGrid;
use hardy_lab::*;

fn main() -> Result<()> {
    let grid = Grid::unit_1d(64, Boundary::Periodic)?;
    let op = assemble_operator(&grid, &CoefficientField::identity(&grid))?;
    let times = TimeGrid::for_grid(&grid, 48)?;
    let f = ScalarField::from_fn(&grid, |i| {
        let x = grid.coordinates(i)[0];
        c64::new((-(x - 0.5).powi(2) / 0.002).exp() * (40.0 * x).sin(), 0.0)
    })
    .remove_mean();
    println!("|f|_1 = {:.4e}, times [{:.1e}, {:.1e}] x {}", f.norm_l1(), times.t_min, times.t_max, times.len());

    let cone = ConeSpec::default();
    for (name, kind, k) in [
        ("S_h", SquareKind::Heat, 1),
        ("S_h^2", SquareKind::HeatPower, 2),
        ("S_P grad", SquareKind::PoissonGrad, 1),
        ("S_P^1", SquareKind::PoissonPower, 1),
    ] {
        println!("{name:>10}  {:.4e}", square_function(&f, &op, &cone, kind, k, &times)?.norm_l1());
    }
    println!("{:>10}  {:.4e}", "g_h", vertical_square_function(&f, &op, VerticalKind::Heat, 1, &times)?.norm_l1());
    for (name, kind) in [("N_h", MaximalKind::Heat), ("N_h^*", MaximalKind::HeatStar), ("N_P", MaximalKind::Poisson)] {
        println!("{name:>10}  {:.4e}", nontangential_max(&f, &op, kind, 1.0, 1, &times)?.norm_l1());
    }
    println!("{:>10}  {:.4e}", "M f", hl_maximal(&f).norm_l1());

    // wider cones see more
    for aperture in [0.5, 1.0, 2.0, 4.0] {
        let s = square_function(&f, &op, &ConeSpec::new(aperture)?, SquareKind::Heat, 1, &times)?;
        println!("aperture {aperture}: |S_h f|_1 = {:.4e}", s.norm_l1());
    }
    Ok(())
}
