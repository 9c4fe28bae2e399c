//! Numerical laboratory for Hardy and BMO spaces adapted to complex
//! divergence-form elliptic operators on desk-scale grids.

// `!(x > 0.0)` is how parameters reject NaN; lattice loops index several
// arrays by node at once.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod coefficients;
pub mod decomposition;
pub mod error;
pub mod experiments;
pub mod functionals;
pub mod grid;
pub mod linalg;
pub mod operator;
pub mod oracle;
pub mod riesz;
pub mod semigroup;
pub mod spaces;
pub mod spectral;
pub mod stats;

pub use coefficients::{check_ellipticity, random_elliptic_coefficients, CoefficientField};
pub use error::{Error, Result};
pub use grid::{Boundary, Cube, Grid, ScalarField, VectorField};
pub use num_complex::Complex64 as c64;
pub use operator::{assemble_operator, DiscreteOperator};
