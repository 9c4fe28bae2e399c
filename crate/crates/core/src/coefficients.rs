//! Complex coefficient fields A(x) and their ellipticity bounds.

use num_complex::Complex64 as c64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Boundary, Grid};

/// Number of flux cells per axis: cells sit between consecutive nodes,
/// including the ghost links to the zero boundary on Dirichlet grids.
pub fn cells_per_axis(grid: &Grid, axis: usize) -> usize {
    match grid.boundary() {
        Boundary::Periodic => grid.sizes()[axis],
        Boundary::Dirichlet => grid.sizes()[axis] + 1,
    }
}

pub fn cell_count(grid: &Grid) -> usize {
    (0..grid.dim()).map(|a| cells_per_axis(grid, a)).product()
}

/// Per-cell d×d complex matrices, stored row-major per cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    pub grid: Grid,
    pub matrices: Vec<c64>,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
}

impl CoefficientField {
    /// Builds a field and verifies the declared bounds against the
    /// measured ones.
    pub fn new(grid: Grid, matrices: Vec<c64>, lambda: f64, big_lambda: f64) -> Result<Self> {
        let d = grid.dim();
        if matrices.len() != cell_count(&grid) * d * d {
            return Err(Error::DimensionMismatch(format!(
                "expected {} coefficient entries, got {}",
                cell_count(&grid) * d * d,
                matrices.len()
            )));
        }
        if !(lambda > 0.0 && lambda <= big_lambda && big_lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < lambda <= Lambda < inf, got ({lambda}, {big_lambda})"
            )));
        }
        let field = Self { grid, matrices, lambda, big_lambda };
        let (lo, hi) = check_ellipticity(&field)?;
        let slack = 1e-12 * big_lambda;
        if lo < lambda - slack || hi > big_lambda + slack {
            return Err(Error::InvalidParameter(format!(
                "measured bounds ({lo}, {hi}) violate declared ({lambda}, {big_lambda})"
            )));
        }
        Ok(field)
    }

    /// The same matrix in every cell; bounds are measured.
    pub fn uniform(grid: &Grid, matrix: &[c64]) -> Result<Self> {
        let d = grid.dim();
        if matrix.len() != d * d {
            return Err(Error::DimensionMismatch(format!("expected a {d}x{d} matrix")));
        }
        let (lo, hi) = matrix_bounds(matrix, d);
        if lo <= 0.0 {
            return Err(Error::NotElliptic { measured: lo, cell: 0 });
        }
        let matrices = matrix.iter().copied().cycle().take(cell_count(grid) * d * d).collect();
        Self::new(grid.clone(), matrices, lo, hi)
    }

    pub fn identity(grid: &Grid) -> Self {
        let d = grid.dim();
        let mut m = vec![c64::new(0.0, 0.0); d * d];
        for k in 0..d {
            m[k * d + k] = c64::new(1.0, 0.0);
        }
        Self::uniform(grid, &m).expect("identity is elliptic")
    }

    pub fn cell_matrix(&self, cell: usize) -> &[c64] {
        let dd = self.grid.dim() * self.grid.dim();
        &self.matrices[cell * dd..(cell + 1) * dd]
    }

    pub fn cell_count(&self) -> usize {
        cell_count(&self.grid)
    }

    /// A(x)ᴴ in every cell; the coefficients of L*.
    pub fn adjoint(&self) -> Self {
        let d = self.grid.dim();
        let mut out = self.matrices.clone();
        for c in 0..self.cell_count() {
            for i in 0..d {
                for j in 0..d {
                    out[c * d * d + i * d + j] = self.matrices[c * d * d + j * d + i].conj();
                }
            }
        }
        Self { matrices: out, ..self.clone() }
    }
}

/// Smallest eigenvalue of the Hermitian part and spectral norm of a d×d
/// matrix (d ≤ 2, closed form).
pub fn matrix_bounds(m: &[c64], d: usize) -> (f64, f64) {
    if d == 1 {
        return (m[0].re, m[0].norm());
    }
    let (a, b, c, dd) = (m[0], m[1], m[2], m[3]);
    // Hermitian part [[p, q], [q̄, r]]
    let p = a.re;
    let r = dd.re;
    let q = (b + c.conj()) * 0.5;
    let mid = 0.5 * (p + r);
    let rad = (0.25 * (p - r) * (p - r) + q.norm_sqr()).sqrt();
    let lo = mid - rad;
    // AᴴA = [[s, u], [ū, v]]
    let s = a.norm_sqr() + c.norm_sqr();
    let v = b.norm_sqr() + dd.norm_sqr();
    let u = a.conj() * b + c.conj() * dd;
    let top = 0.5 * (s + v) + (0.25 * (s - v) * (s - v) + u.norm_sqr()).sqrt();
    (lo, top.sqrt())
}

/// Measured (λ, Λ): the minimum over cells of the smallest eigenvalue of the
/// Hermitian part, and the maximum over cells of the spectral norm.
pub fn check_ellipticity(coeff: &CoefficientField) -> Result<(f64, f64)> {
    let d = coeff.grid.dim();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    let mut worst = 0;
    for cell in 0..coeff.cell_count() {
        let (l, h) = matrix_bounds(coeff.cell_matrix(cell), d);
        if l < lo {
            lo = l;
            worst = cell;
        }
        hi = hi.max(h);
    }
    if lo <= 0.0 {
        return Err(Error::NotElliptic { measured: lo, cell: worst });
    }
    Ok((lo, hi))
}

/// Deterministic random elliptic coefficients with measured constants in
/// [λ, Λ]. Each cell is A = H + iS with H, S Hermitian, the spectrum of H
/// inside [λ, (λ+Λ)/2] and ‖S‖ ≤ Λ − ‖H‖.
pub fn random_elliptic_coefficients(grid: &Grid, lambda: f64, big_lambda: f64, seed: u64) -> Result<CoefficientField> {
    if !(lambda > 0.0 && lambda <= big_lambda && big_lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("need 0 < lambda <= Lambda, got ({lambda}, {big_lambda})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.dim();
    let spread = big_lambda - lambda;
    let mut matrices = Vec::with_capacity(cell_count(grid) * d * d);
    for _ in 0..cell_count(grid) {
        if d == 1 {
            let h = lambda + 0.5 * spread * rng.random::<f64>();
            let s_max = (big_lambda * big_lambda - h * h).max(0.0).sqrt();
            let s = s_max * (2.0 * rng.random::<f64>() - 1.0);
            matrices.push(c64::new(h, s));
            continue;
        }
        let h1 = lambda + 0.5 * spread * rng.random::<f64>();
        let h2 = lambda + 0.5 * spread * rng.random::<f64>();
        let herm = hermitian_2x2(h1, h2, &mut rng);
        let s_max = big_lambda - h1.max(h2);
        let s1 = s_max * (2.0 * rng.random::<f64>() - 1.0);
        let s2 = s_max * (2.0 * rng.random::<f64>() - 1.0);
        let skew = hermitian_2x2(s1, s2, &mut rng);
        for k in 0..4 {
            matrices.push(herm[k] + c64::i() * skew[k]);
        }
    }
    let (lo, hi) = {
        let tmp = CoefficientField { grid: grid.clone(), matrices: matrices.clone(), lambda, big_lambda };
        check_ellipticity(&tmp)?
    };
    debug_assert!(lo >= lambda - 1e-12 && hi <= big_lambda + 1e-12);
    CoefficientField::new(grid.clone(), matrices, lambda.min(lo), big_lambda.max(hi))
}

/// U diag(e1, e2) Uᴴ for a random 2×2 unitary U.
fn hermitian_2x2(e1: f64, e2: f64, rng: &mut impl Rng) -> [c64; 4] {
    let theta = std::f64::consts::FRAC_PI_2 * rng.random::<f64>();
    let phi = std::f64::consts::TAU * rng.random::<f64>();
    let (c, s) = (theta.cos(), theta.sin());
    let w = c64::from_polar(1.0, phi);
    // columns u1 = (c, w s), u2 = (-s, w c)
    let u = [c64::new(c, 0.0), c64::new(-s, 0.0), w * s, w * c];
    let mut out = [c64::new(0.0, 0.0); 4];
    for i in 0..2 {
        for j in 0..2 {
            out[i * 2 + j] = u[i * 2] * e1 * u[j * 2].conj() + u[i * 2 + 1] * e2 * u[j * 2 + 1].conj();
        }
    }
    out
}
