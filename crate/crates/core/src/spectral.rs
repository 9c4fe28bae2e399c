//! Cached eigendecomposition L = V Λ V⁻¹ used to evaluate scalar
//! functions φ(L) at desk scale.

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Side};
use num_complex::Complex64 as c64;

use crate::error::{Error, Result};
use crate::operator::DiscreteOperator;

/// Largest node count for which the dense calculus is built.
pub const SPECTRAL_CAP: usize = 4096;

#[derive(Debug)]
pub struct SpectralCalculus {
    eigenvalues: Vec<c64>,
    v: Mat<c64>,
    vinv: Mat<c64>,
    /// Index of the zero eigenvalue on periodic grids.
    kernel_mode: Option<usize>,
    hermitian: bool,
    residual: f64,
}

impl SpectralCalculus {
    pub fn new(op: &DiscreteOperator) -> Result<Self> {
        let n = op.len();
        if n > SPECTRAL_CAP {
            return Err(Error::InvalidParameter(format!(
                "dense spectral calculus is capped at {SPECTRAL_CAP} nodes, grid has {n}"
            )));
        }
        let a = op.to_dense();
        let amax = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let skew = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (a[(i, j)] - a[(j, i)].conj()).norm())
            .fold(0.0, f64::max);
        let hermitian = skew <= 1e-14 * amax;

        let (eigenvalues, v, vinv) = if hermitian {
            let e = a
                .self_adjoint_eigen(Side::Lower)
                .map_err(|e| Error::Numerical(format!("self-adjoint eigensolver failed: {e:?}")))?;
            let s = e.S();
            let vals: Vec<c64> = (0..n).map(|i| c64::new(s[i].re, 0.0)).collect();
            let v = e.U().to_owned();
            let vinv = v.adjoint().to_owned();
            (vals, v, vinv)
        } else {
            let e = a.eigen().map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?;
            let s = e.S();
            let vals: Vec<c64> = (0..n).map(|i| s[i]).collect();
            let v = e.U().to_owned();
            let vinv = v.partial_piv_lu().inverse();
            (vals, v, vinv)
        };

        let av = &a * &v;
        let mut residual = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                residual = residual.max((av[(i, j)] - v[(i, j)] * eigenvalues[j]).norm());
            }
        }
        residual /= amax;
        let id = &vinv * &v;
        let mut inv_err = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                inv_err = inv_err.max((id[(i, j)] - target).norm());
            }
        }
        if !(residual <= 1e-9 && inv_err <= 1e-8) {
            return Err(Error::Numerical(format!(
                "eigendecomposition unreliable: residual {residual:.2e}, inverse error {inv_err:.2e}"
            )));
        }

        let kernel_mode = if op.kernel_dim == 1 {
            (0..n).min_by(|&i, &j| eigenvalues[i].norm().total_cmp(&eigenvalues[j].norm()))
        } else {
            None
        };
        Ok(Self { eigenvalues, v, vinv, kernel_mode, hermitian, residual })
    }

    pub fn eigenvalues(&self) -> &[c64] {
        &self.eigenvalues
    }

    pub fn kernel_mode(&self) -> Option<usize> {
        self.kernel_mode
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Relative reconstruction residual max|AV − VΛ| / max|A|.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Smallest |μ| over the non-kernel eigenvalues.
    pub fn smallest_nonzero(&self) -> f64 {
        self.eigenvalues
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != self.kernel_mode)
            .map(|(_, m)| m.norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn largest(&self) -> f64 {
        self.eigenvalues.iter().map(|m| m.norm()).fold(0.0, f64::max)
    }

    /// Coordinates V⁻¹f.
    pub fn coefficients(&self, f: &[c64]) -> Vec<c64> {
        let col = Mat::from_fn(f.len(), 1, |i, _| f[i]);
        let c = &self.vinv * &col;
        (0..f.len()).map(|i| c[(i, 0)]).collect()
    }

    /// V⁻¹f for a field given by its nonzero entries.
    pub fn coefficients_sparse(&self, entries: &[(usize, c64)]) -> Vec<c64> {
        let n = self.eigenvalues.len();
        let mut c = vec![c64::new(0.0, 0.0); n];
        for &(x, v) in entries {
            for (i, ci) in c.iter_mut().enumerate() {
                *ci += self.vinv[(i, x)] * v;
            }
        }
        c
    }

    /// Eigenvalues with the kernel mode set to exactly zero.
    pub fn mode_values(&self) -> Vec<c64> {
        (0..self.eigenvalues.len()).map(|i| self.mode_value(i)).collect()
    }

    /// V c.
    pub fn synthesize(&self, c: &[c64]) -> Vec<c64> {
        let col = Mat::from_fn(c.len(), 1, |i, _| c[i]);
        let x = &self.v * &col;
        (0..c.len()).map(|i| x[(i, 0)]).collect()
    }

    /// φ(L)f. The kernel mode receives φ(0) exactly.
    pub fn apply(&self, f: &[c64], phi: impl Fn(c64) -> c64) -> Vec<c64> {
        let mut c = self.coefficients(f);
        for (i, ci) in c.iter_mut().enumerate() {
            *ci *= phi(self.mode_value(i));
        }
        self.synthesize(&c)
    }

    /// φ_j(L)f for j = 0..count, sharing one V⁻¹ product and one batched
    /// V product.
    pub fn apply_batch(&self, f: &[c64], count: usize, phi: impl Fn(usize, c64) -> c64) -> Vec<Vec<c64>> {
        let n = f.len();
        let c = self.coefficients(f);
        let mus: Vec<c64> = (0..n).map(|i| self.mode_value(i)).collect();
        let cm = Mat::from_fn(n, count, |i, j| c[i] * phi(j, mus[i]));
        let out = &self.v * &cm;
        (0..count).map(|j| (0..n).map(|i| out[(i, j)]).collect()).collect()
    }

    fn mode_value(&self, i: usize) -> c64 {
        if Some(i) == self.kernel_mode {
            c64::new(0.0, 0.0)
        } else {
            self.eigenvalues[i]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{random_elliptic_coefficients, CoefficientField};
    use crate::grid::{Boundary, Grid};
    use crate::operator::assemble_operator;

    #[test]
    fn laplacian_eigenvalues_match_closed_form() {
        let g = Grid::unit_1d(32, Boundary::Periodic).unwrap();
        let op = assemble_operator(&g, &CoefficientField::identity(&g)).unwrap();
        let sc = SpectralCalculus::new(&op).unwrap();
        assert!(sc.is_hermitian());
        let h = g.spacing();
        let mut want: Vec<f64> =
            (0..32).map(|k| (2.0 * (std::f64::consts::PI * k as f64 / 32.0).sin() / h).powi(2)).collect();
        want.sort_by(f64::total_cmp);
        let mut got: Vec<f64> = sc.eigenvalues().iter().map(|m| m.re).collect();
        got.sort_by(f64::total_cmp);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-9 * b.max(1.0));
        }
    }

    #[test]
    fn non_hermitian_reconstruction_applies_l() {
        let g = Grid::unit_2d(8, Boundary::Dirichlet).unwrap();
        let a = random_elliptic_coefficients(&g, 0.5, 2.0, 1).unwrap();
        let op = assemble_operator(&g, &a).unwrap();
        let sc = SpectralCalculus::new(&op).unwrap();
        assert!(!sc.is_hermitian());
        let f: Vec<c64> = (0..g.len()).map(|i| c64::new((i as f64).sin(), 0.1 * i as f64)).collect();
        let lf = op.apply_values(&f);
        let got = sc.apply(&f, |m| m);
        let scale = lf.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (x, y) in got.iter().zip(&lf) {
            assert!((x - y).norm() <= 1e-9 * scale);
        }
    }
}
