//! Assembly of L = −div(A∇) in flux form.
//!
//! Every flux cell carries 2ᵈ corner gradients built from the forward
//! differences along the cell edges meeting at that corner. The discrete
//! sesquilinear form is
//!
//! ```text
//! a(u, v) = Σ_cells Σ_corners (hᵈ / 2ᵈ) · A_cell g(u) · conj(g(v))
//! ```
//!
//! and L is the matrix with ⟨Lu, v⟩ = a(u, v) for the hᵈ-weighted inner
//! product. Hence L = Gᴴ W 𝔸 G / hᵈ, L* = Gᴴ W 𝔸ᴴ G / hᵈ, and
//! Re a(u, u) ≥ λ Σ w |g(u)|². For A = I the stencil is the standard
//! (2d+1)-point Laplacian.

use std::sync::{Arc, OnceLock};

use faer::Mat;
use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};
use sprs::{CsMat, TriMat};

use crate::coefficients::{cells_per_axis, check_ellipticity, CoefficientField};
use crate::error::{Error, Result};
use crate::grid::{Boundary, Grid, ScalarField, VectorField};
use crate::spectral::SpectralCalculus;

type SpectralCache = Arc<OnceLock<std::result::Result<Arc<SpectralCalculus>, String>>>;

#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub grid: Grid,
    pub matrix: CsMat<c64>,
    pub adjoint_matrix: CsMat<c64>,
    /// 1 on periodic grids (constants), 0 on Dirichlet grids.
    pub kernel_dim: usize,
    /// Measured ellipticity constants of the coefficients.
    pub lambda: f64,
    pub big_lambda: f64,
    form_gradient: CsMat<f64>,
    form_weight: f64,
    spectral: SpectralCache,
}

/// Node of the flux cell `cell_idx` at local corner offset `local` (0 or 1
/// per axis); `None` for Dirichlet ghost nodes.
fn cell_node(grid: &Grid, cell_idx: [usize; 2], local: [usize; 2]) -> Option<usize> {
    let mut idx = [0usize; 2];
    for axis in 0..grid.dim() {
        let n = grid.sizes()[axis] as isize;
        let raw = match grid.boundary() {
            Boundary::Periodic => cell_idx[axis] as isize + local[axis] as isize,
            Boundary::Dirichlet => cell_idx[axis] as isize - 1 + local[axis] as isize,
        };
        idx[axis] = match grid.boundary() {
            Boundary::Periodic => raw.rem_euclid(n) as usize,
            Boundary::Dirichlet => {
                if raw < 0 || raw >= n {
                    return None;
                }
                raw as usize
            }
        };
    }
    Some(grid.node(idx))
}

/// Sparse corner-gradient matrix G: rows are (cell, corner, axis).
fn corner_gradient(grid: &Grid) -> CsMat<f64> {
    let d = grid.dim();
    let corners = 1usize << d;
    let cells: Vec<usize> = (0..d).map(|a| cells_per_axis(grid, a)).collect();
    let n_cells: usize = cells.iter().product();
    let inv_h = 1.0 / grid.spacing();
    let mut tri = TriMat::new((n_cells * corners * d, grid.len()));
    for cell in 0..n_cells {
        let cidx = if d == 1 { [cell, 0] } else { [cell / cells[1], cell % cells[1]] };
        for corner in 0..corners {
            let bits = [corner & 1, (corner >> 1) & 1];
            for axis in 0..d {
                let row = (cell * corners + corner) * d + axis;
                let mut lo = bits;
                let mut hi = bits;
                lo[axis] = 0;
                hi[axis] = 1;
                if let Some(x) = cell_node(grid, cidx, hi) {
                    tri.add_triplet(row, x, inv_h);
                }
                if let Some(x) = cell_node(grid, cidx, lo) {
                    tri.add_triplet(row, x, -inv_h);
                }
            }
        }
    }
    tri.to_csr()
}

/// Assembles L = −div_h(A∇_h) and its adjoint.
pub fn assemble_operator(grid: &Grid, coeff: &CoefficientField) -> Result<DiscreteOperator> {
    if &coeff.grid != grid {
        return Err(Error::DimensionMismatch("coefficient field lives on a different grid".into()));
    }
    let (lambda, big_lambda) = check_ellipticity(coeff)?;
    let d = grid.dim();
    let corners = 1usize << d;
    let g = corner_gradient(grid);
    let weight = grid.cell_volume() / corners as f64;
    let scale = weight / grid.cell_volume();
    let n = grid.len();

    // L_{ji} = scale Σ_{k,l} G_{(c,κ,k), j} A_{kl} G_{(c,κ,l), i}
    let mut tri = TriMat::new((n, n));
    let rows: Vec<Vec<(usize, f64)>> =
        g.outer_iterator().map(|row| row.iter().map(|(c, &v)| (c, v)).collect()).collect();
    for cell in 0..coeff.cell_count() {
        let a = coeff.cell_matrix(cell);
        for corner in 0..corners {
            let base = (cell * corners + corner) * d;
            for k in 0..d {
                for l in 0..d {
                    let akl = a[k * d + l];
                    if akl == c64::new(0.0, 0.0) {
                        continue;
                    }
                    for &(j, gj) in &rows[base + k] {
                        for &(i, gi) in &rows[base + l] {
                            tri.add_triplet(j, i, akl * (scale * gj * gi));
                        }
                    }
                }
            }
        }
    }
    let matrix: CsMat<c64> = tri.to_csr();
    let adjoint_matrix = conj_transpose(&matrix);
    Ok(DiscreteOperator {
        grid: grid.clone(),
        matrix,
        adjoint_matrix,
        kernel_dim: if grid.is_periodic() { 1 } else { 0 },
        lambda,
        big_lambda,
        form_gradient: g,
        form_weight: weight,
        spectral: SpectralCache::default(),
    })
}

pub fn conj_transpose(m: &CsMat<c64>) -> CsMat<c64> {
    m.transpose_view().to_csr().map(|v| v.conj())
}

pub(crate) fn csr_apply<T>(m: &CsMat<T>, x: &[c64]) -> Vec<c64>
where
    T: Copy,
    c64: std::ops::Mul<T, Output = c64>,
{
    m.outer_iterator().map(|row| row.iter().fold(c64::new(0.0, 0.0), |acc, (j, &v)| acc + x[j] * v)).collect()
}

impl DiscreteOperator {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Lu for a raw value slice.
    pub fn apply_values(&self, u: &[c64]) -> Vec<c64> {
        csr_apply(&self.matrix, u)
    }

    pub fn apply(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check_field(f)?;
        Ok(ScalarField { grid: self.grid.clone(), values: self.apply_values(&f.values) })
    }

    pub fn apply_adjoint(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check_field(f)?;
        Ok(ScalarField { grid: self.grid.clone(), values: csr_apply(&self.adjoint_matrix, &f.values) })
    }

    /// The operator L* with the roles of the two matrices swapped.
    pub fn adjoint(&self) -> DiscreteOperator {
        DiscreteOperator {
            matrix: self.adjoint_matrix.clone(),
            adjoint_matrix: self.matrix.clone(),
            spectral: SpectralCache::default(),
            ..self.clone()
        }
    }

    /// The dense eigendecomposition of L, built on first use and shared by
    /// every clone of this operator.
    pub fn spectral(&self) -> Result<Arc<SpectralCalculus>> {
        self.spectral
            .get_or_init(|| SpectralCalculus::new(self).map(Arc::new).map_err(|e| e.to_string()))
            .clone()
            .map_err(Error::Numerical)
    }

    pub fn check_field(&self, f: &ScalarField) -> Result<()> {
        if f.grid != self.grid {
            return Err(Error::DimensionMismatch("field lives on a different grid".into()));
        }
        Ok(())
    }

    /// The sesquilinear form a(u, v) = ⟨Lu, v⟩.
    pub fn form(&self, u: &ScalarField, v: &ScalarField) -> c64 {
        ScalarField { grid: self.grid.clone(), values: self.apply_values(&u.values) }.inner(v)
    }

    /// ‖∇_h u‖² in the corner-gradient energy used by the form.
    pub fn gradient_energy(&self, u: &ScalarField) -> f64 {
        csr_apply(&self.form_gradient, &u.values).iter().map(|g| g.norm_sqr()).sum::<f64>() * self.form_weight
    }

    /// Node-based forward-difference gradient (zero ghost values on
    /// Dirichlet grids).
    pub fn gradient(&self, u: &ScalarField) -> VectorField {
        gradient_values(&self.grid, &u.values)
    }

    /// Upper bound on the spectral radius from Gershgorin discs.
    pub fn gershgorin_bound(&self) -> f64 {
        self.matrix.outer_iterator().map(|row| row.iter().map(|(_, v)| v.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Lower bound on Re μ over the complement of the kernel:
    /// λ times the smallest nonzero eigenvalue of the discrete Laplacian.
    pub fn coercivity_bound(&self) -> f64 {
        let h = self.grid.spacing();
        let lap_min = (0..self.grid.dim())
            .map(|axis| {
                let n = self.grid.sizes()[axis] as f64;
                let arg = match self.grid.boundary() {
                    Boundary::Periodic => std::f64::consts::PI / n,
                    Boundary::Dirichlet => std::f64::consts::PI / (2.0 * (n + 1.0)),
                };
                (2.0 * arg.sin() / h).powi(2)
            })
            .fold(f64::INFINITY, f64::min);
        let lap_min = if self.grid.is_periodic() { lap_min } else { lap_min * self.grid.dim() as f64 };
        self.lambda * lap_min
    }

    pub fn to_dense(&self) -> Mat<c64> {
        to_dense(&self.matrix)
    }
}

pub fn to_dense(m: &CsMat<c64>) -> Mat<c64> {
    let mut out = Mat::<c64>::zeros(m.rows(), m.cols());
    for (i, row) in m.outer_iterator().enumerate() {
        for (j, &v) in row.iter() {
            out[(i, j)] += v;
        }
    }
    out
}

pub(crate) fn gradient_values(grid: &Grid, u: &[c64]) -> VectorField {
    let inv_h = 1.0 / grid.spacing();
    let mut out = VectorField::zeros(grid);
    for axis in 0..grid.dim() {
        let mut delta = [0isize; 2];
        delta[axis] = 1;
        for x in 0..grid.len() {
            let next = grid.shift(x, delta).map_or(c64::new(0.0, 0.0), |y| u[y]);
            out.components[axis][x] = (next - u[x]) * inv_h;
        }
    }
    out
}

/// JSON form of a sparse complex matrix: explicit shape, CSR index arrays,
/// and values as interleaved (re, im) pairs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SparseJson {
    pub shape: [usize; 2],
    pub format: String,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<[f64; 2]>,
}

impl SparseJson {
    pub fn from_csr(m: &CsMat<c64>) -> Self {
        Self {
            shape: [m.rows(), m.cols()],
            format: "csr".into(),
            indptr: m.indptr().raw_storage().to_vec(),
            indices: m.indices().to_vec(),
            data: m.data().iter().map(|v| [v.re, v.im]).collect(),
        }
    }

    pub fn to_csr(&self) -> Result<CsMat<c64>> {
        CsMat::try_new(
            (self.shape[0], self.shape[1]),
            self.indptr.clone(),
            self.indices.clone(),
            self.data.iter().map(|p| c64::new(p[0], p[1])).collect(),
        )
        .map_err(|(_, _, _, e)| Error::DimensionMismatch(format!("invalid CSR payload: {e}")))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OperatorJson {
    pub grid: Grid,
    pub kernel_dim: usize,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    pub matrix: SparseJson,
    pub adjoint_matrix: SparseJson,
}

impl From<&DiscreteOperator> for OperatorJson {
    fn from(op: &DiscreteOperator) -> Self {
        Self {
            grid: op.grid.clone(),
            kernel_dim: op.kernel_dim,
            lambda: op.lambda,
            big_lambda: op.big_lambda,
            matrix: SparseJson::from_csr(&op.matrix),
            adjoint_matrix: SparseJson::from_csr(&op.adjoint_matrix),
        }
    }
}
