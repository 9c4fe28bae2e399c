use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{lp_norm, Cube, ScalarField};
use crate::operator::DiscreteOperator;
use crate::semigroup::{heat_power_apply, neg_power_apply, resolvent_apply};

/// A field with its cube and molecule parameters. `normalization` is the
/// factor already divided out of `field`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Molecule {
    pub field: ScalarField,
    pub cube: Cube,
    pub p: f64,
    pub eps: f64,
    pub m: u32,
    pub normalization: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoleculeKind {
    /// (ℓ²L)^M e^{−ℓ²L} f
    Heat,
    /// (I − (I + ℓ²L)^{−1})^M f
    Resolvent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub annulus: usize,
    /// 0 for m itself, k for (ℓ²L)^{−k} m.
    pub power: u32,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
    pub pass: bool,
    /// max measured/bound; the smallest constant that would make m pass.
    pub worst_ratio: f64,
}

const PASS_SLACK: f64 = 1e-9;

impl ValidationReport {
    fn from_rows(rows: Vec<ValidationRow>) -> Self {
        let worst_ratio = rows.iter().map(|r| r.measured / r.bound).fold(0.0, f64::max);
        let pass = rows.iter().all(|r| r.pass);
        Self { rows, pass, worst_ratio }
    }

    /// The report of m / c.
    pub fn rescaled(&self, c: f64) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let measured = r.measured / c;
                ValidationRow { measured, pass: measured <= r.bound * (1.0 + PASS_SLACK), ..*r }
            })
            .collect();
        Self::from_rows(rows)
    }
}

fn check_params(p: f64, m: u32) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("molecule exponent p must be finite and >= 1, got {p}")));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("molecule order M must be >= 1".into()));
    }
    Ok(())
}

/// ‖(ℓ²L)^{−k} μ‖_{L^p(S_i(Q))} as `table[k][i]`, k = 0..=M.
fn annulus_table(field: &ScalarField, cube: &Cube, op: &DiscreteOperator, p: f64, m: u32) -> Result<Vec<Vec<f64>>> {
    let grid = &op.grid;
    let annuli = cube.annuli(grid);
    let l2 = cube.sidelength(grid).powi(2);
    let mut table = Vec::with_capacity(m as usize + 1);
    for k in 0..=m {
        let v = if k == 0 {
            field.clone()
        } else if field.max_abs() == 0.0 {
            ScalarField::zeros(grid)
        } else {
            neg_power_apply(op, k, field)?.scale(crate::c64::new(l2.powi(-(k as i32)), 0.0))
        };
        table.push(annuli.iter().map(|a| lp_norm(grid, &v.values, Some(a), p)).collect());
    }
    Ok(table)
}

fn decay_exponent(n: f64, p: f64, eps: f64) -> f64 {
    n - n / p + eps
}

/// Per-annulus, per-power check of the molecule inequalities for
/// `m.field`.
pub fn validate_molecule(m: &Molecule, op: &DiscreteOperator) -> Result<ValidationReport> {
    check_params(m.p, m.m)?;
    op.check_field(&m.field)?;
    let grid = &op.grid;
    let n = grid.dim() as f64;
    let q = m.cube.volume(grid);
    let table = annulus_table(&m.field, &m.cube, op, m.p, m.m)?;
    let a = decay_exponent(n, m.p, m.eps);
    let mut rows = Vec::new();
    for (k, per_annulus) in table.iter().enumerate() {
        for (i, &measured) in per_annulus.iter().enumerate() {
            let bound = 2f64.powf(-(i as f64) * a) * q.powf(1.0 / m.p - 1.0);
            rows.push(ValidationRow {
                annulus: i,
                power: k as u32,
                measured,
                bound,
                pass: measured <= bound * (1.0 + PASS_SLACK),
            });
        }
    }
    Ok(ValidationReport::from_rows(rows))
}

/// sup_i 2^{i(n−n/p+ε)} |Q|^{1−1/p} Σ_{ν=0}^M ‖(ℓ²L)^{−ν}μ‖_{L^p(S_i(Q))}.
pub fn molecular_norm(mu: &ScalarField, p: f64, eps: f64, m: u32, cube: &Cube, op: &DiscreteOperator) -> Result<f64> {
    check_params(p, m)?;
    op.check_field(mu)?;
    let grid = &op.grid;
    let n = grid.dim() as f64;
    let q = cube.volume(grid);
    let table = annulus_table(mu, cube, op, p, m)?;
    let a = decay_exponent(n, p, eps);
    let annuli = table[0].len();
    Ok((0..annuli)
        .map(|i| {
            let s: f64 = table.iter().map(|row| row[i]).sum();
            2f64.powf(i as f64 * a) * q.powf(1.0 - 1.0 / p) * s
        })
        .fold(0.0, f64::max))
}

/// Hand-built molecule from f supported in Q with ‖f‖₂ ≤ |Q|^{−1/2},
/// divided by the smallest constant that makes it pass validation.
pub fn make_molecule(
    f_on_q: &ScalarField,
    cube: &Cube,
    op: &DiscreteOperator,
    m: u32,
    kind: MoleculeKind,
    p: f64,
    eps: f64,
) -> Result<Molecule> {
    check_params(p, m)?;
    op.check_field(f_on_q)?;
    let grid = &op.grid;
    let inside = cube.nodes(grid);
    let mut mask = vec![false; grid.len()];
    for &x in &inside {
        mask[x] = true;
    }
    if f_on_q.values.iter().enumerate().any(|(x, v)| !mask[x] && v.norm() > 0.0) {
        return Err(Error::InvalidParameter("molecule seed is not supported in its cube".into()));
    }
    let q = cube.volume(grid);
    if f_on_q.norm_l2() > q.powf(-0.5) * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "molecule seed has L2 norm {} above |Q|^(-1/2) = {}",
            f_on_q.norm_l2(),
            q.powf(-0.5)
        )));
    }
    let ell = cube.sidelength(grid);
    let raw = match kind {
        MoleculeKind::Heat => heat_power_apply(op, ell, m, f_on_q)?,
        MoleculeKind::Resolvent => {
            let mut g = f_on_q.clone();
            for _ in 0..m {
                g = g.sub(&resolvent_apply(op, ell, &g)?);
            }
            g
        }
    };
    let mut mol = Molecule { field: raw, cube: cube.clone(), p, eps, m, normalization: 1.0 };
    let worst = validate_molecule(&mol, op)?.worst_ratio;
    if worst > 0.0 {
        mol.field = mol.field.scale(crate::c64::new(1.0 / worst, 0.0));
        mol.normalization = worst;
    }
    Ok(mol)
}
