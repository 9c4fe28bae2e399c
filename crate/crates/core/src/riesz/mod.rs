//! The Riesz transform ∇L^{−1/2}, its L¹ size on molecules, and the
//! off-diagonal commutator bounds that drive the H¹ → L¹ argument.
//!
//! L^{−1/2}f = π^{−1/2} ∫₀^∞ e^{−sL}f ds/√s. With s = e^u the integrand
//! e^{u/2} e^{−e^u L}f decays doubly exponentially at +∞ and like e^{u/2}
//! at −∞, so the trapezoid rule in u converges geometrically. The window
//! runs from 10⁻⁸/ρ (ρ a Gershgorin bound) to 40/λ₀ (λ₀ a lower bound on
//! Re μ off the kernel); the part below it is summed as a geometric tail
//! with e^{−sL} ≈ I.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::c64;
use crate::decomposition::{validate_molecule, Molecule};
use crate::error::{Error, Result};
use crate::functionals::{vertical_square_function, VerticalKind};
use crate::grid::{ScalarField, VectorField};
use crate::operator::{gradient_values, DiscreteOperator};
use crate::semigroup::{heat_values, project_mean_zero, set_distance, TimeGrid};
use crate::stats::{loglog_slope, spread};


pub const DEFAULT_RIESZ_NODES: usize = 128;
pub const MIN_RIESZ_NODES: usize = 32;
/// Coarse-vs-fine relative change above which the rule is rejected.
const CONVERGENCE_GUARD: f64 = 1e-1;

fn window(op: &DiscreteOperator) -> (f64, f64) {
    (1e-8 / op.gershgorin_bound(), 40.0 / op.coercivity_bound())
}

/// L^{−1/2}f by the log-substituted trapezoid rule with `quad_nodes`
/// nodes.
pub fn inv_sqrt_apply(op: &DiscreteOperator, f: &ScalarField, quad_nodes: usize) -> Result<ScalarField> {
    if quad_nodes < MIN_RIESZ_NODES {
        return Err(Error::InvalidParameter(format!(
            "Riesz quadrature needs at least {MIN_RIESZ_NODES} nodes, got {quad_nodes}"
        )));
    }
    op.check_field(f)?;
    let v = project_mean_zero(op, &f.values)?;
    if v.iter().all(|x| x.norm() == 0.0) {
        return Ok(ScalarField::zeros(&op.grid));
    }
    let (s_lo, s_hi) = window(op);
    let (u_lo, u_hi) = (s_lo.ln(), s_hi.ln());
    let du = (u_hi - u_lo) / (quad_nodes - 1) as f64;
    let terms: Vec<Vec<c64>> = (0..quad_nodes)
        .into_par_iter()
        .map(|k| {
            let u = u_lo + k as f64 * du;
            let w = (0.5 * u).exp();
            Ok(heat_values(op, u.exp(), &v)?.into_iter().map(|x| x * w).collect())
        })
        .collect::<Result<_>>()?;
    let tail = |step: f64| {
        let q = (-0.5 * step).exp();
        step * s_lo.sqrt() * q / (1.0 - q)
    };
    let c = 1.0 / PI.sqrt();
    let sum = |stride: usize| {
        let step = du * stride as f64;
        let mut acc: Vec<c64> = v.iter().map(|x| x * tail(step)).collect();
        for t in terms.iter().step_by(stride) {
            for (a, x) in acc.iter_mut().zip(t) {
                *a += x * step;
            }
        }
        acc.into_iter().map(|x| x * c).collect::<Vec<_>>()
    };
    let fine = sum(1);
    let coarse = sum(2);
    let norm = |a: &[c64]| a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let diff: Vec<c64> = fine.iter().zip(&coarse).map(|(a, b)| a - b).collect();
    let change = norm(&diff) / norm(&fine).max(f64::MIN_POSITIVE);
    if !(change <= CONVERGENCE_GUARD) {
        return Err(Error::QuadratureNonConvergence { nodes: quad_nodes, change });
    }
    Ok(ScalarField { grid: op.grid.clone(), values: fine })
}

/// ∇L^{−1/2}f with the forward-difference gradient.
pub fn riesz_apply(op: &DiscreteOperator, f: &ScalarField, quad_nodes: usize) -> Result<VectorField> {
    let u = inv_sqrt_apply(op, f, quad_nodes)?;
    Ok(gradient_values(&op.grid, &u.values))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RieszRow {
    pub id: usize,
    pub side: f64,
    pub l1: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RieszH1Report {
    pub rows: Vec<RieszRow>,
    pub sup: f64,
    pub min: f64,
    /// max/min over the corpus; `None` when empty or some norm vanishes.
    pub spread: Option<f64>,
}

impl RieszH1Report {
    /// `id,side,l1`, one row per molecule.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,side,l1\n");
        for r in &self.rows {
            out.push_str(&format!("{},{:e},{:e}\n", r.id, r.side, r.l1));
        }
        out
    }
}

/// ‖∇L^{−1/2}m‖₁ over a corpus of validated molecules.
pub fn riesz_h1_experiment(molecules: &[Molecule], op: &DiscreteOperator, quad_nodes: usize) -> Result<RieszH1Report> {
    let mut rows = Vec::with_capacity(molecules.len());
    for (id, m) in molecules.iter().enumerate() {
        let report = validate_molecule(m, op)?;
        if !report.pass {
            return Err(Error::InvalidParameter(format!(
                "molecule {id} fails validation (worst ratio {:.3})",
                report.worst_ratio
            )));
        }
        let l1 = riesz_apply(op, &m.field, quad_nodes)?.norm_l1();
        rows.push(RieszRow { id, side: m.cube.sidelength(&op.grid), l1 });
    }
    if rows.is_empty() {
        return Ok(RieszH1Report::default());
    }
    let l1: Vec<f64> = rows.iter().map(|r| r.l1).collect();
    let sup = l1.iter().copied().fold(0.0, f64::max);
    let min = l1.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(RieszH1Report { rows, sup, min, spread: spread(&l1) })
}

/// Operators checked for the off-diagonal commutator bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommutatorTarget {
    #[serde(rename = "g_h")]
    VerticalHeat,
    Riesz,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutatorValue {
    pub t: f64,
    /// (t/d²)^M
    pub scale: f64,
    /// ‖T(I − e^{−tL})^M f‖_{L²(F)}
    pub difference: f64,
    /// ‖T(tLe^{−tL})^M f‖_{L²(F)}
    pub power: f64,
}

impl CommutatorValue {
    /// The smallest constants C in both bounds at this t.
    pub fn ratios(&self) -> (f64, f64) {
        (self.difference / self.scale, self.power / self.scale)
    }
}

fn apply_target(
    op: &DiscreteOperator,
    target: CommutatorTarget,
    v: &ScalarField,
    quad_nodes: usize,
    times: &TimeGrid,
    f_set: &[usize],
) -> Result<f64> {
    Ok(match target {
        CommutatorTarget::Riesz => riesz_apply(op, v, quad_nodes)?.norm_l2_on(f_set),
        CommutatorTarget::VerticalHeat => {
            vertical_square_function(v, op, VerticalKind::Heat, 1, times)?.norm_lp_on(f_set, 2.0)
        }
    })
}

/// Both commutator norms at one time for f = χ_E/‖χ_E‖₂ (so ‖f‖_{L²(E)} = 1).
pub fn gaffney_commutator_check(
    op: &DiscreteOperator,
    target: CommutatorTarget,
    m: u32,
    t: f64,
    e_set: &[usize],
    f_set: &[usize],
) -> Result<CommutatorValue> {
    Ok(commutator_sweep(op, target, m, &[t], e_set, f_set)?.rows[0])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutatorSweep {
    pub target: CommutatorTarget,
    pub m: u32,
    pub distance: f64,
    pub rows: Vec<CommutatorValue>,
    /// log-log slopes of the two norms against t
    pub slope_difference: f64,
    pub slope_power: f64,
}

impl CommutatorSweep {
    /// `target,M,t,scale,difference,power`, one row per time.
    pub fn to_csv(&self) -> String {
        let tag = match self.target {
            CommutatorTarget::VerticalHeat => "g_h",
            CommutatorTarget::Riesz => "riesz",
        };
        let mut out = String::from("target,M,t,scale,difference,power\n");
        for r in &self.rows {
            out.push_str(&format!("{tag},{},{:e},{:e},{:e},{:e}\n", self.m, r.t, r.scale, r.difference, r.power));
        }
        out
    }
}

/// Two decades t/d² ∈ [10⁻⁴, 10⁻²], nine log-spaced samples: the range
/// where the bounds are off-diagonal rather than crude.
pub fn commutator_times(distance: f64) -> Vec<f64> {
    (0..9).map(|i| distance * distance * 10f64.powf(-4.0 + 0.25 * i as f64)).collect()
}

/// The commutator norms across a list of times.
pub fn commutator_sweep(
    op: &DiscreteOperator,
    target: CommutatorTarget,
    m: u32,
    t_list: &[f64],
    e_set: &[usize],
    f_set: &[usize],
) -> Result<CommutatorSweep> {
    if m == 0 {
        return Err(Error::InvalidParameter("commutator order M must be >= 1".into()));
    }
    if t_list.is_empty() || t_list.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidParameter("commutator times must be positive and finite".into()));
    }
    let grid = &op.grid;
    let d = set_distance(grid, e_set, f_set)?;
    let chi = ScalarField::indicator(grid, e_set);
    let f = chi.scale(c64::new(1.0 / chi.norm_l2(), 0.0));
    let times = TimeGrid::for_grid(grid, 64)?;
    let rows = t_list
        .iter()
        .map(|&t| {
            let mut diff = f.values.clone();
            let mut pow = f.values.clone();
            for _ in 0..m {
                let h = heat_values(op, t, &diff)?;
                diff = diff.iter().zip(&h).map(|(a, b)| a - b).collect();
                let h = heat_values(op, t, &pow)?;
                pow = op.apply_values(&h).into_iter().map(|x| x * t).collect();
            }
            // (I − e^{−tL}) and tL both kill constants; drop the rounding residue
            let field = |v: Vec<c64>| {
                let s = ScalarField { grid: grid.clone(), values: v };
                if op.kernel_dim > 0 {
                    s.remove_mean()
                } else {
                    s
                }
            };
            Ok(CommutatorValue {
                t,
                scale: (t / (d * d)).powi(m as i32),
                difference: apply_target(op, target, &field(diff), DEFAULT_RIESZ_NODES, &times, f_set)?,
                power: apply_target(op, target, &field(pow), DEFAULT_RIESZ_NODES, &times, f_set)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ts: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let slope = |vals: Vec<f64>| if rows.len() > 1 { loglog_slope(&ts, &vals) } else { f64::NAN };
    let slope_difference = slope(rows.iter().map(|r| r.difference).collect());
    let slope_power = slope(rows.iter().map(|r| r.power).collect());
    Ok(CommutatorSweep { target, m, distance: d, rows, slope_difference, slope_power })
}
