//! Measured off-diagonal decay of the heat and resolvent families.

use std::fmt::Write as _;

use faer::linalg::solvers::SolveLstsq;
use faer::Mat;
use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use super::{check_time, heat_values, shifted_solve, spectral_of, TimeGrid};
use crate::error::{Error, Result};
use crate::grid::{lp_norm, Grid, ScalarField};
use crate::operator::{gradient_values, DiscreteOperator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaffneyFamily {
    /// e^{−tL}
    Heat,
    /// tLe^{−tL}
    THeatDeriv,
    /// t^{1/2}∇e^{−tL}
    GradHeat,
    /// (1 + tL)^{−1}
    Resolvent,
    /// t^{1/2}∇(1 + tL)^{−1}
    GradResolvent,
}

impl GaffneyFamily {
    pub const ALL: [GaffneyFamily; 5] = [
        GaffneyFamily::Heat,
        GaffneyFamily::THeatDeriv,
        GaffneyFamily::GradHeat,
        GaffneyFamily::Resolvent,
        GaffneyFamily::GradResolvent,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            GaffneyFamily::Heat => "heat",
            GaffneyFamily::THeatDeriv => "t_heat_deriv",
            GaffneyFamily::GradHeat => "grad_heat",
            GaffneyFamily::Resolvent => "resolvent",
            GaffneyFamily::GradResolvent => "grad_resolvent",
        }
    }

    fn is_gradient(self) -> bool {
        matches!(self, GaffneyFamily::GradHeat | GaffneyFamily::GradResolvent)
    }

    fn scalar(self, t: f64, mu: c64) -> c64 {
        match self {
            GaffneyFamily::Heat | GaffneyFamily::GradHeat => (-mu * t).exp(),
            GaffneyFamily::THeatDeriv => mu * t * (-mu * t).exp(),
            GaffneyFamily::Resolvent | GaffneyFamily::GradResolvent => (mu * t + 1.0).inv(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaffneyProfile {
    pub family: GaffneyFamily,
    pub set_e: Vec<usize>,
    pub set_f: Vec<usize>,
    pub distances: Vec<f64>,
    pub t_values: Vec<f64>,
    /// ‖S_t f‖_{L^q(F)} / ‖f‖_{L^p(E)} for f the normalized indicator of E.
    pub measured_norms: Vec<f64>,
    /// Exact L^p(E) → L^q(F) operator norms where they have a closed form.
    pub operator_norms: Option<Vec<f64>>,
    /// t^{(n/q − n/p)/2}, for the L^p–L^q profiles.
    pub predicted_prefactor: Option<Vec<f64>>,
    pub p: f64,
    pub q: f64,
    pub fitted_c: Option<f64>,
    pub fitted_beta: Option<f64>,
}

impl GaffneyProfile {
    /// CSV with columns family, dist, t, norm, fitted_c, fitted_beta.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("family,dist,t,norm,fitted_c,fitted_beta\n");
        let fmt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |x| x.to_string());
        for (t, n) in self.t_values.iter().zip(&self.measured_norms) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                self.family.tag(),
                self.distances[0],
                t,
                n,
                fmt(self.fitted_c),
                fmt(self.fitted_beta)
            );
        }
        out
    }
}

/// Physical distance between two node sets; an error when they share a
/// node (distance zero).
pub fn set_distance(grid: &Grid, e: &[usize], f: &[usize]) -> Result<f64> {
    if e.is_empty() || f.is_empty() {
        return Err(Error::InvalidParameter("E and F must be nonempty".into()));
    }
    let mut d = f64::INFINITY;
    for &x in e {
        for &y in f {
            d = d.min(grid.distance(x, y));
        }
    }
    if d <= 0.0 {
        return Err(Error::OverlappingSets);
    }
    Ok(d)
}

/// Pointwise magnitudes of the family applied to `v` at every time.
fn family_magnitudes(op: &DiscreteOperator, family: GaffneyFamily, times: &[f64], v: &[c64]) -> Result<Vec<Vec<f64>>> {
    for &t in times {
        check_time(t)?;
    }
    let raw: Vec<Vec<c64>> = match spectral_of(op) {
        Some(sc) => sc.apply_batch(v, times.len(), |j, mu| family.scalar(times[j], mu)),
        None => times
            .iter()
            .map(|&t| match family {
                GaffneyFamily::Heat | GaffneyFamily::GradHeat => heat_values(op, t, v),
                GaffneyFamily::THeatDeriv => {
                    heat_values(op, t, v).map(|h| op.apply_values(&h).into_iter().map(|x| x * t).collect())
                }
                GaffneyFamily::Resolvent | GaffneyFamily::GradResolvent => shifted_solve(op, 1.0, t, v),
            })
            .collect::<Result<_>>()?,
    };
    Ok(raw
        .into_iter()
        .zip(times)
        .map(|(values, &t)| {
            if family.is_gradient() {
                let g = gradient_values(&op.grid, &values);
                g.magnitude().into_iter().map(|m| m * t.sqrt()).collect()
            } else {
                values.iter().map(|x| x.norm()).collect()
            }
        })
        .collect())
}

fn norm_on(grid: &Grid, mags: &[f64], nodes: &[usize], q: f64) -> f64 {
    let values: Vec<c64> = nodes.iter().map(|&x| c64::new(mags[x], 0.0)).collect();
    let all: Vec<usize> = (0..values.len()).collect();
    lp_norm(grid, &values, Some(&all), q)
}

fn normalized_indicator(grid: &Grid, e: &[usize], p: f64) -> ScalarField {
    let chi = ScalarField::indicator(grid, e);
    let n = chi.norm_lp(p);
    chi.scale(c64::new(1.0 / n, 0.0))
}

/// Sweeps the family over `times` for f = χ_E/‖χ_E‖₂ and fits the decay
/// log N ≈ a − (d²/(ct))^β.
pub fn gaffney_profile(
    op: &DiscreteOperator,
    family: GaffneyFamily,
    e: &[usize],
    f: &[usize],
    times: &TimeGrid,
) -> Result<GaffneyProfile> {
    let d = set_distance(&op.grid, e, f)?;
    let src = normalized_indicator(&op.grid, e, 2.0);
    let mags = family_magnitudes(op, family, &times.samples, &src.values)?;
    let norms: Vec<f64> = mags.iter().map(|m| norm_on(&op.grid, m, f, 2.0)).collect();
    let fit = fit_gaffney(d, &times.samples, &norms);
    Ok(GaffneyProfile {
        family,
        set_e: e.to_vec(),
        set_f: f.to_vec(),
        distances: vec![d],
        t_values: times.samples.clone(),
        measured_norms: norms,
        operator_norms: None,
        predicted_prefactor: None,
        p: 2.0,
        q: 2.0,
        fitted_c: fit.map(|x| x.0),
        fitted_beta: fit.map(|x| x.1),
    })
}

/// Fits log N = a + γ log t − b t^{−β} over the off-diagonal samples
/// (t ≤ d²/4, so the exponent is at least one) with a representable norm: a scan over β with linear least squares in
/// (a, γ, b). The log t column absorbs the algebraic prefactor of the
/// kernel so that β measures the exponential rate alone. Returns (c, β)
/// with b = (d²/c)^β.
pub fn fit_gaffney(d: f64, t: &[f64], norms: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(norms)
        .filter(|(ti, ni)| **ti <= d * d / 4.0 && **ni > 1e-250)
        .map(|(ti, ni)| (*ti, ni.ln()))
        .collect();
    if pts.len() < 5 {
        return None;
    }
    let rows = pts.len();
    let rhs = Mat::from_fn(rows, 1, |i, _| c64::new(pts[i].1, 0.0));
    let mut best: Option<(f64, f64, f64)> = None;
    for i in 1..=3000 {
        let beta = i as f64 * 0.001;
        let design = Mat::from_fn(rows, 3, |r, col| {
            let ti = pts[r].0;
            c64::new(
                match col {
                    0 => 1.0,
                    1 => ti.ln(),
                    _ => -ti.powf(-beta),
                },
                0.0,
            )
        });
        let coef = design.qr().solve_lstsq(&rhs);
        let b = coef[(2, 0)].re;
        if !(b > 0.0) {
            continue;
        }
        let fitted = &design * coef.subrows(0, 3);
        let ssr: f64 = (0..rows).map(|r| (fitted[(r, 0)] - rhs[(r, 0)]).norm_sqr()).sum();
        if best.is_none_or(|bb| ssr < bb.0) {
            best = Some((ssr, beta, b));
        }
    }
    best.map(|(_, beta, b)| (d * d / b.powf(1.0 / beta), beta))
}

/// Kernel block K[x][y] = (e^{−tL}δ_y)(x) for x ∈ F, y ∈ E (unit vectors,
/// not volume normalized), one block per time.
fn heat_kernel_blocks(op: &DiscreteOperator, times: &[f64], e: &[usize], f: &[usize]) -> Result<Vec<Vec<Vec<c64>>>> {
    let n = op.len();
    let mut blocks = vec![vec![vec![c64::new(0.0, 0.0); e.len()]; f.len()]; times.len()];
    for (col, &y) in e.iter().enumerate() {
        let mut delta = vec![c64::new(0.0, 0.0); n];
        delta[y] = c64::new(1.0, 0.0);
        let cols: Vec<Vec<c64>> = match spectral_of(op) {
            Some(sc) => sc.apply_batch(&delta, times.len(), |j, mu| (-mu * times[j]).exp()),
            None => times.iter().map(|&t| heat_values(op, t, &delta)).collect::<Result<_>>()?,
        };
        for (j, c) in cols.iter().enumerate() {
            for (row, &x) in f.iter().enumerate() {
                blocks[j][row][col] = c[x];
            }
        }
    }
    Ok(blocks)
}

fn block_operator_norm(grid: &Grid, k: &[Vec<c64>], p: f64, q: f64) -> Option<f64> {
    let vol = grid.cell_volume();
    let rows = k.len();
    let cols = k.first().map_or(0, |r| r.len());
    if p == 1.0 {
        let best = (0..cols)
            .map(|y| {
                let column: Vec<c64> = (0..rows).map(|x| k[x][y]).collect();
                let all: Vec<usize> = (0..rows).collect();
                lp_norm(grid, &column, Some(&all), q) / vol
            })
            .fold(0.0, f64::max);
        return Some(best);
    }
    if p == 2.0 && q.is_infinite() {
        let best = k.iter().map(|row| row.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()).fold(0.0, f64::max);
        return Some(best / vol.sqrt());
    }
    if p == 2.0 && q == 2.0 {
        let m = Mat::from_fn(rows, cols, |i, j| k[i][j]);
        return m.singular_values().ok().and_then(|s| s.first().copied());
    }
    None
}

/// L^p(E) → L^q(F) profile of the heat semigroup: indicator ratios, exact
/// operator norms where available, and the scaling prefactor
/// t^{(n/q − n/p)/2}.
pub fn offdiag_pq_profile(
    op: &DiscreteOperator,
    p: f64,
    q: f64,
    e: &[usize],
    f: &[usize],
    times: &TimeGrid,
) -> Result<GaffneyProfile> {
    if !(p >= 1.0 && q >= p) {
        return Err(Error::InvalidParameter(format!("need 1 <= p <= q <= inf, got p={p}, q={q}")));
    }
    let d = set_distance(&op.grid, e, f)?;
    let n = op.grid.dim() as f64;
    let src = normalized_indicator(&op.grid, e, p);
    let mags = family_magnitudes(op, GaffneyFamily::Heat, &times.samples, &src.values)?;
    let norms: Vec<f64> = mags.iter().map(|m| norm_on(&op.grid, m, f, q)).collect();
    let closed_form = p == 1.0 || (p == 2.0 && (q == 2.0 || q.is_infinite()));
    let operator_norms = if closed_form {
        let blocks = heat_kernel_blocks(op, &times.samples, e, f)?;
        blocks.iter().map(|b| block_operator_norm(&op.grid, b, p, q)).collect::<Option<Vec<_>>>()
    } else {
        None
    };
    let inv_q = if q.is_infinite() { 0.0 } else { 1.0 / q };
    let exponent = (n * inv_q - n / p) / 2.0;
    let prefactor = times.samples.iter().map(|t| t.powf(exponent)).collect();
    let fit = if p == 2.0 && q == 2.0 { fit_gaffney(d, &times.samples, &norms) } else { None };
    Ok(GaffneyProfile {
        family: GaffneyFamily::Heat,
        set_e: e.to_vec(),
        set_f: f.to_vec(),
        distances: vec![d],
        t_values: times.samples.clone(),
        measured_norms: norms,
        operator_norms,
        predicted_prefactor: Some(prefactor),
        p,
        q,
        fitted_c: fit.map(|x| x.0),
        fitted_beta: fit.map(|x| x.1),
    })
}

/// Measured L² → L² operator norm of the family at every time (dense,
/// through the eigendecomposition).
pub fn uniform_bound_profile(op: &DiscreteOperator, family: GaffneyFamily, times: &TimeGrid) -> Result<Vec<f64>> {
    let n = op.len();
    let sc = op.spectral()?;
    times
        .samples
        .iter()
        .map(|&t| {
            check_time(t)?;
            let mut cols = Vec::with_capacity(n);
            for y in 0..n {
                let mut delta = vec![c64::new(0.0, 0.0); n];
                delta[y] = c64::new(1.0, 0.0);
                let v = sc.apply(&delta, |mu| family.scalar(t, mu));
                if family.is_gradient() {
                    let g = gradient_values(&op.grid, &v);
                    cols.push(g.components.concat().into_iter().map(|x| x * t.sqrt()).collect::<Vec<_>>());
                } else {
                    cols.push(v);
                }
            }
            let rows = cols[0].len();
            let m = Mat::from_fn(rows, n, |i, j| cols[j][i]);
            m.singular_values().map_err(|e| Error::Numerical(format!("singular values failed: {e:?}"))).map(|s| s[0])
        })
        .collect()
}
