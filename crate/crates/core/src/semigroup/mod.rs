//! Heat, resolvent and Poisson functions of L, negative powers, and the
//! batched profile evaluations that feed the space-time functionals.
//!
//! Grids up to [`SPECTRAL_CAP`] nodes go through the cached
//! eigendecomposition; larger grids fall back to Arnoldi exponentials and
//! restarted GMRES.

mod gaffney;

pub use gaffney::{
    fit_gaffney, gaffney_profile, offdiag_pq_profile, set_distance, uniform_bound_profile, GaffneyFamily,
    GaffneyProfile,
};

use std::collections::HashMap;
use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::{FiniteAboveNegOneF64, GaussLaguerre};
use num_complex::Complex64 as c64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::linalg::{self, gmres, krylov_expmv, norm2};
use crate::operator::DiscreteOperator;
use crate::spectral::{SpectralCalculus, SPECTRAL_CAP};

/// Largest power K accepted by the (t²L)^K families and by L^{−k}.
pub const POWER_CAP: u32 = 8;
/// Default node count of the subordination rule.
pub const DEFAULT_POISSON_NODES: usize = 256;

const KRYLOV_DIM: usize = 30;
const KRYLOV_TOL: f64 = 1e-12;
const KRYLOV_BUDGET: usize = 2_000_000;

/// Log-uniform samples t_min = t₀ < … < t_{count−1} = t_max.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub count: usize,
    pub samples: Vec<f64>,
}

impl TimeGrid {
    pub fn new(t_min: f64, t_max: f64, count: usize) -> Result<Self> {
        if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("time grid needs 0 < t_min < t_max, got [{t_min}, {t_max}]")));
        }
        if count < 16 {
            return Err(Error::InvalidParameter(format!("time grid needs count >= 16, got {count}")));
        }
        let ratio = (t_max / t_min).ln();
        let mut samples: Vec<f64> = (0..count).map(|j| t_min * (ratio * j as f64 / (count - 1) as f64).exp()).collect();
        samples[0] = t_min;
        samples[count - 1] = t_max;
        Ok(Self { t_min, t_max, count, samples })
    }

    /// The default window for a grid: from a quarter mesh width to four
    /// domain sides. Outside it every functional is resolution noise.
    pub fn for_grid(grid: &Grid, count: usize) -> Result<Self> {
        Self::new(grid.spacing() / 4.0, 4.0 * grid.max_side(), count)
    }

    /// Δ = ln(t_max/t_min)/(count − 1), the rectangle weight of dt/t.
    pub fn log_step(&self) -> f64 {
        (self.t_max / self.t_min).ln() / (self.count - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatMethod {
    /// Full Padé matrix exponential, the reference.
    DenseOracle,
    /// Arnoldi with adaptive substeps.
    Krylov,
    /// Cached eigendecomposition.
    Spectral,
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

fn check_power(k: u32) -> Result<()> {
    if k == 0 || k > POWER_CAP {
        return Err(Error::InvalidParameter(format!("power must lie in 1..={POWER_CAP}, got {k}")));
    }
    Ok(())
}

/// The eigendecomposition when the grid is small enough and it is
/// trustworthy; `None` selects the iterative paths.
pub(crate) fn spectral_of(op: &DiscreteOperator) -> Option<Arc<SpectralCalculus>> {
    if op.len() > SPECTRAL_CAP {
        return None;
    }
    op.spectral().ok()
}

fn field(op: &DiscreteOperator, values: Vec<c64>) -> ScalarField {
    ScalarField { grid: op.grid.clone(), values }
}

fn krylov_heat(op: &DiscreteOperator, t: f64, v: &[c64]) -> Result<Vec<c64>> {
    let apply = |x: &[c64]| op.apply_values(x);
    krylov_expmv(&apply, v, t, KRYLOV_DIM, KRYLOV_TOL, KRYLOV_BUDGET)
}

/// e^{−tL}v on raw values by the fastest available path.
pub(crate) fn heat_values(op: &DiscreteOperator, t: f64, v: &[c64]) -> Result<Vec<c64>> {
    if t == 0.0 {
        return Ok(v.to_vec());
    }
    match spectral_of(op) {
        Some(sc) => Ok(sc.apply(v, |m| (-t * m).exp())),
        None => krylov_heat(op, t, v),
    }
}

/// e^{−tL}f.
pub fn heat_apply(op: &DiscreteOperator, t: f64, f: &ScalarField, method: HeatMethod) -> Result<ScalarField> {
    check_time(t)?;
    op.check_field(f)?;
    if t == 0.0 {
        return Ok(f.clone());
    }
    let values = match method {
        HeatMethod::DenseOracle => {
            let mut a = op.to_dense();
            for v in a.col_iter_mut().flat_map(|c| c.iter_mut()) {
                *v *= -t;
            }
            let e = linalg::expm(a.as_ref());
            linalg::mat_vec(e.as_ref(), &f.values)
        }
        HeatMethod::Krylov => krylov_heat(op, t, &f.values)?,
        HeatMethod::Spectral => op.spectral()?.apply(&f.values, |m| (-t * m).exp()),
    };
    Ok(field(op, values))
}

/// (t²L)^K e^{−t²L}f: the heat step at time t² followed by K sparse
/// applications of t²L.
pub fn heat_power_apply(op: &DiscreteOperator, t: f64, k: u32, f: &ScalarField) -> Result<ScalarField> {
    check_time(t)?;
    check_power(k)?;
    op.check_field(f)?;
    let t2 = t * t;
    let mut v = heat_values(op, t2, &f.values)?;
    for _ in 0..k {
        v = op.apply_values(&v).into_iter().map(|x| x * t2).collect();
    }
    Ok(field(op, v))
}

fn residual_norm(op: &DiscreteOperator, shift: f64, scale: f64, x: &[c64], b: &[c64]) -> f64 {
    let lx = op.apply_values(x);
    let r: Vec<c64> = (0..x.len()).map(|i| b[i] - (x[i] * shift + lx[i] * scale)).collect();
    norm2(&r)
}

/// Solves (shift·I + scale·L)x = b, refining a spectral solve or running
/// GMRES on large grids.
fn shifted_solve(op: &DiscreteOperator, shift: f64, scale: f64, b: &[c64]) -> Result<Vec<c64>> {
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(b.to_vec());
    }
    let inv = |m: c64| {
        let d = m * scale + shift;
        if d.norm() == 0.0 {
            c64::new(0.0, 0.0)
        } else {
            d.inv()
        }
    };
    let x = match spectral_of(op) {
        Some(sc) => {
            let mut x = sc.apply(b, inv);
            for _ in 0..3 {
                let lx = op.apply_values(&x);
                let r: Vec<c64> = (0..x.len()).map(|i| b[i] - (x[i] * shift + lx[i] * scale)).collect();
                if norm2(&r) <= 1e-14 * bnorm {
                    break;
                }
                let dx = sc.apply(&r, inv);
                for (xi, di) in x.iter_mut().zip(&dx) {
                    *xi += di;
                }
            }
            x
        }
        None => {
            let apply = |v: &[c64]| {
                let lv = op.apply_values(v);
                (0..v.len()).map(|i| v[i] * shift + lv[i] * scale).collect::<Vec<_>>()
            };
            gmres(&apply, b, 80, 1e-12, 400)?
        }
    };
    let res = residual_norm(op, shift, scale, &x, b);
    if !(res <= 1e-10 * bnorm) {
        return Err(Error::Singular(format!("relative residual {:.3e} after solve", res / bnorm)));
    }
    Ok(x)
}

/// (I + t²L)^{−1}f.
pub fn resolvent_apply(op: &DiscreteOperator, t: f64, f: &ScalarField) -> Result<ScalarField> {
    check_time(t)?;
    op.check_field(f)?;
    if t == 0.0 {
        return Ok(f.clone());
    }
    Ok(field(op, shifted_solve(op, 1.0, t * t, &f.values)?))
}

type Rule = Arc<Vec<(f64, f64)>>;

/// Nodes and weights of generalized Gauss–Laguerre quadrature for the
/// weight u^{−1/2}e^{−u}, cached per node count.
pub fn laguerre_rule(nodes: usize) -> Result<Rule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    if nodes < 16 {
        return Err(Error::InvalidParameter(format!("quadrature needs at least 16 nodes, got {nodes}")));
    }
    let cache = CACHE.get_or_init(Default::default);
    if let Some(rule) = cache.lock().expect("quadrature cache poisoned").get(&nodes) {
        return Ok(rule.clone());
    }
    let degree = NonZeroUsize::new(nodes).expect("checked above");
    let alpha = FiniteAboveNegOneF64::new(-0.5).expect("valid exponent");
    let rule = Arc::new(GaussLaguerre::new(degree, alpha).as_node_weight_pairs().to_vec());
    cache.lock().expect("quadrature cache poisoned").insert(nodes, rule.clone());
    Ok(rule)
}

/// Scalar subordination factor C Σ w_k e^{−t²μ/(4u_k)} with C = 1/√π.
pub fn poisson_factor(rule: &[(f64, f64)], t: f64, mu: c64) -> c64 {
    let c = 1.0 / PI.sqrt();
    let a = mu * (t * t / 4.0);
    rule.iter().map(|&(u, w)| (-a / u).exp() * w).sum::<c64>() * c
}

/// e^{−t√L}f by subordination to the heat semigroup.
pub fn poisson_apply(op: &DiscreteOperator, t: f64, f: &ScalarField, quad_nodes: usize) -> Result<ScalarField> {
    check_time(t)?;
    op.check_field(f)?;
    let rule = laguerre_rule(quad_nodes)?;
    let values = poisson_values(op, t, &f.values, &rule)?;
    Ok(field(op, values))
}

fn poisson_values(op: &DiscreteOperator, t: f64, v: &[c64], rule: &[(f64, f64)]) -> Result<Vec<c64>> {
    if let Some(sc) = spectral_of(op) {
        return Ok(sc.apply(v, |m| poisson_factor(rule, t, m)));
    }
    let c = 1.0 / PI.sqrt();
    let parts: Vec<Vec<c64>> = rule
        .par_iter()
        .map(|&(u, w)| heat_values(op, t * t / (4.0 * u), v).map(|h| h.into_iter().map(|x| x * (w * c)).collect()))
        .collect::<Result<_>>()?;
    Ok(sum_vectors(v.len(), &parts))
}

fn sum_vectors(n: usize, parts: &[Vec<c64>]) -> Vec<c64> {
    let mut out = vec![c64::new(0.0, 0.0); n];
    for p in parts {
        for (o, x) in out.iter_mut().zip(p) {
            *o += x;
        }
    }
    out
}

/// √L f through the eigendecomposition (principal branch; Re μ ≥ 0).
pub fn sqrt_apply(op: &DiscreteOperator, f: &ScalarField) -> Result<ScalarField> {
    op.check_field(f)?;
    let sc = op.spectral()?;
    Ok(field(op, sc.apply(&f.values, |m| m.sqrt())))
}

/// Projects onto the mean-zero subspace on periodic grids, rejecting
/// inputs with a genuine kernel component.
pub(crate) fn project_mean_zero(op: &DiscreteOperator, v: &[c64]) -> Result<Vec<c64>> {
    if op.kernel_dim == 0 {
        return Ok(v.to_vec());
    }
    let mean = v.iter().sum::<c64>() / v.len() as f64;
    let scale = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if mean.norm() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::KernelComponent { mean: mean.norm() });
    }
    Ok(v.iter().map(|x| x - mean).collect())
}

/// L^{−k}f by k successive solves on the complement of the kernel.
pub fn neg_power_apply(op: &DiscreteOperator, k: u32, f: &ScalarField) -> Result<ScalarField> {
    check_power(k)?;
    op.check_field(f)?;
    let mut v = project_mean_zero(op, &f.values)?;
    for _ in 0..k {
        v = shifted_solve(op, 0.0, 1.0, &v)?;
        if op.kernel_dim == 1 {
            let mean = v.iter().sum::<c64>() / v.len() as f64;
            v.iter_mut().for_each(|x| *x -= mean);
        }
    }
    Ok(field(op, v))
}

/// Operator functions evaluated along a time grid. Heat-type profiles use
/// the t² parameterization e^{−t²L}; Poisson-type profiles use e^{−t√L}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// e^{−t²L}
    Heat,
    /// (t²L)^K e^{−t²L}
    HeatPower(u32),
    /// e^{−t√L}
    Poisson,
    /// (t√L)^{2K} e^{−t√L}
    PoissonPower(u32),
    /// t√L e^{−t√L}
    PoissonDeriv,
    /// e^{−t√L} − e^{−t²L}
    PoissonMinusHeat,
}

impl Profile {
    /// Eigenvalue-wise profile. e^{−t√μ} is taken in closed form (principal
    /// branch, Re μ ≥ 0), which is what the subordination integral equals;
    /// the Laguerre rule loses accuracy like 1e-2 once t²μ ≲ 1e-2.
    fn scalar(self, t: f64, mu: c64) -> c64 {
        let t2mu = mu * (t * t);
        let poisson = || (-(mu.sqrt() * t)).exp();
        match self {
            Profile::Heat => (-t2mu).exp(),
            Profile::HeatPower(k) => t2mu.powu(k) * (-t2mu).exp(),
            Profile::Poisson => poisson(),
            Profile::PoissonPower(k) => t2mu.powu(k) * poisson(),
            Profile::PoissonDeriv => mu.sqrt() * t * poisson(),
            Profile::PoissonMinusHeat => poisson() - (-t2mu).exp(),
        }
    }

    fn check(self) -> Result<()> {
        match self {
            Profile::HeatPower(k) | Profile::PoissonPower(k) => check_power(k),
            _ => Ok(()),
        }
    }

    fn uses_poisson(self) -> bool {
        !matches!(self, Profile::Heat | Profile::HeatPower(_))
    }

    fn apply_iterative(self, op: &DiscreteOperator, rule: &[(f64, f64)], t: f64, v: &[c64]) -> Result<Vec<c64>> {
        let t2 = t * t;
        let power = |mut x: Vec<c64>, k: u32| {
            for _ in 0..k {
                x = op.apply_values(&x).into_iter().map(|y| y * t2).collect();
            }
            x
        };
        Ok(match self {
            Profile::Heat => heat_values(op, t2, v)?,
            Profile::HeatPower(k) => power(heat_values(op, t2, v)?, k),
            Profile::Poisson => poisson_values(op, t, v, rule)?,
            Profile::PoissonPower(k) => power(poisson_values(op, t, v, rule)?, k),
            Profile::PoissonDeriv => {
                // −t ∂_t of the subordinated sum
                let c = 1.0 / PI.sqrt();
                let parts: Vec<Vec<c64>> = rule
                    .par_iter()
                    .map(|&(u, w)| {
                        let h = heat_values(op, t2 / (4.0 * u), v)?;
                        let lh = op.apply_values(&h);
                        Ok(lh.into_iter().map(|x| x * (w * c * t2 / (2.0 * u))).collect())
                    })
                    .collect::<Result<_>>()?;
                sum_vectors(v.len(), &parts)
            }
            Profile::PoissonMinusHeat => {
                let p = poisson_values(op, t, v, rule)?;
                let h = heat_values(op, t2, v)?;
                p.iter().zip(&h).map(|(a, b)| a - b).collect()
            }
        })
    }
}

/// Values of `profile(t_j)` f for every sample time, one vector per time.
/// `quad_nodes` only matters above the spectral cap, where Poisson-type
/// profiles go through the Laguerre rule.
pub fn profile_batch(
    op: &DiscreteOperator,
    f: &ScalarField,
    times: &[f64],
    profile: Profile,
    quad_nodes: usize,
) -> Result<Vec<Vec<c64>>> {
    op.check_field(f)?;
    profile.check()?;
    for &t in times {
        check_time(t)?;
    }
    match spectral_of(op) {
        Some(sc) => Ok(sc.apply_batch(&f.values, times.len(), |j, mu| profile.scalar(times[j], mu))),
        None => {
            let rule = if profile.uses_poisson() { laguerre_rule(quad_nodes)? } else { Arc::new(Vec::new()) };
            times.par_iter().map(|&t| profile.apply_iterative(op, &rule, t, &f.values)).collect()
        }
    }
}

#[cfg(test)]
mod tests;
