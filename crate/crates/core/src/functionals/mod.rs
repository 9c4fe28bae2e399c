//! Square functions, vertical square functions and non-tangential maximal
//! functions, all evaluated from a [`SpaceTimeField`] sampled on a
//! log-uniform time grid.
//!
//! Cones are Γ^α(x) = {(y, t) : |x − y| < αt} restricted to the sampled
//! times. `dy dt / t^{n+1}` becomes cell volume × Δ × t_j^{−n}, with
//! Δ the log step of the grid.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::c64;
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::operator::{gradient_values, DiscreteOperator};
use crate::semigroup::{profile_batch, Profile, TimeGrid, DEFAULT_POISSON_NODES};

#[cfg(test)]
mod tests;

/// Aperture and time truncation of a cone. Bounds are inclusive so that
/// the default (0, ∞) keeps every sample of the time grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub aperture: f64,
    pub t_lower: f64,
    pub t_upper: f64,
}

impl ConeSpec {
    pub fn new(aperture: f64) -> Result<Self> {
        Self::truncated(aperture, 0.0, f64::INFINITY)
    }

    pub fn truncated(aperture: f64, t_lower: f64, t_upper: f64) -> Result<Self> {
        if !(aperture > 0.0 && aperture.is_finite()) {
            return Err(Error::InvalidParameter(format!("aperture must be positive, got {aperture}")));
        }
        if !(t_lower >= 0.0 && t_upper > t_lower) {
            return Err(Error::InvalidParameter(format!(
                "cone needs 0 <= t_lower < t_upper, got ({t_lower}, {t_upper})"
            )));
        }
        Ok(Self { aperture, t_lower, t_upper })
    }

    pub fn keeps(&self, t: f64) -> bool {
        self.t_lower <= t && t <= self.t_upper
    }
}

impl Default for ConeSpec {
    fn default() -> Self {
        Self { aperture: 1.0, t_lower: 0.0, t_upper: f64::INFINITY }
    }
}

/// F(y, t_j) with one or more components per sample. Layout is time-major:
/// `values[(j * components + c) * nodes + y]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeField {
    pub grid: Grid,
    pub times: TimeGrid,
    pub components: usize,
    pub values: Vec<c64>,
    pub integrand_tag: String,
}

impl SpaceTimeField {
    pub fn new(grid: Grid, times: TimeGrid, components: usize, values: Vec<c64>, tag: &str) -> Result<Self> {
        if components == 0 || values.len() != grid.len() * times.len() * components {
            return Err(Error::DimensionMismatch(format!(
                "space-time field has {} values, expected {} nodes x {} times x {} components",
                values.len(),
                grid.len(),
                times.len(),
                components
            )));
        }
        Ok(Self { grid, times, components, values, integrand_tag: tag.to_string() })
    }

    pub fn zeros(grid: &Grid, times: &TimeGrid, components: usize) -> Self {
        let len = grid.len() * times.len() * components;
        Self {
            grid: grid.clone(),
            times: times.clone(),
            components,
            values: vec![c64::new(0.0, 0.0); len],
            integrand_tag: "zero".into(),
        }
    }

    /// Stack per-time component vectors, `layers[j][c][y]`.
    pub fn from_layers(grid: &Grid, times: &TimeGrid, layers: Vec<Vec<Vec<c64>>>, tag: &str) -> Result<Self> {
        let components = layers.first().map_or(1, |l| l.len());
        let values: Vec<c64> = layers.into_iter().flatten().flatten().collect();
        Self::new(grid.clone(), times.clone(), components, values, tag)
    }

    pub fn slice(&self, j: usize, c: usize) -> &[c64] {
        let n = self.grid.len();
        let start = (j * self.components + c) * n;
        &self.values[start..start + n]
    }

    /// Σ_c |F_c(y, t_j)|² for every node y.
    pub fn energy(&self, j: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.grid.len()];
        for c in 0..self.components {
            for (acc, v) in e.iter_mut().zip(self.slice(j, c)) {
                *acc += v.norm_sqr();
            }
        }
        e
    }

    pub fn scale(&self, s: c64) -> Self {
        Self { values: self.values.iter().map(|v| v * s).collect(), ..self.clone() }
    }
}

/// Kinds of conical square function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SquareKind {
    /// t²L e^{−t²L}
    #[serde(rename = "heat")]
    Heat,
    /// (t²L)^K e^{−t²L}
    #[serde(rename = "heat_K")]
    HeatPower,
    /// t∇ e^{−t√L}
    #[serde(rename = "poisson_grad")]
    PoissonGrad,
    /// (t√L)^{2K} e^{−t√L}
    #[serde(rename = "poisson_K")]
    PoissonPower,
    /// t√L e^{−t√L}
    #[serde(rename = "poisson_tderiv")]
    PoissonDeriv,
    /// t∇_{y,t} e^{−t√L}
    #[serde(rename = "poisson_full_grad")]
    PoissonFullGrad,
}

/// Kinds of vertical (cone-free) square function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerticalKind {
    #[serde(rename = "g_h")]
    Heat,
    #[serde(rename = "g_h_M")]
    HeatPower,
    #[serde(rename = "g_P")]
    PoissonGrad,
    #[serde(rename = "g_P_bar")]
    PoissonDeriv,
    /// (e^{−t√L} − e^{−t²L})
    #[serde(rename = "g_P_aux")]
    PoissonAux,
}

/// Kinds of non-tangential maximal function. The cone kinds take a sup
/// over (y, t) ∈ Γ^β(x) of ball means over B(y, βt); `Heat` and `Poisson`
/// use β = 1. The star kinds take a sup over t of means over B(x, t).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaximalKind {
    #[serde(rename = "heat")]
    Heat,
    #[serde(rename = "heat_beta")]
    HeatBeta,
    #[serde(rename = "heat_star")]
    HeatStar,
    #[serde(rename = "heat_star_M")]
    HeatStarPower,
    #[serde(rename = "poisson")]
    Poisson,
    #[serde(rename = "poisson_star")]
    PoissonStar,
}

macro_rules! kind_from_str {
    ($($t:ty),*) => {$(
        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                serde_json::from_value(serde_json::Value::String(s.to_string()))
                    .map_err(|_| Error::Config(format!("unknown {} '{s}'", stringify!($t))))
            }
        }
    )*};
}
kind_from_str!(SquareKind, VerticalKind, MaximalKind);

fn check_k(k: u32) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter("power must be >= 1".into()));
    }
    Ok(())
}

/// t_j ∇ applied to every time layer of a Poisson extension.
fn grad_layers(grid: &Grid, times: &TimeGrid, layers: &[Vec<c64>]) -> Vec<Vec<Vec<c64>>> {
    layers
        .iter()
        .zip(&times.samples)
        .map(|(u, &t)| {
            gradient_values(grid, u).components.into_iter().map(|c| c.into_iter().map(|v| v * t).collect()).collect()
        })
        .collect()
}

fn scalar_layers(layers: Vec<Vec<c64>>) -> Vec<Vec<Vec<c64>>> {
    layers.into_iter().map(|l| vec![l]).collect()
}

/// The integrand of a conical square function, sampled on `times`.
pub fn square_integrand(
    f: &ScalarField,
    op: &DiscreteOperator,
    kind: SquareKind,
    k: u32,
    times: &TimeGrid,
) -> Result<SpaceTimeField> {
    let ts = &times.samples;
    let batch = |p: Profile| profile_batch(op, f, ts, p, DEFAULT_POISSON_NODES);
    let (layers, tag) = match kind {
        SquareKind::Heat => (scalar_layers(batch(Profile::HeatPower(1))?), "t2L_heat".to_string()),
        SquareKind::HeatPower => {
            check_k(k)?;
            (scalar_layers(batch(Profile::HeatPower(k))?), format!("t2L^{k}_heat"))
        }
        SquareKind::PoissonGrad => (grad_layers(&op.grid, times, &batch(Profile::Poisson)?), "t_grad_poisson".into()),
        SquareKind::PoissonPower => {
            check_k(k)?;
            (scalar_layers(batch(Profile::PoissonPower(k))?), format!("tsqrtL^{}_poisson", 2 * k))
        }
        SquareKind::PoissonDeriv => (scalar_layers(batch(Profile::PoissonDeriv)?), "tsqrtL_poisson".into()),
        SquareKind::PoissonFullGrad => {
            let mut layers = grad_layers(&op.grid, times, &batch(Profile::Poisson)?);
            // t∂_t e^{−t√L} = −t√L e^{−t√L}
            for (l, d) in layers.iter_mut().zip(batch(Profile::PoissonDeriv)?) {
                l.push(d.into_iter().map(|v| -v).collect());
            }
            (layers, "t_grad_xt_poisson".into())
        }
    };
    SpaceTimeField::from_layers(&op.grid, times, layers, &tag)
}

/// The integrand of a vertical square function.
pub fn vertical_integrand(
    f: &ScalarField,
    op: &DiscreteOperator,
    kind: VerticalKind,
    m: u32,
    times: &TimeGrid,
) -> Result<SpaceTimeField> {
    let ts = &times.samples;
    let batch = |p: Profile| profile_batch(op, f, ts, p, DEFAULT_POISSON_NODES);
    let (layers, tag) = match kind {
        VerticalKind::Heat => (scalar_layers(batch(Profile::HeatPower(1))?), "t2L_heat".to_string()),
        VerticalKind::HeatPower => {
            check_k(m)?;
            (scalar_layers(batch(Profile::HeatPower(m))?), format!("t2L^{m}_heat"))
        }
        VerticalKind::PoissonGrad => (grad_layers(&op.grid, times, &batch(Profile::Poisson)?), "t_grad_poisson".into()),
        VerticalKind::PoissonDeriv => (scalar_layers(batch(Profile::PoissonDeriv)?), "tsqrtL_poisson".into()),
        VerticalKind::PoissonAux => (scalar_layers(batch(Profile::PoissonMinusHeat)?), "poisson_minus_heat".into()),
    };
    SpaceTimeField::from_layers(&op.grid, times, layers, &tag)
}

/// (Σ_j w_j Σ_{|x−y|<αt_j} |F(y,t_j)|²)^{1/2} with w_j = vol·Δ·t_j^{−n}.
pub fn cone_integrate(field: &SpaceTimeField, cone: &ConeSpec) -> ScalarField {
    let grid = &field.grid;
    let offsets = grid.offsets();
    let base = grid.cell_volume() * field.times.log_step();
    let n = grid.dim() as i32;
    let layers: Vec<(Vec<f64>, usize, f64)> = field
        .times
        .samples
        .iter()
        .enumerate()
        .filter(|(_, &t)| cone.keeps(t))
        .map(|(j, &t)| {
            let reach = offsets.partition_point(|(_, r)| *r < cone.aperture * t);
            (field.energy(j), reach, base * t.powi(-n))
        })
        .collect();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|x| {
            let mut total = 0.0;
            for (e, reach, w) in &layers {
                let mut s = 0.0;
                for (d, _) in &offsets[..*reach] {
                    if let Some(y) = grid.shift(x, *d) {
                        s += e[y];
                    }
                }
                total += w * s;
            }
            c64::new(total.sqrt(), 0.0)
        })
        .collect();
    ScalarField { grid: grid.clone(), values }
}

/// (Σ_j w_j |F(x,t_j)|²)^{1/2}, trapezoid weights in log t.
pub fn vertical_integrate(field: &SpaceTimeField) -> ScalarField {
    let count = field.times.len();
    let delta = field.times.log_step();
    let mut acc = vec![0.0; field.grid.len()];
    for j in 0..count {
        let w = if j == 0 || j + 1 == count { 0.5 * delta } else { delta };
        for (a, e) in acc.iter_mut().zip(field.energy(j)) {
            *a += w * e;
        }
    }
    ScalarField { grid: field.grid.clone(), values: acc.into_iter().map(|v| c64::new(v.sqrt(), 0.0)).collect() }
}

pub fn square_function(
    f: &ScalarField,
    op: &DiscreteOperator,
    cone: &ConeSpec,
    kind: SquareKind,
    k: u32,
    times: &TimeGrid,
) -> Result<ScalarField> {
    Ok(cone_integrate(&square_integrand(f, op, kind, k, times)?, cone))
}

pub fn vertical_square_function(
    f: &ScalarField,
    op: &DiscreteOperator,
    kind: VerticalKind,
    m: u32,
    times: &TimeGrid,
) -> Result<ScalarField> {
    Ok(vertical_integrate(&vertical_integrand(f, op, kind, m, times)?))
}

/// Mean of `energy` over the lattice ball B(y, radius) for every y. A ball
/// with no nodes falls back to the node itself.
fn ball_means(grid: &Grid, energy: &[f64], offsets: &[([isize; 2], f64)], radius: f64) -> Vec<f64> {
    let reach = offsets.partition_point(|(_, r)| *r < radius);
    (0..grid.len())
        .into_par_iter()
        .map(|y| {
            let (mut s, mut count) = (0.0, 0usize);
            for (d, _) in &offsets[..reach] {
                if let Some(z) = grid.shift(y, *d) {
                    s += energy[z];
                    count += 1;
                }
            }
            if count == 0 {
                energy[y]
            } else {
                s / count as f64
            }
        })
        .collect()
}

/// Non-tangential maximal function of a sampled semigroup image.
pub fn maximal_from_field(field: &SpaceTimeField, beta: f64, star: bool) -> Result<ScalarField> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("aperture must be positive, got {beta}")));
    }
    let grid = &field.grid;
    let offsets = grid.offsets();
    let mut best = vec![0.0f64; grid.len()];
    for (j, &t) in field.times.samples.iter().enumerate() {
        let radius = if star { t } else { beta * t };
        let means = ball_means(grid, &field.energy(j), &offsets, radius);
        if star {
            for (b, m) in best.iter_mut().zip(&means) {
                *b = b.max(*m);
            }
            continue;
        }
        let reach = offsets.partition_point(|(_, r)| *r < beta * t);
        let cone_max: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|x| {
                offsets[..reach].iter().filter_map(|(d, _)| grid.shift(x, *d)).map(|y| means[y]).fold(0.0, f64::max)
            })
            .collect();
        for (b, m) in best.iter_mut().zip(&cone_max) {
            *b = b.max(*m);
        }
    }
    Ok(ScalarField { grid: grid.clone(), values: best.into_iter().map(|v| c64::new(v.sqrt(), 0.0)).collect() })
}

pub fn nontangential_max(
    f: &ScalarField,
    op: &DiscreteOperator,
    kind: MaximalKind,
    beta: f64,
    m: u32,
    times: &TimeGrid,
) -> Result<ScalarField> {
    let ts = &times.samples;
    let (profile, aperture, star) = match kind {
        MaximalKind::Heat => (Profile::Heat, 1.0, false),
        MaximalKind::HeatBeta => (Profile::Heat, beta, false),
        MaximalKind::HeatStar => (Profile::Heat, 1.0, true),
        MaximalKind::HeatStarPower => {
            check_k(m)?;
            (Profile::HeatPower(m), 1.0, true)
        }
        MaximalKind::Poisson => (Profile::Poisson, 1.0, false),
        MaximalKind::PoissonStar => (Profile::Poisson, 1.0, true),
    };
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("aperture must be positive, got {beta}")));
    }
    let layers = profile_batch(op, f, ts, profile, DEFAULT_POISSON_NODES)?;
    let field = SpaceTimeField::from_layers(&op.grid, times, scalar_layers(layers), &format!("{profile:?}"))?;
    maximal_from_field(&field, aperture, star)
}

/// Hardy–Littlewood maximal function: sup over closed lattice balls
/// centered at x, one per distinct lattice radius, of the mean of |f|.
pub fn hl_maximal(f: &ScalarField) -> ScalarField {
    let grid = &f.grid;
    let offsets = grid.offsets();
    let abs = f.abs_values();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|x| {
            let (mut s, mut count, mut best) = (0.0, 0usize, 0.0f64);
            for (i, (d, r)) in offsets.iter().enumerate() {
                if let Some(y) = grid.shift(x, *d) {
                    s += abs[y];
                    count += 1;
                }
                let last_of_radius = offsets.get(i + 1).is_none_or(|(_, next)| *next > *r);
                if last_of_radius && count > 0 {
                    best = best.max(s / count as f64);
                }
            }
            c64::new(best, 0.0)
        })
        .collect();
    ScalarField { grid: grid.clone(), values }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApertureReport {
    pub aperture: f64,
    pub norm_wide: f64,
    pub norm_unit: f64,
    pub ratio: f64,
}

/// ‖S^α F‖₁ against ‖S¹ F‖₁. Two zero norms give ratio 1.
pub fn aperture_compare(field: &SpaceTimeField, aperture: f64) -> Result<ApertureReport> {
    if !(aperture >= 1.0 && aperture.is_finite()) {
        return Err(Error::InvalidParameter(format!("aperture must be >= 1, got {aperture}")));
    }
    let norm_wide = cone_integrate(field, &ConeSpec::new(aperture)?).norm_l1();
    let norm_unit = cone_integrate(field, &ConeSpec::default()).norm_l1();
    let ratio = if norm_wide == 0.0 && norm_unit == 0.0 { 1.0 } else { norm_wide / norm_unit };
    Ok(ApertureReport { aperture, norm_wide, norm_unit, ratio })
}
