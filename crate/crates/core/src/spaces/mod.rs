//! BMO norms adapted to L, the Carleson functional of a field, tent-space
//! norms and the Calderón-type duality pairing.
//!
//! Cube family: dyadic sides 2h, 4h, ... up to the shortest grid side. In
//! 1D every corner position is used; in 2D corners sit on the lattice of
//! multiples of the side. Ball family: radii h, 2h, 4h, ... up to half
//! the largest side, centered at every node in 1D and on the lattice of
//! multiples of the radius in 2D.
//!
//! The growth hypothesis used for Carleson lower bounds holds for every
//! field on a finite grid, so nothing is checked for it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::c64;
use crate::error::{Error, Result};
use crate::functionals::{cone_integrate, ConeSpec, SpaceTimeField};
use crate::grid::{lp_norm, Cube, Grid, ScalarField};
use crate::operator::DiscreteOperator;
use crate::semigroup::{heat_values, profile_batch, project_mean_zero, resolvent_apply, Profile, TimeGrid};

#[cfg(test)]
mod tests;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BmoVariant {
    /// (I − e^{−ℓ²L})^M, L² averages
    Heat,
    /// (I − (I + ℓ²L)^{−1})^M, L² averages
    Resolvent,
    /// (I − e^{−ℓ²L})^M, L^p averages
    #[serde(rename = "p")]
    PVariant,
}

impl std::str::FromStr for BmoVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidParameter(format!("unknown BMO variant {s:?}")))
    }
}

/// A cube of the dyadic family: lowest corner and node count per side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CubeKey {
    pub side_nodes: usize,
    pub corner: [usize; 2],
}

impl CubeKey {
    pub fn cube(&self) -> Cube {
        Cube::from_corner(self.corner, self.side_nodes)
    }

    /// Nodes of the cube, wrapping on periodic grids.
    pub fn nodes(&self, grid: &Grid) -> Vec<usize> {
        let sizes = grid.sizes();
        let ys = if grid.dim() == 2 { self.side_nodes } else { 1 };
        let mut out = Vec::with_capacity(self.side_nodes * ys);
        for b in 0..ys {
            for a in 0..self.side_nodes {
                let i = (self.corner[0] + a) % sizes[0];
                let j = if grid.dim() == 2 { (self.corner[1] + b) % sizes[1] } else { 0 };
                out.push(grid.node([i, j]));
            }
        }
        out
    }
}

/// The fixed dyadic cube family, sorted by side then corner.
pub fn dyadic_cube_family(grid: &Grid) -> Vec<CubeKey> {
    let sizes = grid.sizes();
    let shortest = *sizes.iter().min().unwrap_or(&0);
    let mut out = Vec::new();
    let mut side = 2;
    while side <= shortest {
        if grid.dim() == 1 {
            let n = sizes[0];
            let positions = if grid.is_periodic() {
                if side == n {
                    1
                } else {
                    n
                }
            } else {
                n - side + 1
            };
            out.extend((0..positions).map(|c| CubeKey { side_nodes: side, corner: [c, 0] }));
        } else {
            for cy in (0..=sizes[1] - side).step_by(side) {
                for cx in (0..=sizes[0] - side).step_by(side) {
                    out.push(CubeKey { side_nodes: side, corner: [cx, cy] });
                }
            }
        }
        side *= 2;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeValue {
    pub key: CubeKey,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmoReport {
    pub variant: BmoVariant,
    pub m: u32,
    pub p: f64,
    pub per_cube: Vec<CubeValue>,
    pub norm: f64,
    pub argmax: Option<CubeKey>,
    /// |mean f| on periodic grids, 0 otherwise. Constants are annihilated
    /// by every variant, so the norm is that of the mean-zero part.
    pub kernel_mean: f64,
}

impl BmoReport {
    /// `variant,M,p,side,cx,cy,value`, one row per cube.
    pub fn to_csv(&self) -> String {
        let variant =
            serde_json::to_value(self.variant).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        let mut out = String::from("variant,M,p,side,cx,cy,value\n");
        for c in &self.per_cube {
            out.push_str(&format!(
                "{variant},{},{},{},{},{},{:e}\n",
                self.m, self.p, c.key.side_nodes, c.key.corner[0], c.key.corner[1], c.value
            ));
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "variant": self.variant,
            "M": self.m,
            "p": self.p,
            "norm": self.norm,
            "argmax": self.argmax,
            "cubes": self.per_cube.len(),
            "kernel_mean": self.kernel_mean,
        })
    }
}

fn check_order(m: u32, grid: &Grid) -> Result<()> {
    if m == 0 || (m as f64) <= grid.dim() as f64 / 4.0 {
        return Err(Error::InvalidParameter(format!("order M = {m} must exceed n/4 = {}", grid.dim() as f64 / 4.0)));
    }
    Ok(())
}

fn binomial(m: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64)
}

/// (I − A_ℓ)^M f = Σ_k C(M, k) (−1)^k A_ℓ^k f.
fn oscillation(op: &DiscreteOperator, f: &ScalarField, m: u32, ell: f64, variant: BmoVariant) -> Result<Vec<c64>> {
    let mut power = f.values.clone();
    let mut acc = power.clone();
    for k in 1..=m {
        power = match variant {
            BmoVariant::Resolvent => {
                resolvent_apply(op, ell, &ScalarField { grid: f.grid.clone(), values: power })?.values
            }
            _ => heat_values(op, ell * ell, &power)?,
        };
        let c = binomial(m, k) * if k % 2 == 0 { 1.0 } else { -1.0 };
        for (a, v) in acc.iter_mut().zip(&power) {
            *a += v * c;
        }
    }
    Ok(acc)
}

fn kernel_mean(op: &DiscreteOperator, f: &ScalarField) -> f64 {
    if op.kernel_dim > 0 {
        f.mean().norm()
    } else {
        0.0
    }
}

fn check_exponent(variant: BmoVariant, p: f64) -> Result<()> {
    match variant {
        BmoVariant::PVariant if !(p > 1.0 && p.is_finite()) => {
            Err(Error::InvalidParameter(format!("BMO exponent must lie in (1, inf), got {p}")))
        }
        BmoVariant::Heat | BmoVariant::Resolvent if p != 2.0 => {
            Err(Error::InvalidParameter(format!("{variant:?} variant uses p = 2, got {p}")))
        }
        _ => Ok(()),
    }
}

/// sup over the dyadic family of ((1/|Q|) ∫_Q |(I − A_{ℓ(Q)})^M f|^p)^{1/p}.
pub fn bmo_norm(f: &ScalarField, op: &DiscreteOperator, m: u32, variant: BmoVariant, p: f64) -> Result<BmoReport> {
    bmo_norm_on(f, op, m, variant, p, &dyadic_cube_family(&op.grid))
}

/// Same as [`bmo_norm`] over an explicit cube family.
pub fn bmo_norm_on(
    f: &ScalarField,
    op: &DiscreteOperator,
    m: u32,
    variant: BmoVariant,
    p: f64,
    family: &[CubeKey],
) -> Result<BmoReport> {
    let grid = &op.grid;
    check_order(m, grid)?;
    check_exponent(variant, p)?;
    op.check_field(f)?;
    let mut family = family.to_vec();
    family.sort();
    let mut sides: Vec<usize> = family.iter().map(|k| k.side_nodes).collect();
    sides.dedup();
    let fields: Vec<Vec<c64>> =
        sides.par_iter().map(|&s| oscillation(op, f, m, s as f64 * grid.spacing(), variant)).collect::<Result<_>>()?;
    let per_cube: Vec<CubeValue> = family
        .par_iter()
        .map(|key| {
            let g = &fields[sides.binary_search(&key.side_nodes).unwrap_or(0)];
            let nodes = key.nodes(grid);
            let vol = nodes.len() as f64 * grid.cell_volume();
            let value = lp_norm(grid, g, Some(&nodes), p) / vol.powf(1.0 / p);
            CubeValue { key: *key, value }
        })
        .collect();
    let (norm, argmax) =
        per_cube
            .iter()
            .fold((0.0, None), |(best, arg), c| if c.value > best { (c.value, Some(c.key)) } else { (best, arg) });
    Ok(BmoReport { variant, m, p, per_cube, norm, argmax, kernel_mean: kernel_mean(op, f) })
}

/// A ball B(center, radius) of the fixed family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: usize,
    pub radius: f64,
}

/// The fixed ball family, sorted by radius then center.
pub fn dyadic_ball_family(grid: &Grid) -> Vec<Ball> {
    let h = grid.spacing();
    let sizes = grid.sizes();
    let mut out = Vec::new();
    let mut k = 0u32;
    loop {
        let radius = h * 2f64.powi(k as i32);
        if radius > grid.max_side() / 2.0 * (1.0 + 1e-12) {
            break;
        }
        if grid.dim() == 1 {
            out.extend((0..grid.len()).map(|c| Ball { center: c, radius }));
        } else {
            let stride = 1usize << k;
            for j in (0..sizes[1]).step_by(stride) {
                for i in (0..sizes[0]).step_by(stride) {
                    out.push(Ball { center: grid.node([i, j]), radius });
                }
            }
        }
        k += 1;
    }
    out
}

/// Tent masses ∫∫_{B̂} |F|² dy dt/t and lattice ball volumes for every ball.
/// B̂ = {(y, t) : y ∈ B, t ≤ r − |y − c|}, the tent over the ball
/// B(c, r) = {|y − c| < r}; dt/t becomes the log step Δ.
fn tent_masses(grid: &Grid, times: &TimeGrid, energy: &[Vec<f64>], balls: &[Ball]) -> Vec<(f64, f64)> {
    let n = grid.len();
    let w = grid.cell_volume() * times.log_step();
    // cum[k][y]: energy of the first k samples
    let mut cum = vec![vec![0.0; n]; times.len() + 1];
    for j in 0..times.len() {
        for y in 0..n {
            cum[j + 1][y] = cum[j][y] + energy[j][y];
        }
    }
    let offsets = grid.offsets();
    balls
        .par_iter()
        .map(|b| {
            let reach = offsets.partition_point(|(_, r)| *r < b.radius);
            let mut mass = 0.0;
            let mut count = 0usize;
            for (d, r) in &offsets[..reach] {
                if let Some(y) = grid.shift(b.center, *d) {
                    count += 1;
                    let depth = (b.radius - r) * (1.0 + 1e-12);
                    let k = times.samples.partition_point(|&t| t <= depth);
                    mass += cum[k][y];
                }
            }
            (w * mass, count as f64 * grid.cell_volume())
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallValue {
    pub center: usize,
    pub radius: f64,
    pub mass: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlesonReport {
    pub m: u32,
    pub per_ball: Vec<BallValue>,
    pub carleson_norm: f64,
    pub argmax: Option<Ball>,
}

impl CarlesonReport {
    /// `M,center,radius,mass,ratio`, one row per ball.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("M,center,radius,mass,ratio\n");
        for b in &self.per_ball {
            out.push_str(&format!("{},{},{:e},{:e},{:e}\n", self.m, b.center, b.radius, b.mass, b.ratio));
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "M": self.m,
            "carleson_norm": self.carleson_norm,
            "argmax": self.argmax,
            "balls": self.per_ball.len(),
        })
    }
}

/// ‖μ_f‖_C for μ_f = |(t²L)^M e^{−t²L} f|² dy dt/t over the ball family.
pub fn carleson_functional(f: &ScalarField, op: &DiscreteOperator, m: u32, times: &TimeGrid) -> Result<CarlesonReport> {
    let grid = &op.grid;
    check_order(m, grid)?;
    let layers = profile_batch(op, f, &times.samples, Profile::HeatPower(m), 0)?;
    let energy: Vec<Vec<f64>> = layers.iter().map(|l| l.iter().map(|v| v.norm_sqr()).collect()).collect();
    let balls = dyadic_ball_family(grid);
    let masses = tent_masses(grid, times, &energy, &balls);
    let per_ball: Vec<BallValue> = balls
        .iter()
        .zip(&masses)
        .map(|(b, &(mass, vol))| BallValue { center: b.center, radius: b.radius, mass, ratio: mass / vol })
        .collect();
    let (carleson_norm, argmax) = per_ball.iter().fold((0.0, None), |(best, arg), b| {
        if b.ratio > best {
            (b.ratio, Some(Ball { center: b.center, radius: b.radius }))
        } else {
            (best, arg)
        }
    });
    Ok(CarlesonReport { m, per_ball, carleson_norm, argmax })
}

/// CF(x) = sup over family balls B ∋ x of ((1/|B|) ∫∫_{B̂} |F|² dy dt/t)^{1/2}.
pub fn tent_maximal(field: &SpaceTimeField) -> ScalarField {
    let grid = &field.grid;
    let energy: Vec<Vec<f64>> = (0..field.times.len()).map(|j| field.energy(j)).collect();
    let balls = dyadic_ball_family(grid);
    let masses = tent_masses(grid, &field.times, &energy, &balls);
    let offsets = grid.offsets();
    let mut cf = vec![0.0f64; grid.len()];
    for (b, &(mass, vol)) in balls.iter().zip(&masses) {
        let avg = (mass / vol).sqrt();
        let reach = offsets.partition_point(|(_, r)| *r < b.radius);
        for (d, _) in &offsets[..reach] {
            if let Some(y) = grid.shift(b.center, *d) {
                cf[y] = cf[y].max(avg);
            }
        }
    }
    ScalarField { grid: grid.clone(), values: cf.into_iter().map(|v| c64::new(v, 0.0)).collect() }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TentNorms {
    /// ‖S F‖_{L¹} with aperture 1
    pub t1: f64,
    /// ‖C F‖_{L^∞}
    pub tinf: f64,
}

pub fn tent_norms(field: &SpaceTimeField) -> TentNorms {
    let s = cone_integrate(field, &ConeSpec::default());
    TentNorms { t1: s.norm_l1(), tinf: tent_maximal(field).max_abs() }
}

/// 2^{M+2}/Γ(M+1): the constant making C ∫₀^∞ (t²μ)^{M+1} e^{−2t²μ} dt/t = 1.
pub fn pairing_constant(m: u32) -> f64 {
    2f64.powi(m as i32 + 2) / gamma(m as f64 + 1.0)
}

/// C Σ_j Δ ⟨(t_j²L*)^M e^{−t_j²L*} f, t_j²L e^{−t_j²L} g⟩, which reproduces
/// ⟨f, g⟩ up to the time-window truncation.
pub fn duality_pair(f: &ScalarField, g: &ScalarField, op: &DiscreteOperator, m: u32, times: &TimeGrid) -> Result<c64> {
    if m == 0 {
        return Err(Error::InvalidParameter("pairing order M must be >= 1".into()));
    }
    op.check_field(f)?;
    op.check_field(g)?;
    project_mean_zero(op, &f.values)?;
    project_mean_zero(op, &g.values)?;
    let adj = op.adjoint();
    let a = profile_batch(&adj, f, &times.samples, Profile::HeatPower(m), 0)?;
    let b = profile_batch(op, g, &times.samples, Profile::HeatPower(1), 0)?;
    let vol = op.grid.cell_volume();
    let total: c64 = a.iter().zip(&b).map(|(x, y)| x.iter().zip(y).map(|(u, v)| u * v.conj()).sum::<c64>()).sum();
    Ok(total * (vol * times.log_step() * pairing_constant(m)))
}

/// BMO^p norms for each p and the table of ratios norm_i / norm_j
/// (`None` when the denominator vanishes).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JohnNirenbergTable {
    pub m: u32,
    pub p_list: Vec<f64>,
    pub norms: Vec<f64>,
    pub ratios: Vec<Vec<Option<f64>>>,
}

pub fn john_nirenberg_compare(
    f: &ScalarField,
    op: &DiscreteOperator,
    m: u32,
    p_list: &[f64],
) -> Result<JohnNirenbergTable> {
    if p_list.is_empty() {
        return Err(Error::InvalidParameter("empty exponent list".into()));
    }
    let norms: Vec<f64> =
        p_list.iter().map(|&p| Ok(bmo_norm(f, op, m, BmoVariant::PVariant, p)?.norm)).collect::<Result<_>>()?;
    let ratios =
        norms.iter().map(|a| norms.iter().map(|&b| if b > 0.0 { Some(a / b) } else { None }).collect()).collect();
    Ok(JohnNirenbergTable { m, p_list: p_list.to_vec(), norms, ratios })
}
