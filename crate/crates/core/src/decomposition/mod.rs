//! Molecular decomposition through level sets of S_h f: density
//! expansion, dyadic Whitney cubes, truncated tents and the discrete
//! Calderón reproducing formula.

mod molecule;


use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::c64;
use crate::error::{Error, Result};
use crate::functionals::{cone_integrate, hl_maximal, square_integrand, ConeSpec, SpaceTimeField, SquareKind};
use crate::grid::{Cube, Grid, ScalarField};
use crate::operator::DiscreteOperator;
use crate::semigroup::{profile_batch, spectral_of, Profile, TimeGrid};

pub use molecule::{
    make_molecule, molecular_norm, validate_molecule, Molecule, MoleculeKind, ValidationReport, ValidationRow,
};

/// Whitney comparability c₁·dist(Q, ᶜO) ≤ ℓ(Q) ≤ c₂·dist(Q, ᶜO).
pub const WHITNEY_C1: f64 = 1.0 / 8.0;
pub const WHITNEY_C2: f64 = 1.0;

/// C_M with C_M ∫₀^∞ (t²μ)^{M+2} e^{−(M+2)t²μ} dt/t = 1.
pub fn calderon_constant(m: u32) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidParameter("Calderón constant needs M >= 1".into()));
    }
    let a = m as f64 + 2.0;
    Ok(2.0 * a.powf(a) / gamma(a))
}

fn sorted_set(grid: &Grid, set: &[usize]) -> Result<Vec<usize>> {
    let mut s = set.to_vec();
    s.sort_unstable();
    s.dedup();
    if s.last().is_some_and(|&x| x >= grid.len()) {
        return Err(Error::InvalidParameter("node index outside the grid".into()));
    }
    Ok(s)
}

/// O* = {x : M(χ_O)(x) > 1 − γ}.
pub fn density_expansion(grid: &Grid, set: &[usize], gamma: f64) -> Result<Vec<usize>> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!("density parameter must lie in (0, 1), got {gamma}")));
    }
    let set = sorted_set(grid, set)?;
    if set.is_empty() {
        return Ok(set);
    }
    let m = hl_maximal(&ScalarField::indicator(grid, &set));
    Ok((0..grid.len()).filter(|&x| m.values[x].re > 1.0 - gamma).collect())
}

/// dist(x, ᶜO) for every node: 0 outside O, ∞ when O is the whole grid.
pub fn distance_to_complement(grid: &Grid, set: &[usize]) -> Vec<f64> {
    let mut inside = vec![false; grid.len()];
    for &x in set {
        inside[x] = true;
    }
    let outside: Vec<usize> = (0..grid.len()).filter(|&y| !inside[y]).collect();
    (0..grid.len())
        .into_par_iter()
        .map(
            |x| {
                if !inside[x] {
                    0.0
                } else {
                    outside.iter().map(|&y| grid.distance(x, y)).fold(f64::INFINITY, f64::min)
                }
            },
        )
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhitneySet {
    pub cubes: Vec<Cube>,
    pub parent_open_set: Vec<usize>,
    pub overlap_bound: usize,
    /// The open set was the whole grid; `cubes` is the single covering cube.
    pub covers_grid: bool,
}

impl WhitneySet {
    /// Measured (min ℓ/dist, max ℓ/dist) over the cubes.
    pub fn comparability(&self, grid: &Grid) -> (f64, f64) {
        let dist = distance_to_complement(grid, &self.parent_open_set);
        self.cubes.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), q| {
            let d = q.nodes(grid).iter().map(|&x| dist[x]).fold(f64::INFINITY, f64::min);
            let r = q.sidelength(grid) / d;
            (lo.min(r), hi.max(r))
        })
    }
}

/// Dyadic Whitney decomposition. Aligned cubes of 2^a nodes per side are
/// visited from the largest down; a cube is taken when it lies in O, is not
/// yet covered and satisfies ℓ(Q) ≤ c₂·dist(Q, ᶜO). Single nodes always
/// qualify, so the cubes tile O exactly and are pairwise disjoint. The
/// lower comparability bound holds on grids whose sides are powers of two.
pub fn whitney_decompose(set: &[usize], grid: &Grid) -> Result<WhitneySet> {
    let set = sorted_set(grid, set)?;
    if set.is_empty() {
        return Ok(WhitneySet { cubes: Vec::new(), parent_open_set: set, overlap_bound: 1, covers_grid: false });
    }
    if set.len() == grid.len() {
        return Ok(WhitneySet {
            cubes: vec![Cube::whole(grid)],
            parent_open_set: set,
            overlap_bound: 1,
            covers_grid: true,
        });
    }
    let dist = distance_to_complement(grid, &set);
    let h = grid.spacing();
    let dim = grid.dim();
    let sizes = grid.sizes();
    let min_side = sizes[..dim].iter().copied().min().unwrap_or(1);
    let mut covered = vec![false; grid.len()];
    let mut cubes = Vec::new();
    let mut level = usize::BITS - 1 - min_side.leading_zeros();
    loop {
        let s = 1usize << level;
        let corners_per_axis: Vec<usize> = (0..2).map(|a| if a < dim { sizes[a] / s } else { 1 }).collect();
        for c0 in 0..corners_per_axis[0] {
            for c1 in 0..corners_per_axis[1] {
                let corner = [c0 * s, if dim == 2 { c1 * s } else { 0 }];
                let nodes = aligned_nodes(grid, corner, s);
                if nodes.iter().any(|&x| covered[x] || dist[x] == 0.0) {
                    continue;
                }
                let d = nodes.iter().map(|&x| dist[x]).fold(f64::INFINITY, f64::min);
                if s as f64 * h <= WHITNEY_C2 * d * (1.0 + 1e-12) {
                    for &x in &nodes {
                        covered[x] = true;
                    }
                    let mut q = Cube::from_corner(corner, s);
                    if dim == 1 {
                        q.center[1] = 0.0;
                    }
                    cubes.push(q);
                }
            }
        }
        if level == 0 {
            break;
        }
        level -= 1;
    }
    Ok(WhitneySet { cubes, parent_open_set: set, overlap_bound: 1, covers_grid: false })
}

fn aligned_nodes(grid: &Grid, corner: [usize; 2], s: usize) -> Vec<usize> {
    let second = if grid.dim() == 2 { s } else { 1 };
    let mut out = Vec::with_capacity(s * second);
    for a in 0..s {
        for b in 0..second {
            out.push(grid.node([corner[0] + a, corner[1] + b]));
        }
    }
    out
}

/// Tent Ô = {(x, t) : dist(x, ᶜO) ≥ t}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TentRegion {
    pub base_set: Vec<usize>,
    depth: Vec<f64>,
}

impl TentRegion {
    pub fn new(grid: &Grid, base_set: &[usize]) -> Result<Self> {
        let base_set = sorted_set(grid, base_set)?;
        let depth = if base_set.is_empty() { vec![0.0; grid.len()] } else { distance_to_complement(grid, &base_set) };
        Ok(Self { base_set, depth })
    }

    pub fn contains(&self, node: usize, t: f64) -> bool {
        t > 0.0 && self.depth[node] >= t
    }
}

/// T_k^j = (Q_k^j × (0,∞)) ∩ Ô_k^* ∩ ᶜÔ_{k+1}^*.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedTent {
    pub cube_nodes: Vec<usize>,
    pub upper: TentRegion,
    pub lower: TentRegion,
}

impl TruncatedTent {
    pub fn contains(&self, node: usize, t: f64) -> bool {
        self.cube_nodes.binary_search(&node).is_ok() && self.upper.contains(node, t) && !self.lower.contains(node, t)
    }

    /// Member cells as (time index, node) pairs on a time grid.
    pub fn cells(&self, times: &TimeGrid) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (j, &t) in times.samples.iter().enumerate() {
            for &x in &self.cube_nodes {
                if self.upper.contains(x, t) && !self.lower.contains(x, t) {
                    out.push((j, x));
                }
            }
        }
        out
    }
}

pub fn build_truncated_tents(
    grid: &Grid,
    o_k_star: &[usize],
    o_k1_star: &[usize],
    cube: &Cube,
) -> Result<TruncatedTent> {
    Ok(TruncatedTent {
        cube_nodes: cube.nodes(grid),
        upper: TentRegion::new(grid, o_k_star)?,
        lower: TentRegion::new(grid, o_k1_star)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionTerm {
    pub lambda: f64,
    pub level: i32,
    pub cube_index: usize,
    pub molecule: Molecule,
    /// Validation of molecule / (global constant).
    pub report: ValidationReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MolecularDecomposition {
    pub terms: Vec<DecompositionTerm>,
    pub residual: ScalarField,
    pub truncation: (f64, f64),
    pub weight_sum: f64,
    pub m: u32,
    pub p: f64,
    pub eps: f64,
    pub gamma: f64,
    pub calderon: f64,
    /// The single constant C with every C⁻¹m_k^j a molecule.
    pub molecule_constant: f64,
    pub sh_l1: f64,
    pub levels: Vec<LevelSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: i32,
    pub level_set_size: usize,
    pub expanded_size: usize,
    pub cubes: usize,
}

impl MolecularDecomposition {
    pub fn relative_residual(&self, f: &ScalarField) -> f64 {
        let n = f.norm_l2();
        if n == 0.0 {
            0.0
        } else {
            self.residual.norm_l2() / n
        }
    }

    /// Σ λ m over the terms.
    pub fn reconstruction(&self) -> ScalarField {
        let mut out = ScalarField::zeros(&self.residual.grid);
        for term in &self.terms {
            for (o, v) in out.values.iter_mut().zip(&term.molecule.field.values) {
                *o += v * term.lambda;
            }
        }
        out
    }

    pub fn all_valid(&self) -> bool {
        self.terms.iter().all(|t| t.report.pass)
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("k,j,lambda,side,pass\n");
        for t in &self.terms {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                t.level, t.cube_index, t.lambda, t.molecule.cube.side_nodes, t.report.pass
            ));
        }
        out
    }

    /// JSON bundle: metadata, a terms table referencing molecules by index,
    /// and the molecule fields as a separate array.
    pub fn to_json_bundle(&self) -> serde_json::Value {
        let terms: Vec<serde_json::Value> = self
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| {
                serde_json::json!({
                    "k": t.level,
                    "j": t.cube_index,
                    "lambda": t.lambda,
                    "cube": t.molecule.cube,
                    "molecule": i,
                    "pass": t.report.pass,
                })
            })
            .collect();
        let molecules: Vec<&ScalarField> = self.terms.iter().map(|t| &t.molecule.field).collect();
        serde_json::json!({
            "metadata": {
                "M": self.m,
                "p": self.p,
                "eps": self.eps,
                "gamma": self.gamma,
                "C_M": self.calderon,
                "truncation": [self.truncation.0, self.truncation.1],
                "molecule_constant": self.molecule_constant,
                "weight_sum": self.weight_sum,
                "residual_l2": self.residual.norm_l2(),
            },
            "terms": terms,
            "molecules": molecules,
        })
    }
}

/// Parameters of the decomposition besides the field and operator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecomposeParams {
    pub m: u32,
    pub p: f64,
    pub eps: f64,
    pub gamma: f64,
}

impl Default for DecomposeParams {
    fn default() -> Self {
        Self { m: 1, p: 2.0, eps: 1.0, gamma: 0.5 }
    }
}

fn check_mean_zero(op: &DiscreteOperator, f: &ScalarField) -> Result<()> {
    if op.kernel_dim == 0 {
        return Ok(());
    }
    let mean = f.mean();
    if mean.norm() > 1e-10 * f.max_abs().max(f64::MIN_POSITIVE) {
        return Err(Error::KernelComponent { mean: mean.norm() });
    }
    Ok(())
}

/// (C_M / λ) Σ_j Δ (t_j²L)^{M+1} e^{−(M+1)t_j²L} (χ_T F_j) for every
/// term, where F_j = t_j²L e^{−t_j²L} f.
fn extract_molecules(
    op: &DiscreteOperator,
    field: &SpaceTimeField,
    m: u32,
    terms: &[(f64, Vec<(usize, usize)>)],
) -> Result<Vec<Vec<c64>>> {
    let times = &field.times;
    let delta = times.log_step();
    let cm = calderon_constant(m)?;
    let power = m as i32 + 1;
    match spectral_of(op) {
        Some(sc) => {
            let mus = sc.mode_values();
            Ok(terms
                .par_iter()
                .map(|(lambda, cells)| {
                    let mut coef = vec![c64::new(0.0, 0.0); op.len()];
                    for j in 0..times.len() {
                        let entries: Vec<(usize, c64)> =
                            cells.iter().filter(|(tj, _)| *tj == j).map(|&(_, x)| (x, field.slice(j, 0)[x])).collect();
                        if entries.is_empty() {
                            continue;
                        }
                        let t2 = times.samples[j].powi(2);
                        let c = sc.coefficients_sparse(&entries);
                        for ((acc, ci), mu) in coef.iter_mut().zip(c).zip(&mus) {
                            let u = mu * t2;
                            *acc += ci * u.powi(power) * (-u * (m as f64 + 1.0)).exp() * delta;
                        }
                    }
                    let scale = cm / lambda;
                    sc.synthesize(&coef).into_iter().map(|v| v * scale).collect()
                })
                .collect())
        }
        None => terms
            .par_iter()
            .map(|(lambda, cells)| {
                let mut acc = vec![c64::new(0.0, 0.0); op.len()];
                for j in 0..times.len() {
                    let mut g = ScalarField::zeros(&op.grid);
                    let mut any = false;
                    for &(tj, x) in cells {
                        if tj == j {
                            g.values[x] = field.slice(j, 0)[x];
                            any = true;
                        }
                    }
                    if !any {
                        continue;
                    }
                    // (t²L)^{M+1}e^{−(M+1)t²L} = (M+1)^{−(M+1)} (s²L)^{M+1}e^{−s²L}, s = t√(M+1)
                    let s = times.samples[j] * (m as f64 + 1.0).sqrt();
                    let v = profile_batch(op, &g, &[s], Profile::HeatPower(m + 1), 0)?;
                    let w = delta * (m as f64 + 1.0).powi(-power);
                    for (a, b) in acc.iter_mut().zip(&v[0]) {
                        *a += b * w;
                    }
                }
                Ok(acc.into_iter().map(|v| v * (cm / lambda)).collect())
            })
            .collect(),
    }
}

type TermSpec = (f64, Vec<(usize, usize)>, i32, usize, Cube);

pub fn molecular_decompose(
    f: &ScalarField,
    op: &DiscreteOperator,
    params: &DecomposeParams,
    times: &TimeGrid,
) -> Result<MolecularDecomposition> {
    op.check_field(f)?;
    let DecomposeParams { m, p, eps, gamma } = *params;
    let calderon = calderon_constant(m)?;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!("density parameter must lie in (0, 1), got {gamma}")));
    }
    let grid = &op.grid;
    let empty = |residual: ScalarField, sh_l1: f64| MolecularDecomposition {
        terms: Vec::new(),
        residual,
        truncation: (times.t_min, times.t_max),
        weight_sum: 0.0,
        m,
        p,
        eps,
        gamma,
        calderon,
        molecule_constant: 1.0,
        sh_l1,
        levels: Vec::new(),
    };
    if f.max_abs() == 0.0 {
        return Ok(empty(ScalarField::zeros(grid), 0.0));
    }
    check_mean_zero(op, f)?;

    let field = square_integrand(f, op, SquareKind::Heat, 1, times)?;
    let sh = cone_integrate(&field, &ConeSpec::default());
    let s: Vec<f64> = sh.values.iter().map(|v| v.re).collect();
    let smax = s.iter().copied().fold(0.0, f64::max);
    if smax <= 1e-300 {
        return Err(Error::Degenerate("S_h f vanishes identically for a nonzero f".into()));
    }
    let smin = s.iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
    let kmin = smin.log2().floor() as i32;
    let kmax = smax.log2().ceil() as i32;

    // expanded level sets, top level last
    let mut levels: Vec<(i32, Vec<usize>, Vec<usize>)> = Vec::new();
    for k in kmin..=kmax {
        let thr = 2f64.powi(k);
        let o: Vec<usize> = (0..grid.len()).filter(|&x| s[x] > thr).collect();
        if o.is_empty() {
            continue;
        }
        let star = density_expansion(grid, &o, gamma)?;
        levels.push((k, o, star));
    }

    // (λ, tent cells, level, cube index, cube)
    let mut specs: Vec<TermSpec> = Vec::new();
    let mut summaries = Vec::new();
    for (li, (k, o, star)) in levels.iter().enumerate() {
        let next: &[usize] = levels.get(li + 1).map_or(&[], |l| &l.2);
        let whitney = whitney_decompose(star, grid)?;
        summaries.push(LevelSummary {
            level: *k,
            level_set_size: o.len(),
            expanded_size: star.len(),
            cubes: whitney.cubes.len(),
        });
        let upper = TentRegion::new(grid, star)?;
        let lower = TentRegion::new(grid, next)?;
        for (j, cube) in whitney.cubes.iter().enumerate() {
            let tent = TruncatedTent { cube_nodes: cube.nodes(grid), upper: upper.clone(), lower: lower.clone() };
            let cells = tent.cells(times);
            if cells.is_empty() {
                continue;
            }
            let lambda = calderon * 2f64.powi(*k) * cube.volume(grid);
            specs.push((lambda, cells, *k, j, cube.clone()));
        }
    }

    let inputs: Vec<(f64, Vec<(usize, usize)>)> = specs.iter().map(|s| (s.0, s.1.clone())).collect();
    let fields = extract_molecules(op, &field, m, &inputs)?;

    let raw: Vec<(Molecule, ValidationReport)> = specs
        .iter()
        .zip(fields)
        .map(|(spec, values)| {
            let mol = Molecule {
                field: ScalarField { grid: grid.clone(), values },
                cube: spec.4.clone(),
                p,
                eps,
                m,
                normalization: 1.0,
            };
            let report = validate_molecule(&mol, op)?;
            Ok((mol, report))
        })
        .collect::<Result<_>>()?;
    let molecule_constant = raw.iter().map(|(_, r)| r.worst_ratio).fold(0.0, f64::max);
    let molecule_constant = if molecule_constant > 0.0 { molecule_constant } else { 1.0 };

    let mut terms = Vec::with_capacity(raw.len());
    for ((mol, report), spec) in raw.into_iter().zip(&specs) {
        terms.push(DecompositionTerm {
            lambda: spec.0,
            level: spec.2,
            cube_index: spec.3,
            report: report.rescaled(molecule_constant),
            molecule: mol,
        });
    }
    let weight_sum = terms.iter().map(|t| t.lambda.abs()).sum();
    let mut out = empty(ScalarField::zeros(grid), sh.norm_l1());
    out.terms = terms;
    out.weight_sum = weight_sum;
    out.molecule_constant = molecule_constant;
    out.levels = summaries;
    out.residual = f.sub(&out.reconstruction());
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct H1Estimate {
    pub weight_sum: f64,
    pub l1_norm: f64,
    pub estimate: f64,
    pub sh_l1: f64,
}

/// Σ|λ| + ‖f‖₁ from the decomposition, with ‖S_h f‖₁ alongside.
pub fn h1_norm_estimate(
    f: &ScalarField,
    op: &DiscreteOperator,
    params: &DecomposeParams,
    times: &TimeGrid,
) -> Result<H1Estimate> {
    let d = molecular_decompose(f, op, params, times)?;
    let l1 = f.norm_l1();
    Ok(H1Estimate { weight_sum: d.weight_sum, l1_norm: l1, estimate: d.weight_sum + l1, sh_l1: d.sh_l1 })
}
