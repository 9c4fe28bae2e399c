//! Dense-oracle comparisons grouped into suites. Every entry compares a
//! fast evaluator with a slow reference that shares no code path with it
//! (Padé exponentials, dense LU, a Denman–Beavers square root, exhaustive
//! enumeration) and reports the discrepancy against a fixed tolerance.

use std::num::NonZeroUsize;

use faer::Mat;
use gauss_quad::GaussLegendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::corpus::{generate_corpus, CorpusKind, CorpusSpec};
use crate::c64;
use crate::decomposition::{
    build_truncated_tents, calderon_constant, density_expansion, molecular_decompose, whitney_decompose,
    DecomposeParams, WHITNEY_C1, WHITNEY_C2,
};
use crate::error::{Error, Result};
use crate::functionals::{
    hl_maximal, nontangential_max, square_function, vertical_square_function, ConeSpec, MaximalKind, SquareKind,
    VerticalKind,
};
use crate::grid::{Grid, ScalarField};
use crate::linalg::lu_solve;
use crate::operator::DiscreteOperator;
use crate::oracle;
use crate::riesz::{inv_sqrt_apply, riesz_apply, DEFAULT_RIESZ_NODES};
use crate::semigroup::{
    heat_apply, heat_power_apply, neg_power_apply, poisson_apply, profile_batch, resolvent_apply, HeatMethod, Profile,
    TimeGrid,
};
use crate::spaces::{bmo_norm, carleson_functional, duality_pair, BmoVariant};

pub const SUITES: [&str; 6] = ["operator", "semigroup", "functionals", "decomposition", "spaces", "riesz"];

/// Tolerance classes.
pub const TOL_SEMIGROUP: f64 = 1e-8;
pub const TOL_SOLVE: f64 = 1e-10;
pub const TOL_QUADRATURE: f64 = 1e-6;
pub const TOL_BRUTE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub suite: String,
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Runs the named suites (all of them for an empty filter) in the order
/// of [`SUITES`].
pub fn run_suites(op: &DiscreteOperator, filter: &[String]) -> Result<Vec<OracleResult>> {
    if let Some(bad) = filter.iter().find(|f| !SUITES.contains(&f.as_str())) {
        return Err(Error::Config(format!("unknown oracle suite {bad:?}; known: {}", SUITES.join(", "))));
    }
    let mut out = Vec::new();
    for suite in SUITES {
        if !filter.is_empty() && !filter.iter().any(|f| f == suite) {
            continue;
        }
        let rows = match suite {
            "operator" => operator_suite(op)?,
            "semigroup" => semigroup_suite(op)?,
            "functionals" => functionals_suite(op)?,
            "decomposition" => decomposition_suite(op)?,
            "spaces" => spaces_suite(op)?,
            _ => riesz_suite(op)?,
        };
        out.extend(rows.into_iter().map(|(name, measured, tolerance)| OracleResult {
            suite: suite.to_string(),
            name,
            measured,
            tolerance,
            pass: measured <= tolerance,
        }));
    }
    if out.is_empty() {
        return Err(Error::Config("empty suite selection".into()));
    }
    Ok(out)
}

type Rows = Vec<(String, f64, f64)>;

fn rel(a: &[c64], b: &[c64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
    if num == 0.0 {
        0.0
    } else {
        num / den.max(f64::MIN_POSITIVE)
    }
}

fn rel_real(a: &ScalarField, b: &[f64]) -> f64 {
    let b: Vec<c64> = b.iter().map(|&x| c64::new(x, 0.0)).collect();
    rel(&a.values, &b)
}

fn random_field(grid: &Grid, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScalarField::from_fn(grid, |_| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

/// Mean zero where L has constants in its kernel.
fn admissible(op: &DiscreteOperator, seed: u64) -> ScalarField {
    let f = random_field(&op.grid, seed);
    if op.kernel_dim > 0 {
        f.remove_mean()
    } else {
        f
    }
}

fn scale_vec(v: Vec<c64>, s: f64) -> Vec<c64> {
    v.into_iter().map(|x| x * s).collect()
}

/// (t²L)^k e^{−t²L} v with dense matrices.
fn dense_heat_power(op: &DiscreteOperator, l: &Mat<c64>, t: f64, k: u32, v: &[c64]) -> Vec<c64> {
    let mut u = oracle::apply(&oracle::dense_heat(op, t * t), v);
    for _ in 0..k {
        u = scale_vec(oracle::apply(l, &u), t * t);
    }
    u
}

/// (L + P₀)⁻¹ on periodic grids and L⁻¹ otherwise, by dense LU.
fn dense_inverse_apply(op: &DiscreteOperator, l: &Mat<c64>, v: &[c64]) -> Result<Vec<c64>> {
    let n = op.len();
    let p0 = if op.kernel_dim > 0 { 1.0 / n as f64 } else { 0.0 };
    let a = Mat::from_fn(n, n, |i, j| l[(i, j)] + p0);
    lu_solve(a.as_ref(), v)
}

fn operator_suite(op: &DiscreteOperator) -> Result<Rows> {
    let (u, v) = (random_field(&op.grid, 1), random_field(&op.grid, 2));
    let l = op.to_dense();
    let lu = op.apply(&u)?;
    let lsv = op.apply_adjoint(&v)?;
    let pairing = (lu.inner(&v) - u.inner(&lsv)).norm() / (lu.norm_l2() * v.norm_l2());
    let mut rows = vec![
        ("dense_matches_sparse".into(), rel(&oracle::apply(&l, &u.values), &lu.values), 1e-12),
        ("adjoint_pairing".into(), pairing, 1e-12),
    ];
    if op.kernel_dim > 0 {
        let one = ScalarField::constant(&op.grid, c64::new(1.0, 0.0));
        rows.push(("constants_annihilated".into(), op.apply(&one)?.max_abs() / op.gershgorin_bound(), 1e-12));
        rows.push((
            "adjoint_annihilates_constants".into(),
            op.apply_adjoint(&one)?.max_abs() / op.gershgorin_bound(),
            1e-12,
        ));
    }
    Ok(rows)
}

fn semigroup_suite(op: &DiscreteOperator) -> Result<Rows> {
    let l = op.to_dense();
    let f = random_field(&op.grid, 3);
    let mut rows: Rows = Vec::new();
    for t in [1e-3, 1e-2, 1e-1] {
        let want = oracle::apply(&oracle::dense_heat(op, t), &f.values);
        let got = heat_apply(op, t, &f, HeatMethod::Spectral)?;
        rows.push((format!("heat_spectral_t{t}"), rel(&got.values, &want), TOL_SEMIGROUP));
    }
    let delta = ScalarField::indicator(&op.grid, &[0]);
    for t in [1e-3, 1e-2] {
        let want = oracle::apply(&oracle::dense_heat(op, t), &delta.values);
        let got = heat_apply(op, t, &delta, HeatMethod::Krylov)?;
        rows.push((format!("heat_krylov_point_mass_t{t}"), rel(&got.values, &want), TOL_SEMIGROUP));
    }
    // (t²L)² multiplies rounding in the top modes by (t²μ_max)², so every
    // method, the oracle included, drifts apart like 1e-9 by t = 0.3
    let got = heat_power_apply(op, 0.1, 2, &f)?;
    rows.push(("heat_power_K2".into(), rel(&got.values, &dense_heat_power(op, &l, 0.1, 2, &f.values)), TOL_SEMIGROUP));

    let t = 0.3;
    let n = op.len();
    let shifted = Mat::from_fn(n, n, |i, j| l[(i, j)] * (t * t) + if i == j { 1.0 } else { 0.0 });
    let want = lu_solve(shifted.as_ref(), &f.values)?;
    rows.push(("resolvent".into(), rel(&resolvent_apply(op, t, &f)?.values, &want), TOL_SOLVE));

    let g = admissible(op, 4);
    let want = dense_inverse_apply(op, &l, &dense_inverse_apply(op, &l, &g.values)?)?;
    rows.push(("negative_power_2".into(), rel(&neg_power_apply(op, 2, &g)?.values, &want), TOL_SOLVE));

    let sqrt_l = oracle::dense_sqrt(op)?;
    let ts = [0.05, 0.4];
    let batch = profile_batch(op, &f, &ts, Profile::Poisson, 0)?;
    for (t, got) in ts.iter().zip(&batch) {
        let want = oracle::apply(&oracle::dense_poisson(&sqrt_l, *t), &f.values);
        rows.push((format!("poisson_t{t}"), rel(got, &want), TOL_QUADRATURE));
    }
    let want = oracle::apply(&oracle::dense_poisson(&sqrt_l, 0.4), &f.values);
    rows.push(("poisson_laguerre_t0.4".into(), rel(&poisson_apply(op, 0.4, &f, 256)?.values, &want), TOL_QUADRATURE));

    if op.kernel_dim > 0 {
        let one = ScalarField::constant(&op.grid, c64::new(1.0, 0.0));
        let dev = |v: &ScalarField| v.values.iter().map(|x| (x - 1.0).norm()).fold(0.0, f64::max);
        rows.push((
            "heat_conserves_constants".into(),
            dev(&heat_apply(op, 0.1, &one, HeatMethod::Spectral)?),
            TOL_SEMIGROUP,
        ));
        rows.push(("resolvent_conserves_constants".into(), dev(&resolvent_apply(op, 0.3, &one)?), TOL_SEMIGROUP));
        let p = profile_batch(op, &one, &[0.4], Profile::Poisson, 0)?;
        let p = ScalarField { grid: op.grid.clone(), values: p[0].clone() };
        rows.push(("poisson_conserves_constants".into(), dev(&p), TOL_SEMIGROUP));
    }
    Ok(rows)
}

fn functionals_suite(op: &DiscreteOperator) -> Result<Rows> {
    let grid = &op.grid;
    let l = op.to_dense();
    let f = admissible(op, 5);
    let times = TimeGrid::for_grid(grid, 16)?;
    let ts = &times.samples;
    let heat_layers: Vec<Vec<Vec<c64>>> =
        ts.iter().map(|&t| vec![oracle::apply(&oracle::dense_heat(op, t * t), &f.values)]).collect();
    let sh_layers: Vec<Vec<Vec<c64>>> = ts.iter().map(|&t| vec![dense_heat_power(op, &l, t, 1, &f.values)]).collect();
    let sqrt_l = oracle::dense_sqrt(op)?;
    let poisson: Vec<Vec<c64>> =
        ts.iter().map(|&t| oracle::apply(&oracle::dense_poisson(&sqrt_l, t), &f.values)).collect();
    let poisson_layers: Vec<Vec<Vec<c64>>> = poisson.iter().map(|p| vec![p.clone()]).collect();
    let grad_layers: Vec<Vec<Vec<c64>>> = poisson
        .iter()
        .zip(ts)
        .map(|(p, &t)| oracle::forward_gradient(grid, p).into_iter().map(|c| scale_vec(c, t)).collect())
        .collect();
    let everything = (0.0, f64::INFINITY);
    let cone = ConeSpec::default();
    let mut rows: Rows = Vec::new();
    let s_h = square_function(&f, op, &cone, SquareKind::Heat, 1, &times)?;
    rows.push((
        "square_heat".into(),
        rel_real(&s_h, &oracle::brute_cone(grid, &times, &sh_layers, 1.0, everything)),
        TOL_BRUTE,
    ));
    let s_p = square_function(&f, op, &cone, SquareKind::PoissonGrad, 1, &times)?;
    rows.push((
        "square_poisson_gradient".into(),
        rel_real(&s_p, &oracle::brute_cone(grid, &times, &grad_layers, 1.0, everything)),
        TOL_BRUTE,
    ));
    let wide = ConeSpec::new(2.0)?;
    let s_h2 = square_function(&f, op, &wide, SquareKind::Heat, 1, &times)?;
    rows.push((
        "square_heat_aperture_2".into(),
        rel_real(&s_h2, &oracle::brute_cone(grid, &times, &sh_layers, 2.0, everything)),
        TOL_BRUTE,
    ));
    let n_h = nontangential_max(&f, op, MaximalKind::Heat, 1.0, 1, &times)?;
    rows.push((
        "nontangential_heat".into(),
        rel_real(&n_h, &oracle::brute_nontangential(grid, &times, &heat_layers, 1.0)),
        TOL_BRUTE,
    ));
    let n_p = nontangential_max(&f, op, MaximalKind::Poisson, 1.0, 1, &times)?;
    rows.push((
        "nontangential_poisson".into(),
        rel_real(&n_p, &oracle::brute_nontangential(grid, &times, &poisson_layers, 1.0)),
        TOL_BRUTE,
    ));
    let star = nontangential_max(&f, op, MaximalKind::HeatStar, 1.0, 1, &times)?;
    rows.push(("star_heat".into(), rel_real(&star, &oracle::brute_star(grid, &times, &heat_layers)), TOL_BRUTE));
    let abs: Vec<f64> = f.values.iter().map(|v| v.norm()).collect();
    rows.push(("hardy_littlewood".into(), rel_real(&hl_maximal(&f), &oracle::brute_hl(grid, &abs)), TOL_BRUTE));

    // vertical g_P_aux: trapezoid in log t over |e^{−t√L}f − e^{−t²L}f|²
    let delta = times.log_step();
    let want: Vec<f64> = (0..grid.len())
        .map(|x| {
            (0..ts.len())
                .map(|j| {
                    let w = if j == 0 || j + 1 == ts.len() { 0.5 * delta } else { delta };
                    w * (poisson[j][x] - heat_layers[j][0][x]).norm_sqr()
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let g = vertical_square_function(&f, op, VerticalKind::PoissonAux, 1, &times)?;
    rows.push(("vertical_poisson_minus_heat".into(), rel_real(&g, &want), TOL_BRUTE));
    Ok(rows)
}

fn decomposition_suite(op: &DiscreteOperator) -> Result<Rows> {
    let grid = &op.grid;
    let mut rows: Rows = Vec::new();
    // ∫₀^∞ (t²)^{a} e^{−a t²} dt/t in u = ln t, piecewise Gauss–Legendre
    let rule = GaussLegendre::new(NonZeroUsize::new(40).expect("nonzero"));
    for m in 1..=3u32 {
        let a = m as f64 + 2.0;
        let integral: f64 = (-20..6)
            .map(|k| rule.integrate(k as f64, k as f64 + 1.0, |u| (2.0 * a * u - a * (2.0 * u).exp()).exp()))
            .sum();
        rows.push((format!("calderon_constant_M{m}"), (calderon_constant(m)? * integral - 1.0).abs(), TOL_SOLVE));
    }

    // level set of a smooth field, expanded against brute-force HL
    let f = admissible(op, 6);
    let mut abs: Vec<f64> = f.values.iter().map(|v| v.norm()).collect();
    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let cut = sorted[sorted.len() * 3 / 4];
    let set: Vec<usize> = (0..grid.len()).filter(|&x| abs[x] > cut).collect();
    let expanded = density_expansion(grid, &set, 0.5)?;
    abs = vec![0.0; grid.len()];
    for &x in &set {
        abs[x] = 1.0;
    }
    let hl = oracle::brute_hl(grid, &abs);
    let brute: Vec<usize> = (0..grid.len()).filter(|&x| hl[x] > 0.5).collect();
    let mismatch = brute.iter().filter(|x| expanded.binary_search(x).is_err()).count()
        + expanded.iter().filter(|x| brute.binary_search(x).is_err()).count();
    rows.push(("density_expansion".into(), mismatch as f64, 0.0));

    // Whitney cubes of a central block: a partition with comparable sides
    let n = grid.sizes()[0];
    let inner: Vec<usize> = (0..grid.len())
        .filter(|&x| grid.multi_index(x)[..grid.dim()].iter().all(|&i| i >= n / 4 && i < 3 * n / 4))
        .collect();
    let w = whitney_decompose(&inner, grid)?;
    let mut hits = vec![0usize; grid.len()];
    for q in &w.cubes {
        for x in q.nodes(grid) {
            hits[x] += 1;
        }
    }
    let mut bad = (0..grid.len()).filter(|&x| hits[x] != usize::from(inner.binary_search(&x).is_ok())).count();
    let (lo, hi) = w.comparability(grid);
    bad += usize::from(lo < WHITNEY_C1 * (1.0 - 1e-12)) + usize::from(hi > WHITNEY_C2 * (1.0 + 1e-12));
    rows.push(("whitney_partition".into(), bad as f64, 0.0));

    // truncated tents of the cubes partition the tent difference
    let outer = density_expansion(grid, &inner, 0.5)?;
    let wo = whitney_decompose(&outer, grid)?;
    let times = TimeGrid::for_grid(grid, 16)?;
    let tents = wo.cubes.iter().map(|q| build_truncated_tents(grid, &outer, &inner, q)).collect::<Result<Vec<_>>>()?;
    let mut cover = vec![0usize; grid.len() * times.len()];
    for tent in &tents {
        for (j, x) in tent.cells(&times) {
            cover[j * grid.len() + x] += 1;
        }
    }
    let (upper, lower) = (&tents[0].upper, &tents[0].lower);
    let mut bad = 0usize;
    for (j, &t) in times.samples.iter().enumerate() {
        for x in 0..grid.len() {
            let want = usize::from(upper.contains(x, t) && !lower.contains(x, t));
            bad += usize::from(cover[j * grid.len() + x] != want);
        }
    }
    rows.push(("tent_partition".into(), bad as f64, 0.0));

    // the Calderón sum over the tents gives back a molecular field
    let spec = CorpusSpec { count: 1, seed: 7, kind: CorpusKind::Bumps };
    let bump = &generate_corpus(op, &spec)?[0].field;
    let window = TimeGrid::new(grid.spacing() / 16.0, 4.0 * grid.max_side(), 64)?;
    let d = molecular_decompose(bump, op, &DecomposeParams::default(), &window)?;
    rows.push(("reconstruction_bump".into(), d.relative_residual(bump), 1e-3));
    Ok(rows)
}

fn spaces_suite(op: &DiscreteOperator) -> Result<Rows> {
    let grid = &op.grid;
    let l = op.to_dense();
    let n = op.len();
    let f = admissible(op, 8);
    let mut rows: Rows = Vec::new();
    for variant in [BmoVariant::Heat, BmoVariant::Resolvent] {
        for m in [1u32, 2] {
            let report = bmo_norm(&f, op, m, variant, 2.0)?;
            let mut worst = 0.0f64;
            let mut cache: Vec<(usize, Vec<c64>)> = Vec::new();
            for cv in &report.per_cube {
                let side = cv.key.side_nodes;
                if !cache.iter().any(|(s, _)| *s == side) {
                    let ell = side as f64 * grid.spacing();
                    let mut v = f.values.clone();
                    for _ in 0..m {
                        let a = match variant {
                            BmoVariant::Heat => oracle::apply(&oracle::dense_heat(op, ell * ell), &v),
                            _ => {
                                let s =
                                    Mat::from_fn(n, n, |i, j| l[(i, j)] * (ell * ell) + if i == j { 1.0 } else { 0.0 });
                                lu_solve(s.as_ref(), &v)?
                            }
                        };
                        v = v.iter().zip(&a).map(|(x, y)| x - y).collect();
                    }
                    cache.push((side, v));
                }
                let v = &cache.iter().find(|(s, _)| *s == side).expect("cached").1;
                let nodes = cv.key.nodes(grid);
                let want = (nodes.iter().map(|&x| v[x].norm_sqr()).sum::<f64>() / nodes.len() as f64).sqrt();
                worst = worst.max((cv.value - want).abs() / report.norm.max(f64::MIN_POSITIVE));
            }
            let tag = if variant == BmoVariant::Heat { "heat" } else { "resolvent" };
            rows.push((format!("bmo_{tag}_M{m}"), worst, TOL_BRUTE));
        }
    }

    let times = TimeGrid::for_grid(grid, 16)?;
    let car = carleson_functional(&f, op, 1, &times)?;
    let layers: Vec<Vec<c64>> = times.samples.iter().map(|&t| dense_heat_power(op, &l, t, 1, &f.values)).collect();
    let (vol, delta) = (grid.cell_volume(), times.log_step());
    let mut worst = 0.0f64;
    for b in car.per_ball.iter().step_by(7) {
        let mut mass = 0.0;
        for y in 0..grid.len() {
            let d = grid.distance(b.center, y);
            if d >= b.radius {
                continue;
            }
            for (j, &t) in times.samples.iter().enumerate() {
                if t <= b.radius - d + 1e-12 {
                    mass += vol * delta * layers[j][y].norm_sqr();
                }
            }
        }
        worst = worst.max((b.mass - mass).abs() / mass.max(f64::MIN_POSITIVE));
    }
    rows.push(("carleson_masses".into(), worst, TOL_BRUTE));

    let wide = TimeGrid::new(grid.spacing() / 256.0, 4.0 * grid.max_side(), 256)?;
    let mut worst = 0.0f64;
    for s in 0..3u64 {
        let (a, b) = (admissible(op, 20 + s), admissible(op, 30 + s));
        let got = duality_pair(&a, &b, op, 1 + s as u32, &wide)?;
        worst = worst.max((got - a.inner(&b)).norm() / (a.norm_l2() * b.norm_l2()));
    }
    rows.push(("duality_pairing".into(), worst, TOL_QUADRATURE));

    if op.kernel_dim > 0 {
        let one = ScalarField::constant(grid, c64::new(1.0, 0.0));
        rows.push(("bmo_of_constant".into(), bmo_norm(&one, op, 1, BmoVariant::Heat, 2.0)?.norm, TOL_SOLVE));
        rows.push(("carleson_of_constant".into(), carleson_functional(&one, op, 1, &times)?.carleson_norm, TOL_SOLVE));
    }
    Ok(rows)
}

fn riesz_suite(op: &DiscreteOperator) -> Result<Rows> {
    let grid = &op.grid;
    let f = admissible(op, 9);
    let l = op.to_dense();
    let sqrt_l = oracle::dense_sqrt(op)?;
    let u = dense_inverse_apply(op, &sqrt_l, &f.values)?;
    let want = oracle::forward_gradient(grid, &u);
    let got = riesz_apply(op, &f, DEFAULT_RIESZ_NODES)?;
    let worst = (0..grid.dim()).map(|a| rel(&got.components[a], &want[a])).fold(0.0, f64::max);
    let mut rows: Rows = vec![("riesz_dense_sqrt".into(), worst, TOL_QUADRATURE)];
    let once = inv_sqrt_apply(op, &f, DEFAULT_RIESZ_NODES)?;
    let twice = inv_sqrt_apply(op, &once, DEFAULT_RIESZ_NODES)?;
    rows.push((
        "inverse_sqrt_squared".into(),
        rel(&twice.values, &dense_inverse_apply(op, &l, &f.values)?),
        TOL_QUADRATURE,
    ));
    Ok(rows)
}
