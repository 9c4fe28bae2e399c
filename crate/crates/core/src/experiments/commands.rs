use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use super::corpus::{generate_corpus, molecule_corpus, CorpusField};
use super::{suites, Check, Lab};
use crate::c64;
use crate::coefficients::check_ellipticity;
use crate::decomposition::{molecular_decompose, validate_molecule, DecomposeParams, MolecularDecomposition};
use crate::error::{Error, Result};
use crate::functionals::{
    nontangential_max, square_function, vertical_square_function, ConeSpec, MaximalKind, SquareKind, VerticalKind,
};
use crate::grid::{Cube, ScalarField};
use crate::operator::{DiscreteOperator, OperatorJson};
use crate::riesz::{commutator_sweep, commutator_times, riesz_h1_experiment, CommutatorTarget};
use crate::semigroup::{set_distance, TimeGrid};
use crate::spaces::{bmo_norm, carleson_functional, duality_pair, john_nirenberg_compare, BmoVariant};
use crate::stats::{median, min_max, spread};

fn corpus(lab: &Lab) -> Result<Vec<CorpusField>> {
    generate_corpus(&lab.op, &lab.config.corpus)
}

/// Maps over the corpus in parallel, keeping corpus order.
fn fan_out<T: Send>(items: &[CorpusField], f: impl Fn(&CorpusField) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    items.par_iter().map(f).collect()
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "degenerate".to_string(), num)
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (b > 0.0 && a.is_finite()).then(|| a / b)
}

/// Rounding-level norms of fields in the kernel are reported as zero.
fn chop(x: f64, scale: f64) -> f64 {
    if x <= 1e-10 * scale {
        0.0
    } else {
        x
    }
}

fn decompose_params(lab: &Lab) -> DecomposeParams {
    let p = &lab.config.params;
    DecomposeParams { m: p.m, p: p.p, eps: p.eps, gamma: p.gamma }
}

/// Relative distance of a ratio from |c|.
fn homogeneity_error(a: f64, b: f64, c: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        0.0
    } else {
        (b / a / c - 1.0).abs()
    }
}

pub(super) fn assemble(lab: &mut Lab) -> Result<Vec<Check>> {
    let op = &lab.op;
    let coeff = lab.config.coefficients(&op.grid)?;
    let (lo, hi) = check_ellipticity(&coeff)?;
    let mut rng = ChaCha8Rng::seed_from_u64(lab.config.corpus.seed);
    let mut random =
        || ScalarField::from_fn(&op.grid, |_| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let (u, v) = (random(), random());
    let lu = op.apply(&u)?;
    let lsv = op.apply_adjoint(&v)?;
    let pairing = (lu.inner(&v) - u.inner(&lsv)).norm() / (lu.norm_l2() * v.norm_l2()).max(f64::MIN_POSITIVE);
    let mut checks = vec![
        Check::at_least("ellipticity_lower", lo, coeff.lambda * (1.0 - 1e-12)),
        Check::at_most("ellipticity_upper", hi, coeff.big_lambda * (1.0 + 1e-12)),
        Check::at_most("adjoint_pairing", pairing, 1e-12),
    ];
    if op.kernel_dim > 0 {
        let one = ScalarField::constant(&op.grid, c64::new(1.0, 0.0));
        let residue = op.apply(&one)?.max_abs() / op.gershgorin_bound();
        checks.push(Check::at_most("constants_annihilated", residue, 1e-12));
    }
    // Dirichlet grids: record how far L is from singular
    let mut sigma_min = None;
    if op.kernel_dim == 0 && op.len() <= 1024 {
        let svals = op.to_dense().singular_values().map_err(|e| Error::Numerical(format!("{e:?}")))?;
        let s = svals.into_iter().fold(f64::INFINITY, f64::min);
        checks.push(Check::at_least("smallest_singular_value_over_gershgorin", s / op.gershgorin_bound(), 1e-10));
        sigma_min = Some(s);
    }
    let summary = json!({
        "smallest_singular_value": sigma_min,
        "nodes": op.len(),
        "nnz": op.matrix.nnz(),
        "kernel_dim": op.kernel_dim,
        "lambda": op.lambda,
        "Lambda": op.big_lambda,
        "measured_ellipticity": [lo, hi],
        "gershgorin_bound": op.gershgorin_bound(),
        "coercivity_bound": op.coercivity_bound(),
    });
    let op_json = OperatorJson::from(&lab.op);
    lab.write_json("operator.json", &op_json)?;
    lab.write_json("assemble_summary.json", &summary)?;
    Ok(checks)
}

/// ‖S_h f‖₁, ‖N_h f‖₁, ‖S_P f‖₁, ‖N_P f‖₁.
fn functional_norms(op: &DiscreteOperator, f: &ScalarField, times: &TimeGrid) -> Result<[f64; 4]> {
    let cone = ConeSpec::default();
    Ok([
        square_function(f, op, &cone, SquareKind::Heat, 1, times)?.norm_l1(),
        nontangential_max(f, op, MaximalKind::Heat, 1.0, 1, times)?.norm_l1(),
        square_function(f, op, &cone, SquareKind::PoissonGrad, 1, times)?.norm_l1(),
        nontangential_max(f, op, MaximalKind::Poisson, 1.0, 1, times)?.norm_l1(),
    ])
}

const FUNCTIONAL_NAMES: [&str; 4] = ["S_h", "N_h", "S_P", "N_P"];

pub(super) fn functional(lab: &mut Lab) -> Result<Vec<Check>> {
    let fields = corpus(lab)?;
    let (op, times) = (&lab.op, &lab.times);
    let apertures = lab.config.params.apertures.clone();
    let beta = lab.config.params.beta;
    let rows = fan_out(&fields, |c| {
        let f = &c.field;
        let mut vals = functional_norms(op, f, times)?.to_vec();
        for &a in &apertures {
            vals.push(square_function(f, op, &ConeSpec::new(a)?, SquareKind::Heat, 1, times)?.norm_l1());
        }
        vals.push(nontangential_max(f, op, MaximalKind::HeatBeta, beta, 1, times)?.norm_l1());
        vals.push(vertical_square_function(f, op, VerticalKind::Heat, 1, times)?.norm_l1());
        Ok(vals)
    })?;
    let mut csv = String::from("id,kind,f_l1,S_h,N_h,S_P,N_P");
    for a in &apertures {
        let _ = write!(csv, ",S_h_aperture_{a}");
    }
    let _ = writeln!(csv, ",N_h_beta_{beta},g_h");
    for (c, vals) in fields.iter().zip(&rows) {
        let _ = write!(csv, "{},{},{}", c.id, kind_tag(c), num(c.field.norm_l1()));
        for v in vals {
            let _ = write!(csv, ",{}", num(*v));
        }
        csv.push('\n');
    }
    lab.write("functional.csv", &csv)?;

    let (op, times) = (&lab.op, &lab.times);
    let f0 = &fields[0].field;
    let scaled = functional_norms(op, &f0.scale(c64::new(3.0, 0.0)), times)?;
    let mut checks: Vec<Check> = FUNCTIONAL_NAMES
        .iter()
        .enumerate()
        .map(|(i, name)| {
            Check::at_most(format!("homogeneity_{name}"), homogeneity_error(rows[0][i], scaled[i], 3.0), 1e-9)
        })
        .collect();
    if fields.len() > 1 {
        // pointwise S(f + g) ≤ S(f) + S(g)
        let g0 = &fields[1].field;
        let s = |x: &ScalarField| square_function(x, op, &ConeSpec::default(), SquareKind::Heat, 1, times);
        let (sf, sg, sfg) = (s(f0)?, s(g0)?, s(&f0.add(g0))?);
        let excess = (0..sf.len())
            .map(|x| sfg.values[x].re - sf.values[x].re - sg.values[x].re)
            .fold(f64::NEG_INFINITY, f64::max);
        let scale = sf.max_abs() + sg.max_abs();
        checks.push(Check::at_most("sublinearity_S_h", excess / scale.max(f64::MIN_POSITIVE), 1e-10));
    }
    // wider cones see more of the integrand
    for (i, w) in apertures.windows(2).enumerate() {
        if w[1] >= w[0] {
            let least = rows.iter().map(|r| r[4 + i + 1] / r[4 + i]).fold(f64::INFINITY, f64::min);
            checks.push(Check::at_least(format!("aperture_monotone_{}_{}", w[0], w[1]), least, 1.0 - 1e-12));
        }
    }
    Ok(checks)
}

fn kind_tag(c: &CorpusField) -> String {
    serde_json::to_value(c.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

fn decompose_corpus(lab: &Lab, fields: &[CorpusField]) -> Result<Vec<MolecularDecomposition>> {
    let params = decompose_params(lab);
    fan_out(fields, |c| molecular_decompose(&c.field, &lab.op, &params, &lab.times))
}

pub(super) fn decompose(lab: &mut Lab) -> Result<Vec<Check>> {
    let fields = corpus(lab)?;
    let decs = decompose_corpus(lab, &fields)?;
    let mut csv = String::from("id,kind,terms,levels,weight_sum,sh_l1,ratio,residual,molecule_constant,all_valid\n");
    let mut terms = String::from("id,k,j,lambda,side,worst_ratio,pass\n");
    let mut ratios = Vec::new();
    for (c, d) in fields.iter().zip(&decs) {
        let r = ratio(d.weight_sum, d.sh_l1);
        ratios.extend(r);
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            c.id,
            kind_tag(c),
            d.terms.len(),
            d.levels.len(),
            num(d.weight_sum),
            num(d.sh_l1),
            opt(r),
            num(d.relative_residual(&c.field)),
            num(d.molecule_constant),
            d.all_valid()
        );
        for t in &d.terms {
            let _ = writeln!(
                terms,
                "{},{},{},{},{},{},{}",
                c.id,
                t.level,
                t.cube_index,
                num(t.lambda),
                t.molecule.cube.side_nodes,
                num(t.report.worst_ratio),
                t.report.pass
            );
        }
    }
    lab.write("decomposition.csv", &csv)?;
    lab.write("decomposition_terms.csv", &terms)?;
    lab.write_json("decomposition_0.json", &decs[0].to_json_bundle())?;

    let worst_residual = fields.iter().zip(&decs).map(|(c, d)| d.relative_residual(&c.field)).fold(0.0, f64::max);
    let invalid: usize = decs.iter().map(|d| d.terms.iter().filter(|t| !t.report.pass).count()).sum();
    let tol = &lab.config.tolerances;
    let interval = if ratios.is_empty() {
        None
    } else {
        let (lo, hi) = min_max(&ratios);
        Some(hi.max(1.0 / lo))
    };
    Ok(vec![
        Check::at_most("reconstruction_residual", worst_residual, tol.reconstruction),
        Check::at_most("invalid_molecules", invalid as f64, 0.0),
        Check::ratio_at_most("weight_sum_over_sh_interval", interval, tol.decomposition_ratio),
    ])
}

pub(super) fn validate(lab: &mut Lab) -> Result<Vec<Check>> {
    let fields = corpus(lab)?;
    let decs = decompose_corpus(lab, &fields)?;
    let mut csv = String::from("source,id,k,j,side,annulus,power,measured,bound,pass\n");
    let mut invalid_terms = 0usize;
    for (c, d) in fields.iter().zip(&decs) {
        for t in &d.terms {
            invalid_terms += usize::from(!t.report.pass);
            for r in &t.report.rows {
                let _ = writeln!(
                    csv,
                    "decomposition,{},{},{},{},{},{},{},{},{}",
                    c.id,
                    t.level,
                    t.cube_index,
                    t.molecule.cube.side_nodes,
                    r.annulus,
                    r.power,
                    num(r.measured),
                    num(r.bound),
                    r.pass
                );
            }
        }
    }
    let p = &lab.config.params;
    let molecules = molecule_corpus(&lab.op, p.molecules, lab.config.corpus.seed, p.m)?;
    let mut invalid_hand = 0usize;
    for (i, m) in molecules.iter().enumerate() {
        let report = validate_molecule(m, &lab.op)?;
        invalid_hand += usize::from(!report.pass);
        for r in &report.rows {
            let _ = writeln!(
                csv,
                "hand_built,{i},-,-,{},{},{},{},{},{}",
                m.cube.side_nodes,
                r.annulus,
                r.power,
                num(r.measured),
                num(r.bound),
                r.pass
            );
        }
    }
    lab.write("validation.csv", &csv)?;
    Ok(vec![
        Check::at_most("invalid_decomposition_molecules", invalid_terms as f64, 0.0),
        Check::at_most("invalid_hand_built_molecules", invalid_hand as f64, 0.0),
    ])
}

/// Spread of a ratio column over the corpus; `None` if any entry is
/// degenerate or the column is empty.
fn column_spread(col: &[Option<f64>]) -> Option<f64> {
    let vals: Option<Vec<f64>> = col.iter().copied().collect();
    vals.and_then(|v| spread(&v))
}

pub(super) fn bmo(lab: &mut Lab) -> Result<Vec<Check>> {
    let fields = corpus(lab)?;
    let adj = lab.op.adjoint();
    let p = lab.config.params.clone();
    let times = lab.times.clone();
    let rows = fan_out(&fields, |c| {
        let f = &c.field;
        let s = f.norm_l2();
        let heat = chop(bmo_norm(f, &adj, p.m, BmoVariant::Heat, 2.0)?.norm, s);
        let resolvent = chop(bmo_norm(f, &adj, p.m, BmoVariant::Resolvent, 2.0)?.norm, s);
        let jn = john_nirenberg_compare(f, &adj, p.m, &p.bmo_p)?;
        let norms: Vec<f64> = jn.norms.iter().map(|&x| chop(x, s)).collect();
        let car = chop(carleson_functional(f, &adj, p.m, &times)?.carleson_norm, s * s);
        Ok((heat, resolvent, norms, car))
    })?;
    let mut csv = String::from("id,kind,heat,resolvent");
    for q in &p.bmo_p {
        let _ = write!(csv, ",p_{q}");
    }
    csv.push_str(",carleson,heat_over_resolvent,carleson_over_bmo2");
    for q in &p.bmo_p {
        let _ = write!(csv, ",p_{q}_over_heat");
    }
    csv.push('\n');
    let mut hr = Vec::new();
    let mut cb = Vec::new();
    let mut jn_cols = vec![Vec::new(); p.bmo_p.len()];
    for (c, (heat, res, norms, car)) in fields.iter().zip(&rows) {
        let r_hr = ratio(*heat, *res);
        let r_cb = ratio(*car, heat * heat);
        hr.push(r_hr);
        cb.push(r_cb);
        let _ = write!(csv, "{},{},{},{}", c.id, kind_tag(c), num(*heat), num(*res));
        for n in norms {
            let _ = write!(csv, ",{}", num(*n));
        }
        let _ = write!(csv, ",{},{},{}", num(*car), opt(r_hr), opt(r_cb));
        for (i, n) in norms.iter().enumerate() {
            let r = ratio(*n, *heat);
            jn_cols[i].push(r);
            let _ = write!(csv, ",{}", opt(r));
        }
        csv.push('\n');
    }
    lab.write("bmo.csv", &csv)?;

    let tol = lab.config.tolerances.clone();
    let mut checks = vec![
        Check::ratio_at_most("heat_over_resolvent_spread", column_spread(&hr), tol.bmo_spread),
        Check::ratio_at_most("carleson_over_bmo2_spread", column_spread(&cb), tol.bmo_spread),
    ];
    for (q, col) in p.bmo_p.iter().zip(&jn_cols) {
        if *q != 2.0 {
            checks.push(Check::ratio_at_most(format!("bmo_p_{q}_over_p_2_spread"), column_spread(col), tol.bmo_spread));
        }
    }

    // duality pairing on random mean-zero pairs, over a wide time window
    let op = &lab.op;
    let g = &op.grid;
    let wide = TimeGrid::new(g.spacing() / 256.0, 4.0 * g.max_side(), 256)?;
    let mut rng = ChaCha8Rng::seed_from_u64(lab.config.corpus.seed.wrapping_add(0xD0A1));
    let pairs: Vec<(ScalarField, ScalarField)> = (0..p.duality_pairs)
        .map(|_| {
            let mut draw = || {
                let f = ScalarField::from_fn(g, |_| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
                if op.kernel_dim > 0 {
                    f.remove_mean()
                } else {
                    f
                }
            };
            (draw(), draw())
        })
        .collect();
    let dual: Vec<(c64, c64, f64)> = pairs
        .par_iter()
        .map(|(f, h)| {
            let got = duality_pair(f, h, op, p.m, &wide)?;
            let want = f.inner(h);
            Ok((got, want, (got - want).norm() / (f.norm_l2() * h.norm_l2())))
        })
        .collect::<Result<_>>()?;
    let mut dcsv = String::from("pair,pairing_re,pairing_im,inner_re,inner_im,relative_error\n");
    for (i, (got, want, err)) in dual.iter().enumerate() {
        let _ = writeln!(dcsv, "{i},{},{},{},{},{}", num(got.re), num(got.im), num(want.re), num(want.im), num(*err));
    }
    lab.write("duality.csv", &dcsv)?;
    let worst = dual.iter().map(|d| d.2).fold(0.0, f64::max);
    checks.push(Check::at_most("duality_pairing_error", worst, tol.duality));

    // |⟨f, m⟩| / ‖f‖_{BMO_{L*}} over the hand-built molecules
    let molecules = molecule_corpus(&lab.op, p.molecules, lab.config.corpus.seed, p.m)?;
    let mut mcsv = String::from("molecule,side,max_pairing\n");
    let mut sup: Option<f64> = None;
    for (i, m) in molecules.iter().enumerate() {
        let best = fields
            .iter()
            .zip(&rows)
            .filter(|(_, r)| r.0 > 0.0)
            .map(|(c, r)| c.field.inner(&m.field).norm() / r.0)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
        sup = match (sup, best) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        let _ = writeln!(mcsv, "{i},{},{}", m.cube.side_nodes, opt(best));
    }
    lab.write("molecule_pairing.csv", &mcsv)?;
    checks.push(Check::ratio_at_most("molecule_pairing_sup", sup, f64::INFINITY));
    Ok(checks)
}

pub(super) fn carleson(lab: &mut Lab) -> Result<Vec<Check>> {
    let fields = corpus(lab)?;
    let adj = lab.op.adjoint();
    let m = lab.config.params.m;
    let times = lab.times.clone();
    let reports = fan_out(&fields, |c| {
        let mut car = carleson_functional(&c.field, &adj, m, &times)?;
        let s = c.field.norm_l2();
        car.carleson_norm = chop(car.carleson_norm, s * s);
        let heat = chop(bmo_norm(&c.field, &adj, m, BmoVariant::Heat, 2.0)?.norm, s);
        Ok((car, heat))
    })?;
    let mut balls = String::from("id,M,center,radius,mass,ratio\n");
    let mut summary = String::from("id,kind,carleson_norm,bmo_heat,carleson_over_bmo2,argmax_center,argmax_radius\n");
    let mut col = Vec::new();
    for (c, (car, heat)) in fields.iter().zip(&reports) {
        for line in car.to_csv().lines().skip(1) {
            let _ = writeln!(balls, "{},{line}", c.id);
        }
        let r = ratio(car.carleson_norm, heat * heat);
        col.push(r);
        let (ac, ar) = car.argmax.map_or(("-".to_string(), "-".to_string()), |b| (b.center.to_string(), num(b.radius)));
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{ac},{ar}",
            c.id,
            kind_tag(c),
            num(car.carleson_norm),
            num(*heat),
            opt(r)
        );
    }
    lab.write("carleson_balls.csv", &balls)?;
    lab.write("carleson.csv", &summary)?;
    Ok(vec![Check::ratio_at_most("carleson_over_bmo2_spread", column_spread(&col), lab.config.tolerances.bmo_spread)])
}

/// E near the origin and F across the grid, a quarter of the side apart.
fn commutator_sets(lab: &Lab) -> (Vec<usize>, Vec<usize>) {
    let g = &lab.op.grid;
    let n = g.sizes()[0];
    let small = (n / 16).max(1);
    let (lo, hi) = (3 * n / 8, 5 * n / 8);
    if g.dim() == 1 {
        ((0..small).collect(), (lo..hi).collect())
    } else {
        (Cube::from_corner([0, 0], small).nodes(g), Cube::from_corner([lo, lo], hi - lo).nodes(g))
    }
}

pub(super) fn riesz(lab: &mut Lab) -> Result<Vec<Check>> {
    let p = lab.config.params.clone();
    let tol = lab.config.tolerances.clone();
    let molecules = molecule_corpus(&lab.op, p.molecules, lab.config.corpus.seed, p.m)?;
    let report = riesz_h1_experiment(&molecules, &lab.op, p.quad_nodes)?;
    lab.write("riesz.csv", &report.to_csv())?;
    let mut checks = vec![Check::ratio_at_most("riesz_l1_spread", report.spread, tol.riesz_spread)];

    let (e, f) = commutator_sets(lab);
    let d = set_distance(&lab.op.grid, &e, &f)?;
    let ts = commutator_times(d);
    let jobs: Vec<(CommutatorTarget, u32)> = [CommutatorTarget::VerticalHeat, CommutatorTarget::Riesz]
        .into_iter()
        .flat_map(|t| [1u32, 2].map(move |m| (t, m)))
        .collect();
    let sweeps =
        jobs.par_iter().map(|&(t, m)| commutator_sweep(&lab.op, t, m, &ts, &e, &f)).collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("target,M,t,scale,difference,power\n");
    for s in &sweeps {
        csv.extend(s.to_csv().lines().skip(1).map(|l| format!("{l}\n")));
        let tag = if s.target == CommutatorTarget::Riesz { "riesz" } else { "g_h" };
        let lower = s.m as f64 - tol.commutator_slack;
        checks.push(Check::at_least(format!("commutator_slope_difference_{tag}_M{}", s.m), s.slope_difference, lower));
        checks.push(Check::at_least(format!("commutator_slope_power_{tag}_M{}", s.m), s.slope_power, lower));
    }
    lab.write("commutator.csv", &csv)?;
    Ok(checks)
}

/// Σ|λ| + ‖f‖₁ and the four functional norms plus ‖f‖₁.
fn proxies(lab: &Lab, f: &ScalarField) -> Result<[f64; 5]> {
    let d = molecular_decompose(f, &lab.op, &decompose_params(lab), &lab.times)?;
    let fun = functional_norms(&lab.op, f, &lab.times)?;
    let l1 = f.norm_l1();
    Ok([d.weight_sum + l1, fun[0] + l1, fun[1] + l1, fun[2] + l1, fun[3] + l1])
}

const PROXY_NAMES: [&str; 5] = ["decomposition", "S_h", "N_h", "S_P", "N_P"];

pub(super) fn equivalence(lab: &mut Lab) -> Result<Vec<Check>> {
    let fields = corpus(lab)?;
    let rows = fan_out(&fields, |c| proxies(lab, &c.field))?;
    let mut csv = String::from("id,kind,f_l1,decomposition,S_h,N_h,S_P,N_P\n");
    for (c, r) in fields.iter().zip(&rows) {
        let _ = write!(csv, "{},{},{}", c.id, kind_tag(c), num(c.field.norm_l1()));
        for v in r {
            let _ = write!(csv, ",{}", num(*v));
        }
        csv.push('\n');
    }
    lab.write("equivalence.csv", &csv)?;

    let tol = lab.config.tolerances.clone();
    let mut checks = Vec::new();
    let mut table = String::from("a,b,min,max,median,spread\n");
    for a in 0..5 {
        for b in (a + 1)..5 {
            let col: Vec<Option<f64>> = rows.iter().map(|r| ratio(r[a], r[b])).collect();
            let s = column_spread(&col);
            let vals: Vec<f64> = col.iter().flatten().copied().collect();
            let (lo, hi, med) = if vals.is_empty() {
                (f64::NAN, f64::NAN, f64::NAN)
            } else {
                let (lo, hi) = min_max(&vals);
                (lo, hi, median(&vals))
            };
            let _ = writeln!(
                table,
                "{},{},{},{},{},{}",
                PROXY_NAMES[a],
                PROXY_NAMES[b],
                num(lo),
                num(hi),
                num(med),
                opt(s)
            );
            checks.push(Check::ratio_at_most(
                format!("spread_{}_{}", PROXY_NAMES[a], PROXY_NAMES[b]),
                s,
                tol.equivalence_spread,
            ));
        }
    }
    lab.write("equivalence_ratios.csv", &table)?;

    // f and 3f
    let f0 = &fields[0].field;
    let tripled = proxies(lab, &f0.scale(c64::new(3.0, 0.0)))?;
    let mut pair = String::from("quantity,f,three_f,ratio\n");
    for (i, name) in PROXY_NAMES.iter().enumerate() {
        let r = tripled[i] / rows[0][i];
        let _ = writeln!(pair, "{name},{},{},{}", num(rows[0][i]), num(tripled[i]), num(r));
        let [lo, hi] = if i == 0 { tol.scaled_decomposition } else { tol.scaled_functional };
        checks.push(Check::within(format!("scaled_pair_{name}"), r, lo, hi));
    }
    lab.write("scaled_pair.csv", &pair)?;
    let raw = functional_norms(&lab.op, f0, &lab.times)?;
    let raw3 = functional_norms(&lab.op, &f0.scale(c64::new(-3.0, 0.0)), &lab.times)?;
    for (i, name) in FUNCTIONAL_NAMES.iter().enumerate() {
        checks.push(Check::at_most(format!("homogeneity_{name}"), homogeneity_error(raw[i], raw3[i], 3.0), 1e-9));
    }
    Ok(checks)
}

pub(super) fn oracle(lab: &mut Lab) -> Result<Vec<Check>> {
    if lab.op.len() > 1024 {
        return Err(Error::Config(format!("dense oracles need at most 1024 nodes, grid has {}", lab.op.len())));
    }
    let results = suites::run_suites(&lab.op, &lab.config.filter)?;
    let mut csv = String::from("suite,name,measured,tolerance,pass\n");
    for r in &results {
        let _ = writeln!(csv, "{},{},{},{},{}", r.suite, r.name, num(r.measured), num(r.tolerance), r.pass);
    }
    lab.write("oracle.csv", &csv)?;
    Ok(results
        .into_iter()
        .map(|r| Check::at_most(format!("{}/{}", r.suite, r.name), r.measured, r.tolerance))
        .collect())
}

/// Merges every CSV of the output directory into `summary.json`: header,
/// row count and per-column numeric range, plus the command verdicts.
pub(super) fn report(lab: &mut Lab) -> Result<Vec<Check>> {
    let dir = lab.dir().to_path_buf();
    let mut names: Vec<String> = std::fs::read_dir(&dir)
        .map_err(|e| Error::Config(format!("cannot read report directory {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().and_then(|e| e.file_name().into_string().ok()))
        .collect();
    names.sort();
    let mut tables = BTreeMap::new();
    let mut verdicts = BTreeMap::new();
    for name in &names {
        let path = dir.join(name);
        if let Some(stem) = name.strip_suffix(".csv") {
            let text = std::fs::read_to_string(&path)?;
            let mut lines = text.lines();
            let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
            let mut ranges: Vec<Option<(f64, f64)>> = vec![None; header.len()];
            let mut numeric = vec![true; header.len()];
            let mut rows = 0usize;
            for line in lines {
                rows += 1;
                for (i, cell) in line.split(',').enumerate().take(header.len()) {
                    match cell.parse::<f64>() {
                        Ok(v) if numeric[i] => {
                            ranges[i] = Some(ranges[i].map_or((v, v), |(a, b)| (a.min(v), b.max(v))));
                        }
                        _ => numeric[i] = false,
                    }
                }
            }
            let columns: BTreeMap<&str, serde_json::Value> = header
                .iter()
                .enumerate()
                .map(|(i, h)| {
                    let v = match (numeric[i], ranges[i]) {
                        (true, Some((a, b))) => json!({ "min": a, "max": b }),
                        _ => json!(null),
                    };
                    (*h, v)
                })
                .collect();
            tables.insert(stem.to_string(), json!({ "rows": rows, "header": header, "numeric_ranges": columns }));
        } else if let Some(stem) = name.strip_suffix(".json") {
            if super::Command::ALL.iter().any(|c| c.name() == stem && *c != super::Command::Report) {
                let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
                verdicts.insert(stem.to_string(), v);
            }
        }
    }
    if tables.is_empty() {
        return Err(Error::Config(format!("no CSV reports in {}", dir.display())));
    }
    let failed: Vec<String> = verdicts
        .iter()
        .filter(|(_, v)| v.get("pass").and_then(|p| p.as_bool()) == Some(false))
        .map(|(k, _)| k.clone())
        .collect();
    let tables_len = tables.len();
    lab.write_json("summary.json", &json!({ "tables": tables, "commands": verdicts, "failed_commands": failed }))?;
    Ok(vec![Check::at_least("merged_tables", tables_len as f64, 1.0)])
}
