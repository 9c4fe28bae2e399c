use super::*;
use crate::coefficients::{random_elliptic_coefficients, CoefficientField};
use crate::grid::{Boundary, Grid};
use crate::operator::assemble_operator;
use crate::stats::loglog_slope;
use faer::linalg::solvers::Solve;
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn laplace_1d(n: usize, b: Boundary) -> DiscreteOperator {
    let g = Grid::unit_1d(n, b).unwrap();
    assemble_operator(&g, &CoefficientField::identity(&g)).unwrap()
}

fn random_2d(n: usize, b: Boundary) -> DiscreteOperator {
    let g = Grid::unit_2d(n, b).unwrap();
    assemble_operator(&g, &random_elliptic_coefficients(&g, 0.5, 2.0, 1).unwrap()).unwrap()
}

fn random_field(grid: &Grid, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScalarField::from_fn(grid, |_| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

fn rel_err(a: &[c64], b: &[c64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

/// Lowest Fourier mode cos(2πx) and its exact eigenvalue on the periodic
/// n-point grid.
fn lowest_mode(grid: &Grid) -> (ScalarField, f64) {
    let n = grid.sizes()[0] as f64;
    let h = grid.spacing();
    let f = ScalarField::from_fn(grid, |i| c64::new((2.0 * PI * i as f64 / n).cos(), 0.0));
    let mu = (2.0 * (PI / n).sin() / h).powi(2);
    (f, mu)
}

#[test]
fn time_grid_is_log_uniform() {
    let tg = TimeGrid::new(0.01, 10.0, 16).unwrap();
    for w in tg.samples.windows(3) {
        assert!(((w[1] / w[0]).ln() - (w[2] / w[1]).ln()).abs() < 1e-12);
    }
    assert!((tg.log_step() - (1000f64).ln() / 15.0).abs() < 1e-15);
    assert!(TimeGrid::new(0.0, 1.0, 16).is_err());
    assert!(TimeGrid::new(0.1, 1.0, 15).is_err());
}

#[test]
fn heat_at_zero_is_identity_for_every_method() {
    let op = random_2d(8, Boundary::Periodic);
    let f = random_field(&op.grid, 1);
    for m in [HeatMethod::DenseOracle, HeatMethod::Krylov, HeatMethod::Spectral] {
        assert_eq!(heat_apply(&op, 0.0, &f, m).unwrap(), f);
    }
    assert!(heat_apply(&op, -1.0, &f, HeatMethod::Spectral).is_err());
}

#[test]
fn heat_preserves_constants() {
    let op = random_2d(8, Boundary::Periodic);
    let one = ScalarField::constant(&op.grid, c64::new(1.0, 0.0));
    for t in [1e-4, 0.01, 0.3, 5.0] {
        for m in [HeatMethod::DenseOracle, HeatMethod::Krylov, HeatMethod::Spectral] {
            let u = heat_apply(&op, t, &one, m).unwrap();
            assert!(u.sub(&one).max_abs() < 1e-10, "{m:?} t={t}");
        }
    }
}

#[test]
fn krylov_and_spectral_match_dense_exponential() {
    let op = random_2d(16, Boundary::Periodic);
    let mut delta = ScalarField::zeros(&op.grid);
    delta.values[op.grid.node([5, 9])] = c64::new(1.0, 0.0);
    let dense = heat_apply(&op, 0.1, &delta, HeatMethod::DenseOracle).unwrap();
    let kry = heat_apply(&op, 0.1, &delta, HeatMethod::Krylov).unwrap();
    let spec = heat_apply(&op, 0.1, &delta, HeatMethod::Spectral).unwrap();
    assert!(rel_err(&kry.values, &dense.values) <= 1e-8);
    assert!(rel_err(&spec.values, &dense.values) <= 1e-8);
}

#[test]
fn heat_power_matches_modewise_formula() {
    let op = laplace_1d(64, Boundary::Periodic);
    let (f, mu) = lowest_mode(&op.grid);
    let (t, k) = (0.5, 2);
    let got = heat_power_apply(&op, t, k, &f).unwrap();
    let factor = (t * t * mu).powi(2) * (-t * t * mu).exp();
    let want = f.scale(c64::new(factor, 0.0));
    assert!(got.sub(&want).max_abs() <= 1e-10);
}

#[test]
fn heat_power_kills_constants_and_rejects_zero_power() {
    let op = random_2d(8, Boundary::Periodic);
    let one = ScalarField::constant(&op.grid, c64::new(1.0, 0.0));
    assert!(heat_power_apply(&op, 0.7, 1, &one).unwrap().max_abs() < 1e-9);
    assert!(heat_power_apply(&op, 0.7, 0, &one).is_err());
    assert!(heat_power_apply(&op, 0.7, POWER_CAP + 1, &one).is_err());
}

#[test]
fn resolvent_matches_dense_lu() {
    let op = random_2d(16, Boundary::Periodic);
    let f = random_field(&op.grid, 2);
    let t: f64 = 0.3;
    let mut a = op.to_dense();
    for i in 0..op.len() {
        for j in 0..op.len() {
            a[(i, j)] *= t * t;
        }
        a[(i, i)] += c64::new(1.0, 0.0);
    }
    let rhs = Mat::from_fn(op.len(), 1, |i, _| f.values[i]);
    let x = a.partial_piv_lu().solve(&rhs);
    let want: Vec<c64> = (0..op.len()).map(|i| x[(i, 0)]).collect();
    let got = resolvent_apply(&op, t, &f).unwrap();
    assert!(rel_err(&got.values, &want) <= 1e-10);
}

#[test]
fn resolvent_trivial_cases() {
    let op = random_2d(8, Boundary::Periodic);
    let f = random_field(&op.grid, 3);
    assert_eq!(resolvent_apply(&op, 0.0, &f).unwrap(), f);
    let one = ScalarField::constant(&op.grid, c64::new(1.0, 0.0));
    assert!(resolvent_apply(&op, 0.4, &one).unwrap().sub(&one).max_abs() < 1e-10);
}

#[test]
fn poisson_normalization_and_constants() {
    let op = random_2d(8, Boundary::Periodic);
    let f = random_field(&op.grid, 4);
    let p0 = poisson_apply(&op, 0.0, &f, 64).unwrap();
    assert!(rel_err(&p0.values, &f.values) <= 1e-8);
    let one = ScalarField::constant(&op.grid, c64::new(1.0, 0.0));
    let p1 = poisson_apply(&op, 0.3, &one, 64).unwrap();
    assert!(p1.sub(&one).max_abs() < 1e-10);
    assert!(poisson_apply(&op, 0.3, &one, 8).is_err());
}

#[test]
fn poisson_matches_modewise_factor() {
    let op = laplace_1d(64, Boundary::Periodic);
    let (f, mu) = lowest_mode(&op.grid);
    let t = 0.4;
    let want = f.scale(c64::new((-t * mu.sqrt()).exp(), 0.0));
    let err = |nodes| poisson_apply(&op, t, &f, nodes).unwrap().sub(&want).max_abs();
    // the plain rule converges slowly because e^{-a/u} is not smooth at
    // u = 0: about 1.7e-6 at 64 nodes, 5e-9 at 256
    assert!(err(64) <= 2e-6);
    assert!(err(DEFAULT_POISSON_NODES) <= 1e-7);
}

#[test]
fn neg_power_inverts_l() {
    let op = random_2d(16, Boundary::Periodic);
    let f = random_field(&op.grid, 5).remove_mean();
    let lf = op.apply(&f).unwrap();
    let back = neg_power_apply(&op, 1, &lf).unwrap();
    assert!(rel_err(&back.values, &f.values) <= 1e-10);
    let one = ScalarField::constant(&op.grid, c64::new(1.0, 0.0));
    assert!(matches!(neg_power_apply(&op, 1, &one), Err(Error::KernelComponent { .. })));
}

#[test]
fn neg_power_matches_dense_solves_on_dirichlet_grid() {
    let op = laplace_1d(32, Boundary::Dirichlet);
    let f = random_field(&op.grid, 6);
    let a = op.to_dense();
    let lu = a.partial_piv_lu();
    let rhs = Mat::from_fn(op.len(), 1, |i, _| f.values[i]);
    let x = lu.solve(&lu.solve(&rhs));
    let want: Vec<c64> = (0..op.len()).map(|i| x[(i, 0)]).collect();
    let got = neg_power_apply(&op, 2, &f).unwrap();
    assert!(rel_err(&got.values, &want) <= 1e-10);
}

#[test]
fn semigroup_law() {
    let op = random_2d(16, Boundary::Periodic);
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for trial in 0..20 {
        let s = 0.01 + 0.99 * rng.random::<f64>();
        let t = 0.01 + 0.99 * rng.random::<f64>();
        let f = random_field(&op.grid, 100 + trial);
        let a =
            heat_apply(&op, s, &heat_apply(&op, t, &f, HeatMethod::Spectral).unwrap(), HeatMethod::Spectral).unwrap();
        let b = heat_apply(&op, s + t, &f, HeatMethod::Spectral).unwrap();
        assert!(rel_err(&a.values, &b.values) <= 1e-9);
    }
}

#[test]
fn heat_adjoint_duality() {
    let op = random_2d(16, Boundary::Dirichlet);
    let adj = op.adjoint();
    for seed in 0..10 {
        let f = random_field(&op.grid, 200 + seed);
        let g = random_field(&op.grid, 300 + seed);
        let t = 0.002 * (seed + 1) as f64;
        let lhs = heat_apply(&op, t, &f, HeatMethod::Spectral).unwrap().inner(&g);
        let rhs = f.inner(&heat_apply(&adj, t, &g, HeatMethod::Spectral).unwrap());
        assert!((lhs - rhs).norm() <= 1e-9 * lhs.norm().max(f.norm_l2() * g.norm_l2()));
    }
}

#[test]
fn subordination_consistency() {
    // low modes need t²μ/4 of order one for the rule to be accurate; on the
    // unit torus that means t ≳ 0.5
    let op = laplace_1d(64, Boundary::Periodic);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..10 {
        let s = 0.5 + 0.5 * rng.random::<f64>();
        let t = 0.5 + 0.5 * rng.random::<f64>();
        let f = random_field(&op.grid, 400 + trial);
        let n = DEFAULT_POISSON_NODES;
        let a = poisson_apply(&op, t, &poisson_apply(&op, s, &f, n).unwrap(), n).unwrap();
        let b = poisson_apply(&op, s + t, &f, n).unwrap();
        assert!(a.sub(&b).max_abs() <= 1e-6 * f.max_abs());
    }
}

#[test]
fn resolvent_identity() {
    let op = random_2d(16, Boundary::Periodic);
    for seed in 0..5 {
        let f = random_field(&op.grid, 500 + seed);
        let (t, s) = (0.05 + 0.1 * seed as f64, 0.4);
        let lhs = resolvent_apply(&op, t, &f).unwrap().sub(&resolvent_apply(&op, s, &f).unwrap());
        let inner = op.apply(&resolvent_apply(&op, s, &f).unwrap()).unwrap();
        let rhs = resolvent_apply(&op, t, &inner).unwrap().scale(c64::new(s * s - t * t, 0.0));
        assert!(rel_err(&lhs.values, &rhs.values) <= 1e-9);
    }
}

#[test]
fn profile_batch_agrees_with_single_applications() {
    let op = random_2d(8, Boundary::Periodic);
    let f = random_field(&op.grid, 7);
    let times = [0.05, 0.2];
    let heat = profile_batch(&op, &f, &times, Profile::HeatPower(1), 64).unwrap();
    for (j, &t) in times.iter().enumerate() {
        let want = heat_power_apply(&op, t, 1, &f).unwrap();
        assert!(rel_err(&heat[j], &want.values) <= 1e-10);
    }
    let pois = profile_batch(&op, &f, &times, Profile::Poisson, 64).unwrap();
    let sc = op.spectral().unwrap();
    for (j, &t) in times.iter().enumerate() {
        let exact = sc.apply(&f.values, |m| (-(m.sqrt() * t)).exp());
        assert!(rel_err(&pois[j], &exact) <= 1e-12);
        let quad = poisson_apply(&op, t, &f, DEFAULT_POISSON_NODES).unwrap();
        assert!(rel_err(&pois[j], &quad.values) <= 1e-3);
    }
}

#[test]
fn iterative_profiles_match_spectral_ones() {
    let op = random_2d(8, Boundary::Periodic);
    let f = random_field(&op.grid, 8).remove_mean();
    let rule = laguerre_rule(DEFAULT_POISSON_NODES).unwrap();
    let sc = op.spectral().unwrap();
    for profile in [
        Profile::Heat,
        Profile::HeatPower(2),
        Profile::Poisson,
        Profile::PoissonPower(1),
        Profile::PoissonDeriv,
        Profile::PoissonMinusHeat,
    ] {
        let t = 0.15;
        let it = profile.apply_iterative(&op, &rule, t, &f.values).unwrap();
        let sp = sc.apply(&f.values, |m| profile.scalar(t, m));
        // the iterative Poisson profiles carry the Laguerre rule error
        let tol = match profile {
            Profile::PoissonDeriv => 1e-3,
            p if p.uses_poisson() => 1e-4,
            _ => 1e-9,
        };
        assert!(rel_err(&it, &sp) <= tol, "{profile:?}: {}", rel_err(&it, &sp));
    }
}

fn quarters(n: usize) -> (Vec<usize>, Vec<usize>) {
    ((0..n / 4).collect(), (n / 2..3 * n / 4).collect())
}

#[test]
fn gaffney_rejects_overlap() {
    let op = laplace_1d(64, Boundary::Periodic);
    let e: Vec<usize> = (0..10).collect();
    let tg = TimeGrid::new(1e-3, 1e-1, 16).unwrap();
    assert!(matches!(gaffney_profile(&op, GaffneyFamily::Heat, &e, &e, &tg), Err(Error::OverlappingSets)));
    let f: Vec<usize> = (9..20).collect();
    assert!(offdiag_pq_profile(&op, 2.0, f64::INFINITY, &e, &f, &tg).is_err());
}

#[test]
fn gaffney_heat_decay_and_exponent() {
    let op = laplace_1d(128, Boundary::Periodic);
    let (e, f) = quarters(128);
    let d = set_distance(&op.grid, &e, &f).unwrap();
    let tg = TimeGrid::new(d * d / 32.0, d * d, 32).unwrap();
    let prof = gaffney_profile(&op, GaffneyFamily::Heat, &e, &f, &tg).unwrap();
    for w in prof.measured_norms[..5].windows(2) {
        assert!(w[0] < w[1]);
    }
    let beta = prof.fitted_beta.unwrap();
    assert!((0.8..=1.2).contains(&beta), "beta = {beta}");
    assert!(prof.to_csv().lines().count() == 33);
}

#[test]
fn pq_profile_reduces_to_l2_profile() {
    let op = laplace_1d(64, Boundary::Periodic);
    let (e, f) = quarters(64);
    let tg = TimeGrid::new(1e-3, 1e-1, 16).unwrap();
    let a = gaffney_profile(&op, GaffneyFamily::Heat, &e, &f, &tg).unwrap();
    let b = offdiag_pq_profile(&op, 2.0, 2.0, &e, &f, &tg).unwrap();
    assert_eq!(a.measured_norms, b.measured_norms);
}

#[test]
fn pq_prefactor_slope() {
    let op = laplace_1d(128, Boundary::Periodic);
    let e: Vec<usize> = (0..64).collect();
    let f: Vec<usize> = (64..128).collect();
    let h2 = op.grid.spacing().powi(2);
    let tg = TimeGrid::new(8.0 * h2, 128.0 * h2, 16).unwrap();
    let prof = offdiag_pq_profile(&op, 2.0, f64::INFINITY, &e, &f, &tg).unwrap();
    let norms = prof.operator_norms.unwrap();
    let slope = loglog_slope(&prof.t_values, &norms);
    assert!((slope + 0.25).abs() <= 0.15, "slope {slope}");
    let pre = prof.predicted_prefactor.unwrap();
    assert!((loglog_slope(&prof.t_values, &pre) + 0.25).abs() < 1e-12);
}

#[test]
fn all_families_decay_over_the_smallest_decade() {
    let op = random_2d(16, Boundary::Periodic);
    let g = &op.grid;
    let e: Vec<usize> = (0..g.len()).filter(|&x| g.multi_index(x)[0] < 4).collect();
    let f: Vec<usize> = (0..g.len()).filter(|&x| (8..12).contains(&g.multi_index(x)[0])).collect();
    let d = set_distance(g, &e, &f).unwrap();
    let tg = TimeGrid::new(d * d / 100.0, d * d, 16).unwrap();
    let decade = tg.samples.iter().take_while(|&&t| t <= 10.0 * tg.t_min).count();
    for fam in GaffneyFamily::ALL {
        let prof = gaffney_profile(&op, fam, &e, &f, &tg).unwrap();
        for w in prof.measured_norms[..decade].windows(2) {
            assert!(w[0] <= w[1], "{fam:?}");
        }
    }
}

#[test]
fn families_are_uniformly_bounded() {
    let op = random_2d(8, Boundary::Periodic);
    let h2 = op.grid.spacing().powi(2);
    let tg = TimeGrid::new(h2, 1e4 * h2, 16).unwrap();
    for fam in GaffneyFamily::ALL {
        let norms = uniform_bound_profile(&op, fam, &tg).unwrap();
        let sup = norms.iter().copied().fold(0.0, f64::max);
        assert!(sup.is_finite() && sup < 10.0, "{fam:?}: {sup}");
    }
}
