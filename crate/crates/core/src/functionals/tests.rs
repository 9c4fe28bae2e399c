use super::*;
use crate::coefficients::{random_elliptic_coefficients, CoefficientField};
use crate::grid::Boundary;
use crate::operator::assemble_operator;
use crate::oracle;
use crate::stats::spread;
use gauss_quad::GaussLegendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn laplace_1d(n: usize) -> DiscreteOperator {
    let g = Grid::unit_1d(n, Boundary::Periodic).unwrap();
    assemble_operator(&g, &CoefficientField::identity(&g)).unwrap()
}

fn random_2d(n: usize) -> DiscreteOperator {
    let g = Grid::unit_2d(n, Boundary::Periodic).unwrap();
    assemble_operator(&g, &random_elliptic_coefficients(&g, 0.5, 2.0, 1).unwrap()).unwrap()
}

fn random_field(grid: &Grid, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScalarField::from_fn(grid, |_| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

fn real_parts(f: &ScalarField) -> Vec<f64> {
    f.values.iter().map(|v| v.re).collect()
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

fn point_mass(grid: &Grid) -> ScalarField {
    let mut f = ScalarField::zeros(grid);
    f.values[0] = c64::new(1.0, 0.0);
    f.remove_mean()
}

/// Dense-oracle integrand layers `[j][c][y]` for a square-function kind.
fn dense_square_layers(
    op: &DiscreteOperator,
    f: &ScalarField,
    kind: SquareKind,
    k: u32,
    times: &TimeGrid,
) -> Vec<Vec<Vec<c64>>> {
    let sqrt_l = oracle::dense_sqrt(op).unwrap();
    let l = op.to_dense();
    let lpow = |v: Vec<c64>, t: f64, k: u32| {
        let mut v = v;
        for _ in 0..k {
            v = oracle::apply(&l, &v).into_iter().map(|x| x * (t * t)).collect();
        }
        v
    };
    times
        .samples
        .iter()
        .map(|&t| {
            let heat = || oracle::apply(&oracle::dense_heat(op, t * t), &f.values);
            let pois = || oracle::apply(&oracle::dense_poisson(&sqrt_l, t), &f.values);
            let tgrad = |u: &[c64]| -> Vec<Vec<c64>> {
                oracle::forward_gradient(&op.grid, u)
                    .into_iter()
                    .map(|c| c.into_iter().map(|v| v * t).collect())
                    .collect()
            };
            let tsqrt = |u: Vec<c64>| -> Vec<c64> { oracle::apply(&sqrt_l, &u).into_iter().map(|v| v * t).collect() };
            match kind {
                SquareKind::Heat => vec![lpow(heat(), t, 1)],
                SquareKind::HeatPower => vec![lpow(heat(), t, k)],
                SquareKind::PoissonGrad => tgrad(&pois()),
                SquareKind::PoissonPower => vec![lpow(pois(), t, k)],
                SquareKind::PoissonDeriv => vec![tsqrt(pois())],
                SquareKind::PoissonFullGrad => {
                    let p = pois();
                    let mut c = tgrad(&p);
                    c.push(tsqrt(p).into_iter().map(|v| -v).collect());
                    c
                }
            }
        })
        .collect()
}

fn dense_maximal_layers(
    op: &DiscreteOperator,
    f: &ScalarField,
    kind: MaximalKind,
    m: u32,
    times: &TimeGrid,
) -> Vec<Vec<Vec<c64>>> {
    let sqrt_l = oracle::dense_sqrt(op).unwrap();
    let l = op.to_dense();
    times
        .samples
        .iter()
        .map(|&t| {
            let v = match kind {
                MaximalKind::Poisson | MaximalKind::PoissonStar => {
                    oracle::apply(&oracle::dense_poisson(&sqrt_l, t), &f.values)
                }
                _ => oracle::apply(&oracle::dense_heat(op, t * t), &f.values),
            };
            let v = if kind == MaximalKind::HeatStarPower {
                let mut v = v;
                for _ in 0..m {
                    v = oracle::apply(&l, &v).into_iter().map(|x| x * (t * t)).collect();
                }
                v
            } else {
                v
            };
            vec![v]
        })
        .collect()
}

#[test]
fn cone_spec_validation() {
    assert!(ConeSpec::new(0.0).is_err());
    assert!(ConeSpec::truncated(1.0, 0.5, 0.5).is_err());
    assert!(ConeSpec::truncated(1.0, 0.1, 0.5).is_ok());
    assert_eq!("heat_K".parse::<SquareKind>().unwrap(), SquareKind::HeatPower);
    assert_eq!("g_P_aux".parse::<VerticalKind>().unwrap(), VerticalKind::PoissonAux);
    assert!("nope".parse::<MaximalKind>().is_err());
}

#[test]
fn zero_field_gives_zero_cone_integral() {
    let g = Grid::unit_1d(32, Boundary::Periodic).unwrap();
    let times = TimeGrid::for_grid(&g, 16).unwrap();
    let s = cone_integrate(&SpaceTimeField::zeros(&g, &times, 1), &ConeSpec::default());
    assert!(s.values.iter().all(|v| *v == c64::new(0.0, 0.0)));
}

#[test]
fn single_cell_indicator_matches_direct_sum() {
    for g in [Grid::unit_1d(32, Boundary::Periodic).unwrap(), Grid::unit_2d(8, Boundary::Dirichlet).unwrap()] {
        let times = TimeGrid::for_grid(&g, 16).unwrap();
        let (y0, j0) = (g.len() / 3, 9);
        let mut field = SpaceTimeField::zeros(&g, &times, 1);
        field.values[j0 * g.len() + y0] = c64::new(1.0, 0.0);
        let t0 = times.samples[j0];
        let w = g.cell_volume() * times.log_step() * t0.powi(-(g.dim() as i32));
        let s = cone_integrate(&field, &ConeSpec::default());
        for x in 0..g.len() {
            let want = if g.distance(x, y0) < t0 { w.sqrt() } else { 0.0 };
            assert!((s.values[x].re - want).abs() <= 1e-14 * w.sqrt());
        }
        let layers: Vec<Vec<Vec<c64>>> = (0..times.len()).map(|j| vec![field.slice(j, 0).to_vec()]).collect();
        let brute = oracle::brute_cone(&g, &times, &layers, 1.0, (0.0, f64::INFINITY));
        assert!(rel_l2(&real_parts(&s), &brute) <= 1e-14);
    }
}

#[test]
fn cone_monotone_in_aperture_and_window() {
    let op = laplace_1d(64);
    let times = TimeGrid::for_grid(&op.grid, 24).unwrap();
    let field = square_integrand(&random_field(&op.grid, 3), &op, SquareKind::Heat, 1, &times).unwrap();
    let narrow = cone_integrate(&field, &ConeSpec::new(1.0).unwrap());
    let wide = cone_integrate(&field, &ConeSpec::new(2.0).unwrap());
    let cut = cone_integrate(&field, &ConeSpec::truncated(1.0, 0.01, 0.5).unwrap());
    for x in 0..op.len() {
        assert!(wide.values[x].re >= narrow.values[x].re);
        assert!(cut.values[x].re <= narrow.values[x].re);
    }
}

#[test]
fn constants_are_annihilated() {
    let op = laplace_1d(32);
    let times = TimeGrid::for_grid(&op.grid, 16).unwrap();
    let one = ScalarField::constant(&op.grid, c64::new(1.0, 0.0));
    let s = square_function(&one, &op, &ConeSpec::default(), SquareKind::Heat, 1, &times).unwrap();
    let g = vertical_square_function(&one, &op, VerticalKind::Heat, 1, &times).unwrap();
    assert!(s.max_abs() <= 1e-10 && g.max_abs() <= 1e-10);
    let n = nontangential_max(&one, &op, MaximalKind::Heat, 1.0, 1, &times).unwrap();
    assert!(n.values.iter().all(|v| (v.re - 1.0).abs() <= 1e-10));
}

#[test]
fn heat_k_one_is_heat() {
    let op = laplace_1d(32);
    let times = TimeGrid::for_grid(&op.grid, 16).unwrap();
    let f = random_field(&op.grid, 4);
    let cone = ConeSpec::default();
    let a = square_function(&f, &op, &cone, SquareKind::Heat, 1, &times).unwrap();
    let b = square_function(&f, &op, &cone, SquareKind::HeatPower, 1, &times).unwrap();
    assert_eq!(a, b);
    let nb = nontangential_max(&f, &op, MaximalKind::HeatBeta, 1.0, 1, &times).unwrap();
    let nh = nontangential_max(&f, &op, MaximalKind::Heat, 3.0, 1, &times).unwrap();
    assert_eq!(nb, nh);
}

#[test]
fn heat_square_function_matches_brute_force_1d() {
    let op = laplace_1d(64);
    let times = TimeGrid::for_grid(&op.grid, 32).unwrap();
    let f = point_mass(&op.grid);
    let s = square_function(&f, &op, &ConeSpec::default(), SquareKind::Heat, 1, &times).unwrap();
    let layers = dense_square_layers(&op, &f, SquareKind::Heat, 1, &times);
    let brute = oracle::brute_cone(&op.grid, &times, &layers, 1.0, (0.0, f64::INFINITY));
    let err = rel_l2(&real_parts(&s), &brute);
    assert!(err <= 1e-9, "{err:.2e}");
}

#[test]
fn every_square_kind_matches_brute_force() {
    let cases = [(laplace_1d(32), 5u64), (random_2d(8), 6)];
    for (op, seed) in &cases {
        let times = TimeGrid::for_grid(&op.grid, 16).unwrap();
        let f = random_field(&op.grid, *seed).remove_mean();
        let cone = ConeSpec::truncated(1.5, times.samples[2], times.samples[13]).unwrap();
        for kind in [
            SquareKind::Heat,
            SquareKind::HeatPower,
            SquareKind::PoissonGrad,
            SquareKind::PoissonPower,
            SquareKind::PoissonDeriv,
            SquareKind::PoissonFullGrad,
        ] {
            let s = square_function(&f, op, &cone, kind, 2, &times).unwrap();
            let layers = dense_square_layers(op, &f, kind, 2, &times);
            let brute = oracle::brute_cone(&op.grid, &times, &layers, 1.5, (cone.t_lower, cone.t_upper));
            let err = rel_l2(&real_parts(&s), &brute);
            assert!(err <= 1e-9, "{kind:?} on {:?}: {err:.2e}", op.grid.sizes());
        }
    }
}

#[test]
fn every_maximal_kind_matches_brute_force() {
    let cases = [(laplace_1d(64), 7u64), (random_2d(8), 8)];
    for (op, seed) in &cases {
        let times = TimeGrid::for_grid(&op.grid, 16).unwrap();
        let f = random_field(&op.grid, *seed);
        for kind in [
            MaximalKind::Heat,
            MaximalKind::HeatBeta,
            MaximalKind::HeatStar,
            MaximalKind::HeatStarPower,
            MaximalKind::Poisson,
            MaximalKind::PoissonStar,
        ] {
            let beta = 2.0;
            let n = nontangential_max(&f, op, kind, beta, 2, &times).unwrap();
            let layers = dense_maximal_layers(op, &f, kind, 2, &times);
            let brute = match kind {
                MaximalKind::HeatStar | MaximalKind::HeatStarPower | MaximalKind::PoissonStar => {
                    oracle::brute_star(&op.grid, &times, &layers)
                }
                MaximalKind::HeatBeta => oracle::brute_nontangential(&op.grid, &times, &layers, beta),
                _ => oracle::brute_nontangential(&op.grid, &times, &layers, 1.0),
            };
            let err = rel_l2(&real_parts(&n), &brute);
            assert!(err <= 1e-9, "{kind:?} on {:?}: {err:.2e}", op.grid.sizes());
        }
    }
}

#[test]
fn maximal_monotone_in_beta() {
    let op = laplace_1d(64);
    let times = TimeGrid::for_grid(&op.grid, 16).unwrap();
    let f = random_field(&op.grid, 9);
    let mut prev = vec![0.0; op.len()];
    for beta in [0.5, 1.0, 2.0, 4.0] {
        let n = real_parts(&nontangential_max(&f, &op, MaximalKind::HeatBeta, beta, 1, &times).unwrap());
        assert!(n.iter().zip(&prev).all(|(a, b)| a >= b));
        prev = n;
    }
}

#[test]
fn g_p_aux_matches_scalar_quadrature() {
    let op = laplace_1d(64);
    let g = &op.grid;
    let n = 64.0;
    let k = 3.0;
    let f = ScalarField::from_fn(g, |i| c64::from_polar(1.0, 2.0 * PI * k * i as f64 / n));
    let mu = (2.0 * (PI * k / n).sin() / g.spacing()).powi(2);
    let times = TimeGrid::new(1e-5, 10.0, 256).unwrap();
    let got = vertical_square_function(&f, &op, VerticalKind::PoissonAux, 1, &times).unwrap();

    // ∫₀^∞ |e^{−t√μ} − e^{−t²μ}|² dt/t in s = ln t, composite Gauss–Legendre
    let integrand = |s: f64| {
        let t = s.exp();
        ((-t * mu.sqrt()).exp() - (-t * t * mu).exp()).powi(2)
    };
    let rule = GaussLegendre::new(std::num::NonZeroUsize::new(20).unwrap());
    let (lo, hi, panels) = (-40.0f64, 5.0f64, 400);
    let width = (hi - lo) / panels as f64;
    let reference: f64 = (0..panels)
        .map(|p| {
            let a = lo + p as f64 * width;
            rule.integrate(a, a + width, integrand)
        })
        .sum::<f64>()
        .sqrt();
    for v in &got.values {
        assert!((v.re - reference).abs() <= 1e-6 * reference, "{} vs {reference}", v.re);
    }
}

#[test]
fn g_p_bar_dominated_by_g_h() {
    let op = laplace_1d(64);
    let times = TimeGrid::for_grid(&op.grid, 64).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let f = random_field(&op.grid, 20 + seed).remove_mean();
        let bar = vertical_square_function(&f, &op, VerticalKind::PoissonDeriv, 1, &times).unwrap();
        let gh = vertical_square_function(&f, &op, VerticalKind::Heat, 1, &times).unwrap();
        for (a, b) in bar.values.iter().zip(&gh.values) {
            worst = worst.max(a.re / b.re);
        }
    }
    assert!(worst.is_finite() && worst <= 10.0, "{worst}");
}

#[test]
fn hl_maximal_basics() {
    let g = Grid::unit_1d(32, Boundary::Periodic).unwrap();
    let c = hl_maximal(&ScalarField::constant(&g, c64::new(2.5, 0.0)));
    assert!(c.values.iter().all(|v| (v.re - 2.5).abs() <= 1e-14));

    let mut delta = ScalarField::zeros(&g);
    delta.values[0] = c64::new(1.0, 0.0);
    let m = hl_maximal(&delta);
    let brute = oracle::brute_hl(&g, &delta.abs_values());
    for x in 0..32 {
        let dist = x.min(32 - x);
        let want = if dist == 16 { 1.0 / 32.0 } else { 1.0 / (2 * dist + 1) as f64 };
        assert!((m.values[x].re - want).abs() <= 1e-15);
        assert!((m.values[x].re - brute[x]).abs() <= 1e-15);
    }

    let g2 = Grid::unit_2d(8, Boundary::Dirichlet).unwrap();
    let f = random_field(&g2, 11);
    let m = hl_maximal(&f);
    let brute = oracle::brute_hl(&g2, &f.abs_values());
    for (x, v) in m.values.iter().enumerate() {
        assert!(v.re >= f.values[x].norm() - 1e-15);
        assert!((v.re - brute[x]).abs() <= 1e-14);
    }
}

#[test]
fn aperture_ratio_trivial_cases_and_corpus() {
    let op = laplace_1d(64);
    let times = TimeGrid::for_grid(&op.grid, 32).unwrap();
    let zero = SpaceTimeField::zeros(&op.grid, &times, 1);
    assert_eq!(aperture_compare(&zero, 2.0).unwrap().ratio, 1.0);
    assert!(aperture_compare(&zero, 0.5).is_err());

    let mut ratios = Vec::new();
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let values: Vec<c64> = (0..op.len() * times.len()).map(|_| c64::new(rng.random::<f64>() - 0.5, 0.0)).collect();
        let field = SpaceTimeField::new(op.grid.clone(), times.clone(), 1, values, "random").unwrap();
        assert_eq!(aperture_compare(&field, 1.0).unwrap().ratio, 1.0);
        ratios.push(aperture_compare(&field, 2.0).unwrap().ratio);
    }
    assert!(spread(&ratios).unwrap() <= 5.0);
}

#[test]
fn wide_aperture_maximal_ratio_is_stable() {
    let op = laplace_1d(64);
    let times = TimeGrid::for_grid(&op.grid, 32).unwrap();
    for beta in [2.0, 4.0] {
        let ratios: Vec<f64> = (0..10)
            .map(|seed| {
                let f = random_field(&op.grid, 40 + seed);
                let wide = nontangential_max(&f, &op, MaximalKind::HeatBeta, beta, 1, &times).unwrap().norm_l1();
                let unit = nontangential_max(&f, &op, MaximalKind::HeatBeta, 1.0, 1, &times).unwrap().norm_l1();
                wide / (beta * unit)
            })
            .collect();
        assert!(spread(&ratios).unwrap() <= 5.0);
    }
}
