use super::*;
use crate::coefficients::{random_elliptic_coefficients, CoefficientField};
use crate::grid::Boundary;
use crate::operator::assemble_operator;
use crate::oracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn laplace_1d(n: usize) -> DiscreteOperator {
    let g = Grid::unit_1d(n, Boundary::Periodic).unwrap();
    assemble_operator(&g, &CoefficientField::identity(&g)).unwrap()
}

fn random_op(grid: &Grid, seed: u64) -> DiscreteOperator {
    assemble_operator(grid, &random_elliptic_coefficients(grid, 0.5, 2.0, seed).unwrap()).unwrap()
}

fn random_mean_zero(grid: &Grid, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScalarField::from_fn(grid, |_| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).remove_mean()
}

fn mode(grid: &Grid, k: usize) -> ScalarField {
    let n = grid.len() as f64;
    ScalarField::from_fn(grid, |x| c64::from_polar(1.0, 2.0 * PI * (k * x) as f64 / n))
}

#[test]
fn constants_have_zero_norms() {
    for op in [laplace_1d(32), random_op(&Grid::unit_2d(8, Boundary::Periodic).unwrap(), 1)] {
        let one = ScalarField::constant(&op.grid, c64::new(1.0, 0.0));
        for (variant, p) in [(BmoVariant::Heat, 2.0), (BmoVariant::Resolvent, 2.0), (BmoVariant::PVariant, 3.0)] {
            let r = bmo_norm(&one, &op, 1, variant, p).unwrap();
            assert!(r.norm <= 1e-10, "{variant:?} {}", r.norm);
            assert!((r.kernel_mean - 1.0).abs() < 1e-12);
        }
        let times = TimeGrid::for_grid(&op.grid, 32).unwrap();
        assert!(carleson_functional(&one, &op, 1, &times).unwrap().carleson_norm <= 1e-10);
    }
}

#[test]
fn rejects_bad_parameters() {
    let op = laplace_1d(16);
    let f = random_mean_zero(&op.grid, 1);
    assert!(bmo_norm(&f, &op, 0, BmoVariant::Heat, 2.0).is_err());
    assert!(bmo_norm(&f, &op, 1, BmoVariant::Heat, 3.0).is_err());
    assert!(bmo_norm(&f, &op, 1, BmoVariant::PVariant, 1.0).is_err());
    assert!("resolvent".parse::<BmoVariant>().unwrap() == BmoVariant::Resolvent);
    assert!("p".parse::<BmoVariant>().unwrap() == BmoVariant::PVariant);
    assert!("mean".parse::<BmoVariant>().is_err());
    let times = TimeGrid::for_grid(&op.grid, 32).unwrap();
    let one = ScalarField::constant(&op.grid, c64::new(1.0, 0.0));
    assert!(matches!(duality_pair(&one, &f, &op, 1, &times), Err(Error::KernelComponent { .. })));
}

#[test]
fn cube_family_shape() {
    let g = Grid::unit_1d(16, Boundary::Periodic).unwrap();
    let fam = dyadic_cube_family(&g);
    // sides 2, 4, 8 at every position, 16 once
    assert_eq!(fam.len(), 3 * 16 + 1);
    let d = Grid::unit_1d(16, Boundary::Dirichlet).unwrap();
    assert_eq!(dyadic_cube_family(&d).len(), 15 + 13 + 9 + 1);
    let g2 = Grid::unit_2d(8, Boundary::Periodic).unwrap();
    assert_eq!(dyadic_cube_family(&g2).len(), 16 + 4 + 1);
    let wrap = CubeKey { side_nodes: 4, corner: [14, 0] };
    assert_eq!(wrap.nodes(&g), vec![14, 15, 0, 1]);
    for key in dyadic_cube_family(&g2) {
        let mut a = key.nodes(&g2);
        a.sort();
        assert_eq!(a, key.cube().nodes(&g2));
    }
}

#[test]
fn single_mode_matches_spectral_values() {
    let n = 64;
    let op = laplace_1d(n);
    let h = op.grid.spacing();
    let k = 21;
    let f = mode(&op.grid, k);
    let mu = 4.0 / (h * h) * (PI * k as f64 / n as f64).sin().powi(2);
    for m in [1, 2] {
        for variant in [BmoVariant::Heat, BmoVariant::Resolvent] {
            let r = bmo_norm(&f, &op, m, variant, 2.0).unwrap();
            for c in &r.per_cube {
                let l2 = (c.key.side_nodes as f64 * h).powi(2);
                let a = match variant {
                    BmoVariant::Resolvent => 1.0 / (1.0 + l2 * mu),
                    _ => (-l2 * mu).exp(),
                };
                let expected = (1.0 - a).powi(m as i32);
                assert!((c.value - expected).abs() <= 1e-9, "{variant:?} M={m} {:?}: {} vs {expected}", c.key, c.value);
            }
        }
    }
}

#[test]
fn norms_are_homogeneous() {
    let g = Grid::unit_2d(8, Boundary::Periodic).unwrap();
    let op = random_op(&g, 2);
    let f = random_mean_zero(&g, 3);
    let c = c64::new(-1.5, 2.0);
    let times = TimeGrid::for_grid(&g, 32).unwrap();
    for (variant, p) in [(BmoVariant::Heat, 2.0), (BmoVariant::Resolvent, 2.0), (BmoVariant::PVariant, 1.5)] {
        let a = bmo_norm(&f, &op, 1, variant, p).unwrap().norm;
        let b = bmo_norm(&f.scale(c), &op, 1, variant, p).unwrap().norm;
        assert!((b / a - c.norm()).abs() <= 1e-9, "{variant:?}");
    }
    let a = carleson_functional(&f, &op, 1, &times).unwrap().carleson_norm;
    let b = carleson_functional(&f.scale(c), &op, 1, &times).unwrap().carleson_norm;
    assert!((b / a - c.norm_sqr()).abs() <= 1e-9);
}

#[test]
fn subfamily_never_increases_norm() {
    let op = laplace_1d(32);
    let f = random_mean_zero(&op.grid, 4);
    let fam = dyadic_cube_family(&op.grid);
    let full = bmo_norm(&f, &op, 1, BmoVariant::Heat, 2.0).unwrap();
    assert_eq!(full.norm, full.per_cube.iter().map(|c| c.value).fold(0.0, f64::max));
    for stride in [2, 3, 7] {
        let sub: Vec<CubeKey> = fam.iter().copied().step_by(stride).collect();
        assert!(bmo_norm_on(&f, &op, 1, BmoVariant::Heat, 2.0, &sub).unwrap().norm <= full.norm);
    }
}

#[test]
fn p_two_entry_equals_heat_variant() {
    let op = random_op(&Grid::unit_2d(8, Boundary::Periodic).unwrap(), 5);
    let f = random_mean_zero(&op.grid, 6);
    let table = john_nirenberg_compare(&f, &op, 1, &[1.5, 2.0, 3.0]).unwrap();
    let heat = bmo_norm(&f, &op, 1, BmoVariant::Heat, 2.0).unwrap().norm;
    assert_eq!(table.norms[1], heat);
    assert_eq!(table.ratios[1][1], Some(1.0));
    // Hölder on each cube average
    assert!(table.norms[0] <= table.norms[1] && table.norms[1] <= table.norms[2]);
    let zero = john_nirenberg_compare(&ScalarField::zeros(&op.grid), &op, 1, &[2.0]).unwrap();
    assert_eq!(zero.norms, vec![0.0]);
    assert_eq!(zero.ratios[0][0], None);
}

/// Tent mass by looping over every node and sample with the tent test
/// written out, from dense-exponential layers.
fn brute_carleson(op: &DiscreteOperator, f: &ScalarField, m: u32, times: &TimeGrid, ball: &BallValue) -> (f64, f64) {
    let grid = &op.grid;
    let l = op.to_dense();
    let delta = (times.t_max / times.t_min).ln() / (times.count - 1) as f64;
    let (mut mass, mut count) = (0.0, 0);
    for y in 0..grid.len() {
        let d = grid.distance(ball.center, y);
        if d >= ball.radius {
            continue;
        }
        count += 1;
        for &t in &times.samples {
            if t > ball.radius - d + 1e-12 {
                continue;
            }
            let mut v = oracle::apply(&oracle::dense_heat(op, t * t), &f.values);
            for _ in 0..m {
                v = oracle::apply(&l, &v).into_iter().map(|x| x * (t * t)).collect();
            }
            mass += grid.cell_volume() * delta * v[y].norm_sqr();
        }
    }
    (mass, count as f64 * grid.cell_volume())
}

#[test]
fn carleson_matches_brute_force() {
    let cases = [
        (laplace_1d(32), 1u32),
        (random_op(&Grid::unit_2d(8, Boundary::Periodic).unwrap(), 7), 2),
        (random_op(&Grid::unit_1d(32, Boundary::Dirichlet).unwrap(), 8), 1),
    ];
    for (op, m) in cases {
        let f = random_mean_zero(&op.grid, 9);
        let times = TimeGrid::for_grid(&op.grid, 24).unwrap();
        let r = carleson_functional(&f, &op, m, &times).unwrap();
        assert_eq!(r.carleson_norm, r.per_ball.iter().map(|b| b.ratio).fold(0.0, f64::max));
        for b in r.per_ball.iter().step_by(5) {
            let (mass, vol) = brute_carleson(&op, &f, m, &times, b);
            assert!((b.mass - mass).abs() <= 1e-9 * mass.max(1e-300), "{b:?} vs {mass}");
            assert!((b.ratio - mass / vol).abs() <= 1e-9 * b.ratio.max(1e-300));
        }
    }
}

#[test]
fn tent_norms_of_zero_and_single_cell() {
    let g = Grid::unit_1d(32, Boundary::Periodic).unwrap();
    let times = TimeGrid::new(g.spacing() / 2.0, 0.25, 16).unwrap();
    let zero = SpaceTimeField::zeros(&g, &times, 1);
    assert_eq!(tent_norms(&zero), TentNorms { t1: 0.0, tinf: 0.0 });

    let g2 = Grid::unit_2d(8, Boundary::Periodic).unwrap();
    for (grid, y0, j0) in [(&g, 5usize, 3usize), (&g, 17, 9), (&g2, 19, 6)] {
        let times = TimeGrid::new(grid.spacing() / 2.0, 0.25, 16).unwrap();
        let mut field = SpaceTimeField::zeros(grid, &times, 1);
        field.values[j0 * grid.len() + y0] = c64::new(1.0, 0.0);
        let t0 = times.samples[j0];
        let vol = grid.cell_volume();
        let delta = times.log_step();
        let cell = vol * delta;
        // T¹: every x with |x − y0| < t0 sees vol·Δ·t0^{−n}
        let n_in = (0..grid.len()).filter(|&x| grid.distance(x, y0) < t0).count() as f64;
        let t1 = n_in * vol * (cell * t0.powi(-(grid.dim() as i32))).sqrt();
        // T^∞: the smallest family ball whose tent holds (y0, t0)
        let tinf = dyadic_ball_family(grid)
            .iter()
            .filter(|b| grid.distance(b.center, y0) < b.radius && t0 <= b.radius - grid.distance(b.center, y0) + 1e-12)
            .map(|b| {
                let count = (0..grid.len()).filter(|&z| grid.distance(b.center, z) < b.radius).count() as f64;
                (cell / (count * vol)).sqrt()
            })
            .fold(0.0, f64::max);
        let got = tent_norms(&field);
        assert!((got.t1 - t1).abs() <= 1e-12 * t1, "{} vs {t1}", got.t1);
        assert!((got.tinf - tinf).abs() <= 1e-12 * tinf, "{} vs {tinf}", got.tinf);
    }
}

#[test]
fn tent_duality_ratio_is_bounded() {
    let g = Grid::unit_1d(32, Boundary::Periodic).unwrap();
    let times = TimeGrid::new(g.spacing() / 2.0, 0.25, 24).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let len = times.len() * g.len();
        let mut draw = || (0..len).map(|_| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let f = SpaceTimeField::new(g.clone(), times.clone(), 1, draw(), "F").unwrap();
        let h = SpaceTimeField::new(g.clone(), times.clone(), 1, draw(), "G").unwrap();
        let w = g.cell_volume() * times.log_step();
        let lhs = f.values.iter().zip(&h.values).map(|(a, b)| a * b.conj()).sum::<c64>().norm() * w;
        let cf = tent_maximal(&f);
        let sg = cone_integrate(&h, &ConeSpec::default());
        let rhs: f64 = cf.values.iter().zip(&sg.values).map(|(a, b)| a.re * b.re).sum::<f64>() * g.cell_volume();
        worst = worst.max(lhs / rhs);
    }
    assert!(worst.is_finite() && worst <= 10.0, "{worst}");
}

#[test]
fn duality_pairing_reproduces_inner_product() {
    let ops = [laplace_1d(64), random_op(&Grid::unit_2d(8, Boundary::Periodic).unwrap(), 13)];
    for op in &ops {
        let h = op.grid.spacing();
        let times = TimeGrid::new(h / 256.0, 4.0 * op.grid.max_side(), 256).unwrap();
        assert_eq!(
            duality_pair(&ScalarField::zeros(&op.grid), &random_mean_zero(&op.grid, 1), op, 1, &times).unwrap(),
            c64::new(0.0, 0.0)
        );
        for (seed, m) in [(1u64, 1u32), (2, 2), (3, 3)] {
            let f = random_mean_zero(&op.grid, 100 + seed);
            let g = random_mean_zero(&op.grid, 200 + seed);
            let got = duality_pair(&f, &g, op, m, &times).unwrap();
            let want = f.inner(&g);
            let scale = f.norm_l2() * g.norm_l2();
            assert!((got - want).norm() <= 1e-6 * scale, "M={m}: {got} vs {want}");
        }
    }
}

#[test]
fn pairing_constant_normalizes_profile() {
    use gauss_quad::GaussLegendre;
    use std::num::NonZeroUsize;
    // ∫₀^∞ t^{2M+2} e^{−2t²} dt/t in u = ln t, piecewise Gauss–Legendre
    let rule = GaussLegendre::new(NonZeroUsize::new(40).unwrap());
    for m in 1..=3u32 {
        let integral: f64 = (-20..6)
            .map(|k| {
                rule.integrate(k as f64, k as f64 + 1.0, |u| (u * (2 * m + 2) as f64 - 2.0 * (2.0 * u).exp()).exp())
            })
            .sum();
        assert!((pairing_constant(m) * integral - 1.0).abs() < 1e-10, "M={m}");
    }
    assert_eq!(pairing_constant(1), 8.0);
}

#[test]
fn exports_have_one_row_per_entry() {
    let op = laplace_1d(16);
    let f = random_mean_zero(&op.grid, 2);
    let r = bmo_norm(&f, &op, 1, BmoVariant::Heat, 2.0).unwrap();
    let csv = r.to_csv();
    assert!(csv.starts_with("variant,M,p,side,cx,cy,value\nheat,1,2,2,0,0,"));
    assert_eq!(csv.lines().count(), r.per_cube.len() + 1);
    assert_eq!(r.summary_json()["norm"].as_f64(), Some(r.norm));
    let times = TimeGrid::for_grid(&op.grid, 16).unwrap();
    let c = carleson_functional(&f, &op, 1, &times).unwrap();
    assert_eq!(c.to_csv().lines().count(), c.per_ball.len() + 1);
}
