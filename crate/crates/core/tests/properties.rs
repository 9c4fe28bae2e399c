use hardy_lab::functionals::{
    hl_maximal, nontangential_max, square_function, vertical_square_function, ConeSpec, MaximalKind, SquareKind,
    VerticalKind,
};
use hardy_lab::riesz::riesz_apply;
use hardy_lab::semigroup::{heat_apply, HeatMethod, TimeGrid};
use hardy_lab::spaces::{bmo_norm, carleson_functional, BmoVariant};
use hardy_lab::*;
use proptest::prelude::*;

const N: usize = 16;

fn setup(seed: u64) -> (DiscreteOperator, TimeGrid) {
    let g = Grid::unit_1d(N, Boundary::Periodic).unwrap();
    let a = random_elliptic_coefficients(&g, 0.5, 2.0, seed).unwrap();
    let times = TimeGrid::for_grid(&g, 16).unwrap();
    (assemble_operator(&g, &a).unwrap(), times)
}

fn field(op: &DiscreteOperator, v: &[(f64, f64)]) -> ScalarField {
    ScalarField::new(op.grid.clone(), v.iter().map(|&(re, im)| c64::new(re, im)).collect()).unwrap()
}

fn values() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), N)
}

/// Every functional, as a list of pointwise outputs.
fn all_functionals(op: &DiscreteOperator, times: &TimeGrid, f: &ScalarField) -> Vec<Vec<f64>> {
    let cone = ConeSpec::default();
    let mut out = Vec::new();
    for (kind, k) in [
        (SquareKind::Heat, 1),
        (SquareKind::HeatPower, 2),
        (SquareKind::PoissonGrad, 1),
        (SquareKind::PoissonPower, 1),
        (SquareKind::PoissonDeriv, 1),
        (SquareKind::PoissonFullGrad, 1),
    ] {
        out.push(square_function(f, op, &cone, kind, k, times).unwrap().abs_values());
    }
    for kind in [VerticalKind::Heat, VerticalKind::PoissonGrad, VerticalKind::PoissonDeriv, VerticalKind::PoissonAux] {
        out.push(vertical_square_function(f, op, kind, 1, times).unwrap().abs_values());
    }
    for kind in [
        MaximalKind::Heat,
        MaximalKind::HeatBeta,
        MaximalKind::HeatStar,
        MaximalKind::Poisson,
        MaximalKind::PoissonStar,
    ] {
        out.push(nontangential_max(f, op, kind, 2.0, 1, times).unwrap().abs_values());
    }
    out.push(hl_maximal(f).abs_values());
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn functionals_are_sublinear(seed in 0u64..1000, a in values(), b in values()) {
        let (op, times) = setup(seed);
        let (f, g) = (field(&op, &a), field(&op, &b));
        let tf = all_functionals(&op, &times, &f);
        let tg = all_functionals(&op, &times, &g);
        let tfg = all_functionals(&op, &times, &f.add(&g));
        for ((x, y), s) in tf.iter().zip(&tg).zip(&tfg) {
            for i in 0..N {
                prop_assert!(s[i] <= x[i] + y[i] + 1e-10 * (x[i] + y[i]).max(1.0));
            }
        }
    }

    #[test]
    fn functionals_scale_with_modulus(seed in 0u64..1000, a in values(), re in -3.0..3.0f64, im in -3.0..3.0f64) {
        let (op, times) = setup(seed);
        let f = field(&op, &a);
        let c = c64::new(re, im);
        let tf = all_functionals(&op, &times, &f);
        let tcf = all_functionals(&op, &times, &f.scale(c));
        for (x, y) in tf.iter().zip(&tcf) {
            for i in 0..N {
                prop_assert!((y[i] - c.norm() * x[i]).abs() <= 1e-12 * (c.norm() * x[i]).max(1e-300) + 1e-300);
            }
        }
    }

    // Only the cone integrals: N_h^β averages over B(y, βt), so a wider
    // aperture also means wider balls and the sup can drop.
    #[test]
    fn cones_grow_with_aperture(seed in 0u64..1000, a in values(), lo in 0.25..2.0f64, extra in 0.0..2.0f64, cut in 0.0..0.5f64) {
        let (op, times) = setup(seed);
        let f = field(&op, &a);
        let s = |cone: ConeSpec| square_function(&f, &op, &cone, SquareKind::Heat, 1, &times).unwrap();
        let narrow = s(ConeSpec::new(lo).unwrap());
        let wide = s(ConeSpec::new(lo + extra).unwrap());
        let window = s(ConeSpec::truncated(lo, cut, 0.5 + cut).unwrap());
        for i in 0..N {
            prop_assert!(wide.values[i].re >= narrow.values[i].re * (1.0 - 1e-12));
            prop_assert!(narrow.values[i].re >= window.values[i].re * (1.0 - 1e-12));
        }
    }

    #[test]
    fn bmo_and_carleson_homogeneity(seed in 0u64..1000, a in values(), re in -3.0..3.0f64, im in -3.0..3.0f64, shift in -2.0..2.0f64) {
        let (op, times) = setup(seed);
        let f = field(&op, &a);
        let c = c64::new(re, im);
        let cf = f.scale(c);
        for variant in [BmoVariant::Heat, BmoVariant::Resolvent] {
            let b = bmo_norm(&f, &op, 1, variant, 2.0).unwrap().norm;
            let bc = bmo_norm(&cf, &op, 1, variant, 2.0).unwrap().norm;
            prop_assert!((bc - c.norm() * b).abs() <= 1e-10 * c.norm() * b + 1e-14);
            // constants are invisible
            let shifted = f.add(&ScalarField::constant(&op.grid, c64::new(shift, 0.0)));
            let bs = bmo_norm(&shifted, &op, 1, variant, 2.0).unwrap().norm;
            prop_assert!((bs - b).abs() <= 1e-9 * b.max(1.0));
        }
        let m = carleson_functional(&f, &op, 1, &times).unwrap().carleson_norm;
        let mc = carleson_functional(&cf, &op, 1, &times).unwrap().carleson_norm;
        prop_assert!((mc - c.norm_sqr() * m).abs() <= 1e-10 * c.norm_sqr() * m + 1e-14);
    }

    #[test]
    fn riesz_is_linear(seed in 0u64..1000, a in values(), b in values(), re in -2.0..2.0f64, im in -2.0..2.0f64) {
        let (op, _) = setup(seed);
        let (f, g) = (field(&op, &a).remove_mean(), field(&op, &b).remove_mean());
        let c = c64::new(re, im);
        let lhs = riesz_apply(&op, &f.scale(c).add(&g), 64).unwrap();
        let (rf, rg) = (riesz_apply(&op, &f, 64).unwrap(), riesz_apply(&op, &g, 64).unwrap());
        let scale = rf.norm_l2() * c.norm() + rg.norm_l2();
        let diff: f64 = lhs
            .components
            .iter()
            .zip(rf.components.iter().zip(&rg.components))
            .flat_map(|(l, (x, y))| l.iter().zip(x.iter().zip(y)).map(move |(l, (x, y))| (l - c * x - y).norm_sqr()))
            .sum::<f64>()
            .sqrt();
        prop_assert!(diff <= 1e-9 * scale.max(1e-300));
    }

    #[test]
    fn adjoint_and_semigroup_law(seed in 0u64..1000, a in values(), b in values(), s in 0.01..1.0f64, t in 0.01..1.0f64) {
        let (op, _) = setup(seed);
        let (u, v) = (field(&op, &a), field(&op, &b));
        let lhs = op.apply(&u).unwrap().inner(&v);
        let rhs = u.inner(&op.apply_adjoint(&v).unwrap());
        prop_assert!((lhs - rhs).norm() <= 1e-12 * op.apply(&u).unwrap().norm_l2() * v.norm_l2());
        let two = heat_apply(&op, s, &heat_apply(&op, t, &u, HeatMethod::Spectral).unwrap(), HeatMethod::Spectral).unwrap();
        let one = heat_apply(&op, s + t, &u, HeatMethod::Spectral).unwrap();
        prop_assert!(two.sub(&one).norm_l2() <= 1e-9 * u.norm_l2());
    }
}
