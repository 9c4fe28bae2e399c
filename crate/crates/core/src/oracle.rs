//! Slow reference computations that share no code path with the fast
//! evaluators: dense Padé exponentials, a Denman–Beavers square root and
//! exhaustive enumeration of cones and balls by pairwise distance.

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;

use crate::c64;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{expm, mat_vec};
use crate::operator::DiscreteOperator;
use crate::semigroup::TimeGrid;

const DB_ITERATIONS: usize = 60;

fn scaled(a: &Mat<c64>, s: f64) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

fn frob(a: &Mat<c64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

/// e^{−tL} as a dense matrix.
pub fn dense_heat(op: &DiscreteOperator, t: f64) -> Mat<c64> {
    expm(scaled(&op.to_dense(), -t).as_ref())
}

/// √L by the Denman–Beavers iteration. On periodic grids the constants are
/// deflated first: √L = √(L + P₀) − P₀ with P₀ the mean projector, which
/// is valid because L and L* both annihilate constants.
pub fn dense_sqrt(op: &DiscreteOperator) -> Result<Mat<c64>> {
    let n = op.len();
    let l = op.to_dense();
    let p0 = if op.grid.is_periodic() { 1.0 / n as f64 } else { 0.0 };
    let a = Mat::from_fn(n, n, |i, j| l[(i, j)] + p0);
    let mut y = a.clone();
    let mut z = Mat::<c64>::identity(n, n);
    for _ in 0..DB_ITERATIONS {
        let yi = y.partial_piv_lu().inverse();
        let zi = z.partial_piv_lu().inverse();
        let y_next = scaled(&(&y + &zi), 0.5);
        let z_next = scaled(&(&z + &yi), 0.5);
        let step = frob(&(&y_next - &y)) / frob(&y_next);
        y = y_next;
        z = z_next;
        if step < 1e-15 {
            break;
        }
    }
    let residual = frob(&(&(&y * &y) - &a)) / frob(&a);
    if !(residual < 1e-11) {
        return Err(Error::Numerical(format!("Denman–Beavers square root residual {residual:.2e}")));
    }
    Ok(Mat::from_fn(n, n, |i, j| y[(i, j)] - p0))
}

/// e^{−t√L} from a precomputed dense √L.
pub fn dense_poisson(sqrt_l: &Mat<c64>, t: f64) -> Mat<c64> {
    expm(scaled(sqrt_l, -t).as_ref())
}

pub fn apply(m: &Mat<c64>, v: &[c64]) -> Vec<c64> {
    mat_vec(m.as_ref(), v)
}

/// Forward-difference gradient, written out independently of the
/// operator module.
pub fn forward_gradient(grid: &Grid, u: &[c64]) -> Vec<Vec<c64>> {
    let h = grid.spacing();
    (0..grid.dim())
        .map(|axis| {
            (0..grid.len())
                .map(|x| {
                    let mut idx = grid.multi_index(x);
                    let n = grid.sizes()[axis];
                    let next = if idx[axis] + 1 < n {
                        idx[axis] += 1;
                        u[grid.node(idx)]
                    } else if grid.is_periodic() {
                        idx[axis] = 0;
                        u[grid.node(idx)]
                    } else {
                        c64::new(0.0, 0.0)
                    };
                    (next - u[x]) / h
                })
                .collect()
        })
        .collect()
}

/// Σ_c |F_c|² per node for layers given as `layers[j][c][y]`.
fn energies(layers: &[Vec<Vec<c64>>]) -> Vec<Vec<f64>> {
    layers
        .iter()
        .map(|comps| {
            let n = comps[0].len();
            (0..n).map(|y| comps.iter().map(|c| c[y].norm_sqr()).sum()).collect()
        })
        .collect()
}

/// Cone square function by summing over every (y, t_j) pair and testing
/// |x − y| < αt_j directly.
pub fn brute_cone(
    grid: &Grid,
    times: &TimeGrid,
    layers: &[Vec<Vec<c64>>],
    aperture: f64,
    window: (f64, f64),
) -> Vec<f64> {
    let e = energies(layers);
    let delta = (times.t_max / times.t_min).ln() / (times.count - 1) as f64;
    let n = grid.dim() as i32;
    (0..grid.len())
        .map(|x| {
            let mut total = 0.0;
            for (j, &t) in times.samples.iter().enumerate() {
                if t < window.0 || t > window.1 {
                    continue;
                }
                let w = grid.cell_volume() * delta * t.powi(-n);
                for y in 0..grid.len() {
                    if grid.distance(x, y) < aperture * t {
                        total += w * e[j][y];
                    }
                }
            }
            total.sqrt()
        })
        .collect()
}

fn ball_mean(grid: &Grid, e: &[f64], center: usize, radius: f64) -> f64 {
    let (mut s, mut count) = (0.0, 0usize);
    for z in 0..grid.len() {
        if grid.distance(center, z) < radius {
            s += e[z];
            count += 1;
        }
    }
    if count == 0 {
        e[center]
    } else {
        s / count as f64
    }
}

/// Non-tangential maximal function by enumerating every (y, t_j) with
/// |x − y| < βt_j and every node of B(y, βt_j).
pub fn brute_nontangential(grid: &Grid, times: &TimeGrid, layers: &[Vec<Vec<c64>>], beta: f64) -> Vec<f64> {
    let e = energies(layers);
    let means: Vec<Vec<f64>> = times
        .samples
        .iter()
        .enumerate()
        .map(|(j, &t)| (0..grid.len()).map(|y| ball_mean(grid, &e[j], y, beta * t)).collect())
        .collect();
    (0..grid.len())
        .map(|x| {
            let mut best = 0.0f64;
            for (j, &t) in times.samples.iter().enumerate() {
                for y in 0..grid.len() {
                    if grid.distance(x, y) < beta * t {
                        best = best.max(means[j][y]);
                    }
                }
            }
            best.sqrt()
        })
        .collect()
}

/// Star maximal function: sup over t_j of the mean over B(x, t_j).
pub fn brute_star(grid: &Grid, times: &TimeGrid, layers: &[Vec<Vec<c64>>]) -> Vec<f64> {
    let e = energies(layers);
    (0..grid.len())
        .map(|x| {
            times.samples.iter().enumerate().map(|(j, &t)| ball_mean(grid, &e[j], x, t)).fold(0.0, f64::max).sqrt()
        })
        .collect()
}

/// Hardy–Littlewood maximal function over closed balls of every distinct
/// pairwise distance.
pub fn brute_hl(grid: &Grid, abs: &[f64]) -> Vec<f64> {
    (0..grid.len())
        .map(|x| {
            let mut radii: Vec<f64> = (0..grid.len()).map(|y| grid.distance(x, y)).collect();
            radii.sort_by(f64::total_cmp);
            radii.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
            radii
                .iter()
                .map(|&r| {
                    let ball: Vec<usize> =
                        (0..grid.len()).filter(|&y| grid.distance(x, y) <= r * (1.0 + 1e-12)).collect();
                    ball.iter().map(|&y| abs[y]).sum::<f64>() / ball.len() as f64
                })
                .fold(0.0, f64::max)
        })
        .collect()
}
