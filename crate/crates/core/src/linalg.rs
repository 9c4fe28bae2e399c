//! Dense kernels shared by the oracles: Padé matrix exponential, LU
//! solves, Arnoldi exponential actions and restarted GMRES.

use faer::linalg::solvers::{Solve, SolveLstsq};
use faer::{Mat, MatRef};
use num_complex::Complex64 as c64;

use crate::error::{Error, Result};

const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
const ONE: c64 = c64 { re: 1.0, im: 0.0 };

fn norm1(a: MatRef<'_, c64>) -> f64 {
    (0..a.ncols()).map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max)
}

fn lin(terms: &[(f64, &Mat<c64>)], ident: f64) -> Mat<c64> {
    let n = terms[0].1.nrows();
    Mat::from_fn(n, n, |i, j| {
        let mut v = if i == j { c64::new(ident, 0.0) } else { ZERO };
        for (c, m) in terms {
            v += m[(i, j)] * *c;
        }
        v
    })
}

/// e^A by degree-13 Padé approximation with scaling and squaring.
pub fn expm(a: MatRef<'_, c64>) -> Mat<c64> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    let n = a.nrows();
    if n == 0 {
        return Mat::zeros(0, 0);
    }
    let nrm = norm1(a);
    let s = if nrm > THETA13 { (nrm / THETA13).log2().ceil() as i32 } else { 0 };
    let scale = 0.5f64.powi(s);
    let a = Mat::from_fn(n, n, |i, j| a[(i, j)] * scale);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let inner_u = lin(&[(B[13], &a6), (B[11], &a4), (B[9], &a2)], 0.0);
    let tail_u = lin(&[(B[7], &a6), (B[5], &a4), (B[3], &a2)], B[1]);
    let u = &a * &(&(&a6 * &inner_u) + &tail_u);
    let inner_v = lin(&[(B[12], &a6), (B[10], &a4), (B[8], &a2)], 0.0);
    let tail_v = lin(&[(B[6], &a6), (B[4], &a4), (B[2], &a2)], B[0]);
    let v = &(&a6 * &inner_v) + &tail_v;

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.partial_piv_lu().solve(&p);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

pub fn mat_vec(a: MatRef<'_, c64>, x: &[c64]) -> Vec<c64> {
    (0..a.nrows()).map(|i| (0..a.ncols()).fold(ZERO, |acc, j| acc + a[(i, j)] * x[j])).collect()
}

pub fn lu_solve(a: MatRef<'_, c64>, b: &[c64]) -> Result<Vec<c64>> {
    let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
    let x = a.partial_piv_lu().solve(&rhs);
    let out: Vec<c64> = (0..b.len()).map(|i| x[(i, 0)]).collect();
    if out.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Singular("LU produced non-finite values".into()));
    }
    Ok(out)
}

pub(crate) fn dot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).fold(ZERO, |acc, (x, y)| acc + y.conj() * x)
}

pub(crate) fn norm2(a: &[c64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Arnoldi basis of dimension ≤ m for the Krylov space of `v`.
struct Arnoldi {
    basis: Vec<Vec<c64>>,
    h: Mat<c64>,
    /// h_{m+1,m}; zero on happy breakdown.
    tail: f64,
    dim: usize,
}

fn arnoldi(apply: &dyn Fn(&[c64]) -> Vec<c64>, v: &[c64], beta: f64, m: usize) -> Arnoldi {
    let mut basis = vec![v.iter().map(|x| x / beta).collect::<Vec<_>>()];
    let mut h = Mat::<c64>::zeros(m + 1, m);
    let mut tail = 0.0;
    let mut dim = m;
    for j in 0..m {
        let mut w = apply(&basis[j]);
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let c = dot(&w, q);
                h[(i, j)] += c;
                for (wk, qk) in w.iter_mut().zip(q) {
                    *wk -= c * qk;
                }
            }
        }
        let nw = norm2(&w);
        h[(j + 1, j)] = c64::new(nw, 0.0);
        tail = nw;
        let scale = (0..=j).map(|i| h[(i, j)].norm()).fold(0.0, f64::max).max(1e-300);
        if nw <= 1e-13 * scale {
            dim = j + 1;
            tail = 0.0;
            break;
        }
        if j + 1 < m {
            basis.push(w.iter().map(|x| x / nw).collect());
        }
    }
    Arnoldi { basis, h, tail, dim }
}

/// exp(−t A) v via Arnoldi with adaptive substeps (Saad's a posteriori
/// error estimate). `budget` caps the total number of operator
/// applications.
pub fn krylov_expmv(
    apply: &dyn Fn(&[c64]) -> Vec<c64>,
    v: &[c64],
    t: f64,
    m: usize,
    tol: f64,
    budget: usize,
) -> Result<Vec<c64>> {
    let mut x = v.to_vec();
    let mut done = 0.0;
    let mut tau = t;
    let mut used = 0usize;
    let mut rejected = 0usize;
    while done < t {
        let beta = norm2(&x);
        if beta == 0.0 {
            return Ok(x);
        }
        let step = tau.min(t - done);
        let ar = arnoldi(apply, &x, beta, m);
        used += ar.dim;
        if used > budget {
            return Err(Error::KrylovNonConvergence { budget });
        }
        let k = ar.dim;
        let hm = Mat::from_fn(k, k, |i, j| -ar.h[(i, j)] * step);
        let e = expm(hm.as_ref());
        let err = step * ar.tail * e[(k - 1, 0)].norm();
        // local tolerance proportional to the fraction of time covered
        if ar.tail == 0.0 || err <= tol * (step / t).max(1e-3) {
            let mut y = vec![ZERO; x.len()];
            for (i, q) in ar.basis.iter().take(k).enumerate() {
                let c = e[(i, 0)] * beta;
                for (yk, qk) in y.iter_mut().zip(q) {
                    *yk += c * qk;
                }
            }
            x = y;
            done += step;
            if err < 0.1 * tol * (step / t) {
                tau = step * 1.5;
            }
            rejected = 0;
        } else {
            tau = step * 0.5;
            rejected += 1;
            if rejected > 60 {
                return Err(Error::KrylovNonConvergence { budget });
            }
        }
    }
    Ok(x)
}

/// Restarted GMRES for A x = b starting from x = 0.
pub fn gmres(
    apply: &dyn Fn(&[c64]) -> Vec<c64>,
    b: &[c64],
    restart: usize,
    tol: f64,
    max_restarts: usize,
) -> Result<Vec<c64>> {
    let bnorm = norm2(b);
    let mut x = vec![ZERO; b.len()];
    if bnorm == 0.0 {
        return Ok(x);
    }
    for _ in 0..max_restarts {
        let ax = apply(&x);
        let r: Vec<c64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm2(&r);
        if beta <= tol * bnorm {
            return Ok(x);
        }
        let ar = arnoldi(apply, &r, beta, restart);
        let k = ar.dim;
        // min ‖β e₁ − H y‖ by Householder QR
        let rows = k + 1;
        let hk = Mat::from_fn(rows, k, |i, j| ar.h[(i, j)]);
        let rhs = Mat::from_fn(rows, 1, |i, _| if i == 0 { c64::new(beta, 0.0) } else { ZERO });
        let y = hk.qr().solve_lstsq(&rhs);
        for (i, q) in ar.basis.iter().take(k).enumerate() {
            let c = y[(i, 0)];
            for (xk, qk) in x.iter_mut().zip(q) {
                *xk += c * qk;
            }
        }
    }
    let ax = apply(&x);
    let res = b.iter().zip(&ax).map(|(bi, ai)| (bi - ai).norm_sqr()).sum::<f64>().sqrt();
    if res <= tol * bnorm {
        Ok(x)
    } else {
        Err(Error::Numerical(format!("GMRES stalled at relative residual {:.3e}", res / bnorm)))
    }
}

#[allow(dead_code)]
pub(crate) fn identity(n: usize) -> Mat<c64> {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}
