//! Preconditioned conjugate gradients, banded Cholesky for 2D blocks and a
//! dense Cholesky oracle.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{dot, norm2, CsrMatrix, LinearOperator};

/// Largest system the dense direct solver accepts.
pub const DENSE_MAX_DIM: usize = 2000;

/// Iterations between recomputations of the true residual `b - A x`.
pub const RESIDUAL_REFRESH: usize = 50;

/// Iterations without a 1% gain in the best residual before giving up.
pub const STAGNATION_WINDOW: usize = 250;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    CgJacobi,
    /// CG preconditioned with the exact inverse of a separable approximation
    /// of a quasi-3D operator; see [`crate::quasi3d::TensorPreconditioner`].
    CgTensor,
    DenseDirect,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub method: SolverMethod,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50_000,
            method: SolverMethod::CgJacobi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub method: SolverMethod,
    pub iterations: usize,
    /// `‖b - A x‖ / ‖b‖` of the returned solution.
    pub relative_residual: f64,
    /// Seconds.
    pub wall_time: f64,
    /// Relative residual after every iteration (recurrence value between refreshes).
    #[serde(skip)]
    pub residual_history: Vec<f64>,
}

/// Solves `A x = b` from a zero initial guess.
pub fn solve(
    op: &dyn LinearOperator,
    b: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    solve_from(op, b, None, opts)
}

/// Solves `A x = b` starting from `x0` (zero when `None`).
pub fn solve_from(
    op: &dyn LinearOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    if b.len() != op.dim() {
        return Err(Error::DimensionMismatch(format!(
            "operator of dimension {} with rhs of length {}",
            op.dim(),
            b.len()
        )));
    }
    op.check_symmetric(100)?;
    match opts.method {
        SolverMethod::CgJacobi => cg_jacobi(op, b, x0, opts, |_, _| {}),
        SolverMethod::CgTensor => Err(Error::InvalidInput(
            "cg_tensor needs the Kronecker factors of a quasi-3D system".into(),
        )),
        SolverMethod::DenseDirect => {
            let start = Instant::now();
            let a = op.to_csr();
            let x = dense_direct_solve(&a, b)?;
            let relative_residual = relative_residual(op, &x, b);
            Ok((
                x,
                SolveReport {
                    method: SolverMethod::DenseDirect,
                    iterations: 1,
                    relative_residual,
                    wall_time: start.elapsed().as_secs_f64(),
                    residual_history: vec![relative_residual],
                },
            ))
        }
    }
}

pub fn relative_residual(op: &dyn LinearOperator, x: &[f64], b: &[f64]) -> f64 {
    let mut r = vec![0.0; b.len()];
    op.apply(x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let nb = norm2(b);
    if nb == 0.0 {
        norm2(&r)
    } else {
        norm2(&r) / nb
    }
}

/// `z ≈ A⁻¹ r` for a symmetric positive definite approximation of `A`.
pub trait Preconditioner: Sync {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

#[derive(Debug, Clone)]
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(op: &dyn LinearOperator) -> Result<Self> {
        let inv_diag = op
            .diagonal()
            .iter()
            .enumerate()
            .map(|(row, &d)| {
                if d > 0.0 {
                    Ok(1.0 / d)
                } else {
                    Err(Error::ZeroDiagonal { row })
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self { inv_diag })
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.iter_mut()
            .zip(r)
            .zip(&self.inv_diag)
            .for_each(|((zi, ri), di)| *zi = ri * di);
    }
}

/// Jacobi-preconditioned CG. `monitor` sees the iterate after each update.
pub fn cg_jacobi(
    op: &dyn LinearOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &SolverOptions,
    monitor: impl FnMut(usize, &[f64]),
) -> Result<(Vec<f64>, SolveReport)> {
    let pc = Jacobi::new(op)?;
    pcg(op, &pc, SolverMethod::CgJacobi, b, x0, opts, monitor)
}

/// Preconditioned CG; `method` only labels the report.
pub fn pcg(
    op: &dyn LinearOperator,
    pc: &dyn Preconditioner,
    method: SolverMethod,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &SolverOptions,
    mut monitor: impl FnMut(usize, &[f64]),
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let n = b.len();
    if n != op.dim() {
        return Err(Error::DimensionMismatch(format!(
            "operator of dimension {} with rhs of length {}",
            op.dim(),
            n
        )));
    }
    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    let nb = norm2(b);
    let report = |iterations, rel, history| SolveReport {
        method,
        iterations,
        relative_residual: rel,
        wall_time: start.elapsed().as_secs_f64(),
        residual_history: history,
    };
    if nb == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok((x, report(0, 0.0, Vec::new())));
    }

    let mut ap = vec![0.0; n];
    let true_residual = |x: &[f64], r: &mut [f64], scratch: &mut [f64]| {
        op.apply(x, scratch);
        r.iter_mut()
            .zip(b)
            .zip(scratch.iter())
            .for_each(|((ri, bi), ai)| *ri = bi - ai);
    };
    let mut r = vec![0.0; n];
    true_residual(&x, &mut r, &mut ap);
    let mut rel = norm2(&r) / nb;
    let mut history = Vec::new();
    if rel <= opts.tol {
        return Ok((x, report(0, rel, history)));
    }
    let mut z = vec![0.0; n];
    pc.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut best = rel;
    let (mut progress_ref, mut progress_it) = (rel, 0);

    for it in 1..=opts.max_iter {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap < 0.0 && pap.is_finite() {
            return Err(Error::NotSpd {
                row: it,
                pivot: pap,
            });
        }
        if !(pap > 0.0 && pap.is_finite()) {
            // search direction vanished: stagnation at the rounding floor
            return Err(Error::NotConverged {
                iterations: it,
                best_residual: best,
            });
        }
        let alpha = rz / pap;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        monitor(it, &x);
        if it % RESIDUAL_REFRESH == 0 {
            true_residual(&x, &mut r, &mut ap);
        } else {
            r.iter_mut().zip(&ap).for_each(|(ri, ai)| *ri -= alpha * ai);
        }
        rel = norm2(&r) / nb;
        history.push(rel);
        if rel <= opts.tol {
            // Confirm against the true residual before accepting.
            true_residual(&x, &mut r, &mut ap);
            rel = norm2(&r) / nb;
            if rel <= opts.tol {
                return Ok((x, report(it, rel, history)));
            }
        }
        best = best.min(rel);
        if best < 0.99 * progress_ref {
            (progress_ref, progress_it) = (best, it);
        } else if it - progress_it >= STAGNATION_WINDOW {
            return Err(Error::NotConverged {
                iterations: it,
                best_residual: best,
            });
        }
        pc.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut()
            .zip(&z)
            .for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Err(Error::NotConverged {
        iterations: opts.max_iter,
        best_residual: best,
    })
}

/// Cholesky factor of a symmetric positive definite band matrix, stored by
/// rows: row `i` holds columns `i - bandwidth ..= i`.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bandwidth: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    /// Half-bandwidth `max |i - j|` over the stored entries of `a`.
    pub fn bandwidth_of(a: &CsrMatrix) -> usize {
        a.triplets()
            .map(|(i, j, _)| i.abs_diff(j))
            .max()
            .unwrap_or(0)
    }

    /// Factors `A = L Lᵀ`, with the same pivot test as [`DenseCholesky`].
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix",
                n,
                a.ncols()
            )));
        }
        let bw = Self::bandwidth_of(a);
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        for (i, j, v) in a.triplets() {
            if j <= i {
                l[i * w + (j + bw - i)] = v;
            }
        }
        for i in 0..n {
            let i0 = i.saturating_sub(bw);
            for j in i0..=i {
                let j0 = j.saturating_sub(bw).max(i0);
                // Σ_k L[i,k] L[j,k] for k in j0..j
                let ri = &l[i * w + (j0 + bw - i)..i * w + (j + bw - i)];
                let rj = &l[j * w + (j0 + bw - j)..j * w + bw];
                let s: f64 = ri.iter().zip(rj).map(|(a, b)| a * b).sum();
                let idx = i * w + (j + bw - i);
                if j < i {
                    l[idx] = (l[idx] - s) / l[j * w + bw];
                } else {
                    let orig = l[idx];
                    let d = orig - s;
                    if !(d > 1e-12 * orig.abs()) || !(d > 0.0) {
                        return Err(Error::NotSpd { row: i, pivot: d });
                    }
                    l[idx] = d.sqrt();
                }
            }
        }
        Ok(Self {
            n,
            bandwidth: bw,
            l,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Overwrites `x` with `A⁻¹ x`.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw) = (self.n, self.bandwidth);
        let w = bw + 1;
        for i in 0..n {
            let i0 = i.saturating_sub(bw);
            let row = &self.l[i * w + (i0 + bw - i)..i * w + bw];
            let s: f64 = row.iter().zip(&x[i0..i]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - s) / self.l[i * w + bw];
        }
        for i in (0..n).rev() {
            x[i] /= self.l[i * w + bw];
            let xi = x[i];
            let i0 = i.saturating_sub(bw);
            let row = &self.l[i * w + (i0 + bw - i)..i * w + bw];
            x[i0..i]
                .iter_mut()
                .zip(row)
                .for_each(|(xk, a)| *xk -= a * xi);
        }
    }
}

/// Dense lower-triangular Cholesky factor.
#[derive(Debug, Clone)]
pub struct DenseCholesky {
    n: usize,
    l: Vec<f64>,
}

impl DenseCholesky {
    /// Factors `A = L Lᵀ`. A pivot that falls below `1e-12` of its original
    /// diagonal entry (or is not positive) marks the matrix as not SPD.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix",
                n,
                a.ncols()
            )));
        }
        if n > DENSE_MAX_DIM {
            return Err(Error::TooLarge(format!(
                "dense direct solve limited to n <= {DENSE_MAX_DIM}, got {n}"
            )));
        }
        let mut l = vec![0.0; n * n];
        for (i, j, v) in a.triplets() {
            l[i * n + j] = v;
        }
        for j in 0..n {
            let orig = l[j * n + j];
            let mut d = orig;
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 1e-12 * orig.abs()) || !(d > 0.0) {
                return Err(Error::NotSpd { row: j, pivot: d });
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut s = l[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                l[i * n + j] = 0.0;
            }
        }
        Ok(Self { n, l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }
}

pub fn dense_direct_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix with rhs of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    Ok(DenseCholesky::factor(a)?.solve(b))
}
