//! Residual minimizers for rectangular systems and kernel-based optimal
//! recovery for square symmetric ones.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::kernels::RadialKernel;
use crate::trialspaces::{RepresenterFunctional, TrialSpace};

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub coefficients: Vec<f64>,
    pub residual_sup: f64,
    pub residual_l2: f64,
    /// Certified bound on how far `residual_sup` can be above the true
    /// minimum of the sup norm; always >= 1, equal to 1 for least squares
    /// (which is exact in its own norm).
    pub achieved_ca: f64,
    pub iterations: usize,
}

fn rank_check(a: &DMatrix<f64>) -> Result<()> {
    let largest_col = (0..a.ncols())
        .map(|j| a.column(j).norm())
        .fold(0.0f64, f64::max);
    let tol = 1e-12 * largest_col.max(1.0);
    let rank = a.clone().svd(false, false).rank(tol);
    if rank < a.ncols() {
        return Err(Error::RankDeficient { rank, cols: a.ncols(), tol });
    }
    Ok(())
}

fn residuals(a: &DMatrix<f64>, x: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    a * x - b
}

/// L2-minimal solution of a (possibly rectangular) system via SVD.
fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    a.clone()
        .svd(true, true)
        .solve(b, 1e-14)
        .map_err(|e| Error::InvalidParameter(e.to_string()))
}

/// Least-squares solve by thin QR; falls back to SVD when the triangular
/// factor is near singular. Much cheaper than SVD inside iteration loops.
fn lstsq_qr(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let qr = a.clone().qr();
    let r = qr.r();
    let m = a.ncols();
    let mut dmin = f64::INFINITY;
    let mut dmax = 0.0f64;
    for i in 0..m {
        let d = r[(i, i)].abs();
        dmin = dmin.min(d);
        dmax = dmax.max(d);
    }
    if dmin <= 1e-13 * dmax.max(1e-300) {
        return lstsq(a, b);
    }
    let qtb = qr.q().transpose() * b;
    r.solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::InvalidParameter("triangular solve failed".into()))
}

/// Minimizes `||A x - b||_2` by column-pivoted QR.
pub fn solve_least_squares(a: &DMatrix<f64>, b: &[f64]) -> Result<SolveReport> {
    if b.len() != a.nrows() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: b.len() });
    }
    if a.nrows() < a.ncols() {
        return Err(Error::InvalidParameter(format!(
            "underdetermined system: {} rows < {} columns",
            a.nrows(),
            a.ncols()
        )));
    }
    rank_check(a)?;
    let bv = DVector::from_column_slice(b);
    let x = lstsq(a, &bv)?;
    let r = residuals(a, &x, &bv);
    Ok(SolveReport {
        coefficients: x.as_slice().to_vec(),
        residual_sup: r.amax(),
        residual_l2: r.norm(),
        achieved_ca: 1.0,
        iterations: 1,
    })
}

/// Minimizes `||A x - b||_inf` by iteratively reweighted least squares
/// (multiplicative weight updates on the residuals). The weighted least
/// squares residual norm at probability weights is a lower bound for the
/// minimax value, which certifies `achieved_ca = sup / lower_bound`.
pub fn solve_chebyshev(a: &DMatrix<f64>, b: &[f64]) -> Result<SolveReport> {
    solve_chebyshev_iters(a, b, 400)
}

pub(crate) fn solve_chebyshev_iters(
    a: &DMatrix<f64>,
    b: &[f64],
    max_iter: usize,
) -> Result<SolveReport> {
    if b.len() != a.nrows() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: b.len() });
    }
    rank_check(a)?;
    let n = a.nrows();
    let bv = DVector::from_column_slice(b);
    let mut w = DVector::from_element(n, 1.0 / n as f64);
    let mut best_sup = f64::INFINITY;
    let mut best_x = DVector::zeros(a.ncols());
    let mut lower = 0.0f64;
    let mut iterations = 0;
    let mut stagnant = 0usize;
    for it in 0..max_iter {
        iterations = it + 1;
        // weighted least squares: scale rows by sqrt(w)
        let mut aw = a.clone();
        let mut bw = bv.clone();
        for i in 0..n {
            let s = w[i].sqrt();
            aw.row_mut(i).scale_mut(s);
            bw[i] *= s;
        }
        let x = match lstsq_qr(&aw, &bw) {
            Ok(x) => x,
            Err(_) => break,
        };
        let r = residuals(a, &x, &bv);
        // certificate: min_x ||Ax-b||_inf >= ||weighted residual||_2 for any
        // probability weights
        let weighted: f64 = (0..n).map(|i| w[i] * r[i] * r[i]).sum();
        let gap_before = if lower > 0.0 { best_sup / lower } else { f64::INFINITY };
        lower = lower.max(weighted.sqrt());
        let sup = r.amax();
        if sup < best_sup {
            best_sup = sup;
            best_x = x;
        }
        if lower > 0.0 && best_sup / lower < 1.0 + 1e-12 {
            break;
        }
        // the certified gap shrinks monotonically; stop once it stalls
        let gap_after = if lower > 0.0 { best_sup / lower } else { f64::INFINITY };
        if gap_after.is_finite() && gap_before - gap_after < 1e-10 * gap_after {
            stagnant += 1;
            if stagnant >= 12 {
                break;
            }
        } else {
            stagnant = 0;
        }
        // Lawson update
        let mut total = 0.0;
        for i in 0..n {
            w[i] *= r[i].abs().max(1e-300);
            total += w[i];
        }
        if total <= 0.0 || !total.is_finite() {
            break;
        }
        w /= total;
    }
    let r = residuals(a, &best_x, &bv);
    let achieved_ca = if lower > 0.0 {
        (best_sup / lower).max(1.0)
    } else {
        // exact data: residual is at rounding level
        1.0
    };
    Ok(SolveReport {
        coefficients: best_x.as_slice().to_vec(),
        residual_sup: best_sup,
        residual_l2: r.norm(),
        achieved_ca,
        iterations,
    })
}

/// Which residual norm a study minimizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    Chebyshev,
    LeastSquares,
}

pub fn solve(kind: SolverKind, a: &DMatrix<f64>, b: &[f64]) -> Result<SolveReport> {
    match kind {
        SolverKind::Chebyshev => solve_chebyshev(a, b),
        SolverKind::LeastSquares => solve_least_squares(a, b),
    }
}

/// Result of kernel-based optimal recovery: the minimum-native-norm field
/// matching the data exactly.
#[derive(Debug)]
pub struct Recovery {
    pub space: TrialSpace,
    pub coefficients: Vec<f64>,
    gram: DMatrix<f64>,
}

fn gram_entry(
    kernel: &RadialKernel,
    a: &RepresenterFunctional,
    b: &RepresenterFunctional,
) -> Result<f64> {
    use RepresenterFunctional::*;
    match (a, b) {
        (PointEval(x), PointEval(y)) => kernel.eval(x, y),
        (PointEval(x), NegLaplacian(y)) | (NegLaplacian(y), PointEval(x)) => {
            kernel.eval_laplacian_x(y, x).map(|v| -v)
        }
        (NegLaplacian(x), NegLaplacian(y)) => kernel.eval_laplacian_xy(x, y),
    }
}

/// Interpolates the data `rhs_k = lambda_k(u)` by the minimum-native-norm
/// element of the kernel's space. Requires a positive definite kernel.
pub fn symmetric_collocation(
    kernel: &RadialKernel,
    functionals: &[RepresenterFunctional],
    rhs: &[f64],
) -> Result<Recovery> {
    if !kernel.is_positive_definite() {
        return Err(Error::NotPositiveDefinite(format!("{:?}", kernel.family())));
    }
    let n = functionals.len();
    if rhs.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: rhs.len() });
    }
    let mut gram = DMatrix::zeros(n, n);
    for k in 0..n {
        for j in k..n {
            let v = gram_entry(kernel, &functionals[k], &functionals[j])?;
            gram[(k, j)] = v;
            gram[(j, k)] = v;
        }
    }
    let bv = DVector::from_column_slice(rhs);
    let coeffs = match gram.clone().cholesky() {
        Some(chol) => chol.solve(&bv),
        None => {
            // tiny diagonal lift for near-singular functional sets
            let reg = 1e-12 * gram.trace() / n as f64;
            let mut lifted = gram.clone();
            for k in 0..n {
                lifted[(k, k)] += reg;
            }
            match lifted.cholesky() {
                Some(chol) => chol.solve(&bv),
                None => {
                    let eig = gram.clone().symmetric_eigen().eigenvalues;
                    let condition = eig.max() / eig.min().abs().max(f64::MIN_POSITIVE);
                    return Err(Error::GramSingular { condition });
                }
            }
        }
    };
    Ok(Recovery {
        space: TrialSpace::RepresenterSpan {
            kernel: kernel.clone(),
            functionals: functionals.to_vec(),
        },
        coefficients: coeffs.as_slice().to_vec(),
        gram,
    })
}

impl Recovery {
    pub fn predict(&self, x: &Point) -> Result<f64> {
        self.space.eval_combination(&self.coefficients, x)
    }

    pub fn predict_laplacian(&self, x: &Point) -> Result<f64> {
        let laps = self.space.eval_basis_laplacian(x)?;
        Ok(laps.iter().zip(&self.coefficients).map(|(l, c)| l * c).sum())
    }

    /// Native-space norm of the recovered field, sqrt(c^T G c).
    pub fn native_norm(&self) -> f64 {
        let c = DVector::from_column_slice(&self.coefficients);
        (c.dot(&(&self.gram * &c))).max(0.0).sqrt()
    }
}
