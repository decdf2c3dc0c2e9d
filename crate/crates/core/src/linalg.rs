//! Dense SVD by one-sided Jacobi rotations.
//!
//! nalgebra's bidiagonal SVD occasionally stops short of convergence on small
//! square inputs (reconstruction errors around 1e-5), which is far outside the
//! tolerances the embedding code is held to. Jacobi rotations converge to full
//! working precision.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Thin SVD `a = u · diag(s) · vᵀ` with singular values sorted non-increasing.
#[derive(Debug, Clone)]
pub(crate) struct Svd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

pub(crate) fn svd(a: &DMatrix<f64>) -> Result<Svd> {
    if a.nrows() < a.ncols() {
        let t = svd(&a.transpose())?;
        return Ok(Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        });
    }
    let (m, n) = a.shape();
    let mut u = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let up = u.column(p);
                    let uq = u.column(q);
                    (up.norm_squared(), uq.norm_squared(), up.dot(&uq))
                };
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut u, p, q, c, s, m);
                rotate_columns(&mut v, p, q, c, s, n);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numeric("Jacobi SVD did not converge".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| u.column(j).norm()).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));

    let mut out_u = DMatrix::zeros(m, n);
    let mut out_v = DMatrix::zeros(n, n);
    let mut s = DVector::zeros(n);
    for (j, &src) in order.iter().enumerate() {
        let sigma = norms[src];
        s[j] = sigma;
        if sigma > 0.0 {
            out_u.set_column(j, &(u.column(src) / sigma));
        }
        out_v.set_column(j, &v.column(src));
    }
    Ok(Svd {
        u: out_u,
        s,
        v: out_v,
    })
}

fn rotate_columns(x: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64, rows: usize) {
    for r in 0..rows {
        let xp = x[(r, p)];
        let xq = x[(r, q)];
        x[(r, p)] = c * xp - s * xq;
        x[(r, q)] = s * xp + c * xq;
    }
}

/// Singular values and right singular vectors of a tall matrix, computed from
/// the R factor of its QR decomposition so the Jacobi sweeps run on a d×d
/// matrix.
pub(crate) fn tall_right_svd(a: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if a.nrows() <= a.ncols() {
        let d = svd(a)?;
        return Ok((d.s, d.v));
    }
    let r = a.clone().qr().r();
    let d = svd(&r)?;
    Ok((d.s, d.v))
}

/// Moore–Penrose pseudoinverse, dropping singular values below `1e-12 · σ_max`.
pub(crate) fn pseudo_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = svd(a)?;
    let max = d.s.iter().cloned().fold(0.0, f64::max);
    let inv = d.s.map(|s| if s > max * 1e-12 { 1.0 / s } else { 0.0 });
    Ok(&d.v * DMatrix::from_diagonal(&inv) * d.u.transpose())
}

/// `c^{-1/2}` for a symmetric positive definite `c`.
pub(crate) fn inverse_sqrt(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = svd(c)?;
    let max = d.s.iter().cloned().fold(0.0, f64::max);
    if d.s.iter().any(|&l| l <= max * 1e-13) {
        return Err(Error::Numeric("covariance is singular".into()));
    }
    let scale = d.s.map(|l| 1.0 / l.sqrt());
    Ok(&d.v * DMatrix::from_diagonal(&scale) * d.v.transpose())
}
