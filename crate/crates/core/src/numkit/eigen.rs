//! Symmetric eigendecomposition by cyclic Jacobi rotations.

use super::Matrix;
use crate::error::{Error, Result};

pub const MAX_SWEEPS: usize = 100;
pub const OFF_DIAGONAL_TOL: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-8;
const RESIDUAL_TOL: f64 = 1e-6;

/// Eigenpairs sorted by descending eigenvalue; `vectors` holds one unit
/// eigenvector per column.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

/// Top-`k` eigenpairs of a symmetric matrix, largest eigenvalue first.
///
/// Each eigenvector is normalised so that its largest-magnitude component is
/// positive.
pub fn eigh_topk(s: &Matrix, k: usize) -> Result<EigenPairs> {
    let n = s.rows();
    if s.cols() != n {
        return Err(Error::Shape {
            op: "eigh_topk",
            left: s.shape(),
            right: (s.cols(), s.rows()),
        });
    }
    if k == 0 || k > n {
        return Err(Error::Parameter(format!(
            "requested {k} eigenpairs from a {n}x{n} matrix"
        )));
    }
    let scale = s.max_abs().max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (s.get(i, j) - s.get(j, i)).abs();
            if gap > SYMMETRY_TOL * scale {
                return Err(Error::Parameter(format!(
                    "matrix is not symmetric: |S[{i},{j}] - S[{j},{i}]| = {gap:e}"
                )));
            }
        }
    }

    let (diag, basis) = jacobi(&s.symmetrize()?)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diag[b].total_cmp(&diag[a]).then(a.cmp(&b)));
    order.truncate(k);

    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = Matrix::zeros(n, k);
    for (c, &src) in order.iter().enumerate() {
        let col = basis.col(src);
        let lead = col.iter().enumerate().fold(
            0,
            |best, (i, v)| if v.abs() > col[best].abs() { i } else { best },
        );
        let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        for (r, v) in col.iter().enumerate() {
            vectors.set(r, c, sign * v);
        }
    }

    let norm = s.frobenius_norm();
    let sv = s.matmul(&vectors)?;
    for (c, &lambda) in values.iter().enumerate() {
        let residual = (0..n)
            .map(|r| (sv.get(r, c) - lambda * vectors.get(r, c)).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual > RESIDUAL_TOL * norm {
            return Err(Error::Convergence {
                what: "eigendecomposition",
                iterations: MAX_SWEEPS,
                residual,
            });
        }
    }
    Ok(EigenPairs { values, vectors })
}

/// Full decomposition: returns the eigenvalues (unsorted) and the matrix of
/// eigenvectors in matching column order.
pub fn jacobi(s: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = s.rows();
    let mut a = s.clone();
    let mut v = Matrix::identity(n);
    let norm = s.frobenius_norm();
    let off = |a: &Matrix| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    acc += a.get(i, j).powi(2);
                }
            }
        }
        acc.sqrt()
    };

    let mut residual = off(&a);
    let mut sweeps = 0;
    while residual > OFF_DIAGONAL_TOL * norm {
        if sweeps == MAX_SWEEPS {
            return Err(Error::Convergence {
                what: "Jacobi eigendecomposition",
                iterations: sweeps,
                residual,
            });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
        sweeps += 1;
        residual = off(&a);
    }
    Ok(((0..n).map(|i| a.get(i, i)).collect(), v))
}

/// One Jacobi rotation zeroing `a[p][q]`, accumulated into `v`.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = a.get(p, q);
    if apq == 0.0 {
        return;
    }
    let n = a.rows();
    let tau = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    for k in 0..n {
        let akp = a.get(k, p);
        let akq = a.get(k, q);
        a.set(k, p, c * akp - s * akq);
        a.set(k, q, s * akp + c * akq);
    }
    for k in 0..n {
        let apk = a.get(p, k);
        let aqk = a.get(q, k);
        a.set(p, k, c * apk - s * aqk);
        a.set(q, k, s * apk + c * aqk);
    }
    a.set(p, q, 0.0);
    a.set(q, p, 0.0);
    for k in 0..n {
        let vkp = v.get(k, p);
        let vkq = v.get(k, q);
        v.set(k, p, c * vkp - s * vkq);
        v.set(k, q, s * vkp + c * vkq);
    }
}
