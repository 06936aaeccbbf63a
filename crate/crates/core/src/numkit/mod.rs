//! Dense numeric substrate: matrices, activations, eigendecomposition and
//! seeded randomness.

mod eigen;
mod matrix;
pub mod memory;
mod rng;

pub use eigen::{eigh_topk, jacobi, EigenPairs, MAX_SWEEPS, OFF_DIAGONAL_TOL};
pub use matrix::Matrix;
pub use rng::{seeded_stream, RandomStream};

use crate::error::Result;

pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    a.matmul(b)
}

/// Row-wise softmax with per-row max subtraction.
pub fn softmax_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    let cols = m.cols();
    if cols == 0 {
        return out;
    }
    for row in out.as_mut_slice().chunks_mut(cols) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

/// Logistic function, kept strictly inside `(0, 1)`.
#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    let y = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    y.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

pub fn sigmoid(m: &Matrix) -> Matrix {
    m.map(sigmoid_scalar)
}

pub fn relu(m: &Matrix) -> Matrix {
    m.map(|v| v.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
        let mut c = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = 0.0;
                for k in 0..a.cols() {
                    acc += a.get(i, k) * b.get(k, j);
                }
                c.set(i, j, acc);
            }
        }
        c
    }

    #[test]
    fn matmul_identity_and_hand_case() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(matmul(&Matrix::identity(2), &a).unwrap(), a);
        let b = Matrix::from_rows(&[vec![5.0], vec![6.0]]).unwrap();
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.as_slice(), &[17.0, 39.0]);
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = seeded_stream(1);
        let a = Matrix::from_fn(7, 5, |_, _| rng.gaussian());
        let b = Matrix::from_fn(5, 3, |_, _| rng.gaussian());
        let diff = matmul(&a, &b).unwrap().sub(&naive_matmul(&a, &b)).unwrap();
        assert!(diff.max_abs() < 1e-12);
    }

    #[test]
    fn matmul_shape_error_names_both() {
        let err = matmul(&Matrix::zeros(2, 3), &Matrix::zeros(2, 3)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(2, 3)"), "{msg}");
    }

    #[test]
    fn softmax_examples() {
        let m = Matrix::from_rows(&[vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 3.0]]).unwrap();
        let s = softmax_rows(&m);
        for j in 0..3 {
            assert!((s.get(0, j) - 1.0 / 3.0).abs() < 1e-15);
        }
        let expect = [0.09003057, 0.24472847, 0.66524096];
        for (j, e) in expect.iter().enumerate() {
            assert!((s.get(1, j) - e).abs() < 1e-8);
        }
        let big = softmax_rows(&Matrix::from_rows(&[vec![1000.0, 0.0]]).unwrap());
        assert!((big.get(0, 0) - 1.0).abs() < 1e-12);
        assert!(big.get(0, 1).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_examples() {
        assert_eq!(sigmoid_scalar(0.0), 0.5);
        assert!((sigmoid_scalar(2.0) - 0.8807970780).abs() < 1e-10);
        for x in [-50.0, -3.0, 0.7, 40.0, 800.0] {
            let y = sigmoid_scalar(x);
            assert!(y > 0.0 && y < 1.0);
            assert!((y + sigmoid_scalar(-x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pure_functions_are_bitwise_repeatable() {
        let mut rng = seeded_stream(4);
        let a = Matrix::from_fn(9, 9, |_, _| rng.gaussian() * 100.0);
        assert_eq!(softmax_rows(&a), softmax_rows(&a));
        assert_eq!(sigmoid(&a), sigmoid(&a));
        assert_eq!(matmul(&a, &a).unwrap(), matmul(&a, &a).unwrap());
    }

    proptest! {
        #[test]
        fn softmax_rows_sum_to_one(vals in prop::collection::vec(-1e3f64..1e3, 1..40)) {
            let n = vals.len();
            let m = Matrix::from_vec(1, n, vals).unwrap();
            let s = softmax_rows(&m);
            prop_assert!((s.sum() - 1.0).abs() < 1e-9);
            prop_assert!(s.as_slice().iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn matmul_is_associative(seed in 0u64..1000) {
            let mut rng = seeded_stream(seed);
            let a = Matrix::from_fn(4, 6, |_, _| rng.gaussian());
            let b = Matrix::from_fn(6, 3, |_, _| rng.gaussian());
            let c = Matrix::from_fn(3, 5, |_, _| rng.gaussian());
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            let rel = left.sub(&right).unwrap().frobenius_norm() / left.frobenius_norm().max(1e-300);
            prop_assert!(rel < 1e-9);
        }
    }
}
