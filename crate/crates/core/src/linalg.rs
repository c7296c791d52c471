//! Symmetric eigenvalue helpers shared by the spectral diagnostics and the
//! negative-type test.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MagError, Result};

/// Matrices up to this side go through a dense symmetric eigensolver; larger
/// ones through Lanczos with full reorthogonalization.
pub const FULL_EIGEN_LIMIT: usize = 2000;

/// Clustered extreme eigenvalues (long uniform nets) converge slowly; the cap
/// bounds the cost and the last Ritz value is returned.
const LANCZOS_MAX_STEPS: usize = 400;
const DENSE_MAX_SWEEPS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    Dense,
    Lanczos,
}

#[derive(Clone, Debug)]
pub struct Extremal {
    pub min: f64,
    pub max: f64,
    /// Unit eigenvector (or Ritz vector) for `min`, when requested.
    pub min_vector: Option<DVector<f64>>,
    pub iterations: usize,
    pub method: EigenMethod,
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn extremal_eigen(m: &DMatrix<f64>, want_vector: bool) -> Result<Extremal> {
    if m.nrows() <= FULL_EIGEN_LIMIT {
        dense(m, want_vector)
    } else {
        lanczos(m, want_vector)
    }
}

fn dense(m: &DMatrix<f64>, want_vector: bool) -> Result<Extremal> {
    if !want_vector {
        // skipping the eigenvector accumulation makes this several times faster
        let values = m.clone().symmetric_eigenvalues();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MagError::EigensolverFailure { iterations: 0 });
        }
        return Ok(Extremal {
            min: values.min(),
            max: values.max(),
            min_vector: None,
            iterations: 0,
            method: EigenMethod::Dense,
        });
    }
    let eig = m
        .clone()
        .try_symmetric_eigen(f64::EPSILON, DENSE_MAX_SWEEPS)
        .ok_or(MagError::EigensolverFailure {
            iterations: DENSE_MAX_SWEEPS,
        })?;
    let (imin, min) = eig.eigenvalues.argmin();
    let max = eig.eigenvalues.max();
    Ok(Extremal {
        min,
        max,
        min_vector: Some(eig.eigenvectors.column(imin).into_owned()),
        iterations: 0,
        method: EigenMethod::Dense,
    })
}

/// Large matrices: plain Lanczos for the top of the spectrum, then Lanczos on
/// `(M + sigma I)^{-1}` for the bottom, with the smallest shift `sigma >= 0`
/// (from a geometric ladder) whose Cholesky factorization succeeds.
fn lanczos(m: &DMatrix<f64>, want_vector: bool) -> Result<Extremal> {
    let n = m.nrows();
    let top = lanczos_top(n, |v| m * v, false)?;
    let lambda_max = top.value;
    let mut iterations = top.steps;
    let mut shift = 0.0;
    loop {
        let mut shifted = m.clone();
        if shift > 0.0 {
            for i in 0..n {
                shifted[(i, i)] += shift;
            }
        }
        if let Some(chol) = shifted.cholesky() {
            let inv = lanczos_top(n, |v| chol.solve(v), want_vector)?;
            iterations += inv.steps;
            return Ok(Extremal {
                min: 1.0 / inv.value - shift,
                max: lambda_max,
                min_vector: inv.vector,
                iterations,
                method: EigenMethod::Lanczos,
            });
        }
        shift = if shift == 0.0 {
            1e-12 * lambda_max.abs().max(1.0)
        } else {
            shift * 10.0
        };
        if shift > 10.0 * lambda_max.abs().max(1.0) * n as f64 {
            return Err(MagError::EigensolverFailure { iterations });
        }
    }
}

struct TopPair {
    value: f64,
    vector: Option<DVector<f64>>,
    steps: usize,
}

/// Largest eigenvalue of a symmetric operator by Lanczos with full
/// reorthogonalization.
fn lanczos_top(
    n: usize,
    apply: impl Fn(&DVector<f64>) -> DVector<f64>,
    want_vector: bool,
) -> Result<TopPair> {
    let max_steps = n.min(LANCZOS_MAX_STEPS);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
    q /= q.norm();

    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(max_steps);
    let mut alpha = Vec::with_capacity(max_steps);
    let mut beta: Vec<f64> = Vec::with_capacity(max_steps);
    let mut last = f64::NAN;

    for _ in 0..max_steps {
        let mut w = apply(&q);
        let a = q.dot(&w);
        alpha.push(a);
        basis.push(q.clone());
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for v in &basis {
                let c = v.dot(&w);
                w.axpy(-c, v, 1.0);
            }
        }
        let b = w.norm();
        let k = alpha.len();
        let invariant = b <= 1e-13 * a.abs().max(f64::MIN_POSITIVE) || k == n;
        if invariant || k % 5 == 0 || k == max_steps {
            let (value, svec) = tridiagonal_top(&alpha, &beta);
            let scale = value.abs().max(f64::MIN_POSITIVE);
            let residual = b * svec[k - 1].abs();
            let settled = (value - last).abs() <= 1e-14 * scale;
            if invariant || residual <= 1e-10 * scale || settled || k == max_steps {
                if !value.is_finite() {
                    return Err(MagError::EigensolverFailure { iterations: k });
                }
                let vector = want_vector.then(|| {
                    let mut v = DVector::zeros(n);
                    for (coef, b) in svec.iter().zip(&basis) {
                        v.axpy(*coef, b, 1.0);
                    }
                    let norm = v.norm();
                    v / norm
                });
                return Ok(TopPair {
                    value,
                    vector,
                    steps: k,
                });
            }
            last = value;
        }
        beta.push(b);
        q = w / b;
    }
    Err(MagError::EigensolverFailure {
        iterations: max_steps,
    })
}

/// Largest eigenvalue of the Lanczos tridiagonal and its eigenvector.
fn tridiagonal_top(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let k = alpha.len();
    let t = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = t.symmetric_eigen();
    let (imax, max) = eig.eigenvalues.argmax();
    let v = eig.eigenvectors.column(imax).iter().copied().collect();
    (max, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kms(n: usize, q: f64) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| q.powi((i as i32 - j as i32).abs()))
    }

    #[test]
    fn dense_matches_known_spectrum() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = extremal_eigen(&m, true).unwrap();
        assert!((e.min - 1.0).abs() < 1e-14);
        assert!((e.max - 3.0).abs() < 1e-14);
        let v = e.min_vector.unwrap();
        assert!((v[0] + v[1]).abs() < 1e-12);
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        let m = kms(700, 0.97);
        let lz = lanczos(&m, true).unwrap();
        let full = dense(&m, false).unwrap();
        assert!((lz.min - full.min).abs() < 1e-9 * full.max, "{} vs {}", lz.min, full.min);
        assert!((lz.max - full.max).abs() < 1e-9 * full.max);
        let v = lz.min_vector.unwrap();
        let rq = v.dot(&(&m * &v));
        assert!((rq - lz.min).abs() < 1e-8 * full.max);
    }

    #[test]
    fn lanczos_sees_negative_eigenvalues() {
        let mut m = kms(650, 0.9);
        m[(0, 1)] = 1.5;
        m[(1, 0)] = 1.5;
        let lz = lanczos(&m, false).unwrap();
        let full = dense(&m, false).unwrap();
        assert!(full.min < 0.0);
        assert!((lz.min - full.min).abs() < 1e-9 * full.max);
    }
}
