//! Negative type via the Gram test, and scale scans of positive definiteness.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MagError, Result};
use crate::linalg::extremal_eigen;
use crate::magnitude::{similarity, similarity_diagnostics, Verdict, PSD_TOLERANCE};
use crate::metric::{scale_space, FiniteMetricSpace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NegativeTypeReport {
    pub negative_type: bool,
    pub gram_lambda_min: f64,
    pub gram_lambda_max: f64,
    pub tolerance_used: f64,
    /// Unit vector with zero sum and `x^T D x > 0`, present iff the test fails.
    pub witness_vector: Option<Vec<f64>>,
    /// `x^T D x` for the witness.
    pub witness_value: Option<f64>,
    pub basepoint: usize,
}

/// Tests whether `a` is of negative type: the matrix
/// `G[i][j] = (d(b,i) + d(b,j) - d(i,j)) / 2` must be positive semidefinite,
/// up to `tau = 1e-9 * max(1, lambda_max(G))`.
///
/// The distances enter unsquared, so this is the test for `A^{1/2}` to embed
/// in Hilbert space. Pass a squared-distance space to test `A` itself.
pub fn negative_type_test(a: &FiniteMetricSpace, basepoint: usize) -> Result<NegativeTypeReport> {
    let n = a.len();
    if basepoint >= n {
        return Err(MagError::IndexOutOfRange {
            index: basepoint,
            len: n,
        });
    }
    let base = a.row(basepoint);
    let gram = DMatrix::from_fn(n, n, |i, j| 0.5 * (base[i] + base[j] - a.dist(i, j)));
    let e = extremal_eigen(&gram, true)?;
    let tau = PSD_TOLERANCE * e.max.max(1.0);
    let negative_type = e.min >= -tau;

    let (witness_vector, witness_value) = if negative_type {
        (None, None)
    } else {
        let v = e.min_vector.expect("eigenvector requested");
        let mut x: Vec<f64> = v.iter().copied().collect();
        x[basepoint] = 0.0;
        let rest: f64 = x.iter().sum();
        x[basepoint] = -rest;
        let norm = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        x.iter_mut().for_each(|c| *c /= norm);
        let value = (0..n)
            .map(|i| x[i] * a.row(i).iter().zip(&x).map(|(d, y)| d * y).sum::<f64>())
            .sum();
        (Some(x), Some(value))
    };
    Ok(NegativeTypeReport {
        negative_type,
        gram_lambda_min: e.min,
        gram_lambda_max: e.max,
        tolerance_used: tau,
        witness_vector,
        witness_value,
        basepoint,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityClass {
    /// Every scanned scale passed and the Gram test confirms negative type.
    StablyPositiveDefinite,
    /// Some scanned scale has an indefinite similarity matrix.
    NotStablyPd,
    /// Every scanned scale passed but the Gram test did not confirm.
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRecord {
    pub t: f64,
    pub lambda_min: f64,
    /// Absent when the eigensolver failed at this scale.
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Conclusions refer to the sampled finite space only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub records: Vec<StabilityRecord>,
    pub classification: StabilityClass,
    pub first_failing_scale: Option<f64>,
    pub negative_type: NegativeTypeReport,
}

impl StabilityReport {
    pub fn failing_scales(&self) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.verdict == Some(Verdict::Indefinite))
            .map(|r| r.t)
            .collect()
    }
}

/// `2^k` for `k = -10..=4`.
pub fn default_scales() -> Vec<f64> {
    (-10..=4).map(|k| 2f64.powi(k)).collect()
}

pub fn stability_scan(a: &FiniteMetricSpace, scales: &[f64]) -> Result<StabilityReport> {
    if let Some(&t) = scales.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
        return Err(MagError::NonpositiveScale(t));
    }
    let mut sorted = scales.to_vec();
    sorted.sort_by(f64::total_cmp);
    let records: Vec<StabilityRecord> = sorted
        .par_iter()
        .map(|&t| {
            match scale_space(a, t).and_then(|s| similarity_diagnostics(&similarity(&s))) {
                Ok(d) => StabilityRecord {
                    t,
                    lambda_min: d.lambda_min,
                    verdict: Some(d.verdict),
                    error: None,
                },
                Err(e) => StabilityRecord {
                    t,
                    lambda_min: f64::NAN,
                    verdict: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let negative_type = negative_type_test(a, 0)?;
    let first_failing_scale = records
        .iter()
        .find(|r| r.verdict == Some(Verdict::Indefinite))
        .map(|r| r.t);
    let classification = if first_failing_scale.is_some() {
        StabilityClass::NotStablyPd
    } else if negative_type.negative_type && records.iter().all(|r| r.verdict.is_some()) {
        StabilityClass::StablyPositiveDefinite
    } else {
        StabilityClass::Undetermined
    };
    Ok(StabilityReport {
        records,
        classification,
        first_failing_scale,
        negative_type,
    })
}
