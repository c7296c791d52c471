//! Maximum diversity: the minimum of `mu^T Z mu` over probability vectors,
//! found by Frank-Wolfe with away steps.
//!
//! The optimizer keeps `g = Z mu` up to date incrementally, so an iteration
//! costs O(n). Every few iterations it also tries a corrective step on the
//! current support (the equality-constrained minimizer of the face); the step
//! is only taken when it stays feasible and lowers the objective.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{MagError, Result};
use crate::magnitude::{
    similarity, similarity_diagnostics, weighting_with, SimilarityMatrix, SpectrumDiagnostics,
    Verdict, WEIGHT_SIGN_TOLERANCE,
};
use crate::metric::FiniteMetricSpace;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 100_000;
pub const SUPPORT_THRESHOLD: f64 = 1e-9;

const CORRECTIVE_EVERY: usize = 25;
const CORRECTIVE_MAX_SUPPORT: usize = 400;
const REFRESH_EVERY: usize = 500;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    /// `1 / q(mu*)`, a certified lower bound on the maximum diversity.
    pub diversity: f64,
    /// `1 / (q(mu*) - gap)` when the bracket is finite.
    pub upper_bound: Option<f64>,
    /// Attained minimum of `mu^T Z mu` over the simplex.
    pub objective: f64,
    pub measure: Vec<f64>,
    pub support: Vec<usize>,
    /// Final Frank-Wolfe duality gap, in objective units.
    pub fw_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximum diversity of `a`. Refuses indefinite similarity matrices. A run
/// that hits `max_iters` is returned with `converged = false`.
pub fn max_diversity(a: &FiniteMetricSpace, tol: f64, max_iters: usize) -> Result<DiversityReport> {
    let z = similarity(a);
    let diagnostics = similarity_diagnostics(&z)?;
    max_diversity_with(&z, &diagnostics, tol, max_iters)
}

pub(crate) fn max_diversity_with(
    z: &SimilarityMatrix,
    diagnostics: &SpectrumDiagnostics,
    tol: f64,
    max_iters: usize,
) -> Result<DiversityReport> {
    if diagnostics.verdict == Verdict::Indefinite {
        return Err(MagError::IndefiniteForm(Box::new(diagnostics.clone())));
    }
    if !(tol > 0.0) {
        return Err(MagError::InvalidParams(format!("tolerance must be positive, got {tol}")));
    }
    Ok(FrankWolfe::new(z.matrix()).run(tol, max_iters))
}

struct FrankWolfe<'a> {
    z: &'a DMatrix<f64>,
    mu: Vec<f64>,
    g: Vec<f64>,
    q: f64,
}

impl<'a> FrankWolfe<'a> {
    fn new(z: &'a DMatrix<f64>) -> Self {
        let n = z.nrows();
        let mu = vec![1.0 / n as f64; n];
        let mut fw = FrankWolfe {
            z,
            mu,
            g: vec![0.0; n],
            q: 0.0,
        };
        fw.refresh();
        fw
    }

    fn refresh(&mut self) {
        let g = self.z * DVector::from_column_slice(&self.mu);
        self.g = g.iter().copied().collect();
        self.q = dot(&self.mu, &self.g);
    }

    /// `(toward, gap)`: the best vertex and the Frank-Wolfe gap `2 (q - g_s)`.
    fn toward(&self) -> (usize, f64) {
        let (s, gs) = argmin(&self.g);
        (s, 2.0 * (self.q - gs))
    }

    fn run(mut self, tol: f64, max_iters: usize) -> DiversityReport {
        let n = self.mu.len();
        let mut iterations = 0;
        let (_, mut gap) = self.toward();
        let mut converged = gap <= tol * self.q;
        while !converged && iterations < max_iters {
            iterations += 1;
            self.step();
            if iterations % REFRESH_EVERY == 0 {
                self.refresh();
            }
            if iterations % CORRECTIVE_EVERY == 0 {
                self.corrective();
            }
            gap = self.toward().1;
            converged = gap <= tol * self.q;
        }
        self.refresh();
        gap = self.toward().1.max(0.0);
        let lower_q = self.q - gap;
        let support = (0..n).filter(|&i| self.mu[i] > SUPPORT_THRESHOLD).collect();
        DiversityReport {
            diversity: 1.0 / self.q,
            upper_bound: (lower_q > 0.0).then(|| 1.0 / lower_q),
            objective: self.q,
            measure: self.mu,
            support,
            fw_gap: gap,
            iterations,
            converged,
        }
    }

    fn step(&mut self) {
        let (s, fw_gap) = self.toward();
        // away vertex: worst active coordinate
        let (a, ga) = self
            .mu
            .iter()
            .zip(&self.g)
            .enumerate()
            .filter(|(_, (m, _))| **m > 0.0)
            .map(|(i, (_, g))| (i, *g))
            .fold((usize::MAX, f64::NEG_INFINITY), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            });
        let away_gap = 2.0 * (ga - self.q);
        let zd = |i: usize| self.z[(i, i)];

        if fw_gap >= away_gap || a == usize::MAX {
            // direction e_s - mu
            let slope = self.g[s] - self.q;
            let curv = zd(s) - 2.0 * self.g[s] + self.q;
            let gamma = line_search(slope, curv, 1.0);
            if gamma <= 0.0 {
                return;
            }
            let col = self.z.column(s);
            for i in 0..self.mu.len() {
                self.mu[i] *= 1.0 - gamma;
                self.g[i] = (1.0 - gamma) * self.g[i] + gamma * col[i];
            }
            self.mu[s] += gamma;
        } else {
            // direction mu - e_a
            let ma = self.mu[a];
            let gamma_max = ma / (1.0 - ma);
            let slope = self.q - ga;
            let curv = self.q - 2.0 * ga + zd(a);
            let gamma = line_search(slope, curv, gamma_max);
            if gamma <= 0.0 {
                return;
            }
            let col = self.z.column(a);
            for i in 0..self.mu.len() {
                self.mu[i] *= 1.0 + gamma;
                self.g[i] = (1.0 + gamma) * self.g[i] - gamma * col[i];
            }
            if gamma >= gamma_max {
                self.mu[a] = 0.0;
            } else {
                self.mu[a] -= gamma;
            }
        }
        self.q = dot(&self.mu, &self.g);
    }

    /// Exact minimizer of the objective on the face spanned by the current
    /// support, accepted only if it is feasible and an improvement.
    fn corrective(&mut self) {
        let support: Vec<usize> = (0..self.mu.len()).filter(|&i| self.mu[i] > 0.0).collect();
        if support.len() > CORRECTIVE_MAX_SUPPORT || support.len() < 2 {
            return;
        }
        let k = support.len();
        let sub = DMatrix::from_fn(k, k, |i, j| self.z[(support[i], support[j])]);
        let Some(chol) = sub.cholesky() else { return };
        let x = chol.solve(&DVector::from_element(k, 1.0));
        let total = x.sum();
        if !(total > 0.0) || x.iter().any(|v| *v <= 0.0) {
            return;
        }
        let mut candidate = vec![0.0; self.mu.len()];
        for (i, &idx) in support.iter().enumerate() {
            candidate[idx] = x[i] / total;
        }
        let g = self.z * DVector::from_column_slice(&candidate);
        let q = dot(&candidate, g.as_slice());
        if q < self.q {
            self.mu = candidate;
            self.g = g.iter().copied().collect();
            self.q = q;
        }
    }
}

/// Minimizer over `[0, max]` of `2 gamma slope + gamma^2 curv`.
fn line_search(slope: f64, curv: f64, max: f64) -> f64 {
    if slope >= 0.0 {
        return 0.0;
    }
    if curv <= 0.0 {
        return max;
    }
    (-slope / curv).min(max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn argmin(v: &[f64]) -> (usize, f64) {
    v.iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PositivityCertificate {
    /// Every weighting entry is at least `-tau_w`.
    NonnegativeWeighting { min_weight: f64 },
    /// A weighting entry below `-tau_w`.
    NegativeWeight { index: usize, weight: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub positively_weighted: bool,
    pub certificate: PositivityCertificate,
    pub magnitude: f64,
    pub diversity: f64,
    /// Whether `|magnitude - diversity| <= tol * magnitude`.
    pub values_agree: bool,
}

/// Decides whether a positive definite space is positively weighted.
///
/// The sign of the weighting decides. The diversity value is computed as a
/// cross-check: a nonnegative weighting whose magnitude and diversity differ
/// by more than `tol * magnitude`, or a diversity exceeding the magnitude,
/// is reported as [`MagError::Inconsistent`].
pub fn is_positively_weighted(a: &FiniteMetricSpace, tol: f64) -> Result<PositivityReport> {
    let z = similarity(a);
    let diagnostics = similarity_diagnostics(&z)?;
    let div = max_diversity_with(&z, &diagnostics, DEFAULT_TOL.min(tol * 1e-2), DEFAULT_MAX_ITERS)?;
    let mag = weighting_with(&z, diagnostics)?;
    let (imin, wmin) = argmin(&mag.weighting);
    let wmax = mag.weighting.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let nonnegative = wmin >= -WEIGHT_SIGN_TOLERANCE * wmax;
    let values_agree = (mag.magnitude - div.diversity).abs() <= tol * mag.magnitude;

    if nonnegative && !values_agree {
        return Err(MagError::Inconsistent(format!(
            "weighting is nonnegative but magnitude {} and diversity {} differ",
            mag.magnitude, div.diversity
        )));
    }
    if div.diversity > mag.magnitude * (1.0 + tol) {
        return Err(MagError::Inconsistent(format!(
            "diversity {} exceeds magnitude {}",
            div.diversity, mag.magnitude
        )));
    }
    let certificate = if nonnegative {
        PositivityCertificate::NonnegativeWeighting { min_weight: wmin }
    } else {
        PositivityCertificate::NegativeWeight {
            index: imin,
            weight: wmin,
        }
    };
    Ok(PositivityReport {
        positively_weighted: nonnegative,
        certificate,
        magnitude: mag.magnitude,
        diversity: div.diversity,
        values_agree,
    })
}

/// Whether the maximum diversity is at most `exp(diam A)` (slack 1e-9).
pub fn diversity_diameter_check(a: &FiniteMetricSpace) -> Result<bool> {
    let div = max_diversity(a, DEFAULT_TOL, DEFAULT_MAX_ITERS)?;
    Ok(div.diversity <= a.diameter().exp() + 1e-9)
}
