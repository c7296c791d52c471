use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MagError, Result};
use crate::generate::{generate, Family, LpExponent, SpaceSpec};
use crate::magnitude::{similarity, similarity_diagnostics, Verdict};
use crate::metric::{lp_product, scale_space, FiniteMetricSpace};
use crate::negtype::{stability_scan, StabilityReport};

/// `A x A` for `A = {0, +-e1, +-e2}` in the plane with the `l_1` norm,
/// combined with the Euclidean product metric.
pub fn product_counterexample_space() -> FiniteMetricSpace {
    let cross = vec![
        vec![0.0, 0.0],
        vec![1.0, 0.0],
        vec![-1.0, 0.0],
        vec![0.0, 1.0],
        vec![0.0, -1.0],
    ];
    let a = generate(&SpaceSpec::new(Family::PointCloudLp {
        p: LpExponent(1.0),
        points: cross,
    }))
    .expect("fixed point set");
    lp_product(&a, &a, 2.0).expect("q = 2")
}

/// Scans the product space at `t = 2^-k`, `k = 0..=12`.
pub fn product_counterexample_experiment() -> StabilityReport {
    let scales: Vec<f64> = (0..=12).map(|k| 2f64.powi(-k)).collect();
    stability_scan(&product_counterexample_space(), &scales).expect("fixed instance")
}

/// Random subsets of `l_p^n`: each coordinate is drawn from `{-1, 0, 1}` or
/// uniformly from `[-1, 1]` with equal odds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessSampler {
    pub p: LpExponent,
    pub dim: usize,
    pub max_size: usize,
}

impl WitnessSampler {
    pub const MIN_SIZE: usize = 4;
    pub const MAX_SIZE: usize = 8;

    pub fn new(p: LpExponent, dim: usize) -> Self {
        WitnessSampler {
            p,
            dim,
            max_size: Self::MAX_SIZE,
        }
    }

    fn check(&self) -> Result<()> {
        if self.dim == 0 || !(self.p.value() > 0.0) {
            return Err(MagError::InvalidParams("sampler needs dim >= 1 and p > 0".into()));
        }
        if !(Self::MIN_SIZE..=Self::MAX_SIZE).contains(&self.max_size) {
            return Err(MagError::InvalidParams(format!(
                "max_size must lie in {}..={}",
                Self::MIN_SIZE,
                Self::MAX_SIZE
            )));
        }
        Ok(())
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let size = rng.random_range(Self::MIN_SIZE..=self.max_size);
        (0..size)
            .map(|_| {
                (0..self.dim)
                    .map(|_| {
                        if rng.random::<bool>() {
                            rng.random_range(-1i32..=1) as f64
                        } else {
                            rng.random_range(-1.0..1.0)
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub trial: u64,
    pub points: Vec<Vec<f64>>,
    pub scale: f64,
    pub lambda_min: f64,
    pub tolerance_used: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessSearch {
    pub sampler: WitnessSampler,
    pub seed: u64,
    pub budget: u64,
    pub witness: Option<Witness>,
    /// Subsets drawn, including the one that produced the witness.
    pub trials: u64,
    /// Eigenvalue computations performed.
    pub evaluations: u64,
    /// Smallest eigenvalue seen over all evaluations.
    pub best_lambda_min: Option<f64>,
}

/// Draws up to `budget` random subsets and tests each at every scale; stops
/// at the first indefinite similarity matrix. Trial `i` uses stream `i` of a
/// ChaCha generator keyed by `seed`, so results do not depend on scheduling.
pub fn witness_search(
    sampler: &WitnessSampler,
    scales: &[f64],
    budget: u64,
    seed: u64,
) -> Result<WitnessSearch> {
    sampler.check()?;
    if let Some(&t) = scales.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
        return Err(MagError::NonpositiveScale(t));
    }
    let mut out = WitnessSearch {
        sampler: sampler.clone(),
        seed,
        budget,
        witness: None,
        trials: 0,
        evaluations: 0,
        best_lambda_min: None,
    };
    for trial in 0..budget {
        out.trials += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        let points = sampler.draw(&mut rng);
        let space = FiniteMetricSpace::from_fn(points.len(), |i, j| {
            sampler
                .p
                .distance(points[i].iter().zip(&points[j]).map(|(a, b)| a - b))
        });
        let coincident = (0..space.len())
            .any(|i| (0..i).any(|j| space.dist(i, j) < 1e-9));
        if coincident {
            continue;
        }
        for &t in scales {
            let d = similarity_diagnostics(&similarity(&scale_space(&space, t)?))?;
            out.evaluations += 1;
            out.best_lambda_min = Some(out.best_lambda_min.map_or(d.lambda_min, |b| b.min(d.lambda_min)));
            if d.verdict == Verdict::Indefinite {
                out.witness = Some(Witness {
                    trial,
                    points,
                    scale: t,
                    lambda_min: d.lambda_min,
                    tolerance_used: d.tolerance_used,
                });
                return Ok(out);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::negtype::{default_scales, StabilityClass};

    #[test]
    fn product_space_shape() {
        let x = product_counterexample_space();
        assert_eq!(x.len(), 25);
        // (e1, 0) and (0, e1) differ by one in each factor
        let i = 5;
        let j = 1;
        assert_eq!(x.labels()[i], "(1,0)");
        assert!((x.dist(i, j) - 2f64.sqrt()).abs() < 1e-15);
        assert!(x.validate().ok);
    }

    #[test]
    fn product_experiment_fails_stability() {
        let r = product_counterexample_experiment();
        assert_eq!(r.classification, StabilityClass::NotStablyPd);
        let failing = r.failing_scales();
        assert!(!failing.is_empty());
        assert!(failing.contains(&0.125));
        let worst = r
            .records
            .iter()
            .map(|rec| rec.lambda_min)
            .fold(f64::INFINITY, f64::min);
        assert!(worst < 0.0);
        assert!(!r.negative_type.negative_type);
    }

    #[test]
    fn euclidean_subsets_never_witness() {
        let s = WitnessSampler::new(LpExponent(2.0), 3);
        let r = witness_search(&s, &default_scales(), 300, 7).unwrap();
        assert!(r.witness.is_none());
        assert_eq!(r.trials, 300);
        assert!(r.evaluations > 0);
    }

    #[test]
    fn max_norm_subsets_witness() {
        let s = WitnessSampler::new(LpExponent::INFINITY, 3);
        let r = witness_search(&s, &default_scales(), 10_000, 1).unwrap();
        let w = r.witness.expect("a witness within budget");
        assert!(w.lambda_min < -w.tolerance_used);
        // the search is reproducible
        let again = witness_search(&s, &default_scales(), 10_000, 1).unwrap();
        assert_eq!(again.witness, Some(w));
    }

    #[test]
    fn zero_budget() {
        let s = WitnessSampler::new(LpExponent(2.0), 3);
        let r = witness_search(&s, &default_scales(), 0, 0).unwrap();
        assert_eq!((r.trials, r.evaluations, r.witness, r.best_lambda_min), (0, 0, None, None));
    }

    #[test]
    fn sampler_limits() {
        let mut s = WitnessSampler::new(LpExponent(2.0), 3);
        s.max_size = 9;
        assert!(witness_search(&s, &[1.0], 1, 0).is_err());
    }
}
