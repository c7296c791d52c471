use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MagError, Result};
use crate::generate::{generate, Ambient, SpaceSpec};
use crate::magnitude::{rayleigh_with, similarity, similarity_diagnostics, weighting_with};
use crate::magnitude::least_squares_line;

/// Number of finest levels used by the limit fit.
const FIT_LEVELS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub k: usize,
    pub points: usize,
    /// Hausdorff distance (in the generated metric) to a reference net
    /// several refinements finer than the finest level.
    pub hausdorff_gap: f64,
    pub magnitude: Option<f64>,
    /// Rayleigh quotient of the cell-measure vector: a lower bound on the
    /// magnitude of the net.
    pub quadrature_lower_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub template: SpaceSpec,
    pub records: Vec<ConvergenceRecord>,
    /// Intercept of `m = m_inf - c * gap` fitted over the finest levels.
    pub extrapolated_limit: Option<f64>,
    pub fit_slope: Option<f64>,
    /// RMS residual of that fit.
    pub fit_residual: Option<f64>,
    /// Magnitudes are nondecreasing in `k` within 1e-10.
    pub monotone: bool,
    /// Each level's points are contained in the next level's.
    pub nested: bool,
}

impl ConvergenceStudy {
    /// Plot-ready CSV: `level,value,bound,gap`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,value,bound,gap\n");
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.17e}")).unwrap_or_default();
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{:.17e}\n",
                r.k,
                opt(r.magnitude),
                opt(r.quadrature_lower_bound),
                r.hausdorff_gap
            ));
        }
        out
    }
}

/// Magnitudes of successive nets of one compact space, with their Hausdorff
/// gaps and an extrapolated limit.
pub fn approx_magnitude(
    template: &SpaceSpec,
    levels: &[usize],
    quadrature: bool,
) -> Result<ConvergenceStudy> {
    if levels.is_empty() {
        return Err(MagError::InvalidParams("no refinement levels".into()));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MagError::InvalidParams("levels must be strictly increasing".into()));
    }
    let specs: Vec<SpaceSpec> = levels
        .iter()
        .map(|&k| template.refined(k))
        .collect::<Result<_>>()?;
    for s in &specs {
        s.check()?;
    }
    let ambients: Vec<Ambient> = specs.iter().map(|s| s.ambient()).collect::<Result<_>>()?;
    let finest = specs.last().expect("nonempty");
    let reference = finest.reference_refinement()?.ambient()?;

    let records: Vec<ConvergenceRecord> = specs
        .par_iter()
        .zip(ambients.par_iter())
        .zip(levels.par_iter())
        .map(|((spec, ambient), &k)| {
            let gap = finest.transform(ambient.hausdorff(&reference));
            level_record(spec, ambient, k, gap, quadrature)
        })
        .collect();

    let nested = ambients.windows(2).all(|w| {
        let slack = 1e-12 * finest.transform(1.0);
        finest.transform(w[0].directed_hausdorff(&w[1])) <= slack
    });
    let mags: Vec<f64> = records.iter().filter_map(|r| r.magnitude).collect();
    let monotone = mags.windows(2).all(|w| w[1] >= w[0] - 1e-10);

    let fit_pts: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| r.magnitude.map(|m| (r.hausdorff_gap, m)))
        .collect();
    let tail = &fit_pts[fit_pts.len().saturating_sub(FIT_LEVELS)..];
    let (extrapolated_limit, fit_slope, fit_residual) = match tail.len() {
        0 => (None, None, None),
        1 => (Some(tail[0].1), None, Some(0.0)),
        _ => {
            let (slope, intercept, _) = least_squares_line(tail);
            let rms = (tail
                .iter()
                .map(|(g, m)| (m - intercept - slope * g).powi(2))
                .sum::<f64>()
                / tail.len() as f64)
                .sqrt();
            (Some(intercept), Some(slope), Some(rms))
        }
    };

    Ok(ConvergenceStudy {
        template: template.clone(),
        records,
        extrapolated_limit,
        fit_slope,
        fit_residual,
        monotone,
        nested,
    })
}

fn level_record(
    spec: &SpaceSpec,
    ambient: &Ambient,
    k: usize,
    gap: f64,
    quadrature: bool,
) -> ConvergenceRecord {
    let mut record = ConvergenceRecord {
        k,
        points: ambient.len(),
        hausdorff_gap: gap,
        magnitude: None,
        quadrature_lower_bound: None,
        error: None,
    };
    let space = match generate(spec) {
        Ok(s) => s,
        Err(e) => {
            record.error = Some(e.to_string());
            return record;
        }
    };
    let z = similarity(&space);
    let outcome = similarity_diagnostics(&z).and_then(|d| weighting_with(&z, d));
    match outcome {
        Ok(w) => record.magnitude = Some(w.magnitude),
        Err(e) => record.error = Some(format!("level {k} not positive definite: {e}")),
    }
    if quadrature {
        record.quadrature_lower_bound = rayleigh_with(&z, &cell_measure(ambient)).ok();
    }
    record
}

/// Cell lengths of the nearest-point partition of the convex hull for points
/// on a line; uniform mass otherwise.
fn cell_measure(ambient: &Ambient) -> Vec<f64> {
    match ambient {
        Ambient::Line(xs) if xs.len() > 1 => {
            let mut order: Vec<usize> = (0..xs.len()).collect();
            order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
            let mut mu = vec![0.0; xs.len()];
            for (pos, &i) in order.iter().enumerate() {
                let left = if pos > 0 { (xs[i] - xs[order[pos - 1]]) / 2.0 } else { 0.0 };
                let right = if pos + 1 < order.len() {
                    (xs[order[pos + 1]] - xs[i]) / 2.0
                } else {
                    0.0
                };
                mu[i] = left + right;
            }
            mu
        }
        other => vec![1.0; other.len()],
    }
}
