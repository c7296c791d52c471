use serde::{Deserialize, Serialize};

use crate::error::{MagError, Result};
use crate::generate::{generate, Family, SpaceSpec};
use crate::magnitude::{least_squares_line, scale_sweep, DimensionEstimate};

/// Relative slack allowed below the lower bound before counting the net's
/// own resolution.
const BASE_MARGIN: f64 = 0.05;

/// Volume of the unit ball `{ |x|_p <= 1 }` in `R^n`.
pub fn lp_ball_volume(n: usize, p: f64) -> Result<f64> {
    if n == 0 || !(p > 0.0) {
        return Err(MagError::InvalidParams(format!(
            "ball volume needs n >= 1 and p > 0, got n = {n}, p = {p}"
        )));
    }
    if n == 1 {
        return Ok(2.0);
    }
    let nf = n as f64;
    if p.is_infinite() {
        return Ok(2f64.powf(nf));
    }
    let log = nf * (2.0 * libm::tgamma(1.0 + 1.0 / p)).ln() - libm::lgamma(1.0 + nf / p);
    Ok(log.exp())
}

/// `vol(A) t^n / (Gamma(n / beta + 1) vol(B))` with `beta = alpha min(1, p)`:
/// the guaranteed magnitude of a dilate `tA` of a compact `A` in
/// `(l_p^n)^alpha`.
pub fn growth_lower_bound(n: usize, p: f64, alpha: f64, vol_a: f64, t: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(MagError::InvalidParams(format!("alpha = {alpha} outside (0, 1]")));
    }
    if !(vol_a > 0.0) || !(t >= 0.0) {
        return Err(MagError::InvalidParams(format!(
            "need vol(A) > 0 and t >= 0, got {vol_a} and {t}"
        )));
    }
    let ball = lp_ball_volume(n, p)?;
    let beta = alpha * p.min(1.0);
    let nf = n as f64;
    let log_gamma = libm::lgamma(nf / beta + 1.0);
    Ok(vol_a * t.powf(nf) / (log_gamma.exp() * ball))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    /// Dilation factor applied to the set.
    pub t: f64,
    pub lower_bound: f64,
    pub net_magnitude: Option<f64>,
    pub margin: f64,
    pub satisfied: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthStudy {
    pub template: SpaceSpec,
    pub dim: usize,
    pub beta: f64,
    pub volume: f64,
    pub checks: Vec<BoundCheck>,
    /// Log-log slope of the net magnitudes over the whole `t` grid, when at
    /// least three records are usable.
    pub slope: Option<DimensionEstimate>,
}

impl GrowthStudy {
    /// Plot-ready CSV: `t,value,bound`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value,bound\n");
        for c in &self.checks {
            let v = c.net_magnitude.map(|m| format!("{m:.17e}")).unwrap_or_default();
            out.push_str(&format!("{},{},{:.17e}\n", c.t, v, c.lower_bound));
        }
        out
    }
}

/// Compares net magnitudes of dilates `tA` of a cube or interval against the
/// volume lower bound.
///
/// The net misses a boundary layer one cell thick, so the allowed margin is
/// `5%` of the bound plus the bound times `1 - (1 - h)^n`, where `h` is the
/// relative grid spacing.
pub fn growth_bound_study(template: &SpaceSpec, ts: &[f64]) -> Result<GrowthStudy> {
    template.check()?;
    let (dim, p, side, spacing) = match &template.family {
        Family::GridNet { dim, m, p } => (*dim, p.value(), 1.0, 1.0 / (*m as f64 - 1.0).max(1.0)),
        Family::IntervalNet { length, n } => (1, 1.0, *length, 1.0 / (*n as f64 - 1.0).max(1.0)),
        other => return Err(MagError::UnsupportedFamily(other.name().into())),
    };
    if ts.is_empty() {
        return Err(MagError::InvalidParams("empty dilation grid".into()));
    }
    if let Some(&t) = ts.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
        return Err(MagError::NonpositiveScale(t));
    }
    let alpha = template.snowflake;
    let beta = alpha * p.min(1.0);
    // the template's own scale is a dilation by scale^(1/beta)
    let pre = template.scale.powf(1.0 / beta);
    let nf = dim as f64;
    let volume = (side * pre).powf(nf);

    let base = generate(&SpaceSpec {
        scale: 1.0,
        ..template.clone()
    })?;
    let mut sorted = ts.to_vec();
    sorted.sort_by(f64::total_cmp);
    let metric_scales: Vec<f64> = sorted.iter().map(|t| (t * pre).powf(beta)).collect();
    let sweep = scale_sweep(&base, &metric_scales, false)?;

    let single = base.len() == 1;
    let resolution = 1.0 - (1.0 - spacing).powf(nf);
    let mut checks = Vec::with_capacity(sorted.len());
    for (&t, record) in sorted.iter().zip(&sweep.records) {
        // a one-point net carries no volume
        let lower = if single {
            0.0
        } else {
            growth_lower_bound(dim, p, alpha, volume, t)?
        };
        let margin = lower * (BASE_MARGIN + resolution);
        let satisfied = record.magnitude.is_some_and(|m| m >= lower - margin);
        checks.push(BoundCheck {
            t,
            lower_bound: lower,
            net_magnitude: record.magnitude,
            margin,
            satisfied,
            error: record.error.clone(),
        });
    }
    let pts: Vec<(f64, f64)> = checks
        .iter()
        .filter_map(|c| c.net_magnitude.filter(|m| *m > 0.0).map(|m| (c.t.ln(), m.ln())))
        .collect();
    let slope = (pts.len() >= 3).then(|| {
        let (slope, _, stderr) = least_squares_line(&pts);
        DimensionEstimate {
            slope,
            stderr,
            records_used: pts.len(),
            window: (sorted[0], sorted[sorted.len() - 1]),
        }
    });
    Ok(GrowthStudy {
        template: template.clone(),
        dim,
        beta,
        volume,
        checks,
        slope,
    })
}
