//! Cosine transforms of `exp(-|x|^p)` on the line and the Fourier-side
//! upper bound on the magnitude of an interval.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MagError, Result};

pub const DEFAULT_CUTOFF: f64 = 40.0;
pub const DEFAULT_NODES: usize = 1 << 16;
const TAIL_TOLERANCE: f64 = 1e-9;
/// Frequency grid `0, 0.05, ..., 10`.
const GRID_STEP: f64 = 0.05;
const GRID_LEN: usize = 201;

/// Samples of `exp(-x^p)` on `[0, L]`, reused across frequencies.
struct Profile {
    p: f64,
    h: f64,
    xs: Vec<f64>,
    fs: Vec<f64>,
}

impl Profile {
    /// `nodes` intervals across the symmetric window `[-L, L]`.
    fn new(p: f64, cutoff: f64, nodes: usize) -> Self {
        let half = (nodes / 2).max(1);
        let h = cutoff / half as f64;
        let xs: Vec<f64> = (0..=half).map(|k| k as f64 * h).collect();
        let fs = xs.iter().map(|x| (-x.powf(p)).exp()).collect();
        Profile { p, h, xs, fs }
    }

    fn derivative(&self, x: f64) -> f64 {
        if x == 0.0 {
            // the one-sided slope at the origin is finite only for p >= 1
            return if self.p == 1.0 { -1.0 } else { 0.0 };
        }
        -self.p * x.powf(self.p - 1.0) * (-x.powf(self.p)).exp()
    }

    /// `2 * int_0^L f(x) cos(2 pi w x) dx` by the trapezoid rule, with the
    /// first endpoint correction when the slope at the origin exists.
    fn transform(&self, omega: f64) -> f64 {
        let k = 2.0 * PI * omega;
        let last = self.xs.len() - 1;
        let mut sum = 0.0;
        for (i, (&x, &f)) in self.xs.iter().zip(&self.fs).enumerate() {
            let w = if i == 0 || i == last { 0.5 } else { 1.0 };
            sum += w * f * (k * x).cos();
        }
        let mut integral = sum * self.h;
        if self.p >= 1.0 {
            let l = self.xs[last];
            let d_end = self.derivative(l) * (k * l).cos() - self.fs[last] * k * (k * l).sin();
            let d_start = self.derivative(0.0);
            integral -= self.h * self.h / 12.0 * (d_end - d_start);
        }
        2.0 * integral
    }

    /// `2 * int_L^inf exp(-x^p) dx`, bounded through the incomplete gamma
    /// function's leading asymptotic term.
    fn tail(&self) -> f64 {
        let l = *self.xs.last().expect("nonempty");
        let x = l.powf(self.p);
        let s = 1.0 / self.p;
        let ratio = (s - 1.0) / x;
        let lead = x.powf(s - 1.0) * (-x).exp() / self.p;
        if ratio < 0.5 {
            2.0 * lead / (1.0 - ratio.max(0.0))
        } else {
            // asymptotics not yet valid; fall back to a crude but safe bound
            2.0 * lead * (1.0 + s * x.recip()) * 1e3
        }
    }

    /// Rough size of the trapezoid error that the correction leaves behind.
    fn discretization_estimate(&self, omega_max: f64) -> f64 {
        let h = self.h;
        if self.p == 2.0 {
            f64::EPSILON
        } else if self.p == 1.0 {
            h.powi(4) * (1.0 + (2.0 * PI * omega_max).powi(2)) / 360.0
        } else {
            // the |x|^p singularity at the origin; zeta(-p) stays below 0.21 on (0, 2)
            2.0 * 0.21 * h.powf(1.0 + self.p)
        }
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 2.0) {
        return Err(MagError::ExponentOutOfRange(format!(
            "exponent {p} must lie in (0, 2]"
        )));
    }
    Ok(())
}

/// `int exp(-|x|^p) exp(-2 pi i w x) dx` at a single frequency.
pub fn gamma_hat(p: f64, omega: f64, cutoff: f64, nodes: usize) -> Result<f64> {
    check_exponent(p)?;
    Ok(Profile::new(p, cutoff, nodes).transform(omega))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierReport {
    pub p: f64,
    pub cutoff: f64,
    pub nodes: usize,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub positive: bool,
    pub radially_decreasing: bool,
    /// Largest `c` with `value >= c (1 + w)^(-1-p)` on the grid.
    pub fitted_c: f64,
    pub tail_estimate: f64,
    pub discretization_estimate: f64,
}

impl FourierReport {
    /// Plot-ready CSV: `omega,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega,value\n");
        for (w, v) in self.grid.iter().zip(&self.values) {
            out.push_str(&format!("{w},{v:.17e}\n"));
        }
        out
    }
}

/// Tabulates the transform on `w = 0, 0.05, ..., 10`.
pub fn gamma_hat_1d(p: f64, cutoff: f64, nodes: usize) -> Result<FourierReport> {
    check_exponent(p)?;
    if !(cutoff > 0.0) || nodes < 2 {
        return Err(MagError::InvalidParams("cutoff must be positive and nodes >= 2".into()));
    }
    let profile = Profile::new(p, cutoff, nodes);
    let tail = profile.tail();
    if tail > TAIL_TOLERANCE {
        return Err(MagError::QuadratureDivergence {
            tail,
            tolerance: TAIL_TOLERANCE,
        });
    }
    let grid: Vec<f64> = (0..GRID_LEN).map(|i| i as f64 * GRID_STEP).collect();
    let values: Vec<f64> = grid.par_iter().map(|&w| profile.transform(w)).collect();
    let positive = values.iter().all(|&v| v > 0.0);
    let radially_decreasing = values.windows(2).all(|w| w[1] <= w[0]);
    let fitted_c = grid
        .iter()
        .zip(&values)
        .map(|(w, v)| v * (1.0 + w).powf(1.0 + p))
        .fold(f64::INFINITY, f64::min);
    Ok(FourierReport {
        p,
        cutoff,
        nodes,
        grid,
        values,
        positive,
        radially_decreasing,
        fitted_c,
        tail_estimate: tail,
        discretization_estimate: profile.discretization_estimate(grid_max()),
    })
}

fn grid_max() -> f64 {
    (GRID_LEN - 1) as f64 * GRID_STEP
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpperBoundReport {
    pub length: f64,
    pub p: f64,
    pub alpha: f64,
    pub mollifier_radius: f64,
    /// Effective kernel exponent `alpha * min(1, p)`.
    pub beta: f64,
    /// `sup psi_hat / F_hat` over the frequency grid.
    pub bound: f64,
    pub argmax_omega: f64,
    pub grid_points: usize,
    /// Relative accuracy of the kernel transform propagated to the bound.
    pub error_estimate: f64,
}

/// Smooth bump `exp(1/(x^2 - 1))` on `(-1, 1)` normalized to unit mass,
/// together with its cosine transform.
struct Bump {
    h: f64,
    samples: Vec<f64>,
    mass: f64,
}

impl Bump {
    fn new() -> Self {
        let nodes = 4000;
        let h = 1.0 / nodes as f64;
        let samples: Vec<f64> = (0..=nodes)
            .map(|i| {
                let x = i as f64 * h;
                if x >= 1.0 {
                    0.0
                } else {
                    (1.0 / (x * x - 1.0)).exp()
                }
            })
            .collect();
        // all derivatives vanish at both ends, so the trapezoid rule is spectral
        let half: f64 = samples.iter().sum::<f64>() - 0.5 * samples[0];
        Bump {
            h,
            samples,
            mass: 2.0 * half * h,
        }
    }

    fn transform(&self, nu: f64) -> f64 {
        let k = 2.0 * PI * nu;
        let mut sum = 0.5 * self.samples[0];
        for (i, &s) in self.samples.iter().enumerate().skip(1) {
            sum += s * (k * i as f64 * self.h).cos();
        }
        2.0 * sum * self.h / self.mass
    }
}

/// Upper bound on the magnitude of `[0, l]` with the metric `|x - y|^alpha`
/// measured through an `l_p` norm, from a smooth test function equal to one
/// on the interval and supported in a window of length `R`.
pub fn fourier_upper_bound_1d(
    length: f64,
    p: f64,
    alpha: f64,
    mollifier_radius: f64,
) -> Result<UpperBoundReport> {
    check_exponent(p)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(MagError::ExponentOutOfRange(format!(
            "snowflake exponent {alpha} must lie in (0, 1]"
        )));
    }
    if !(length >= 0.0 && mollifier_radius > length) {
        return Err(MagError::InvalidParams(format!(
            "need 0 <= l < R, got l = {length}, R = {mollifier_radius}"
        )));
    }
    let beta = alpha * p.min(1.0);
    let c = (length + mollifier_radius) / 2.0;
    let delta = (mollifier_radius - length) / 2.0;
    let omega_max = 20.0 / delta;
    let step = 1.0 / (16.0 * c);

    // the kernel transform: smallest power-of-two cutoff with a small tail
    let mut cutoff = 8.0;
    let profile = loop {
        let nodes = (2.0 * cutoff * 16.0 * omega_max).max(1e4).ceil() as usize;
        let prof = Profile::new(beta, cutoff, nodes);
        if prof.tail() <= 1e-12 {
            break prof;
        }
        cutoff *= 2.0;
        if cutoff > 1e5 {
            return Err(MagError::QuadratureDivergence {
                tail: prof.tail(),
                tolerance: 1e-12,
            });
        }
    };
    let bump = Bump::new();
    let ratio = |w: f64| {
        let psi = if w == 0.0 {
            2.0 * c
        } else {
            (2.0 * PI * c * w).sin() / (PI * w) * bump.transform(delta * w)
        };
        psi / profile.transform(w)
    };

    let count = (omega_max / step).ceil() as usize + 1;
    let coarse: Vec<(f64, f64)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let w = i as f64 * step;
            (w, ratio(w))
        })
        .collect();
    let (mut best_w, mut best) = coarse
        .iter()
        .copied()
        .fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    // polish the winning cell on a fine grid
    let fine: Vec<(f64, f64)> = (0..=100)
        .into_par_iter()
        .map(|j| {
            let w = (best_w - step + j as f64 * step / 50.0).max(0.0);
            (w, ratio(w))
        })
        .collect();
    for (w, r) in fine {
        if r > best {
            best = r;
            best_w = w;
        }
    }
    if !(best > 0.0) {
        return Err(MagError::NegativeRatioOnly);
    }
    let f_min = profile.transform(omega_max).abs().max(f64::MIN_POSITIVE);
    let abs_err = profile.discretization_estimate(omega_max) + profile.tail();
    Ok(UpperBoundReport {
        length,
        p,
        alpha,
        mollifier_radius,
        beta,
        bound: best,
        argmax_omega: best_w,
        grid_points: count + 101,
        error_estimate: abs_err / f_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplace_kernel_matches_closed_form() {
        let r = gamma_hat_1d(1.0, DEFAULT_CUTOFF, DEFAULT_NODES).unwrap();
        for (w, v) in r.grid.iter().zip(&r.values) {
            let exact = 2.0 / (1.0 + 4.0 * PI * PI * w * w);
            assert!((v - exact).abs() < 1e-8, "w = {w}: {v} vs {exact}");
        }
        assert!(r.positive && r.radially_decreasing);
        assert!(r.fitted_c > 0.0);
    }

    #[test]
    fn gaussian_kernel_matches_closed_form() {
        for w in [0.0, 0.3, 1.0] {
            let v = gamma_hat(2.0, w, 10.0, 4096).unwrap();
            let exact = PI.sqrt() * (-PI * PI * w * w).exp();
            assert!((v - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn value_at_zero_is_total_mass() {
        // int exp(-|x|^p) = 2 Gamma(1 + 1/p)
        let v = gamma_hat(1.5, 0.0, 60.0, 1 << 16).unwrap();
        let exact = 2.0 * libm::tgamma(1.0 + 1.0 / 1.5);
        assert!((v - exact).abs() < 1e-8);
    }

    #[test]
    fn short_window_diverges() {
        assert!(matches!(
            gamma_hat_1d(0.5, 50.0, 1 << 14),
            Err(MagError::QuadratureDivergence { .. })
        ));
        assert!(gamma_hat_1d(2.5, 10.0, 100).is_err());
    }

    #[test]
    fn bump_is_normalized() {
        let b = Bump::new();
        assert!((b.transform(0.0) - 1.0).abs() < 1e-14);
        assert!((b.mass - 0.443_993_816_168_079_4).abs() < 1e-12);
    }

    #[test]
    fn point_bound_exceeds_one() {
        // magnitude of a point is one, so any valid bound is at least that
        let r = fourier_upper_bound_1d(0.0, 1.0, 1.0, 1.0).unwrap();
        assert!(r.bound >= 1.0, "{r:?}");
        assert!(fourier_upper_bound_1d(1.0, 1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn interval_bound_dominates_magnitude() {
        let r = fourier_upper_bound_1d(2.0, 1.0, 1.0, 3.0).unwrap();
        assert!(r.bound >= 2.0, "{r:?}");
    }
}
