//! Acceptance suite. Every test prints exactly one `PASS` or `FAIL` line;
//! run with `--nocapture` to see them all.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use maglab::analysis::{
    approx_magnitude, fourier_upper_bound_1d, gamma_hat_1d, growth_bound_study,
    product_counterexample_experiment, DEFAULT_CUTOFF, DEFAULT_NODES,
};
use maglab::diversity::{max_diversity, DEFAULT_MAX_ITERS};
use maglab::magnitude::{
    magnitude, magnitude_dimension_estimate, rayleigh, scale_sweep, spectrum_diagnostics,
    weighting, Verdict,
};
use maglab::metric::scale_space;
use maglab::negtype::{negative_type_test, StabilityClass};
use maglab::{generate, Family, FiniteMetricSpace, LpExponent, SpaceSpec};

fn verdict(id: u32, name: &str, ok: bool, detail: String) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id:>2} {name}: {detail}");
    assert!(ok, "criterion {id} ({name}) failed: {detail}");
}

fn rng(stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(0xacce_97);
    r.set_stream(stream);
    r
}

fn spec(family: Family, seed: u64) -> SpaceSpec {
    SpaceSpec::new(family).seeded(seed)
}

fn cloud(p: f64, dim: usize, count: usize, seed: u64) -> FiniteMetricSpace {
    generate(&spec(
        Family::RandomCloudLp {
            p: LpExponent(p),
            dim,
            count,
        },
        seed,
    ))
    .unwrap()
}

fn k32(r: f64) -> FiniteMetricSpace {
    generate(&SpaceSpec::complete_bipartite(3, 2, r)).unwrap()
}

/// Random positive weights on all pairs closed under shortest paths.
fn random_four_point(r: &mut ChaCha8Rng) -> FiniteMetricSpace {
    let mut d = [[0.0f64; 4]; 4];
    for i in 0..4 {
        for j in (i + 1)..4 {
            let w = r.random_range(0.05..1.0);
            d[i][j] = w;
            d[j][i] = w;
        }
    }
    for k in 0..4 {
        for i in 0..4 {
            for j in 0..4 {
                d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
            }
        }
    }
    FiniteMetricSpace::from_rows(d.iter().map(|row| row.to_vec()).collect()).unwrap()
}

#[test]
fn criterion_01_two_point_law() {
    let worst = [0.1, 1.0, 10.0]
        .iter()
        .map(|&d| {
            let a = FiniteMetricSpace::from_rows(vec![vec![0.0, d], vec![d, 0.0]]).unwrap();
            (magnitude(&a).unwrap() - 2.0 / (1.0 + (-d).exp())).abs()
        })
        .fold(0.0, f64::max);
    verdict(1, "two-point law", worst <= 1e-12, format!("max error {worst:.2e}"));
}

#[test]
fn criterion_02_k32_threshold() {
    let lambda = |r: f64| spectrum_diagnostics(&k32(r)).unwrap().lambda_min;
    let (mut lo, mut hi) = (0.2, 0.5);
    assert!(lambda(lo) < 0.0 && lambda(hi) > 0.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if lambda(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = 0.5 * (lo + hi);
    let target = 2f64.sqrt().ln();
    verdict(
        2,
        "K(3,2) threshold",
        (r - target).abs() <= 1e-3,
        format!("sign change at r = {r:.6}, ln sqrt 2 = {target:.6}"),
    );
}

#[test]
fn criterion_03_interval_convergence() {
    let levels = [11, 101, 1001, 2001];
    let uniform = approx_magnitude(&SpaceSpec::interval(2.0, 2), &levels, false).unwrap();
    let cheb_spec = SpaceSpec::new(Family::ChebyshevNet { length: 2.0, n: 2 });
    let cheb = approx_magnitude(&cheb_spec, &levels, false).unwrap();
    let lu = uniform.extrapolated_limit.unwrap();
    let lc = cheb.extrapolated_limit.unwrap();
    let finest = uniform.records.last().unwrap().magnitude.unwrap();
    let ok = (lu - lc).abs() <= 1e-4
        && uniform.nested
        && cheb.nested
        && uniform.monotone
        && cheb.monotone
        && (finest - lu).abs() <= 1e-3
        && uniform.records.iter().chain(&cheb.records).all(|r| r.error.is_none());
    verdict(
        3,
        "interval convergence",
        ok,
        format!(
            "limits {lu:.8} / {lc:.8} (diff {:.1e}), finest {finest:.8}, monotone {} / {}",
            (lu - lc).abs(),
            uniform.monotone,
            cheb.monotone
        ),
    );
}

#[test]
fn criterion_04_homogeneity() {
    let a = generate(&SpaceSpec::new(Family::CircleNet {
        circumference: 10.0,
        n: 100,
    }))
    .unwrap();
    let w = weighting(&a).unwrap().weighting;
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    let dev = w.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);
    verdict(4, "homogeneous weighting", dev < 1e-10, format!("max deviation {dev:.2e}"));
}

#[test]
fn criterion_05_diversity_equals_magnitude() {
    let mut r = rng(5);
    let mut worst_rel = 0.0f64;
    let mut worst_gap = 0.0f64;
    let mut max_iters = 0usize;
    let mut all_converged = true;
    for i in 0..200u64 {
        let a = if i < 100 {
            let count = r.random_range(2..40);
            let t = r.random_range(0.5..20.0);
            scale_space(&cloud(1.0, 1, count, i), t).unwrap()
        } else {
            let leaves = r.random_range(2..40);
            generate(&spec(Family::UltrametricTree { leaves }, i)).unwrap()
        };
        let m = magnitude(&a).unwrap();
        let d = max_diversity(&a, 1e-8, 100_000).unwrap();
        all_converged &= d.converged;
        worst_rel = worst_rel.max((m - d.diversity).abs() / m);
        worst_gap = worst_gap.max(d.fw_gap);
        max_iters = max_iters.max(d.iterations);
    }
    verdict(
        5,
        "diversity equals magnitude when positively weighted",
        all_converged && worst_rel <= 1e-6 && worst_gap <= 1e-8 && max_iters <= 100_000,
        format!("max relative difference {worst_rel:.2e}, max FW gap {worst_gap:.2e}, max iterations {max_iters}"),
    );
}

#[test]
fn criterion_06_diameter_bound() {
    let mut r = rng(6);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..200u64 {
        let count = r.random_range(2..30);
        let t = r.random_range(0.1..5.0);
        let a = scale_space(&cloud(2.0, 3, count, i), t).unwrap();
        let d = max_diversity(&a, 1e-10, DEFAULT_MAX_ITERS).unwrap();
        worst = worst.max(d.diversity - a.diameter().exp());
    }
    verdict(
        6,
        "diversity at most exp(diameter)",
        worst <= 1e-9,
        format!("max excess {worst:.3e}"),
    );
}

#[test]
fn criterion_07_negative_type_corpus() {
    let mut r = rng(7);
    let mut corpus: Vec<(String, FiniteMetricSpace)> = Vec::new();
    for i in 0..1000 {
        corpus.push((format!("four-point {i}"), random_four_point(&mut r)));
    }
    for i in 0..100u64 {
        let leaves = r.random_range(2..30);
        corpus.push((format!("ultrametric {i}"), generate(&spec(Family::UltrametricTree { leaves }, i)).unwrap()));
        let nodes = r.random_range(2..30);
        corpus.push((format!("tree {i}"), generate(&spec(Family::WeightedTree { nodes }, i)).unwrap()));
        let p = [0.5, 1.0, 1.5, 2.0][i as usize % 4];
        let dim = r.random_range(1..5);
        let count = r.random_range(2..25);
        corpus.push((format!("l_{p} cloud {i}"), cloud(p, dim, count, i)));
    }
    corpus.push((
        "sphere".into(),
        generate(&SpaceSpec::new(Family::SphereFibonacciNet { radius: 1.0, n: 200 })).unwrap(),
    ));
    corpus.push((
        "hyperbolic".into(),
        generate(&SpaceSpec::new(Family::HyperbolicDiskNet {
            radius: 2.0,
            rings: 5,
            per_ring: 6,
        }))
        .unwrap(),
    ));
    let failures: Vec<&String> = corpus
        .iter()
        .filter(|(_, a)| !negative_type_test(a, 0).unwrap().negative_type)
        .map(|(name, _)| name)
        .collect();
    let k32_fails = !negative_type_test(&k32(1.0), 0).unwrap().negative_type;
    let product = product_counterexample_experiment();
    let product_fails =
        product.classification == StabilityClass::NotStablyPd && !product.negative_type.negative_type;
    verdict(
        7,
        "negative type corpus",
        failures.is_empty() && k32_fails && product_fails,
        format!(
            "{} of {} corpus spaces fail {:?}; K(3,2) fails: {k32_fails}; product experiment {:?} at {:?}",
            failures.len(),
            corpus.len(),
            failures.iter().take(3).collect::<Vec<_>>(),
            product.classification,
            product.failing_scales()
        ),
    );
}

#[test]
fn criterion_08_rayleigh_supremum() {
    let mut r = rng(8);
    let mut worst_eq = 0.0f64;
    let mut worst_excess = f64::NEG_INFINITY;
    for i in 0..100u64 {
        let count = r.random_range(2..30);
        let t = r.random_range(0.2..10.0);
        let a = scale_space(&cloud(2.0, 3, count, i), t).unwrap();
        let w = weighting(&a).unwrap();
        worst_eq = worst_eq.max((rayleigh(&a, &w.weighting).unwrap() - w.magnitude).abs());
        for _ in 0..100 {
            let mu: Vec<f64> = (0..count).map(|_| r.random_range(-1.0..1.0)).collect();
            if let Ok(q) = rayleigh(&a, &mu) {
                worst_excess = worst_excess.max(q - w.magnitude);
            }
        }
    }
    verdict(
        8,
        "Rayleigh supremum",
        worst_eq <= 1e-9 && worst_excess <= 1e-9,
        format!("|R(w) - |A|| <= {worst_eq:.2e}, max R(mu) - |A| = {worst_excess:.2e}"),
    );
}

#[test]
fn criterion_09_deletion_monotonicity() {
    let mut r = rng(9);
    let mut worst_mag = f64::NEG_INFINITY;
    let mut worst_div = f64::NEG_INFINITY;
    for i in 0..200u64 {
        let count = r.random_range(3..25);
        let t = r.random_range(0.2..10.0);
        let a = scale_space(&cloud(2.0, 2, count, i), t).unwrap();
        let b = a.without_point(r.random_range(0..count)).unwrap();
        worst_mag = worst_mag.max(magnitude(&b).unwrap() - magnitude(&a).unwrap());
        let da = max_diversity(&a, 1e-14, DEFAULT_MAX_ITERS).unwrap().diversity;
        let db = max_diversity(&b, 1e-14, DEFAULT_MAX_ITERS).unwrap().diversity;
        worst_div = worst_div.max(db - da);
    }
    verdict(
        9,
        "deletion monotonicity",
        worst_mag <= 1e-10 && worst_div <= 1e-10,
        format!("max increase: magnitude {worst_mag:.2e}, diversity {worst_div:.2e}"),
    );
}

#[test]
fn criterion_10_fourier_suite() {
    use std::f64::consts::PI;
    let laplace = gamma_hat_1d(1.0, DEFAULT_CUTOFF, DEFAULT_NODES).unwrap();
    let gauss = gamma_hat_1d(2.0, DEFAULT_CUTOFF, DEFAULT_NODES).unwrap();
    let err_laplace = laplace
        .grid
        .iter()
        .zip(&laplace.values)
        .map(|(w, v)| (v - 2.0 / (1.0 + 4.0 * PI * PI * w * w)).abs())
        .fold(0.0, f64::max);
    let err_gauss = gauss
        .grid
        .iter()
        .zip(&gauss.values)
        .map(|(w, v)| (v - PI.sqrt() * (-PI * PI * w * w).exp()).abs())
        .fold(0.0, f64::max);
    // the slowly decaying p = 1/2 profile needs a much longer window
    let half = gamma_hat_1d(0.5, 1000.0, 1 << 21).unwrap();
    let three_halves = gamma_hat_1d(1.5, DEFAULT_CUTOFF, DEFAULT_NODES).unwrap();
    let shape_ok = [&half, &three_halves]
        .iter()
        .all(|r| r.positive && r.radially_decreasing && r.fitted_c > 0.0);
    verdict(
        10,
        "Fourier suite",
        err_laplace <= 1e-6 && err_gauss <= 1e-6 && shape_ok,
        format!(
            "closed-form errors {err_laplace:.1e} (p=1), {err_gauss:.1e} (p=2); fitted c {:.4} (p=0.5), {:.4} (p=1.5)",
            half.fitted_c, three_halves.fitted_c
        ),
    );
}

#[test]
fn criterion_11_growth_bounds() {
    let square = SpaceSpec::grid(2, 41, 1.0);
    let study = growth_bound_study(&square, &[4.0, 8.0, 16.0]).unwrap();
    let lower_ok = study
        .checks
        .iter()
        .all(|c| c.net_magnitude.is_some_and(|m| m >= c.t * c.t / 4.0 * 0.95));

    let net = generate(&square).unwrap();
    let window: Vec<f64> = (0..5).map(|k| 8.0 * 2f64.powf(k as f64 / 4.0)).collect();
    let sweep = scale_sweep(&net, &window, false).unwrap();
    let slope = magnitude_dimension_estimate(&sweep, (8.0, 16.0)).unwrap().slope;
    let slope_ok = (1.8..=2.05).contains(&slope);

    let interval = magnitude(&generate(&SpaceSpec::interval(2.0, 2001)).unwrap()).unwrap();
    let bound = fourier_upper_bound_1d(2.0, 1.0, 1.0, 3.0).unwrap().bound;
    let bound_ok = bound >= interval;

    verdict(
        11,
        "growth bounds",
        lower_ok && slope_ok && bound_ok,
        format!(
            "lower bounds {} ({:?}); slope on [8,16] = {slope:.4} (window [1.8, 2.05]); Fourier bound {bound:.4} vs |[0,2]| = {interval:.6}",
            if lower_ok { "met" } else { "missed" },
            study.checks.iter().map(|c| c.net_magnitude.unwrap_or(f64::NAN)).collect::<Vec<_>>(),
        ),
    );
}

#[test]
fn criterion_12_schur_closure() {
    let mut r = rng(12);
    let scales: Vec<f64> = (-8..=3).map(|k| 2f64.powi(k)).collect();
    let mut checked = 0usize;
    let mut worst = f64::INFINITY;
    for i in 0..100u64 {
        let p = [1.0, 2.0, f64::INFINITY][i as usize % 3];
        let count = r.random_range(3..20);
        let a = cloud(p, 3, count, i);
        for &t in &scales {
            let base = spectrum_diagnostics(&scale_space(&a, t).unwrap()).unwrap();
            if base.verdict == Verdict::Indefinite {
                continue;
            }
            for k in [2.0, 3.0] {
                let d = spectrum_diagnostics(&scale_space(&a, k * t).unwrap()).unwrap();
                worst = worst.min(d.lambda_min + d.tolerance_used);
                checked += 1;
            }
        }
    }
    verdict(
        12,
        "Schur closure under scaling",
        worst >= 0.0,
        format!("{checked} scale pairs checked, min lambda_min + tau = {worst:.3e}"),
    );
}
