use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use maglab::analysis::{
    approx_magnitude, fourier_upper_bound_1d, gamma_hat_1d, growth_bound_study,
    product_counterexample_experiment, witness_search, WitnessSampler, DEFAULT_CUTOFF,
    DEFAULT_NODES,
};
use maglab::diversity::{is_positively_weighted, max_diversity, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use maglab::magnitude::{magnitude_dimension_estimate, scale_sweep, weighting};
use maglab::negtype::{default_scales, negative_type_test, stability_scan};
use maglab::{generate, io, FiniteMetricSpace, LpExponent, MagError, SpaceSpec};

mod table;

/// Version tag written into every JSON report.
const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "maglab", version, about = "Magnitude, diversity and positive definiteness of finite metric spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a CSV distance matrix against the metric axioms.
    Validate {
        matrix: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Weighting and magnitude of a positive definite space.
    Magnitude {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        out: Output,
    },
    /// Maximum diversity by Frank-Wolfe over the probability simplex.
    Diversity {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
        max_iters: usize,
        /// Also compare against the magnitude and classify the weighting sign.
        #[arg(long)]
        positivity: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Diagnostics and magnitude of tA over a grid of scales.
    Sweep {
        #[command(flatten)]
        input: Input,
        /// `a:b:n` for n evenly spaced scales, `a:b:nlog` for log spacing.
        #[arg(long)]
        scales: String,
        #[arg(long)]
        diversity: bool,
        /// `lo:hi` window for a log-log slope estimate.
        #[arg(long)]
        window: Option<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// Negative type test, optionally with a stability scan over scales.
    Negtype {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 0)]
        basepoint: usize,
        /// Scan `2^k, k = -10..=4` (or `--scales`) for indefinite scales.
        #[arg(long)]
        scan: bool,
        #[arg(long, requires = "scan")]
        scales: Option<String>,
        #[command(flatten)]
        out: Output,
    },
    /// Magnitudes of successively finer nets of a compact space.
    Approx {
        /// Space template as JSON; its size parameter is replaced per level.
        #[arg(long)]
        family: PathBuf,
        /// Comma separated refinement levels.
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<usize>,
        #[arg(long)]
        quadrature: bool,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// Net magnitudes of dilates of a cube against the volume lower bound.
    Growth {
        #[arg(long)]
        spec: PathBuf,
        /// Comma separated dilation factors.
        #[arg(long = "t", value_delimiter = ',', required = true)]
        ts: Vec<f64>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// Fourier transform of exp(-|x|^p), or the interval magnitude bound.
    Fourier {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = DEFAULT_CUTOFF)]
        cutoff: f64,
        #[arg(long, default_value_t = DEFAULT_NODES)]
        nodes: usize,
        #[arg(long)]
        upper_bound: bool,
        #[arg(long, requires = "upper_bound")]
        ell: Option<f64>,
        #[arg(long, default_value_t = 1.0, requires = "upper_bound")]
        alpha: f64,
        /// Width of the window carrying the test function; defaults to ell + 1.
        #[arg(long, requires = "upper_bound")]
        radius: Option<f64>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// Fixed experiments probing stable positive definiteness.
    #[command(subcommand)]
    Experiment(Experiment),
}

#[derive(Subcommand)]
enum Experiment {
    /// The 25-point product of a planar l_1 cross with itself.
    ProductCounterexample {
        #[command(flatten)]
        out: Output,
    },
    /// Random subsets of l_p^n searched for an indefinite similarity matrix.
    WitnessSearch {
        #[arg(long)]
        p: LpExponent,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        budget: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = WitnessSampler::MAX_SIZE)]
        max_size: usize,
        #[arg(long)]
        scales: Option<String>,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Input {
    /// Headerless CSV distance matrix.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Space description as JSON.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Args)]
struct Output {
    /// Write the full report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Load matrices that fail validation.
    #[arg(long)]
    force: bool,
}

impl Input {
    fn load(&self, force: bool) -> anyhow::Result<FiniteMetricSpace> {
        if let Some(path) = &self.matrix {
            let (space, _) = io::read_matrix(path, force)
                .with_context(|| format!("loading {}", path.display()))?;
            Ok(space)
        } else {
            let path = self.spec.as_ref().expect("clap enforces one input");
            Ok(generate(&read_spec(path)?)?)
        }
    }
}

fn read_spec(path: &Path) -> anyhow::Result<SpaceSpec> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Parses `a:b:n`, `a:b:nlog` or `a:b:n:log`.
fn parse_scales(s: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let (a, b, n, log) = match parts.as_slice() {
        [a, b, n] => match n.strip_suffix("log") {
            Some(n) => (*a, *b, n, true),
            None => (*a, *b, *n, false),
        },
        [a, b, n, "log"] => (*a, *b, *n, true),
        _ => bail!("scale grid must look like a:b:n or a:b:nlog, got {s:?}"),
    };
    let a: f64 = a.parse().with_context(|| format!("bad start {a:?}"))?;
    let b: f64 = b.parse().with_context(|| format!("bad end {b:?}"))?;
    let n: usize = n.parse().with_context(|| format!("bad count {n:?}"))?;
    if n == 0 {
        bail!("scale grid needs at least one point");
    }
    if log && !(a > 0.0 && b > 0.0) {
        bail!("log-spaced grids need positive endpoints");
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n)
        .map(|i| {
            let u = i as f64 / (n - 1) as f64;
            // endpoints exactly as typed, so inclusive windows catch them
            if i == 0 {
                a
            } else if i == n - 1 {
                b
            } else if log {
                (a.ln() + u * (b.ln() - a.ln())).exp()
            } else {
                a + u * (b - a)
            }
        })
        .collect())
}

fn parse_window(s: &str) -> anyhow::Result<(f64, f64)> {
    let (lo, hi) = s
        .split_once(':')
        .with_context(|| format!("window must look like lo:hi, got {s:?}"))?;
    Ok((lo.parse()?, hi.parse()?))
}

/// Failure after a successful run: the report is still emitted, but the
/// requested assertion did not hold.
struct Failed(String);

/// Prints the human table and writes the JSON envelope.
fn emit<T: Serialize>(kind: &str, report: &T, out: &Output) -> anyhow::Result<()> {
    let value = serde_json::to_value(report)?;
    print!("{}", table::render(&value));
    if let Some(path) = &out.json {
        let doc = json!({ "schema_version": SCHEMA_VERSION, "kind": kind, "report": value });
        let text = serde_json::to_string_pretty(&doc)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn write_csv(path: &Option<PathBuf>, text: String) -> anyhow::Result<()> {
    if let Some(path) = path {
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepOutput {
    sweep: maglab::magnitude::ScaleSweep,
    #[serde(skip_serializing_if = "Option::is_none")]
    dimension: Option<maglab::magnitude::DimensionEstimate>,
}

fn run(cli: Cli) -> anyhow::Result<Option<Failed>> {
    match cli.command {
        Command::Validate { matrix, out } => {
            let text = std::fs::read(&matrix)
                .with_context(|| format!("reading {}", matrix.display()))?;
            let rows = io::parse_matrix(text.as_slice())?;
            let report = maglab::metric::validate_metric(&rows)?;
            emit("validation_report", &report, &out)?;
            if !report.ok {
                return Ok(Some(Failed("matrix fails the metric axioms".into())));
            }
        }
        Command::Magnitude { input, out } => {
            let report = weighting(&input.load(out.force)?)?;
            emit("magnitude_report", &report, &out)?;
        }
        Command::Diversity {
            input,
            tol,
            max_iters,
            positivity,
            out,
        } => {
            let space = input.load(out.force)?;
            if positivity {
                let report = is_positively_weighted(&space, tol)?;
                emit("positivity_report", &report, &out)?;
            } else {
                let report = max_diversity(&space, tol, max_iters)?;
                emit("diversity_report", &report, &out)?;
                if !report.converged {
                    return Ok(Some(Failed(format!(
                        "Frank-Wolfe gap {:e} above tolerance after {} iterations",
                        report.fw_gap, report.iterations
                    ))));
                }
            }
        }
        Command::Sweep {
            input,
            scales,
            diversity,
            window,
            csv,
            out,
        } => {
            let space = input.load(out.force)?;
            let sweep = scale_sweep(&space, &parse_scales(&scales)?, diversity)?;
            let dimension = match window {
                Some(w) => Some(magnitude_dimension_estimate(&sweep, parse_window(&w)?)?),
                None => None,
            };
            write_csv(&csv, sweep.to_csv())?;
            emit("scale_sweep", &SweepOutput { sweep, dimension }, &out)?;
        }
        Command::Negtype {
            input,
            basepoint,
            scan,
            scales,
            out,
        } => {
            let space = input.load(out.force)?;
            if scan {
                let grid = match scales {
                    Some(s) => parse_scales(&s)?,
                    None => default_scales(),
                };
                emit("stability_report", &stability_scan(&space, &grid)?, &out)?;
            } else {
                emit("negative_type_report", &negative_type_test(&space, basepoint)?, &out)?;
            }
        }
        Command::Approx {
            family,
            levels,
            quadrature,
            csv,
            out,
        } => {
            let study = approx_magnitude(&read_spec(&family)?, &levels, quadrature)?;
            write_csv(&csv, study.to_csv())?;
            emit("convergence_study", &study, &out)?;
        }
        Command::Growth { spec, ts, csv, out } => {
            let study = growth_bound_study(&read_spec(&spec)?, &ts)?;
            write_csv(&csv, study.to_csv())?;
            emit("growth_study", &study, &out)?;
            if let Some(c) = study.checks.iter().find(|c| !c.satisfied) {
                return Ok(Some(Failed(format!("lower bound not met at t = {}", c.t))));
            }
        }
        Command::Fourier {
            p,
            cutoff,
            nodes,
            upper_bound,
            ell,
            alpha,
            radius,
            csv,
            out,
        } => {
            if upper_bound {
                let ell = ell.context("--upper-bound needs --ell")?;
                let report = fourier_upper_bound_1d(ell, p, alpha, radius.unwrap_or(ell + 1.0))?;
                emit("upper_bound_report", &report, &out)?;
            } else {
                let report = gamma_hat_1d(p, cutoff, nodes)?;
                write_csv(&csv, report.to_csv())?;
                emit("fourier_report", &report, &out)?;
            }
        }
        Command::Experiment(Experiment::ProductCounterexample { out }) => {
            emit("stability_report", &product_counterexample_experiment(), &out)?;
        }
        Command::Experiment(Experiment::WitnessSearch {
            p,
            n,
            budget,
            seed,
            max_size,
            scales,
            out,
        }) => {
            let grid = match scales {
                Some(s) => parse_scales(&s)?,
                None => default_scales(),
            };
            let sampler = WitnessSampler {
                p,
                dim: n,
                max_size,
            };
            emit("witness_search", &witness_search(&sampler, &grid, budget, seed)?, &out)?;
        }
    }
    Ok(None)
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(value) = std::env::var("MAGLAB_THREADS") {
        let n: usize = value
            .parse()
            .with_context(|| format!("MAGLAB_THREADS must be a positive integer, got {value:?}"))?;
        if n == 0 {
            bail!("MAGLAB_THREADS must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

/// Extra detail for errors that carry a diagnostics payload.
fn details(err: &anyhow::Error) -> Option<Value> {
    match err.downcast_ref::<MagError>()? {
        MagError::NotPositiveDefinite(d) | MagError::IndefiniteForm(d) => {
            serde_json::to_value(d).ok()
        }
        MagError::InvalidMetric(r) => serde_json::to_value(r).ok(),
        _ => None,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(Failed(msg))) => {
            eprintln!("failed: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if let Some(d) = details(&e) {
                eprint!("{}", table::render(&d));
            }
            ExitCode::from(1)
        }
    }
}
