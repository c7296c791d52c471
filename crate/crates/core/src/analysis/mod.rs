//! Net-convergence studies, Fourier-analytic growth bounds and the
//! counterexample experiments.

mod convergence;
mod experiments;
mod fourier;
mod growth;

pub use convergence::{approx_magnitude, ConvergenceRecord, ConvergenceStudy};
pub use experiments::{
    product_counterexample_experiment, product_counterexample_space, witness_search,
    Witness, WitnessSampler, WitnessSearch,
};
pub use fourier::{
    fourier_upper_bound_1d, gamma_hat, gamma_hat_1d, FourierReport, UpperBoundReport,
    DEFAULT_CUTOFF, DEFAULT_NODES,
};
pub use growth::{
    growth_bound_study, growth_lower_bound, lp_ball_volume, BoundCheck, GrowthStudy,
};
