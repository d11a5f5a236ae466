//! l0-norm regularized recursive least squares.
//!
//! * [`filter`]: the RLS and l0-RLS recursions and the attraction function.
//! * [`theory`]: closed-form steady-state mean and mean-square deviation.
//! * [`sim`]: seeded system-identification experiments and ensemble statistics.
//! * [`report`]: configuration files, output files and the command-line driver.

pub mod error;
pub mod filter;
#[cfg(feature = "cli")]
pub mod report;
pub mod sim;
pub mod theory;

pub use error::{Error, Result};
pub use filter::{
    g_scalar, g_vector, init_state, l0_norm_approx, l0_rls_cost, l0_rls_step, rls_step, FilterParams, FilterState,
    StepOutput,
};
pub use sim::{
    compare, gen_signals, gen_system, paired_bias, run_ensemble, run_single, Algorithm, ComparisonReport, EnsembleStats,
    ExperimentConfig, SystemSpec, Tolerances, TrueSystem,
};
pub use theory::{
    classify_taps, lambda_prime, mean_deviation_limit, msd_large, msd_small, msd_total, msd_zero, predict,
    price_moments, PriceMoments, SignalModel, TapPartition, TheoryPrediction,
};
