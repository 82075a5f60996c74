//! Seeded experiment harnesses: online regret, nonconvex convergence,
//! minimum-norm convergence, stability probes and block diagnostics.
//!
//! Every harness derives one [`Rng`](crate::Rng) per repetition from the
//! master seed, so results do not depend on the thread count.

mod average;
mod csv;
mod diagnostics;
mod minnorm;
mod nonconvex;
mod partitions;
mod regret;
mod stability;

pub use average::iterate_average;
pub use csv::{fmt_float, write_columns, CsvTable};
pub use diagnostics::{
    block_sigma_sq, compute_diagnostics, coordinate_sigma_sq, corollary_ratios, run_diagnostics,
    vbar, BlockDiagnostics, DiagnosticsConfig, DiagnosticsReport, Ratios,
};
pub use minnorm::{
    run_layerwise_minnorm, run_minnorm_ls, LayerwiseConfig, LayerwiseResult, MinNormConfig,
    MinNormResult,
};
pub use nonconvex::{
    convergence_csv, pool_gradient_norm_sq, run_nonconvex_experiment, ConvergenceTrace,
    NonconvexConfig,
};
pub use partitions::PartitionSpec;
pub use regret::{
    fit_comparator, regret_bound_check, run_regret_experiment, BoundAccumulator, BoundCheck,
    Comparator, ComparatorConfig, RegretConfig, RegretReport, RegretTrace,
};
pub use stability::{run_stability_probe, stability_csv, StabilityConfig, StabilityTrace};

/// Mean and sample standard deviation of equally long series, pointwise.
pub(crate) fn mean_std(series: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = series.len();
    let len = series.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; len];
    for s in series {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut std = vec![0.0; len];
    if n > 1 {
        for s in series {
            for ((sd, m), v) in std.iter_mut().zip(&mean).zip(s) {
                *sd += (v - m) * (v - m);
            }
        }
        std.iter_mut()
            .for_each(|sd| *sd = (*sd / (n - 1) as f64).sqrt());
    }
    (mean, std)
}
