//! Configuration, scenarios, experiment orchestration and outputs.

pub mod bench;
pub mod chart;
pub mod config;
pub mod fpkcheck;
pub mod run;
pub mod scenario;

pub use bench::{bench_scaling, loglog_slope, BenchReport, BenchRow};
pub use chart::{emit_chart, render_chart};
pub use config::{Algorithm, ExperimentConfig, Profile};
pub use fpkcheck::{fpk_convergence, write_fpk_csv, FpkCase, FpkRow};
pub use run::{
    final_window_mean, load_policies, moving_average, read_metrics, relative_improvement, run_algorithm, run_experiment,
    run_sweep, std_dev, write_metrics, ExperimentSummary, MetricsRow, SweepRow,
};
pub use scenario::{generate_scenario, SensorDistribution};

/// Environment variable naming the output directory of CLI runs.
pub const OUTPUT_DIR_ENV: &str = "AOI_SWARM_OUT";
