//! Workload generation, benchmark orchestration and metrics emission.

mod bench;
mod spec;
mod suites;

pub use bench::{
    emit_csv, emit_plot_data, median_of, read_csv, run_benchmark, std_dev, BenchConfig, BenchReport, CsvRow,
    PhaseMetrics, PhaseSummary, Series, METRICS, MIN_REPEATS,
};
pub use spec::{Phase, PhaseKind, WorkloadSpec};
pub use suites::{
    attack_spec, attack_suite, attack_suite_keyed, degrade_suite, intensity_sweep, overhead_benchmark, secure_suite, AttackReport,
    OverheadReport, OverheadScale, SuiteScale, INTENSITIES,
};
