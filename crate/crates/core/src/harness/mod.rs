//! Step-size sweeps, reports and their files.

pub mod diagnose;
pub mod figure;
pub mod report;
pub mod samples;
pub mod spec;
pub mod study;

pub use diagnose::{run_check, Check, CheckOutput, DiagnoseOptions};
pub use figure::{emit_figure, FigureStyle};
pub use report::{fit_loglog_slope, ConvergenceReport, ReportRow, SlopeFit, CSV_HEADER};
pub use samples::{load_samples, load_samples_with_dim, persist_samples, SampleSet};
pub use spec::{parse_tau_list, ExperimentSpec, GridSpec, SpecOverrides, PRESET_NAMES};
pub use study::{replicate_seed, run_convergence_study, sampler_config, write_report};
