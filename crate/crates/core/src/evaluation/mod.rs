//! Error metrics, Monte-Carlo MSE estimation over the random hidden weights,
//! parameter sweeps and report files.

mod fit;
mod metrics;
mod monte_carlo;
mod report;
mod sweep;

pub use fit::{fit_learner, select_gamma, Fitted, LearnerSpec};
pub use metrics::{dataset_mse, error_histogram, localization_error, mse, ErrorReport, Histogram, DEFAULT_BIN_WIDTH_M};
pub use monte_carlo::{monte_carlo_mse, monte_carlo_mse_seeds, monte_carlo_surface, realization_seeds, GammaSurface, MseEstimate};
pub use report::{
    compare_learners, error_map_export, evaluation_report, parse_error_map, statistics_table, sweep_csv, sweep_file_stem, sweep_json,
    Comparison, ErrorMap, ERROR_MAP_COLUMNS, REPORT_FORMAT_VERSION, ROW_AVERAGE, ROW_MAXIMUM, ROW_MEDIAN, SWEEP_COLUMNS,
};
pub use sweep::{evaluate_split, sweep_activation, sweep_antennas, sweep_gamma, sweep_neurons, SweepAxis, SweepPoint, SweepResult};
