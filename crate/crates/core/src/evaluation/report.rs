use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::fit::{fit_learner, LearnerSpec};
use super::metrics::ErrorReport;
use super::sweep::SweepResult;
use crate::dataset::Samples;
use crate::learners::{ElmConfig, Provenance};
use crate::{Error, Position2D, Result};

/// Version of the text and CSV report layouts written here.
pub const REPORT_FORMAT_VERSION: u32 = 1;

pub const ROW_AVERAGE: &str = "Average localization error [in m]";
pub const ROW_MEDIAN: &str = "Median localization error [in m]";
pub const ROW_MAXIMUM: &str = "Maximum localization error [in m]";

/// Test-set error statistics of an ELM and a K-nN trained on the same data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub elm_label: String,
    pub knn_label: String,
    pub elm: ErrorReport,
    pub knn: ErrorReport,
}

pub fn compare_learners(train: &Samples, test: &Samples, elm: &ElmConfig, gamma_grid: &[f64], k: usize) -> Result<Comparison> {
    let elm_spec = LearnerSpec::Elm {
        config: elm.clone(),
        gamma_grid: gamma_grid.to_vec(),
    };
    let elm_model = fit_learner(&elm_spec, train, test)?.model;
    let knn_model = fit_learner(&LearnerSpec::Knn { k }, train, test)?.model;
    Ok(Comparison {
        elm_label: format!("ELM ({})", elm.activation),
        knn_label: format!("{k}-nN"),
        elm: ErrorReport::evaluate(&elm_model, test)?,
        knn: ErrorReport::evaluate(&knn_model, test)?,
    })
}

/// Text table with one column per report and the average, median and
/// maximum rows.
pub fn statistics_table(columns: &[(&str, &ErrorReport)]) -> String {
    let rows = [
        (ROW_AVERAGE, (|r: &ErrorReport| r.average) as fn(&ErrorReport) -> f64),
        (ROW_MEDIAN, |r| r.median),
        (ROW_MAXIMUM, |r| r.maximum),
    ];
    let first = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    let widths: Vec<usize> = columns.iter().map(|c| c.0.len().max(10)).collect();
    let mut out = format!("{:<first$}", "Statistic");
    for (c, w) in columns.iter().zip(&widths) {
        let _ = write!(out, " | {:>w$}", c.0);
    }
    out.push('\n');
    for (name, stat) in rows {
        let _ = write!(out, "{name:<first$}");
        for (c, w) in columns.iter().zip(&widths) {
            let _ = write!(out, " | {:>w$.2}", stat(c.1));
        }
        out.push('\n');
    }
    out
}

fn provenance_lines(out: &mut String, provenance: Provenance) {
    let _ = writeln!(out, "# report_format_version={REPORT_FORMAT_VERSION}");
    let _ = writeln!(out, "# master_seed={}", provenance.master_seed);
    let _ = writeln!(out, "# config_hash={:016x}", provenance.config_hash);
}

impl Comparison {
    pub fn table(&self) -> String {
        statistics_table(&[(&self.elm_label, &self.elm), (&self.knn_label, &self.knn)])
    }

    /// The table preceded by provenance comment lines.
    pub fn report(&self, provenance: Provenance) -> String {
        let mut out = String::new();
        provenance_lines(&mut out, provenance);
        out.push_str(&self.table());
        out
    }
}

/// Test-set evaluation report of a single model.
pub fn evaluation_report(label: &str, report: &ErrorReport, provenance: Provenance) -> String {
    let mut out = String::new();
    provenance_lines(&mut out, provenance);
    let _ = writeln!(out, "# samples={}", report.len());
    out.push_str(&statistics_table(&[(label, report)]));
    let _ = writeln!(out, "RMSE [in m] {:.2}", report.rmse);
    out
}

pub const ERROR_MAP_COLUMNS: &str = "kind,x_m,y_m,error_m";

/// Plot data for an error map: one `test` row per evaluated sample with its
/// error, then one `train` row per training position with an empty error.
pub fn error_map_export(errors: &[(Position2D, f64)], train_positions: &[Position2D], provenance: Provenance) -> String {
    let mut out = String::new();
    provenance_lines(&mut out, provenance);
    out.push_str("# units: x_m and y_m are UE coordinates in meters, error_m is the localization error in meters\n");
    out.push_str(ERROR_MAP_COLUMNS);
    out.push('\n');
    for (p, e) in errors {
        let _ = writeln!(out, "test,{},{},{}", p.x, p.y, e);
    }
    for p in train_positions {
        let _ = writeln!(out, "train,{},{},", p.x, p.y);
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorMap {
    pub errors: Vec<(Position2D, f64)>,
    pub train_positions: Vec<Position2D>,
}

pub fn parse_error_map(text: &str) -> Result<ErrorMap> {
    let mut map = ErrorMap::default();
    let mut seen_header = false;
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !seen_header {
            if line != ERROR_MAP_COLUMNS {
                return Err(Error::Format(format!("unexpected error map header '{line}'")));
            }
            seen_header = true;
            continue;
        }
        let bad = || Error::Format(format!("malformed error map row {}: '{line}'", i + 1));
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        let p = Position2D::new(num(cols[1])?, num(cols[2])?);
        match cols[0] {
            "test" => map.errors.push((p, num(cols[3])?)),
            "train" if cols[3].is_empty() => map.train_positions.push(p),
            _ => return Err(bad()),
        }
    }
    if !seen_header {
        return Err(Error::Format("missing error map header".into()));
    }
    Ok(map)
}

pub const SWEEP_COLUMNS: &str =
    "axis,setting,label,gamma,realization,train_mse_m2,test_mse_m2,train_rmse_m,test_rmse_m,train_se_m2,test_se_m2,mean_error_m,median_error_m";

/// Tidy CSV: one row per (setting, realization), then one `mean` row per
/// setting carrying the standard errors and test error statistics.
pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = String::new();
    provenance_lines(&mut out, result.provenance);
    out.push_str(SWEEP_COLUMNS);
    out.push('\n');
    let axis = result.axis.name();
    for p in &result.points {
        let gamma = p.gamma.map(|g| g.to_string()).unwrap_or_default();
        for (r, (tr, te)) in p.train.per_realization.iter().zip(&p.test.per_realization).enumerate() {
            let _ = writeln!(
                out,
                "{axis},{},{},{gamma},{r},{tr},{te},{},{},,,,",
                p.setting,
                p.label,
                tr.sqrt(),
                te.sqrt()
            );
        }
        let (mean_err, median_err) = p
            .test_errors
            .as_ref()
            .map(|e| (e.average.to_string(), e.median.to_string()))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{axis},{},{},{gamma},mean,{},{},{},{},{},{},{mean_err},{median_err}",
            p.setting,
            p.label,
            p.train.mean_mse,
            p.test.mean_mse,
            p.train.root(),
            p.test.root(),
            p.train.std_error,
            p.test.std_error
        );
    }
    out
}

#[derive(Serialize)]
struct SummaryPoint<'a> {
    setting: f64,
    label: &'a str,
    gamma: Option<f64>,
    realizations: usize,
    train_mse_m2: f64,
    test_mse_m2: f64,
    train_rmse_m: f64,
    test_rmse_m: f64,
    train_se_m2: f64,
    test_se_m2: f64,
    mean_error_m: Option<f64>,
    median_error_m: Option<f64>,
    max_error_m: Option<f64>,
}

#[derive(Serialize)]
struct Summary<'a> {
    report_format_version: u32,
    axis: &'a str,
    master_seed: u64,
    config_hash: String,
    points: Vec<SummaryPoint<'a>>,
}

/// JSON summary of the aggregate rows.
pub fn sweep_json(result: &SweepResult) -> String {
    let summary = Summary {
        report_format_version: REPORT_FORMAT_VERSION,
        axis: result.axis.name(),
        master_seed: result.provenance.master_seed,
        config_hash: format!("{:016x}", result.provenance.config_hash),
        points: result
            .points
            .iter()
            .map(|p| SummaryPoint {
                setting: p.setting,
                label: &p.label,
                gamma: p.gamma,
                realizations: p.test.realizations,
                train_mse_m2: p.train.mean_mse,
                test_mse_m2: p.test.mean_mse,
                train_rmse_m: p.train.root(),
                test_rmse_m: p.test.root(),
                train_se_m2: p.train.std_error,
                test_se_m2: p.test.std_error,
                mean_error_m: p.test_errors.as_ref().map(|e| e.average),
                median_error_m: p.test_errors.as_ref().map(|e| e.median),
                max_error_m: p.test_errors.as_ref().map(|e| e.maximum),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&summary).expect("summary serializes");
    s.push('\n');
    s
}

/// Base file name (without extension) of a sweep's outputs.
pub fn sweep_file_stem(result: &SweepResult) -> String {
    format!("sweep_{}_seed{}", result.axis.name(), result.provenance.master_seed)
}
