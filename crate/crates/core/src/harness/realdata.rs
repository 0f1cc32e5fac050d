use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::config::Method;
use super::curve::{default_thresholds, exceedance_curve, ExceedanceCurve};
use super::experiment::RunFailure;
use crate::baseline::{js_detect_with, Metric, PatternFit};
use crate::detector::{detect, normalize_unit_variance, DeviationReport, DEFAULT_GAMMA};
use crate::error::{Error, Result};
use crate::models::{run_rng, Dataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeOptions {
    pub target: String,
    pub drop: Vec<String>,
    /// Rows per repeat; `None` uses every row.
    pub subsample: Option<usize>,
    pub repeats: usize,
    pub gamma: f64,
    pub seed: u64,
    pub normalize: bool,
    pub method: Method,
    pub metric: Metric,
}

impl AnalyzeOptions {
    pub fn new(target: impl Into<String>) -> Self {
        Self {
            target: target.into(),
            drop: Vec::new(),
            subsample: None,
            repeats: 1,
            gamma: DEFAULT_GAMMA,
            seed: 0,
            normalize: true,
            method: Method::Ours,
            metric: Metric::Euclidean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub reports: Vec<DeviationReport>,
    pub js: Vec<PatternFit>,
    pub curve: Option<ExceedanceCurve>,
    pub failures: Vec<RunFailure>,
}

impl AnalysisResult {
    pub fn d_values(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.d_hat).collect()
    }

    pub fn median_d(&self) -> Option<f64> {
        let mut v = self.d_values();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let m = v.len();
        Some(if m % 2 == 1 { v[m / 2] } else { 0.5 * (v[m / 2 - 1] + v[m / 2]) })
    }
}

/// Reads a headed numeric CSV. Columns other than `target` and `drop` become
/// features, in file order.
pub fn read_csv(path: &Path, target: &str, drop: &[String]) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let missing = |name: &str| Error::ParseError {
        row: 1,
        column: name.to_string(),
        message: "column not found in header".into(),
    };
    let target_idx = headers.iter().position(|h| h == target).ok_or_else(|| missing(target))?;
    for d in drop {
        if !headers.contains(d) {
            return Err(missing(d));
        }
        if d == target {
            return Err(Error::InvalidConfig(format!("cannot drop the target column `{d}`")));
        }
    }
    let feature_idx: Vec<usize> = (0..headers.len())
        .filter(|&i| i != target_idx && !drop.contains(&headers[i]))
        .collect();
    if feature_idx.is_empty() {
        return Err(Error::InsufficientData("no feature columns left".into()));
    }

    let mut x_rows: Vec<f64> = Vec::new();
    let mut y = Vec::new();
    for (k, record) in reader.records().enumerate() {
        // Header is line 1.
        let line = k + 2;
        let record = record.map_err(|e| Error::ParseError {
            row: line,
            column: String::new(),
            message: e.to_string(),
        })?;
        let cell = |i: usize| -> Result<f64> {
            let raw = record.get(i).unwrap_or("").trim();
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::ParseError {
                    row: line,
                    column: headers[i].clone(),
                    message: format!("`{raw}` is not a finite number"),
                })
        };
        for &i in &feature_idx {
            x_rows.push(cell(i)?);
        }
        y.push(cell(target_idx)?);
    }
    let rows = y.len();
    let x = DMatrix::from_row_slice(rows, feature_idx.len(), &x_rows);
    let names = feature_idx.iter().map(|&i| headers[i].clone()).collect();
    Dataset::new(x, DVector::from_vec(y))?.with_names(names, target.to_string())
}

pub fn analyze_csv(path: &Path, options: &AnalyzeOptions) -> Result<AnalysisResult> {
    let data = read_csv(path, &options.target, &options.drop)?;
    analyze_dataset(&data, options)
}

/// Repeated tests on independent without-replacement subsamples. A subsample
/// covering every row keeps the original order.
pub fn analyze_dataset(data: &Dataset, options: &AnalyzeOptions) -> Result<AnalysisResult> {
    let rows = data.len();
    let size = options.subsample.unwrap_or(rows);
    if size > rows {
        return Err(Error::InsufficientData(format!(
            "subsample of {size} rows requested from {rows}"
        )));
    }
    if size < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 rows, got {size}")));
    }
    if options.repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be at least 1".into()));
    }

    let mut result = AnalysisResult {
        reports: Vec::with_capacity(options.repeats),
        js: Vec::new(),
        curve: None,
        failures: Vec::new(),
    };
    for repeat in 0..options.repeats {
        let subset = if size == rows {
            data.clone()
        } else {
            let mut rng = run_rng(options.seed, repeat as u64);
            let mut idx = index::sample(&mut rng, rows, size).into_vec();
            idx.sort_unstable();
            data.select_rows(&idx)
        };
        let outcome = (|| -> Result<(DeviationReport, Option<PatternFit>)> {
            let subset = if options.normalize {
                normalize_unit_variance(&subset)?
            } else {
                subset
            };
            let report = detect(&subset, options.gamma)?;
            let js = if options.method.js() {
                Some(js_detect_with(&subset, options.metric)?)
            } else {
                None
            };
            Ok((report, js))
        })();
        match outcome {
            Ok((report, js)) => {
                result.reports.push(report);
                result.js.extend(js);
            }
            // A degenerate column is a property of the data, not of one draw.
            Err(e @ Error::DegenerateColumn(_)) if size == rows => return Err(e),
            Err(e) => result.failures.push(RunFailure {
                n: data.n(),
                arm: 0,
                run: repeat,
                message: e.to_string(),
            }),
        }
    }
    if result.reports.is_empty() {
        return Err(result
            .failures
            .first()
            .map(|f| Error::InsufficientData(format!("every repeat failed: {}", f.message)))
            .unwrap_or(Error::EmptyInput));
    }
    let values = result.d_values();
    result.curve = Some(exceedance_curve(&values, &default_thresholds(&values))?);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_features_in_file_order() {
        let f = write_file("a,t,b\n1,2,3\n4,5,6\n7,8,10\n");
        let d = read_csv(f.path(), "t", &[]).unwrap();
        assert_eq!(d.feature_names, vec!["a", "b"]);
        assert_eq!(d.x[(1, 1)], 6.0);
        assert_eq!(d.y.as_slice(), &[2.0, 5.0, 8.0]);
    }

    #[test]
    fn non_numeric_cell_reports_location() {
        let f = write_file("a,t\n1,2\n3,oops\n");
        match read_csv(f.path(), "t", &[]) {
            Err(Error::ParseError { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "t");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_target_or_drop_column() {
        let f = write_file("a,t\n1,2\n");
        assert!(matches!(read_csv(f.path(), "y", &[]), Err(Error::ParseError { .. })));
        assert!(matches!(
            read_csv(f.path(), "t", &["zz".to_string()]),
            Err(Error::ParseError { .. })
        ));
    }

    #[test]
    fn drop_removes_column() {
        let f = write_file("a,b,t\n1,2,3\n4,5,6\n");
        let d = read_csv(f.path(), "t", &["a".to_string()]).unwrap();
        assert_eq!(d.feature_names, vec!["b"]);
    }

    #[test]
    fn oversized_subsample_rejected() {
        let f = write_file("a,t\n1,2\n2,3\n3,5\n");
        let mut o = AnalyzeOptions::new("t");
        o.subsample = Some(4);
        assert!(matches!(analyze_csv(f.path(), &o), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn degenerate_column_named() {
        let f = write_file("a,k,t\n1,7,2\n2,7,3\n3,7,5\n");
        match analyze_csv(f.path(), &AnalyzeOptions::new("t")) {
            Err(Error::DegenerateColumn(name)) => assert_eq!(name, "k"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
