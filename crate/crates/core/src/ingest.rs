//! Delimited-file loading, forward-fill imputation and ground-truth alignment.
//!
//! Missing entries are stored as `NaN` inside [`MultivariateSeries::values`]
//! until [`forward_fill`] replaces them.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column holding the timestamp (seconds) in PAMAP2 protocol files.
pub const PAMAP2_TIMESTAMP_COLUMN: usize = 0;
/// Column holding the activity id in PAMAP2 protocol files; id 0 marks transient periods.
pub const PAMAP2_ACTIVITY_COLUMN: usize = 1;
/// Hand accelerometer x, hand accelerometer z, ankle gyroscope x.
pub const PAMAP2_DEFAULT_COLUMNS: [usize; 3] = [4, 6, 44];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    /// Comma separated, one header row.
    GenericCsv,
    /// Space separated, no header, `NaN` for missing cells.
    Pamap2,
}

impl std::str::FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generic-csv" | "csv" => Ok(InputFormat::GenericCsv),
            "pamap2" => Ok(InputFormat::Pamap2),
            other => Err(Error::Config(format!("unknown input format '{other}'"))),
        }
    }
}

/// An `N x D` series. Rows are time steps, columns are variables.
#[derive(Debug, Clone, PartialEq)]
pub struct MultivariateSeries {
    /// Observations; `NaN` marks a missing entry.
    pub values: DMatrix<f64>,
    pub timestamps: Option<Vec<f64>>,
    pub names: Vec<String>,
}

impl MultivariateSeries {
    pub fn new(values: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        if values.ncols() < 2 {
            return Err(Error::TooFewVariables(values.ncols()));
        }
        if values.nrows() == 0 {
            return Err(Error::TooShort { needed: 1, got: 0 });
        }
        if names.len() != values.ncols() {
            return Err(Error::LengthMismatch {
                left: names.len(),
                right: values.ncols(),
            });
        }
        Ok(Self {
            values,
            timestamps: None,
            names,
        })
    }

    /// Builds a series with generated names `x0, x1, ...`.
    pub fn from_values(values: DMatrix<f64>) -> Result<Self> {
        let names = (0..values.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(values, names)
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn has_missing(&self) -> bool {
        self.values.iter().any(|v| v.is_nan())
    }

    /// Keeps only the given columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        for &c in columns {
            if c >= self.dim() {
                return Err(Error::ColumnOutOfRange {
                    column: c,
                    width: self.dim(),
                });
            }
        }
        let values = self.values.select_columns(columns);
        let names = columns.iter().map(|&c| self.names[c].clone()).collect();
        let mut out = Self::new(values, names)?;
        out.timestamps = self.timestamps.clone();
        Ok(out)
    }
}

/// Per-sample activity labels: 1 while an activity is in progress, 0 otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSeries {
    pub labels: Vec<u8>,
}

impl LabelSeries {
    pub fn new(labels: Vec<u8>) -> Result<Self> {
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Config(format!("label {bad} is not 0 or 1")));
        }
        Ok(Self { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn parse_cell(cell: &str) -> f64 {
    // Anything unparseable (including the literal NaN token) becomes missing.
    cell.trim().parse::<f64>().unwrap_or(f64::NAN)
}

fn pamap2_column_name(column: usize) -> String {
    const IMU: [&str; 17] = [
        "temp", "acc16_x", "acc16_y", "acc16_z", "acc6_x", "acc6_y", "acc6_z", "gyro_x", "gyro_y",
        "gyro_z", "mag_x", "mag_y", "mag_z", "orient_0", "orient_1", "orient_2", "orient_3",
    ];
    match column {
        0 => "timestamp".to_string(),
        1 => "activity_id".to_string(),
        2 => "heart_rate".to_string(),
        3..=53 => {
            let unit = ["hand", "chest", "ankle"][(column - 3) / 17];
            format!("{unit}_{}", IMU[(column - 3) % 17])
        }
        _ => format!("col{column}"),
    }
}

/// Reads the selected `columns` of a delimited file, in the order given.
///
/// Rows are streamed; only the selected cells are kept. When `label_column` is
/// set, a nonzero label cell maps to 1 and zero maps to 0.
pub fn load_delimited(
    path: impl AsRef<Path>,
    format: InputFormat,
    columns: &[usize],
    label_column: Option<usize>,
) -> Result<(MultivariateSeries, Option<LabelSeries>)> {
    let path = path.as_ref();
    if columns.len() < 2 {
        return Err(Error::TooFewVariables(columns.len()));
    }
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;

    let (delimiter, has_headers) = match format {
        InputFormat::GenericCsv => (b',', true),
        InputFormat::Pamap2 => (b' ', false),
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(has_headers)
        .flexible(true)
        .from_reader(BufReader::new(file));

    let header_names: Option<Vec<String>> = if has_headers {
        let headers = reader.headers().map_err(|e| Error::Parse {
            row: 1,
            message: e.to_string(),
        })?;
        Some(headers.iter().map(|h| h.trim().to_string()).collect())
    } else {
        None
    };

    let mut width = header_names.as_ref().map(|h| h.len());
    let first_data_line = if has_headers { 2 } else { 1 };
    let mut data = Vec::new();
    let mut timestamps = Vec::new();
    let mut labels = Vec::new();
    let mut n_rows = 0usize;

    let check_width = |w: usize| -> Result<()> {
        for &c in columns.iter().chain(label_column.iter()) {
            if c >= w {
                return Err(Error::ColumnOutOfRange {
                    column: c,
                    width: w,
                });
            }
        }
        Ok(())
    };
    if let Some(w) = width {
        check_width(w)?;
    }

    for (i, record) in reader.records().enumerate() {
        let row = first_data_line + i;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        match width {
            None => {
                check_width(record.len())?;
                width = Some(record.len());
            }
            Some(w) if w != record.len() => {
                return Err(Error::RaggedRow {
                    row,
                    expected: w,
                    found: record.len(),
                });
            }
            Some(_) => {}
        }
        data.extend(columns.iter().map(|&c| parse_cell(&record[c])));
        if format == InputFormat::Pamap2 {
            timestamps.push(parse_cell(&record[PAMAP2_TIMESTAMP_COLUMN]));
        }
        if let Some(lc) = label_column {
            let value = record[lc].trim().parse::<f64>().map_err(|_| Error::Parse {
                row,
                message: format!("label cell '{}' is not numeric", &record[lc]),
            })?;
            labels.push(u8::from(value != 0.0));
        }
        n_rows += 1;
    }

    if n_rows == 0 {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }

    let names = match &header_names {
        Some(h) => columns.iter().map(|&c| h[c].clone()).collect(),
        None => columns.iter().map(|&c| pamap2_column_name(c)).collect(),
    };
    let values = DMatrix::from_row_slice(n_rows, columns.len(), &data);
    let mut series = MultivariateSeries::new(values, names)?;
    if format == InputFormat::Pamap2 {
        series.timestamps = Some(timestamps);
    }
    let labels = label_column.map(|_| LabelSeries { labels });
    Ok((series, labels))
}

/// Replaces every missing entry with the last observed value in its column.
///
/// Leading gaps take the first observed value of the column, so `N` never changes.
pub fn forward_fill(series: &MultivariateSeries) -> Result<MultivariateSeries> {
    let mut out = series.clone();
    for (j, mut column) in out.values.column_iter_mut().enumerate() {
        let first = column
            .iter()
            .copied()
            .find(|v| !v.is_nan())
            .ok_or_else(|| Error::EmptyColumn(series.names[j].clone()))?;
        let mut last = first;
        for v in column.iter_mut() {
            if v.is_nan() {
                *v = last;
            } else {
                last = *v;
            }
        }
    }
    Ok(out)
}

/// Truth label of each window: the label of its center sample `start + M / 2`.
pub fn make_ground_truth_batch_labels(
    truth: &LabelSeries,
    window_starts: &[usize],
    window: usize,
) -> Result<Vec<u8>> {
    window_starts
        .iter()
        .map(|&start| {
            if start + window > truth.len() || window == 0 {
                return Err(Error::Geometry(format!(
                    "window [{start}, {}) outside series of length {}",
                    start + window,
                    truth.len()
                )));
            }
            Ok(truth.labels[start + window / 2])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use proptest::prelude::*;

    use super::*;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn column_series(col: &[f64]) -> MultivariateSeries {
        let n = col.len();
        let mut values = DMatrix::zeros(n, 2);
        for (i, &v) in col.iter().enumerate() {
            values[(i, 0)] = v;
            values[(i, 1)] = i as f64;
        }
        MultivariateSeries::from_values(values).unwrap()
    }

    #[test]
    fn loads_small_csv() {
        let f = write_tmp("a,b\n1,2\n3,4\n5,6\n");
        let (s, labels) = load_delimited(f.path(), InputFormat::GenericCsv, &[0, 1], None).unwrap();
        assert!(labels.is_none());
        assert_eq!(s.names, vec!["a", "b"]);
        assert_eq!(
            s.values,
            DMatrix::from_row_slice(3, 2, &[1., 2., 3., 4., 5., 6.])
        );
    }

    #[test]
    fn pamap2_transient_label_is_zero() {
        let f = write_tmp("8.38 0 104 30.0 1.5\n8.39 3 104 30.0 1.6\n");
        let (s, labels) = load_delimited(f.path(), InputFormat::Pamap2, &[3, 4], Some(1)).unwrap();
        assert_eq!(labels.unwrap().labels, vec![0, 1]);
        assert_eq!(s.timestamps.unwrap(), vec![8.38, 8.39]);
    }

    #[test]
    fn nan_cell_is_missing_and_row_kept() {
        let f = write_tmp("1.0 1 NaN 2.0\n2.0 1 3.0 4.0\n");
        let (s, _) = load_delimited(f.path(), InputFormat::Pamap2, &[2, 3], None).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.values[(0, 0)].is_nan());
        assert_eq!(s.values[(1, 0)], 3.0);
    }

    #[test]
    fn ragged_row_reports_row_number() {
        let f = write_tmp("a,b,c\n1,2,3\n4,5\n");
        let err = load_delimited(f.path(), InputFormat::GenericCsv, &[0, 1], None).unwrap_err();
        match err {
            Error::RaggedRow {
                row,
                expected,
                found,
            } => {
                assert_eq!((row, expected, found), (3, 3, 2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_missing_file_and_single_column() {
        let err = load_delimited("/nonexistent/x.csv", InputFormat::GenericCsv, &[0, 1], None);
        assert!(matches!(err, Err(Error::Io { .. })));
        let f = write_tmp("a,b\n1,2\n");
        let err = load_delimited(f.path(), InputFormat::GenericCsv, &[0], None);
        assert!(matches!(err, Err(Error::TooFewVariables(1))));
        let err = load_delimited(f.path(), InputFormat::GenericCsv, &[0, 5], None);
        assert!(matches!(
            err,
            Err(Error::ColumnOutOfRange { column: 5, .. })
        ));
    }

    #[test]
    fn forward_fill_examples() {
        let nan = f64::NAN;
        let filled = forward_fill(&column_series(&[2., nan, nan, 5.])).unwrap();
        assert_eq!(filled.values.column(0).as_slice(), &[2., 2., 2., 5.]);
        let filled = forward_fill(&column_series(&[nan, 3., nan])).unwrap();
        assert_eq!(filled.values.column(0).as_slice(), &[3., 3., 3.]);
        let clean = column_series(&[1., 2., 3.]);
        assert_eq!(forward_fill(&clean).unwrap(), clean);
    }

    #[test]
    fn forward_fill_rejects_empty_column() {
        let nan = f64::NAN;
        let err = forward_fill(&column_series(&[nan, nan])).unwrap_err();
        assert!(matches!(err, Error::EmptyColumn(ref name) if name == "x0"));
    }

    #[test]
    fn truth_uses_center_sample() {
        let mut labels = vec![1u8; 300];
        labels[100..200].iter_mut().for_each(|l| *l = 0);
        let truth = LabelSeries::new(labels).unwrap();
        assert_eq!(
            make_ground_truth_batch_labels(&truth, &[50], 100).unwrap(),
            vec![0]
        );
        assert_eq!(
            make_ground_truth_batch_labels(&truth, &[0], 100).unwrap(),
            vec![1]
        );
        assert!(make_ground_truth_batch_labels(&truth, &[250], 100).is_err());
        let ones = LabelSeries::new(vec![1; 50]).unwrap();
        assert_eq!(
            make_ground_truth_batch_labels(&ones, &[0, 10, 20], 30).unwrap(),
            vec![1, 1, 1]
        );
    }

    #[test]
    fn selecting_at_load_matches_reselection() {
        let f = write_tmp("a,b,c,d\n1,2,3,4\n5,x,7,8\n9,10,11,12\n");
        let (all, _) =
            load_delimited(f.path(), InputFormat::GenericCsv, &[0, 1, 2, 3], None).unwrap();
        let (direct, _) = load_delimited(f.path(), InputFormat::GenericCsv, &[3, 1], None).unwrap();
        let reselected = all.select_columns(&[3, 1]).unwrap();
        assert_eq!(direct.names, reselected.names);
        // NaN != NaN, compare bit patterns.
        let bits =
            |s: &MultivariateSeries| s.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&direct), bits(&reselected));
    }

    fn gappy_column() -> impl Strategy<Value = Vec<Option<f64>>> {
        prop::collection::vec(prop::option::weighted(0.7, -100.0..100.0f64), 1..40)
            .prop_filter("needs one observation", |v| v.iter().any(Option::is_some))
    }

    proptest! {
        #[test]
        fn forward_fill_idempotent_and_preserves_observed(col in gappy_column()) {
            let raw: Vec<f64> = col.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
            let series = column_series(&raw);
            let once = forward_fill(&series).unwrap();
            let twice = forward_fill(&once).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert!(!once.has_missing());
            for (i, v) in col.iter().enumerate() {
                if let Some(v) = v {
                    prop_assert_eq!(once.values[(i, 0)], *v);
                }
            }
        }
    }
}
