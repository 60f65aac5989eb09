use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{Matrix, Targets};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CsvTask {
    /// Integer labels in `0..classes` read from the label column.
    Classification { classes: usize },
    /// `outputs` consecutive target columns starting at the label column.
    Regression { outputs: usize },
}

/// Column layout of a CSV file. Column indices are zero-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub label_column: usize,
    /// Defaults to every non-target column, in file order.
    #[serde(default)]
    pub feature_columns: Option<Vec<usize>>,
    #[serde(default)]
    pub header: bool,
    pub task: CsvTask,
}

impl CsvSchema {
    fn target_columns(&self) -> Vec<usize> {
        match self.task {
            CsvTask::Classification { .. } => vec![self.label_column],
            CsvTask::Regression { outputs } => (self.label_column..self.label_column + outputs).collect(),
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path, source),
        kind => Error::Csv {
            path: path.to_path_buf(),
            row: 0,
            line: 0,
            column: 0,
            message: format!("{kind:?}"),
        },
    }
}

/// Reads a numeric CSV file. Rows keep file order and get sample ids `0..n`.
/// Errors report the 1-based data row (header excluded), the file line and
/// the 1-based column.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(schema.header)
        .flexible(false)
        .from_reader(file);

    let target_cols = schema.target_columns();
    let mut feature_cols = schema.feature_columns.clone();
    let mut x = Vec::new();
    let mut labels = Vec::new();
    let mut values = Vec::new();
    let mut rows = 0;

    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let row = i + 1;
        let line = record.position().map_or(0, |p| p.line());
        let err = |column: usize, message: String| Error::Csv {
            path: path.to_path_buf(),
            row,
            line,
            column: column + 1,
            message,
        };
        let width = record.len();
        let features = feature_cols.get_or_insert_with(|| {
            (0..width).filter(|c| !target_cols.contains(c)).collect()
        });
        let cell = |column: usize| -> Result<f64> {
            let raw = record
                .get(column)
                .ok_or_else(|| err(column, format!("missing column (row has {width})")))?;
            raw.trim()
                .parse::<f64>()
                .map_err(|_| err(column, format!("non-numeric cell {raw:?}")))
        };
        for &c in features.iter() {
            x.push(cell(c)?);
        }
        match schema.task {
            CsvTask::Classification { classes } => {
                let v = cell(schema.label_column)?;
                if v.fract() != 0.0 || v < 0.0 || v >= classes as f64 {
                    return Err(err(
                        schema.label_column,
                        format!("label {v} outside declared range 0..{classes}"),
                    ));
                }
                labels.push(v as usize);
            }
            CsvTask::Regression { .. } => {
                for &c in &target_cols {
                    values.push(cell(c)?);
                }
            }
        }
        rows += 1;
    }

    let f = feature_cols.map_or(0, |c| c.len());
    let features = Matrix::new(rows, f, x)?;
    let targets = match schema.task {
        CsvTask::Classification { classes } => Targets::Classes { labels, classes },
        CsvTask::Regression { outputs } => Targets::Values(Matrix::new(rows, outputs, values)?),
    };
    Dataset::with_sequential_ids(features, targets)
}

/// Writes targets first, then features; the returned schema reads it back.
pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>, header: bool) -> Result<CsvSchema> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    let (task, target_width) = match dataset.targets() {
        Targets::Classes { classes, .. } => (CsvTask::Classification { classes: *classes }, 1),
        Targets::Values(m) => (CsvTask::Regression { outputs: m.cols() }, m.cols()),
    };
    if header {
        let mut names: Vec<String> = match target_width {
            1 if matches!(task, CsvTask::Classification { .. }) => vec!["label".into()],
            w => (0..w).map(|j| format!("y{j}")).collect(),
        };
        names.extend((0..dataset.num_features()).map(|j| format!("x{j}")));
        writer.write_record(&names).map_err(|e| csv_err(path, e))?;
    }
    for r in 0..dataset.len() {
        let mut cells: Vec<String> = match dataset.targets() {
            Targets::Classes { labels, .. } => vec![labels[r].to_string()],
            Targets::Values(m) => m.row(r).iter().map(f64::to_string).collect(),
        };
        cells.extend(dataset.features().row(r).iter().map(f64::to_string));
        writer.write_record(&cells).map_err(|e| csv_err(path, e))?;
    }
    writer.flush().map_err(|e| io_err(path, e))?;
    Ok(CsvSchema {
        label_column: 0,
        feature_columns: None,
        header,
        task,
    })
}
