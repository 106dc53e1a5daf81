//! Dataset files: UCR tab-separated and comma-separated, one instance per
//! line, label first.
//!
//! Instance ids are the zero-based row index among data rows (header
//! excluded), written in decimal.

use std::fmt;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tsape_core::ingest::remap_labels;
use tsape_core::{Dataset, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetFormat {
    #[serde(rename = "ucr-tsv")]
    UcrTsv,
    #[serde(rename = "csv")]
    Csv,
}

impl DatasetFormat {
    fn delimiter(self) -> u8 {
        match self {
            DatasetFormat::UcrTsv => b'\t',
            DatasetFormat::Csv => b',',
        }
    }

    /// `.csv` files are comma-separated; everything else is taken as UCR.
    pub fn from_extension(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => DatasetFormat::Csv,
            _ => DatasetFormat::UcrTsv,
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetFormat::UcrTsv => "ucr-tsv",
            DatasetFormat::Csv => "csv",
        })
    }
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ucr-tsv" => Ok(DatasetFormat::UcrTsv),
            "csv" => Ok(DatasetFormat::Csv),
            other => Err(format!("unknown dataset format {other:?} (expected ucr-tsv or csv)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: {source}")]
    Csv { line: u64, source: csv::Error },
    #[error("line {line}: row has {found} values, expected {expected} (ragged rows are not supported)")]
    Ragged { line: u64, expected: usize, found: usize },
    #[error("line {line}, column {column}: {cell:?} is not a number")]
    NotNumeric { line: u64, column: usize, cell: String },
    #[error("line {line}, column {column}: non-finite value {cell:?}")]
    NonFinite { line: u64, column: usize, cell: String },
    #[error("line {line}: row has a label but no values")]
    NoValues { line: u64 },
    #[error("no data rows")]
    Empty,
    #[error("labels: {0}")]
    Labels(tsape_core::Error),
}

/// Reads a dataset file; the dataset name is the file stem.
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Dataset, FormatError> {
    let file = File::open(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_dataset(file, &name, format)
}

pub fn read_dataset<R: Read>(reader: R, name: &str, format: DatasetFormat) -> Result<Dataset, FormatError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(format.delimiter())
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut labels: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut expected: Option<usize> = None;
    for (i, record) in rdr.records().enumerate() {
        let line = (i + 1) as u64;
        let record = record.map_err(|source| FormatError::Csv {
            line: source.position().map_or(line, |p| p.line()),
            source,
        })?;
        let line = record.position().map_or(line, |p| p.line());
        if i == 0 && format == DatasetFormat::Csv && record.get(0).is_some_and(|f| f.eq_ignore_ascii_case("label")) {
            continue;
        }
        let mut fields = record.iter();
        let label = fields.next().unwrap_or_default().to_string();
        let values = fields
            .enumerate()
            .map(|(j, cell)| {
                let column = j + 2;
                let v: f64 = cell.parse().map_err(|_| FormatError::NotNumeric {
                    line,
                    column,
                    cell: cell.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(FormatError::NonFinite {
                        line,
                        column,
                        cell: cell.to_string(),
                    });
                }
                Ok(v)
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if values.is_empty() {
            return Err(FormatError::NoValues { line });
        }
        match expected {
            None => expected = Some(values.len()),
            Some(n) if n != values.len() => {
                return Err(FormatError::Ragged {
                    line,
                    expected: n,
                    found: values.len(),
                })
            }
            Some(_) => {}
        }
        labels.push(label);
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(FormatError::Empty);
    }
    let map = remap_labels(&labels).map_err(FormatError::Labels)?;
    let instances = rows
        .into_iter()
        .zip(&map.dense)
        .enumerate()
        .map(|(i, (values, &label))| TimeSeries::new(i.to_string(), values).with_label(label))
        .collect();
    Ok(Dataset::from_instances(
        name,
        map.n_classes(),
        instances,
        map.names.clone(),
    ))
}

/// Writes `label,t0,...` rows using the original label tokens. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_dataset_csv<W: Write>(d: &Dataset, writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["label".to_string()];
    header.extend((0..d.series_length).map(|t| format!("t{t}")));
    w.write_record(&header)?;
    for s in &d.instances {
        let label = s.label.and_then(|l| d.label_names.get(l)).cloned().unwrap_or_default();
        let mut row = vec![label];
        row.extend(s.values.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
