//! Externally computed attributions: csv with header
//! `series_id,method,target_class,r0,...,r{N-1}`, one vector per row.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;
use tsape_core::{AttributionVector, Dataset};

#[derive(Debug, Error)]
pub enum AttrFileError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: {source}")]
    Csv { line: u64, source: csv::Error },
    #[error("line {line}: missing header (expected series_id,method,target_class,r0,...)")]
    Header { line: u64 },
    #[error("line {line}: unknown series id {id:?}")]
    UnknownId { line: u64, id: String },
    #[error("line {line}: {found} scores for series {id:?} of length {expected}")]
    Length {
        line: u64,
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column}: {cell:?} is not a number")]
    NotNumeric { line: u64, column: usize, cell: String },
    #[error("line {line}, column {column}: non-finite score {cell:?}")]
    NonFinite { line: u64, column: usize, cell: String },
    #[error("line {line}: target class {cell:?} is not a class of the dataset")]
    Class { line: u64, cell: String },
    #[error("line {line}: empty method name")]
    Method { line: u64 },
    #[error("line {line}: duplicate row for series {id:?}, method {method:?}")]
    Duplicate { line: u64, id: String, method: String },
}

pub fn load_attributions(path: &Path, d: &Dataset) -> Result<Vec<AttributionVector>, AttrFileError> {
    let file = File::open(path).map_err(|source| AttrFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_attributions(file, d)
}

pub fn read_attributions<R: Read>(reader: R, d: &Dataset) -> Result<Vec<AttributionVector>, AttrFileError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let by_id: HashMap<&str, usize> = d.instances.iter().map(|s| (s.id.as_str(), s.len())).collect();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|source| AttrFileError::Csv {
            line: source.position().map_or(i as u64 + 1, |p| p.line()),
            source,
        })?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if i == 0 {
            if record.get(0) != Some("series_id") {
                return Err(AttrFileError::Header { line });
            }
            continue;
        }
        let id = record.get(0).unwrap_or_default().to_string();
        let method = record.get(1).unwrap_or_default().to_string();
        let class_cell = record.get(2).unwrap_or_default();
        let n = *by_id
            .get(id.as_str())
            .ok_or_else(|| AttrFileError::UnknownId { line, id: id.clone() })?;
        if method.is_empty() {
            return Err(AttrFileError::Method { line });
        }
        let target_class = class_cell
            .parse::<usize>()
            .ok()
            .filter(|&c| c < d.n_classes)
            .ok_or_else(|| AttrFileError::Class {
                line,
                cell: class_cell.to_string(),
            })?;
        let scores = record
            .iter()
            .skip(3)
            .enumerate()
            .map(|(j, cell)| {
                let column = j + 4;
                let v: f64 = cell.parse().map_err(|_| AttrFileError::NotNumeric {
                    line,
                    column,
                    cell: cell.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(AttrFileError::NonFinite {
                        line,
                        column,
                        cell: cell.to_string(),
                    });
                }
                Ok(v)
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if scores.len() != n {
            return Err(AttrFileError::Length {
                line,
                id,
                expected: n,
                found: scores.len(),
            });
        }
        if !seen.insert((id.clone(), method.clone())) {
            return Err(AttrFileError::Duplicate { line, id, method });
        }
        let vector =
            AttributionVector::new(id, method, target_class, scores, n).expect("length and finiteness checked above");
        out.push(vector);
    }
    Ok(out)
}

/// Writes vectors of a common length `n`, shortest round-trip float format.
pub fn write_attributions<W: Write>(vectors: &[AttributionVector], n: usize, writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["series_id".to_string(), "method".into(), "target_class".into()];
    header.extend((0..n).map(|t| format!("r{t}")));
    w.write_record(&header)?;
    for v in vectors {
        let mut row = vec![
            v.series_id().to_string(),
            v.method().to_string(),
            v.target_class().to_string(),
        ];
        row.extend(v.scores().iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
