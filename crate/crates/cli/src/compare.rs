// SPDX-License-Identifier: Apache-2.0

//! Column-wise comparison of two result tables.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct ColumnDiff {
    pub left: String,
    pub right: String,
    /// Largest absolute difference over rows where both sides are numbers.
    pub max_abs: f64,
    pub compared: usize,
    /// Rows where the cells differ but are not both numeric.
    pub mismatches: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub rows: usize,
    pub columns: Vec<ColumnDiff>,
}

impl Comparison {
    pub fn max_abs(&self) -> f64 {
        self.columns.iter().map(|c| c.max_abs).fold(0.0, f64::max)
    }

    pub fn mismatches(&self) -> usize {
        self.columns.iter().map(|c| c.mismatches).sum()
    }
}

/// A run directory resolves to the single CSV table it contains.
pub fn resolve(path: &Path) -> Result<PathBuf, CliError> {
    if !path.is_dir() {
        return Ok(path.to_path_buf());
    }
    let mut tables: Vec<PathBuf> = fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    match tables.len() {
        1 => Ok(tables.remove(0)),
        n => Err(CliError::Schema(format!("{} holds {n} CSV tables, expected one", path.display()))),
    }
}

struct Csv {
    kind: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read(path: &Path) -> Result<Csv, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.map(|r| r.iter().map(String::from).collect())).collect::<Result<_, _>>()?;
    let kind = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(Csv { kind, header, rows })
}

fn index(t: &Csv, name: &str, path: &Path) -> Result<usize, CliError> {
    t.header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Schema(format!("{} has no column {name:?}", path.display())))
}

/// Compare `a` against `b`. Without `map` every column is compared and the
/// headers and kinds must agree; with `map` only the listed `(left, right)`
/// pairs are compared.
pub fn compare(a: &Path, b: &Path, map: &[(String, String)]) -> Result<Comparison, CliError> {
    let (pa, pb) = (resolve(a)?, resolve(b)?);
    let (ta, tb) = (read(&pa)?, read(&pb)?);
    let pairs: Vec<(String, String)> = if map.is_empty() {
        if ta.kind != tb.kind {
            return Err(CliError::Schema(format!("kinds differ: {} vs {}", ta.kind, tb.kind)));
        }
        if ta.header != tb.header {
            return Err(CliError::Schema(format!("headers differ: {:?} vs {:?}", ta.header, tb.header)));
        }
        ta.header.iter().map(|h| (h.clone(), h.clone())).collect()
    } else {
        map.to_vec()
    };
    if ta.rows.len() != tb.rows.len() {
        return Err(CliError::Schema(format!("row counts differ: {} vs {}", ta.rows.len(), tb.rows.len())));
    }
    let columns = pairs
        .into_iter()
        .map(|(l, r)| {
            let (i, j) = (index(&ta, &l, &pa)?, index(&tb, &r, &pb)?);
            let mut d = ColumnDiff { left: l, right: r, max_abs: 0.0, compared: 0, mismatches: 0 };
            for (x, y) in ta.rows.iter().map(|row| &row[i]).zip(tb.rows.iter().map(|row| &row[j])) {
                match (x.parse::<f64>(), y.parse::<f64>()) {
                    (Ok(u), Ok(v)) => {
                        d.max_abs = d.max_abs.max((u - v).abs());
                        d.compared += 1;
                    }
                    _ if x == y => {}
                    _ => d.mismatches += 1,
                }
            }
            Ok(d)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(Comparison { rows: ta.rows.len(), columns })
}

/// Parse `left=right` column pairs.
pub fn parse_map(items: &[String]) -> Result<Vec<(String, String)>, CliError> {
    items
        .iter()
        .map(|s| {
            s.split_once('=')
                .map(|(l, r)| (l.to_string(), r.to_string()))
                .ok_or_else(|| CliError::Config(format!("column map {s:?} must look like left=right")))
        })
        .collect()
}
