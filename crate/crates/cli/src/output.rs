// SPDX-License-Identifier: Apache-2.0

//! Run artifacts: `records.jsonl`, `<kind>.csv` and the `<kind>.json` sidecar.
//! The first two depend only on the configuration and seed; wall-clock data
//! lives in the sidecar.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Map, Value};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::table::Table;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const RECORDS: &str = "records.jsonl";

#[derive(Debug, Clone)]
pub struct RunMeta {
    pub seed: u64,
    pub workers: Option<usize>,
    pub started: SystemTime,
}

#[derive(Debug, Clone)]
pub struct Written {
    pub dir: PathBuf,
    pub records: PathBuf,
    pub csv: PathBuf,
    pub sidecar: PathBuf,
}

fn unix(t: SystemTime) -> f64 {
    t.duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

pub fn status(error: &Option<String>) -> &'static str {
    if error.is_some() {
        "failed"
    } else {
        "ok"
    }
}

pub fn record(cfg_hash: &str, kind: &str, table: &Table, i: usize) -> Value {
    let row = &table.rows[i];
    let mut m = Map::new();
    m.insert("config_hash".into(), cfg_hash.into());
    m.insert("version".into(), VERSION.into());
    m.insert("kind".into(), kind.into());
    m.insert("point".into(), row.point.into());
    m.insert("status".into(), status(&row.error).into());
    if let Some(e) = &row.error {
        m.insert("error".into(), e.clone().into());
    }
    for (c, cell) in table.columns.iter().zip(&row.cells) {
        m.insert(c.name.clone(), cell.json());
    }
    Value::Object(m)
}

pub fn csv_header(table: &Table) -> Vec<String> {
    ["point", "status"].into_iter().map(String::from).chain(table.columns.iter().map(|c| c.name.clone())).collect()
}

pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, table: &Table, meta: &RunMeta) -> Result<Written, CliError> {
    fs::create_dir_all(dir)?;
    let kind = cfg.kind.name();
    let hash = cfg.hash();
    let written = Written {
        dir: dir.to_path_buf(),
        records: dir.join(RECORDS),
        csv: dir.join(format!("{kind}.csv")),
        sidecar: dir.join(format!("{kind}.json")),
    };

    let mut out = BufWriter::new(File::create(&written.records)?);
    for i in 0..table.rows.len() {
        serde_json::to_writer(&mut out, &record(&hash, kind, table, i))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;

    let mut w = csv::Writer::from_path(&written.csv)?;
    w.write_record(csv_header(table))?;
    for row in &table.rows {
        let cells = row.cells.iter().map(|c| c.csv());
        w.write_record([row.point.to_string(), status(&row.error).to_string()].into_iter().chain(cells))?;
    }
    w.flush()?;

    let failures: Vec<Value> = table
        .rows
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| json!({ "point": r.point, "error": e })))
        .collect();
    let columns: Vec<Value> = table.columns.iter().map(|c| json!({ "name": c.name, "doc": c.doc })).collect();
    let sidecar = json!({
        "kind": kind,
        "config_hash": hash,
        "version": VERSION,
        "seed": meta.seed,
        "workers": meta.workers,
        "started_unix": unix(meta.started),
        "finished_unix": unix(SystemTime::now()),
        "rows": table.rows.len(),
        "failures": failures,
        "columns": columns,
        "files": { "records": RECORDS, "csv": format!("{kind}.csv") },
        "summary": table.summary,
        "config": cfg,
    });
    let mut f = BufWriter::new(File::create(&written.sidecar)?);
    serde_json::to_writer_pretty(&mut f, &sidecar)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(written)
}
