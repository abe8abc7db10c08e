//! Output files: every table is written twice, as `<stem>.csv` and as a
//! pretty-printed `<stem>.json` array. Wall-clock measurements go to a
//! separate `timing.jsonl` so the tables stay byte-for-byte reproducible.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TIMING_FILE: &str = "timing.jsonl";

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        msg: e.to_string(),
    })
}

/// One JSON document per line.
pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut text = String::new();
    for row in rows {
        text.push_str(&serde_json::to_string(row).map_err(|e| Error::Format(e.to_string()))?);
        text.push('\n');
    }
    write_text(path, &text)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: k + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

/// Writes `rows` to `dir/<stem>.csv` and `dir/<stem>.json`; returns both paths.
pub fn write_table<T: Serialize>(dir: &Path, stem: &str, rows: &[T]) -> Result<(PathBuf, PathBuf)> {
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut w = csv::Writer::from_path(&csv_path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    let json_path = dir.join(format!("{stem}.json"));
    write_json(&json_path, rows)?;
    Ok((csv_path, json_path))
}

pub fn read_csv_table<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub command: String,
    pub phase: String,
    pub seconds: f64,
}

/// Appends timing records to `dir/timing.jsonl`.
pub fn append_timing(dir: &Path, records: &[TimingRecord]) -> Result<()> {
    let path = dir.join(TIMING_FILE);
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| Error::io(&path, e))?;
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(f, "{line}").map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
    struct Row {
        name: String,
        value: f64,
        gap: Option<f64>,
    }

    #[test]
    fn table_round_trips_through_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            Row {
                name: "a".into(),
                value: 0.1 + 0.2,
                gap: None,
            },
            Row {
                name: "b,c".into(),
                value: -3.5e-12,
                gap: Some(0.25),
            },
        ];
        let (c, j) = write_table(dir.path(), "t", &rows).unwrap();
        assert_eq!(read_csv_table::<Row>(&c).unwrap(), rows);
        assert_eq!(read_json::<Vec<Row>>(&j).unwrap(), rows);
    }

    #[test]
    fn timing_appends() {
        let dir = tempfile::tempdir().unwrap();
        let rec = TimingRecord {
            command: "x".into(),
            phase: "y".into(),
            seconds: 1.5,
        };
        append_timing(dir.path(), std::slice::from_ref(&rec)).unwrap();
        append_timing(dir.path(), std::slice::from_ref(&rec)).unwrap();
        let back: Vec<TimingRecord> = read_jsonl(&dir.path().join(TIMING_FILE)).unwrap();
        assert_eq!(back, vec![rec.clone(), rec]);
    }
}
