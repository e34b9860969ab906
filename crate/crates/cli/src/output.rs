//! CSV and JSON-lines writers that stamp the config hash into every file.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::CliResult;

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// CSV with a leading `# config_hash=<hex>` line.
pub fn write_csv(path: &Path, hash: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<PathBuf> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# config_hash={hash}")?;
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(path.to_path_buf())
}

fn stamp(record: &impl Serialize, hash: &str) -> CliResult<Value> {
    let mut v = serde_json::to_value(record)?;
    if let Value::Object(map) = &mut v {
        map.insert("config_hash".into(), Value::String(hash.into()));
    }
    Ok(v)
}

/// One JSON object per line, each carrying `config_hash`.
pub fn write_jsonl<T: Serialize>(path: &Path, hash: &str, records: &[T]) -> CliResult<PathBuf> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, &stamp(r, hash)?)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(path.to_path_buf())
}

/// Pretty JSON document carrying `config_hash`.
pub fn write_json(path: &Path, hash: &str, record: &impl Serialize) -> CliResult<PathBuf> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &stamp(record, hash)?)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(path.to_path_buf())
}

pub fn fmt(x: f64) -> String {
    format!("{x}")
}
