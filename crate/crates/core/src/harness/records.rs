//! CSV serialization of driver outputs.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::bounds::Assumption;
use crate::error::Result;

/// Row type addressable by column name.
pub trait Columns {
    /// Formatted value of `column`; panics on an unknown name.
    fn value(&self, column: &str) -> String;
}

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NA".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x != 0.0 && (x.abs() < 1e-4 || x.abs() >= 1e15) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), fmt_f64)
}

pub fn fmt_opt_usize(x: Option<usize>) -> String {
    x.map_or_else(|| "NA".into(), |v| v.to_string())
}

pub fn fmt_flag(a: Assumption) -> String {
    match a {
        Assumption::Holds => "holds",
        Assumption::Violated => "violated",
        Assumption::Unknown => "unknown",
    }
    .into()
}

pub fn fmt_bool(b: bool) -> String {
    if b { "true".into() } else { "false".into() }
}

/// Provenance line written before the header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunMeta {
    pub config_hash: String,
    pub seed: u64,
    pub version: &'static str,
}

impl RunMeta {
    pub fn comment(&self) -> String {
        format!(
            "# config_hash={},seed={},version={}",
            self.config_hash, self.seed, self.version
        )
    }
}

pub fn write_table<W: Write, R: Columns>(
    mut out: W,
    meta: &RunMeta,
    columns: &[&str],
    rows: &[R],
) -> Result<()> {
    writeln!(out, "{}", meta.comment())?;
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(columns)?;
    for row in rows {
        writer.write_record(columns.iter().map(|c| row.value(c)))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_table_to_path<R: Columns>(
    path: &Path,
    meta: &RunMeta,
    columns: &[&str],
    rows: &[R],
) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_table(file, meta, columns, rows)
}

/// `runs/x.csv` → `runs/x.summary.csv`.
pub fn summary_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}.summary.csv"))
}
