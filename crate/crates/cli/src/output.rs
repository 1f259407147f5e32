//! Atomic output files: everything is written to a temporary file in the
//! destination directory and renamed into place.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{CliError, CliResult, RunMeta};

fn output_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output(format!("cannot write {}: {e}", path.display()))
}

/// Checks that an output can be created before any expensive work runs.
pub fn check_writable(path: &Path) -> CliResult<()> {
    let dir = parent_dir(path);
    if !dir.is_dir() {
        return Err(CliError::Config(format!(
            "output directory does not exist: {}",
            dir.display()
        )));
    }
    Ok(())
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Runs `fill` against a temp file next to `path`, then renames it over `path`.
pub fn write_atomic<F>(path: &Path, fill: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> CliResult<()>,
{
    let mut tmp =
        tempfile::NamedTempFile::new_in(parent_dir(path)).map_err(|e| output_err(path, e))?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf)?;
        buf.flush().map_err(|e| output_err(path, e))?;
    }
    tmp.persist(path).map_err(|e| output_err(path, e.error))?;
    Ok(())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    write_atomic(path, |w| {
        w.write_all(bytes).map_err(|e| output_err(path, e))
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| output_err(path, e))?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

/// JSON report with the run metadata under a top-level `meta` key.
pub fn write_report<T: Serialize>(path: &Path, report: &T, meta: &RunMeta) -> CliResult<()> {
    let mut v = serde_json::to_value(report).map_err(|e| output_err(path, e))?;
    match v.as_object_mut() {
        Some(obj) => {
            obj.insert("meta".into(), meta.to_value());
        }
        None => v = serde_json::json!({ "data": v, "meta": meta.to_value() }),
    }
    write_json(path, &v)
}

/// Path of the metadata sidecar written next to a CSV.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}

/// Writes a CSV produced by `fill` plus its `<file>.meta.json` sidecar.
pub fn write_csv<F>(path: &Path, meta: &RunMeta, fill: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> halludetect_core::Result<()>,
{
    write_atomic(path, |w| fill(w).map_err(|e| output_err(path, e)))?;
    write_json(&sidecar_path(path), meta)
}
