use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::AugmentationRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JournalStatus {
    Passed,
    Rejected,
    Failed,
}

impl JournalStatus {
    /// Finished questions are skipped on resume; failed ones are retried.
    pub fn is_finished(self) -> bool {
        !matches!(self, JournalStatus::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub question_id: String,
    pub status: JournalStatus,
    pub attempt_count: u32,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub transport_failure: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<AugmentationRecord>,
}

/// Append-only JSONL log of per-question outcomes. Later lines win.
#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    entries: HashMap<String, JournalEntry>,
    file: File,
}

impl Journal {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        if path.exists() {
            let f = File::open(&path).map_err(|e| Error::file(&path, e))?;
            for (lineno, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| Error::file(&path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                // a torn final line from an interrupted run is dropped
                match serde_json::from_str::<JournalEntry>(&line) {
                    Ok(entry) => {
                        entries.insert(entry.question_id.clone(), entry);
                    }
                    Err(e) => {
                        tracing::warn!(line = lineno + 1, error = %e, "skipping journal line")
                    }
                }
            }
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::file(&path, e))?;
        // terminate a torn last line so the next append starts cleanly
        let len = file.metadata().map_err(|e| Error::file(&path, e))?.len();
        if len > 0 {
            let bytes = std::fs::read(&path).map_err(|e| Error::file(&path, e))?;
            if bytes.last() != Some(&b'\n') {
                file.write_all(b"\n").map_err(|e| Error::file(&path, e))?;
            }
        }
        Ok(Self {
            path,
            entries,
            file,
        })
    }

    pub fn finished(&self, question_id: &str) -> Option<&JournalEntry> {
        self.entries
            .get(question_id)
            .filter(|e| e.status.is_finished())
    }

    pub fn entries(&self) -> impl Iterator<Item = &JournalEntry> {
        self.entries.values()
    }

    pub fn append(&mut self, entry: &JournalEntry) -> Result<()> {
        let mut line = serde_json::to_string(entry).map_err(|e| Error::Parse(e.to_string()))?;
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| Error::file(&self.path, e))?;
        self.entries
            .insert(entry.question_id.clone(), entry.clone());
        Ok(())
    }
}
