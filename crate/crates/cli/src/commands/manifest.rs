//! Fixture manifests: named sets of four EMB1 files (train and test, per
//! class). Relative paths are resolved against the manifest's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use halludetect_core::eval::EvalFixture;
use halludetect_core::tensor_io::read_matrix_file;
use serde::{Deserialize, Serialize};

use crate::config::{config_err, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixturePaths {
    pub train_truthful: PathBuf,
    pub train_hallucinated: PathBuf,
    pub test_truthful: PathBuf,
    pub test_hallucinated: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub fixtures: BTreeMap<String, FixturePaths>,
}

impl Manifest {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read manifest {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| config_err(format!("invalid manifest {}: {e}", path.display())))
    }

    /// Loads every fixture, keyed by its manifest name.
    pub fn load_all(&self, manifest_path: &Path) -> CliResult<BTreeMap<String, EvalFixture>> {
        if self.fixtures.is_empty() {
            return Err(config_err(format!(
                "manifest {} lists no fixtures",
                manifest_path.display()
            )));
        }
        let base = manifest_path.parent().unwrap_or(Path::new(""));
        self.fixtures
            .iter()
            .map(|(name, paths)| Ok((name.clone(), load(base, name, paths)?)))
            .collect()
    }
}

fn load(base: &Path, name: &str, p: &FixturePaths) -> CliResult<EvalFixture> {
    let read = |rel: &PathBuf| {
        let path = base.join(rel);
        read_matrix_file(&path)
            .map_err(|e| config_err(format!("fixture {name:?}, {}: {e}", path.display())))
    };
    let fixture = EvalFixture::from_class_splits(
        read(&p.train_truthful)?,
        read(&p.train_hallucinated)?,
        &read(&p.test_truthful)?,
        &read(&p.test_hallucinated)?,
    )
    .map_err(|e| config_err(format!("fixture {name:?}: {e}")))?;
    Ok(fixture)
}
