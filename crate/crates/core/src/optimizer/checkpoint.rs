use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::continuation::StageRecord;
use crate::error::Result;

/// State written after each epsilon stage.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub stage: StageRecord,
    pub u: Vec<f64>,
}

impl Checkpoint {
    pub fn path(dir: &Path, index: usize) -> PathBuf {
        dir.join(format!("stage_{index:02}.json"))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_string_pretty(self)?)?;
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}
