use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// A reported number together with the bound it was checked against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checked {
    pub value: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub pass: bool,
}

impl Checked {
    pub fn at_most(value: f64, tolerance: f64) -> Self {
        Self { value, tolerance, relation: Relation::AtMost, pass: value <= tolerance }
    }

    pub fn at_least(value: f64, tolerance: f64) -> Self {
        Self { value, tolerance, relation: Relation::AtLeast, pass: value >= tolerance }
    }
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    fs::write(dir.join(name), text)
}

pub fn write_csv<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join(name)).map_err(std::io::Error::other)?;
    for r in rows {
        w.serialize(r).map_err(std::io::Error::other)?;
    }
    w.flush()
}
