//! JSONL and campaign bundle files.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::model::{CampaignManifest, ItemRecord, JudgmentRecord};

pub const CAMPAIGN_FILE: &str = "campaign.json";
pub const ITEMS_FILE: &str = "items.jsonl";
pub const JUDGMENTS_FILE: &str = "judgments.jsonl";
pub const TRUTH_FILE: &str = "truth.json";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

impl IoError {
    fn io(path: &Path, source: io::Error) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// True for malformed content, false for filesystem failures.
    pub fn is_parse(&self) -> bool {
        matches!(self, IoError::Parse { .. })
    }
}

/// Parses JSONL text; blank lines are skipped. Line numbers are 1-based.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, (usize, serde_json::Error)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| (i + 1, e)))
        .collect()
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    let file = File::open(path).map_err(|e| IoError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| IoError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|source| IoError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                source,
            })?,
        );
    }
    Ok(out)
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), IoError> {
    let file = File::create(path).map_err(|e| IoError::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(to_jsonl(records).as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| IoError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| IoError::Parse {
        path: path.to_path_buf(),
        line: source.line(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| IoError::io(path, e))
}

/// The three files describing a campaign and its judgments.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub manifest: CampaignManifest,
    pub items: Vec<ItemRecord>,
    pub judgments: Vec<JudgmentRecord>,
}

impl Bundle {
    /// Reads `campaign.json`, `items.jsonl` and, if present, `judgments.jsonl`.
    pub fn load(dir: &Path) -> Result<Self, IoError> {
        let judgments_path = dir.join(JUDGMENTS_FILE);
        Ok(Bundle {
            manifest: read_json(&dir.join(CAMPAIGN_FILE))?,
            items: read_jsonl(&dir.join(ITEMS_FILE))?,
            judgments: if judgments_path.exists() {
                read_jsonl(&judgments_path)?
            } else {
                Vec::new()
            },
        })
    }

    pub fn save(&self, dir: &Path) -> Result<(), IoError> {
        fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
        write_json(&dir.join(CAMPAIGN_FILE), &self.manifest)?;
        write_jsonl(&dir.join(ITEMS_FILE), &self.items)?;
        write_jsonl(&dir.join(JUDGMENTS_FILE), &self.judgments)
    }
}
