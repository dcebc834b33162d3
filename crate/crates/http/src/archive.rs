//! Append-only JSONL log of every HTTP exchange, failed attempts included.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use mulprobe_core::backend::BackendError;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub request_hash: String,
    pub attempt: u32,
    pub url: String,
    pub request: Value,
    pub status: Option<u16>,
    /// Raw response body, or the transport error text.
    pub response: String,
}

#[derive(Debug)]
pub struct RawArchive {
    path: PathBuf,
    file: Mutex<File>,
}

impl RawArchive {
    pub fn open(path: &Path) -> Result<Self, BackendError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| BackendError::Cache(format!("{}: {e}", dir.display())))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| BackendError::Cache(format!("{}: {e}", path.display())))?;
        Ok(Self { path: path.to_path_buf(), file: Mutex::new(file) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, ex: &Exchange) -> Result<(), BackendError> {
        let mut line = serde_json::to_string(ex).map_err(|e| BackendError::Cache(e.to_string()))?;
        line.push('\n');
        let mut f = self.file.lock().expect("archive lock");
        f.write_all(line.as_bytes()).map_err(|e| BackendError::Cache(format!("{}: {e}", self.path.display())))
    }
}

pub fn read_archive(path: &Path) -> Result<Vec<Exchange>, BackendError> {
    let text = std::fs::read_to_string(path).map_err(|e| BackendError::Cache(format!("{}: {e}", path.display())))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| BackendError::Cache(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("raw/x.jsonl");
        let a = RawArchive::open(&p).unwrap();
        let ex = Exchange {
            request_hash: "h".into(),
            attempt: 1,
            url: "http://x".into(),
            request: serde_json::json!({"a": 1}),
            status: Some(200),
            response: "{}".into(),
        };
        a.append(&ex).unwrap();
        a.append(&Exchange { attempt: 2, ..ex.clone() }).unwrap();
        let back = read_archive(&p).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0], ex);
    }
}
