//! Append-only model store: one JSON record per line.

use std::fs::{self, OpenOptions};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polygon::PolygonModel;

pub const RECORD_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub v: u32,
    pub dataset_hash: String,
    #[serde(flatten)]
    pub model: PolygonModel,
}

impl ModelRecord {
    pub fn new(dataset_hash: impl Into<String>, model: PolygonModel) -> Self {
        Self {
            v: RECORD_VERSION,
            dataset_hash: dataset_hash.into(),
            model,
        }
    }
}

/// Serializes appends; each record reaches the file as one `write` of a full line.
#[derive(Debug)]
pub struct ModelStore {
    path: PathBuf,
    lock: Mutex<()>,
}

impl ModelStore {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            lock: Mutex::new(()),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, record: &ModelRecord) -> Result<()> {
        if record.model.accuracy.is_none() {
            return Err(Error::Unscored(record.model.id.clone()));
        }
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        file.write_all(&line).map_err(|e| Error::io(&self.path, e))?;
        file.sync_data().map_err(|e| Error::io(&self.path, e))
    }

    pub fn load(&self) -> Result<Vec<ModelRecord>> {
        load_records(&self.path)
    }
}

/// Reads every record; a missing file is an empty store.
pub fn load_records(path: &Path) -> Result<Vec<ModelRecord>> {
    let text = match fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) if e.kind() == ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut records = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Record {
            path: path.to_path_buf(),
            line: n + 1,
            message,
        };
        let record: ModelRecord = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        if record.v != RECORD_VERSION {
            return Err(bad(format!("unsupported record version {}", record.v)));
        }
        record.model.validate().map_err(|e| bad(e.to_string()))?;
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairing::DimensionPair;
    use crate::polygon::{Provenance, Rectangle};
    use crate::split::NormStats;

    fn scored(id: &str) -> PolygonModel {
        let mut m = PolygonModel::new(
            id,
            Provenance::Human {
                worker_id: "w1".into(),
            },
            DimensionPair::new(1, 4).unwrap(),
            NormStats {
                mean: [0.5, -1.0],
                std: [2.0, 0.25],
            },
            vec![Rectangle::new(-1.0, 1.0, -0.5, 0.5, 1, 0).unwrap()],
        )
        .unwrap();
        m.validation_accuracy = Some(0.8);
        m.accuracy = Some(0.75);
        m
    }

    #[test]
    fn appends_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let store = ModelStore::new(dir.path().join("models.jsonl"));
        assert!(store.load().unwrap().is_empty());
        store.append(&ModelRecord::new("abc", scored("a"))).unwrap();
        store.append(&ModelRecord::new("abc", scored("b"))).unwrap();
        let back = store.load().unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].model, scored("b"));
        let line = fs::read_to_string(store.path()).unwrap();
        let first: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
        assert_eq!(first["v"], 1);
        assert_eq!(first["provenance"]["kind"], "human");
        assert_eq!(first["pair"]["dim_b"], 4);
    }

    #[test]
    fn unscored_models_are_not_stored() {
        let dir = tempfile::tempdir().unwrap();
        let store = ModelStore::new(dir.path().join("models.jsonl"));
        let mut m = scored("x");
        m.accuracy = None;
        assert!(matches!(store.append(&ModelRecord::new("h", m)), Err(Error::Unscored(_))));
        assert!(!store.path().exists());
    }

    #[test]
    fn corrupt_lines_report_their_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("models.jsonl");
        let good = serde_json::to_string(&ModelRecord::new("h", scored("a"))).unwrap();
        fs::write(&path, format!("{good}\n{{\"v\":1}}\n")).unwrap();
        assert!(matches!(load_records(&path), Err(Error::Record { line: 2, .. })));
    }

    #[test]
    fn concurrent_appends_stay_line_atomic() {
        let dir = tempfile::tempdir().unwrap();
        let store = std::sync::Arc::new(ModelStore::new(dir.path().join("models.jsonl")));
        let handles: Vec<_> = (0..8)
            .map(|t| {
                let store = store.clone();
                std::thread::spawn(move || {
                    for k in 0..10 {
                        store
                            .append(&ModelRecord::new("h", scored(&format!("{t}-{k}"))))
                            .unwrap();
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(store.load().unwrap().len(), 80);
    }
}
