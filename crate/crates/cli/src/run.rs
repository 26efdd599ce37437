//! Run directories: every artifact of one (dataset, seed) lives under
//! `<runs>/s<seed>-<hash prefix>` and records both.

use std::fs;
use std::path::{Path, PathBuf};

use hgml_core::features::FeatureMode;
use hgml_core::learner::GbdtParams;
use hgml_core::pairing::SelectMode;
use hgml_core::split::make_splits;
use hgml_core::rng::derive_seed;
use hgml_core::store::{load_records, ModelStore};
use hgml_core::{Dataset, DimensionPair, PolygonModel, SplitSet, SplitSizes};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{io, CliError, Result};

pub const ARTIFACT_VERSION: u32 = 1;

pub const DATASET_FILE: &str = "dataset.json";
pub const SPLITS_FILE: &str = "splits.json";
pub const PAIRS_FILE: &str = "pairs.json";
pub const MODELS_FILE: &str = "models.jsonl";
pub const FEATURES_TRAIN_FILE: &str = "features-train.csv";
pub const FEATURES_TEST_FILE: &str = "features-test.csv";
pub const FEATURES_META_FILE: &str = "features.meta.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_TXT: &str = "report.txt";

#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetArtifact {
    pub v: u32,
    pub hash: String,
    pub seed: u64,
    pub dataset: Dataset,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SplitsArtifact {
    pub v: u32,
    pub dataset_hash: String,
    pub seed: u64,
    pub sizes: SplitSizes,
    pub split: SplitSet,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairEntry {
    #[serde(flatten)]
    pub pair: DimensionPair,
    pub rho: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PairsArtifact {
    pub v: u32,
    pub dataset_hash: String,
    pub seed: u64,
    pub mode: SelectMode,
    pub k: usize,
    pub pairs: Vec<PairEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub v: u32,
    pub dataset_hash: String,
    pub seed: u64,
    pub mode: FeatureMode,
    pub model_ids: Vec<String>,
    pub train_rows: usize,
    pub test_rows: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrainArtifact {
    pub v: u32,
    pub dataset_hash: String,
    pub seed: u64,
    pub arm: String,
    pub params: GbdtParams,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub loss_curve: Vec<f64>,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io(path))
}

pub fn check_hash(what: &str, expected: &str, found: &str) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(CliError::HashMismatch {
            what: what.to_owned(),
            expected: expected.to_owned(),
            found: found.to_owned(),
        })
    }
}

pub fn check_seed(what: &str, expected: u64, found: u64) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(CliError::SeedMismatch {
            what: what.to_owned(),
            expected,
            found,
        })
    }
}

#[derive(Debug)]
pub struct Run {
    pub dir: PathBuf,
    pub seed: u64,
    pub hash: String,
    pub dataset: Dataset,
    pub split: SplitSet,
}

impl Run {
    pub fn dir_name(seed: u64, hash: &str) -> String {
        format!("s{seed}-{}", &hash[..12])
    }

    /// Writes the dataset and its splits into a fresh run directory.
    pub fn create(runs: &Path, dataset: Dataset, seed: u64, sizes: Option<SplitSizes>) -> Result<Self> {
        let hash = dataset.content_hash();
        let dir = runs.join(Self::dir_name(seed, &hash));
        fs::create_dir_all(&dir).map_err(io(&dir))?;
        let sizes = sizes.unwrap_or_else(|| SplitSizes::default_for(dataset.len()));
        let split = make_splits(&dataset, sizes, derive_seed(seed, "split"))?;
        let artifact = DatasetArtifact {
            v: ARTIFACT_VERSION,
            hash: hash.clone(),
            seed,
            dataset,
        };
        write_json(&dir.join(DATASET_FILE), &artifact)?;
        write_json(
            &dir.join(SPLITS_FILE),
            &SplitsArtifact {
                v: ARTIFACT_VERSION,
                dataset_hash: hash.clone(),
                seed,
                sizes,
                split: split.clone(),
            },
        )?;
        Ok(Self {
            dir,
            seed,
            hash,
            dataset: artifact.dataset,
            split,
        })
    }

    /// Loads a run, recomputing the dataset hash and checking every link.
    pub fn open(dir: &Path) -> Result<Self> {
        let data: DatasetArtifact = read_json(&dir.join(DATASET_FILE))?;
        let actual = data.dataset.content_hash();
        check_hash("dataset.json contents", &data.hash, &actual)?;
        let splits: SplitsArtifact = read_json(&dir.join(SPLITS_FILE))?;
        check_hash(SPLITS_FILE, &actual, &splits.dataset_hash)?;
        check_seed(SPLITS_FILE, data.seed, splits.seed)?;
        splits.split.validate(data.dataset.len())?;
        Ok(Self {
            dir: dir.to_path_buf(),
            seed: data.seed,
            hash: actual,
            dataset: data.dataset,
            split: splits.split,
        })
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    /// Rejects a `--seed` that disagrees with the run's own seed.
    pub fn check_seed_flag(&self, flag: Option<u64>) -> Result<()> {
        match flag {
            Some(s) => check_seed("--seed", self.seed, s),
            None => Ok(()),
        }
    }

    pub fn store(&self) -> ModelStore {
        ModelStore::new(self.path(MODELS_FILE))
    }

    /// Accepted models from `path` (default: the run's store), all of which
    /// must belong to this run's dataset.
    pub fn models(&self, path: Option<&Path>) -> Result<Vec<PolygonModel>> {
        let path = path.map_or_else(|| self.path(MODELS_FILE), Path::to_path_buf);
        let records = load_records(&path)?;
        let mut models = Vec::with_capacity(records.len());
        for rec in records {
            check_hash(&format!("model {}", rec.model.id), &self.hash, &rec.dataset_hash)?;
            models.push(rec.model);
        }
        Ok(models)
    }

    pub fn pairs(&self) -> Result<Option<PairsArtifact>> {
        let path = self.path(PAIRS_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let pairs: PairsArtifact = read_json(&path)?;
        check_hash(PAIRS_FILE, &self.hash, &pairs.dataset_hash)?;
        check_seed(PAIRS_FILE, self.seed, pairs.seed)?;
        Ok(Some(pairs))
    }
}
