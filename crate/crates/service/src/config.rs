use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use hgml_core::split::SplitSizes;
use serde::Deserialize;

use crate::error::SetupError;

fn default_label() -> String {
    "label".into()
}

fn default_true() -> bool {
    true
}

fn default_threshold() -> f64 {
    0.5
}

fn default_pool() -> usize {
    10
}

fn default_tasks_per_pair() -> usize {
    3
}

fn default_listen() -> SocketAddr {
    ([127, 0, 0, 1], 8080).into()
}

fn default_idle() -> u64 {
    30 * 60
}

/// Key-value service configuration. Relative paths resolve against the
/// directory holding the configuration file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub dataset: PathBuf,
    pub schema: PathBuf,
    #[serde(default = "default_label")]
    pub label_column: String,
    #[serde(default = "default_true")]
    pub balance: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub annotation_train: Option<usize>,
    #[serde(default)]
    pub annotation_valid: Option<usize>,
    #[serde(default)]
    pub annotation_test: Option<usize>,
    #[serde(default)]
    pub m_prime: Option<usize>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub min_coverage: f64,
    #[serde(default = "default_pool")]
    pub pair_pool_size: usize,
    #[serde(default = "default_tasks_per_pair")]
    pub tasks_per_pair: usize,
    #[serde(default = "default_listen")]
    pub listen: SocketAddr,
    pub store: PathBuf,
    #[serde(default)]
    pub static_dir: Option<PathBuf>,
    #[serde(default = "default_idle")]
    pub idle_timeout_secs: u64,
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, SetupError> {
        let text = std::fs::read_to_string(path).map_err(|e| SetupError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut cfg: ServiceConfig = toml::from_str(&text).map_err(|e| SetupError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.dataset);
        fix(&mut self.schema);
        fix(&mut self.store);
        if let Some(dir) = self.static_dir.as_mut() {
            fix(dir);
        }
    }

    /// Split sizes, defaulting any unset entry from the dataset size.
    pub fn split_sizes(&self, m: usize) -> SplitSizes {
        let d = SplitSizes::default_for(m);
        SplitSizes::new(
            self.annotation_train.unwrap_or(d.annotation_train),
            self.annotation_valid.unwrap_or(d.annotation_valid),
            self.annotation_test.unwrap_or(d.annotation_test),
            self.m_prime.unwrap_or(d.learner_train),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg: ServiceConfig = toml::from_str(
            r#"
            dataset = "data.csv"
            schema = "data.schema"
            store = "models.jsonl"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.threshold, 0.5);
        assert_eq!(cfg.min_coverage, 0.0);
        assert_eq!(cfg.idle_timeout_secs, 1800);
        assert_eq!(cfg.label_column, "label");
        assert_eq!(cfg.split_sizes(4000), SplitSizes::new(100, 100, 200, 2000));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let parsed: Result<ServiceConfig, _> = toml::from_str(
            r#"
            dataset = "d.csv"
            schema = "d.schema"
            store = "m.jsonl"
            treshold = 0.6
            "#,
        );
        assert!(parsed.is_err());
    }
}
