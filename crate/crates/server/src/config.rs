//! JSON configuration for both servers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use bioauth_core::fusion::DEFAULT_ALPHA;
use bioauth_core::ledger::DEFAULT_DIFFICULTY;
use bioauth_core::normalize::ThresholdPolicy;
use bioauth_core::sim::SimConfig;
use bioauth_core::token::DEFAULT_TTL_SECONDS;
use serde::{Deserialize, Serialize};

pub const ONE_YEAR_SECONDS: i64 = 365 * 24 * 3600;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
        path: path.to_owned(),
        source,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BcaConfig {
    pub listen: String,
    pub difficulty: u32,
    pub alpha: f64,
    pub policy: ThresholdPolicy,
    /// JSON snapshot of users, confidence records and policy; in memory when unset.
    pub store_path: Option<PathBuf>,
    /// Append-only file of canonical block bytes; in memory when unset.
    pub chain_path: Option<PathBuf>,
    pub admin_secret: String,
    pub token_ttl_seconds: i64,
    pub key_validity_seconds: i64,
    /// Derive user signing keys deterministically (simulation only).
    pub key_seed: Option<u64>,
    pub history_page: usize,
    pub sim: SimConfig,
}

impl Default for BcaConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            difficulty: DEFAULT_DIFFICULTY,
            alpha: DEFAULT_ALPHA,
            policy: ThresholdPolicy::default(),
            store_path: None,
            chain_path: None,
            admin_secret: "change-me".into(),
            token_ttl_seconds: DEFAULT_TTL_SECONDS,
            key_validity_seconds: ONE_YEAR_SECONDS,
            key_seed: None,
            history_page: 20,
            sim: SimConfig::default(),
        }
    }
}

impl BcaConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let cfg: Self = load(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "alpha {} outside (0, 1]",
                self.alpha
            )));
        }
        if let Err(errs) = self.policy.validate() {
            let msg = errs
                .iter()
                .map(|e| format!("{}: {}", e.field, e.message))
                .collect::<Vec<_>>()
                .join("; ");
            return Err(ConfigError::Invalid(msg));
        }
        if self.token_ttl_seconds <= 0 || self.key_validity_seconds <= 0 {
            return Err(ConfigError::Invalid(
                "ttl and key validity must be positive".into(),
            ));
        }
        if self.admin_secret.is_empty() {
            return Err(ConfigError::Invalid("admin_secret must be set".into()));
        }
        self.sim
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ResourceConfig {
    pub listen: String,
    /// Audience this server accepts tokens for.
    pub id: String,
    pub gate: f64,
    pub bca_endpoint: String,
    pub sync_interval_seconds: u64,
    pub difficulty: u32,
    pub resources: BTreeMap<String, serde_json::Value>,
}

impl Default for ResourceConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8081".into(),
            id: "resource-1".into(),
            gate: 80.0,
            bca_endpoint: "http://127.0.0.1:8080".into(),
            sync_interval_seconds: 10,
            difficulty: DEFAULT_DIFFICULTY,
            resources: BTreeMap::new(),
        }
    }
}

impl ResourceConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let cfg: Self = load(path)?;
        if !(0.0..=100.0).contains(&cfg.gate) {
            return Err(ConfigError::Invalid(format!(
                "gate {} outside [0, 100]",
                cfg.gate
            )));
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_fills_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bca.json");
        std::fs::write(&p, r#"{"difficulty": 4, "policy": {"finger_T": 2147483, "face_T": 0.992, "gender_T": 0.9, "age_tolerance": 10, "face_memory_limit": 1024, "confidence_gate": 90}}"#).unwrap();
        let cfg = BcaConfig::from_file(&p).unwrap();
        assert_eq!(cfg.difficulty, 4);
        assert_eq!(cfg.policy.confidence_gate, 90.0);
        assert_eq!(cfg.alpha, DEFAULT_ALPHA);
    }

    #[test]
    fn invalid_policy_in_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bca.json");
        std::fs::write(&p, r#"{"policy": {"finger_T": 1, "face_T": 1.5, "gender_T": 0.9, "age_tolerance": 10, "face_memory_limit": 1024, "confidence_gate": 80}}"#).unwrap();
        assert!(matches!(
            BcaConfig::from_file(&p),
            Err(ConfigError::Invalid(_))
        ));
    }
}
