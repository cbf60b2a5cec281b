use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{ensure, Context, Result};
use bioauth_server::config::{BcaConfig, ResourceConfig};
use serde::{Deserialize, Serialize};

use crate::harness::{AUDIENCE, DOC};

/// Harness settings; every field has a default so a config file may be partial.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    /// BCA server settings. `listen` and `key_seed` are ignored.
    pub bca: BcaConfig,
    /// Local gate of the resource server the harness presents tokens to.
    pub resource_gate: f64,
    pub good_noise: f64,
    pub degraded_noise: f64,
    /// Simulated seconds between transactions.
    pub seconds_per_tx: i64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            bca: BcaConfig {
                admin_secret: "harness".into(),
                ..Default::default()
            },
            resource_gate: 80.0,
            good_noise: 0.05,
            degraded_noise: 1.0,
            seconds_per_tx: 60,
        }
    }
}

impl HarnessConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.bca.validate()?;
        ensure!(
            (0.0..=100.0).contains(&self.resource_gate),
            "resource_gate outside [0, 100]"
        );
        ensure!(
            (0.0..=1.0).contains(&self.good_noise),
            "good_noise outside [0, 1]"
        );
        ensure!(
            (0.0..=1.0).contains(&self.degraded_noise),
            "degraded_noise outside [0, 1]"
        );
        ensure!(
            self.seconds_per_tx >= 0,
            "seconds_per_tx must be non-negative"
        );
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.bca.alpha
    }

    pub fn gate(&self) -> f64 {
        self.bca.policy.confidence_gate
    }

    pub(crate) fn resource_config(&self, bca_url: &str) -> ResourceConfig {
        ResourceConfig {
            listen: "127.0.0.1:0".into(),
            id: AUDIENCE.into(),
            gate: self.resource_gate,
            bca_endpoint: bca_url.into(),
            sync_interval_seconds: 0,
            difficulty: self.bca.difficulty,
            resources: BTreeMap::from([(
                DOC.to_string(),
                serde_json::json!({"body": "protected document"}),
            )]),
        }
    }
}

/// EMA warm-up: transactions until the first estimate's weight is below 1%.
pub fn warm_up(alpha: f64) -> usize {
    steps_to_decay(alpha, 0.01)
}

/// Transactions after which an old level keeps less than `fraction` weight.
pub fn steps_to_decay(alpha: f64, fraction: f64) -> usize {
    (fraction.ln() / (1.0 - alpha).ln()).ceil() as usize
}
