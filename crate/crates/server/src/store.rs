//! Transactional record store: users with templates, confidence records,
//! and the threshold policy with its change log.
//!
//! Writes run against a copy of the data; the copy replaces the live state
//! only after the closure succeeds and, for file-backed stores, after the
//! snapshot has been written and renamed into place.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use bioauth_core::fusion::ConfidenceRecord;
use bioauth_core::normalize::ThresholdPolicy;
use bioauth_core::sim::{FaceTemplate, FingerTemplate, UserProfile};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("store i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("store snapshot is corrupt: {0}")]
    Corrupt(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxRef {
    pub block: u64,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub profile: UserProfile,
    pub finger_templates: Vec<FingerTemplate>,
    pub face_template: FaceTemplate,
    pub ledger_tx_ref: TxRef,
    pub created_at: i64,
    #[serde(with = "hex::serde")]
    pub signing_secret: [u8; 32],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyChange {
    pub at: i64,
    pub admin: String,
    pub policy: ThresholdPolicy,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StoreData {
    pub users: BTreeMap<String, UserRecord>,
    pub confidence: BTreeMap<String, ConfidenceRecord>,
    pub policy: Option<ThresholdPolicy>,
    pub policy_log: Vec<PolicyChange>,
}

#[derive(Debug)]
pub struct Store {
    data: RwLock<StoreData>,
    path: Option<PathBuf>,
}

impl Store {
    pub fn in_memory() -> Self {
        Self {
            data: RwLock::new(StoreData::default()),
            path: None,
        }
    }

    /// Opens a file-backed store, loading the snapshot when it exists.
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let data = match std::fs::read(path) {
            Ok(bytes) => serde_json::from_slice(&bytes)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => StoreData::default(),
            Err(e) => return Err(e.into()),
        };
        Ok(Self {
            data: RwLock::new(data),
            path: Some(path.to_owned()),
        })
    }

    pub fn read<R>(&self, f: impl FnOnce(&StoreData) -> R) -> R {
        f(&self.data.read())
    }

    /// Runs `f` on a copy and commits it if `f` succeeds.
    pub fn write<R, E>(&self, f: impl FnOnce(&mut StoreData) -> Result<R, E>) -> Result<R, E>
    where
        E: From<StoreError>,
    {
        let mut guard = self.data.write();
        let mut next = guard.clone();
        let out = f(&mut next)?;
        if let Some(path) = &self.path {
            persist(path, &next).map_err(E::from)?;
        }
        *guard = next;
        Ok(out)
    }
}

fn persist(path: &Path, data: &StoreData) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, serde_json::to_vec(data)?)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
