//! The BCA identity provider: enrollment, the authentication pipeline,
//! confidence queries, policy administration and ledger mining.

mod routes;

use std::collections::HashMap;
use std::sync::Arc;

use bioauth_core::fusion::{
    complete_table, decide_access, default_model, infer, ConfidenceRecord, FusionModel,
    FusionTable, ModelSummary,
};
use bioauth_core::ledger::LedgerTransaction;
use bioauth_core::normalize::{FieldError, ThresholdPolicy};
use bioauth_core::pipeline::{modality_vector, Enrolled};
use bioauth_core::sim::ENROLLMENT_SCANS;
use bioauth_core::token::{issue, public_key, signing_key};
use parking_lot::{Mutex, RwLock};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};
use tracing::{info, warn};

use crate::api::{
    AuthDenied, AuthGranted, AuthOutcome, AuthRequest, ChainHead, ConfidenceSummary, EnrollRequest,
    EnrollResponse, LevelPoint, UserSummary,
};
use crate::chain_store::{ChainStore, ChainStoreError};
use crate::clock::Clock;
use crate::config::BcaConfig;
use crate::store::{PolicyChange, Store, StoreError, TxRef, UserRecord};

pub use routes::router;

#[derive(Debug, thiserror::Error)]
pub enum BcaError {
    #[error("validation: {0}")]
    Validation(String),
    #[error("policy rejected")]
    PolicyInvalid(Vec<FieldError>),
    #[error("user {0} is already enrolled")]
    Conflict(String),
    #[error("unknown user {0}")]
    UnknownUser(String),
    #[error("ledger append failed, enrollment rolled back: {0}")]
    Ledger(#[from] ChainStoreError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelExport {
    pub table: FusionTable,
    pub model: ModelSummary,
}

pub struct BcaService {
    cfg: BcaConfig,
    store: Store,
    chain: ChainStore,
    policy: RwLock<Arc<ThresholdPolicy>>,
    model: FusionModel,
    clock: Arc<dyn Clock>,
    user_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl BcaService {
    pub fn new(cfg: BcaConfig, clock: Arc<dyn Clock>) -> Result<Self, BcaError> {
        cfg.validate()
            .map_err(|e| BcaError::Validation(e.to_string()))?;
        let store = match &cfg.store_path {
            Some(p) => Store::open(p)?,
            None => Store::in_memory(),
        };
        let chain = match &cfg.chain_path {
            Some(p) => ChainStore::open(p, cfg.difficulty)?,
            None => ChainStore::in_memory(cfg.difficulty),
        };
        let policy = store
            .read(|d| d.policy.clone())
            .unwrap_or_else(|| cfg.policy.clone());
        Ok(Self {
            cfg,
            store,
            chain,
            policy: RwLock::new(Arc::new(policy)),
            model: default_model(),
            clock,
            user_locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &BcaConfig {
        &self.cfg
    }

    pub fn chain(&self) -> &ChainStore {
        &self.chain
    }

    pub fn policy(&self) -> Arc<ThresholdPolicy> {
        self.policy.read().clone()
    }

    fn user_lock(&self, user_id: &str) -> Arc<Mutex<()>> {
        self.user_locks
            .lock()
            .entry(user_id.to_string())
            .or_default()
            .clone()
    }

    fn new_secret(&self, user_id: &str) -> [u8; 32] {
        let mut secret = [0u8; 32];
        match self.cfg.key_seed {
            Some(seed) => {
                let mut h = Sha256::new();
                h.update(seed.to_le_bytes());
                h.update(user_id.as_bytes());
                ChaCha20Rng::from_seed(h.finalize().into()).fill_bytes(&mut secret);
            }
            None => rand::rng().fill_bytes(&mut secret),
        }
        secret
    }

    /// Stores templates, anchors a fresh public key on the ledger and opens
    /// an empty confidence record. Either all of it happens or none of it.
    pub fn enroll(&self, req: EnrollRequest) -> Result<EnrollResponse, BcaError> {
        req.profile
            .validate()
            .map_err(|e| BcaError::Validation(e.to_string()))?;
        if req.finger_scans.len() != ENROLLMENT_SCANS {
            return Err(BcaError::Validation(format!(
                "expected {ENROLLMENT_SCANS} finger scans, got {}",
                req.finger_scans.len()
            )));
        }
        let user_id = req.profile.user_id.clone();
        let lock = self.user_lock(&user_id);
        let _user = lock.lock();
        let _writer = self.chain.lock_writer();

        if self.store.read(|d| d.users.contains_key(&user_id)) {
            return Err(BcaError::Conflict(user_id));
        }

        let now = self.clock.now();
        let secret = self.new_secret(&user_id);
        let tx = LedgerTransaction {
            user_id: user_id.clone(),
            timestamp: now,
            key: public_key(&signing_key(&secret)),
            start_date: now,
            end_date: now + self.cfg.key_validity_seconds,
        };
        let block = self
            .chain
            .snapshot()
            .mine_next(vec![tx])
            .map_err(ChainStoreError::from)?;
        let tx_ref = TxRef {
            block: block.index,
            position: 0,
        };

        let record = UserRecord {
            profile: req.profile,
            finger_templates: req.finger_scans,
            face_template: req.face_capture,
            ledger_tx_ref: tx_ref,
            created_at: now,
            signing_secret: secret,
        };
        self.store.write::<_, BcaError>(|d| {
            d.users.insert(user_id.clone(), record);
            d.confidence
                .insert(user_id.clone(), ConfidenceRecord::new(&user_id));
            Ok(())
        })?;

        if let Err(e) = self.chain.append_locked(block) {
            warn!(user = %user_id, error = %e, "ledger append failed, rolling back enrollment");
            self.store.write::<_, BcaError>(|d| {
                d.users.remove(&user_id);
                d.confidence.remove(&user_id);
                Ok(())
            })?;
            return Err(e.into());
        }
        info!(user = %user_id, block = tx_ref.block, "enrolled");
        Ok(EnrollResponse {
            user_id,
            ledger_tx_ref: tx_ref,
            created_at: now,
        })
    }

    /// match → normalize → fuse → update → gate → issue. The confidence
    /// record is updated whether or not access is granted.
    pub fn authenticate(&self, req: &AuthRequest) -> Result<AuthOutcome, BcaError> {
        let lock = self.user_lock(&req.user_id);
        let _user = lock.lock();
        let policy = self.policy();
        let now = self.clock.now();

        let user = self
            .store
            .read(|d| d.users.get(&req.user_id).cloned())
            .ok_or_else(|| BcaError::UnknownUser(req.user_id.clone()))?;
        let enrolled = Enrolled {
            profile: &user.profile,
            fingers: &user.finger_templates,
            face: &user.face_template,
        };
        let vector = modality_vector(
            &req.finger_probe,
            &req.face_probe,
            enrolled,
            &policy,
            &self.cfg.sim,
        )
        .map_err(|e| BcaError::Validation(e.to_string()))?;
        let fused = infer(&self.model, &vector);

        let alpha = self.cfg.alpha;
        let level = self.store.write::<_, BcaError>(|d| {
            let rec = d
                .confidence
                .entry(req.user_id.clone())
                .or_insert_with(|| ConfidenceRecord::new(&req.user_id));
            rec.update(vector, fused, alpha, now)
                .map_err(|e| BcaError::Validation(e.to_string()))
        })?;

        if !decide_access(level, &policy) {
            return Ok(AuthOutcome::Denied(AuthDenied { level }));
        }
        let key = signing_key(&user.signing_secret);
        let token = issue(
            &req.user_id,
            level,
            &req.audience,
            self.cfg.token_ttl_seconds,
            &key,
            &policy,
            now,
        )
        .map_err(|e| BcaError::Validation(e.to_string()))?;
        Ok(AuthOutcome::Granted(AuthGranted {
            token: token.to_wire(),
            level,
            expires_at: token.claims.expires_at,
        }))
    }

    pub fn get_confidence(
        &self,
        user_id: &str,
        limit: Option<usize>,
    ) -> Result<ConfidenceSummary, BcaError> {
        let rec = self
            .store
            .read(|d| d.confidence.get(user_id).cloned())
            .ok_or_else(|| BcaError::UnknownUser(user_id.to_string()))?;
        let limit = limit.unwrap_or(self.cfg.history_page);
        let skip = rec.history.len().saturating_sub(limit);
        Ok(ConfidenceSummary {
            user_id: rec.user_id.clone(),
            level: rec.level,
            transactions: rec.history.len(),
            recent: rec.history[skip..]
                .iter()
                .map(|h| LevelPoint {
                    timestamp: h.timestamp,
                    fused: h.fused,
                    level: h.level,
                })
                .collect(),
        })
    }

    /// Full history including per-modality outcomes; admin only.
    pub fn analytics(&self, user_id: &str) -> Result<ConfidenceRecord, BcaError> {
        self.store
            .read(|d| d.confidence.get(user_id).cloned())
            .ok_or_else(|| BcaError::UnknownUser(user_id.to_string()))
    }

    pub fn set_policy(
        &self,
        policy: ThresholdPolicy,
        admin: &str,
    ) -> Result<ThresholdPolicy, BcaError> {
        policy.validate().map_err(BcaError::PolicyInvalid)?;
        let mut live = self.policy.write();
        let at = self.clock.now();
        self.store.write::<_, BcaError>(|d| {
            d.policy = Some(policy.clone());
            d.policy_log.push(PolicyChange {
                at,
                admin: admin.to_string(),
                policy: policy.clone(),
            });
            Ok(())
        })?;
        *live = Arc::new(policy.clone());
        info!(admin, at, ?policy, "threshold policy replaced");
        Ok(policy)
    }

    pub fn policy_log(&self) -> Vec<PolicyChange> {
        self.store.read(|d| d.policy_log.clone())
    }

    pub fn list_users(&self) -> Vec<UserSummary> {
        self.store.read(|d| {
            d.users
                .values()
                .map(|u| {
                    let rec = d.confidence.get(&u.profile.user_id);
                    UserSummary {
                        user_id: u.profile.user_id.clone(),
                        name: u.profile.name.clone(),
                        privileges: u.profile.privileges.clone(),
                        declared_gender: u.profile.declared_gender,
                        declared_age: u.profile.declared_age,
                        created_at: u.created_at,
                        level: rec.map_or(0.0, |r| r.level),
                        transactions: rec.map_or(0, |r| r.history.len()),
                        ledger_tx_ref: u.ledger_tx_ref,
                    }
                })
                .collect()
        })
    }

    /// Removes templates and confidence state. The ledger keeps its
    /// transaction; the BCA simply stops issuing tokens for the user.
    pub fn delete_user(&self, user_id: &str) -> Result<(), BcaError> {
        let lock = self.user_lock(user_id);
        let _user = lock.lock();
        self.store.write::<_, BcaError>(|d| {
            if d.users.remove(user_id).is_none() {
                return Err(BcaError::UnknownUser(user_id.to_string()));
            }
            d.confidence.remove(user_id);
            Ok(())
        })?;
        info!(user = %user_id, "user deleted");
        Ok(())
    }

    pub fn model_export(&self) -> ModelExport {
        ModelExport {
            table: complete_table(&FusionTable::published())
                .expect("published rows complete cleanly"),
            model: self.model.summary(),
        }
    }

    pub fn chain_bytes(&self) -> Vec<u8> {
        self.chain.snapshot().to_bytes()
    }

    pub fn chain_head(&self) -> ChainHead {
        let chain = self.chain.snapshot();
        ChainHead {
            length: chain.len(),
            index: chain.head().map(|b| b.index),
            hash: chain.head().map(|b| hex::encode(b.hash)),
        }
    }
}
