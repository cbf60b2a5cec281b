//! JSON bodies exchanged with the BCA and resource servers.

use bioauth_core::normalize::FieldError;
use bioauth_core::sim::{FaceTemplate, FingerTemplate, Gender, UserProfile};
use serde::{Deserialize, Serialize};

use crate::store::TxRef;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnrollRequest {
    pub profile: UserProfile,
    pub finger_scans: Vec<FingerTemplate>,
    pub face_capture: FaceTemplate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrollResponse {
    pub user_id: String,
    pub ledger_tx_ref: TxRef,
    pub created_at: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuthRequest {
    pub user_id: String,
    pub finger_probe: FingerTemplate,
    pub face_probe: FaceTemplate,
    /// Resource server the token is meant for.
    pub audience: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthGranted {
    pub token: String,
    pub level: f64,
    pub expires_at: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthDenied {
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AuthOutcome {
    Granted(AuthGranted),
    Denied(AuthDenied),
}

impl AuthOutcome {
    pub fn level(&self) -> f64 {
        match self {
            AuthOutcome::Granted(g) => g.level,
            AuthOutcome::Denied(d) => d.level,
        }
    }

    pub fn is_granted(&self) -> bool {
        matches!(self, AuthOutcome::Granted(_))
    }
}

/// Public view of a confidence history entry (no per-modality outcomes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelPoint {
    pub timestamp: i64,
    pub fused: f64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSummary {
    pub user_id: String,
    pub level: f64,
    pub transactions: usize,
    pub recent: Vec<LevelPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSummary {
    pub user_id: String,
    pub name: String,
    pub privileges: Vec<String>,
    pub declared_gender: Gender,
    pub declared_age: u32,
    pub created_at: i64,
    pub level: f64,
    pub transactions: usize,
    pub ledger_tx_ref: TxRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainHead {
    pub length: usize,
    pub index: Option<u64>,
    pub hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldErrorBody>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldErrorBody {
    pub field: String,
    pub message: String,
}

impl From<&FieldError> for FieldErrorBody {
    fn from(e: &FieldError) -> Self {
        Self {
            field: e.field.to_string(),
            message: e.message.clone(),
        }
    }
}
