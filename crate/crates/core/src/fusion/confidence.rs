use serde::{Deserialize, Serialize};

use super::FusionError;
use crate::normalize::{ModalityVector, ThresholdPolicy};

pub const DEFAULT_ALPHA: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub timestamp: i64,
    pub vector: ModalityVector,
    pub fused: f64,
    pub level: f64,
}

/// Smoothed per-user confidence with its append-only update history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRecord {
    pub user_id: String,
    pub level: f64,
    pub history: Vec<HistoryEntry>,
}

impl ConfidenceRecord {
    pub fn new(user_id: impl Into<String>) -> Self {
        Self {
            user_id: user_id.into(),
            level: 0.0,
            history: Vec::new(),
        }
    }

    pub fn is_fresh(&self) -> bool {
        self.history.is_empty()
    }

    /// Exponential moving average step: `level <- (1 - alpha) * level + alpha * fused`.
    /// The first update adopts `fused` directly.
    pub fn update(
        &mut self,
        vector: ModalityVector,
        fused: f64,
        alpha: f64,
        now: i64,
    ) -> Result<f64, FusionError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(FusionError::Parameter(format!(
                "alpha {alpha} outside (0, 1]"
            )));
        }
        if !(0.0..=100.0).contains(&fused) {
            return Err(FusionError::Parameter(format!(
                "fused confidence {fused} outside [0, 100]"
            )));
        }
        if let Some(last) = self.history.last() {
            if now < last.timestamp {
                return Err(FusionError::TimestampRegression {
                    last: last.timestamp,
                    now,
                });
            }
        }
        let level = if self.is_fresh() {
            fused
        } else {
            ((1.0 - alpha) * self.level + alpha * fused).clamp(0.0, 100.0)
        };
        self.level = level;
        self.history.push(HistoryEntry {
            timestamp: now,
            vector,
            fused,
            level,
        });
        Ok(level)
    }

    /// History as CSV: `timestamp,finger,face,gender,age,fused,level`.
    pub fn history_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "timestamp",
            "finger",
            "face",
            "gender",
            "age",
            "fused",
            "level",
        ])
        .expect("in-memory write");
        for h in &self.history {
            w.write_record([
                h.timestamp.to_string(),
                h.vector.finger.to_string(),
                h.vector.face.to_string(),
                h.vector.gender.to_string(),
                h.vector.age.to_string(),
                h.fused.to_string(),
                h.level.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
    }
}

pub fn update_confidence(
    rec: &ConfidenceRecord,
    vector: ModalityVector,
    fused: f64,
    alpha: f64,
    now: i64,
) -> Result<ConfidenceRecord, FusionError> {
    let mut next = rec.clone();
    next.update(vector, fused, alpha, now)?;
    Ok(next)
}

/// Inclusive gate: a level equal to the gate passes.
pub fn decide_access(level: f64, policy: &ThresholdPolicy) -> bool {
    level >= policy.confidence_gate
}
