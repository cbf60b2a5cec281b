use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::FusionError;
use crate::normalize::ModalityVector;

/// Fusion weights in percent: finger, face, gender, age.
pub const WEIGHTS: [f64; 4] = [40.0, 40.0, 10.0, 10.0];

const fn v(finger: bool, face: bool, gender: bool, age: bool) -> ModalityVector {
    ModalityVector::new(finger, face, gender, age)
}

/// The 14 published training rows. Rows (T,T,T,F), (T,T,F,T) and (T,T,F,F)
/// sit 10 points below the weighted sum and are kept as published.
pub const PUBLISHED_ROWS: [(ModalityVector, f64); 14] = [
    (v(true, true, true, true), 100.0),
    (v(true, true, true, false), 80.0),
    (v(true, true, false, true), 80.0),
    (v(true, true, false, false), 70.0),
    (v(true, false, true, true), 60.0),
    (v(true, false, true, false), 50.0),
    (v(true, false, false, true), 50.0),
    (v(true, false, false, false), 40.0),
    (v(false, true, true, true), 60.0),
    (v(false, true, true, false), 50.0),
    (v(false, true, false, true), 50.0),
    (v(false, false, true, true), 20.0),
    (v(false, false, false, true), 10.0),
    (v(false, false, false, false), 0.0),
];

pub fn weighted_sum(v: &ModalityVector) -> f64 {
    [v.finger, v.face, v.gender, v.age]
        .iter()
        .zip(WEIGHTS)
        .filter(|(on, _)| **on)
        .map(|(_, w)| w)
        .sum()
}

/// Training data: modality vector to confidence percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionTable {
    rows: Vec<FusionRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionRow {
    #[serde(flatten)]
    pub vector: ModalityVector,
    pub confidence: f64,
}

impl FusionTable {
    pub fn new(rows: impl IntoIterator<Item = (ModalityVector, f64)>) -> Result<Self, FusionError> {
        let mut seen = BTreeMap::new();
        let mut out = Vec::new();
        for (vector, confidence) in rows {
            if !(0.0..=100.0).contains(&confidence) {
                return Err(FusionError::TableIntegrity(format!(
                    "confidence {confidence} for {vector:?} outside [0, 100]"
                )));
            }
            if seen.insert(vector, confidence).is_some() {
                return Err(FusionError::TableIntegrity(format!(
                    "duplicate row {vector:?}"
                )));
            }
            out.push(FusionRow { vector, confidence });
        }
        Ok(Self { rows: out })
    }

    pub fn published() -> Self {
        Self::new(PUBLISHED_ROWS).expect("published rows are consistent")
    }

    pub fn rows(&self) -> &[FusionRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn lookup(&self, v: &ModalityVector) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.vector == *v)
            .map(|r| r.confidence)
    }

    pub fn is_complete(&self) -> bool {
        ModalityVector::all().all(|v| self.lookup(&v).is_some())
    }
}

/// Keeps every given row and fills each absent vector with the weighted sum.
pub fn complete_table(table: &FusionTable) -> Result<FusionTable, FusionError> {
    let given = table.rows.iter().map(|r| (r.vector, r.confidence));
    let missing = ModalityVector::all()
        .filter(|v| table.lookup(v).is_none())
        .map(|v| (v, weighted_sum(&v)))
        .collect::<Vec<_>>();
    FusionTable::new(given.chain(missing))
}
