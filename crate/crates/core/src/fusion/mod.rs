//! Decision-level fusion and confidence tracking.

mod confidence;
mod table;
mod tree;

use thiserror::Error;

pub use confidence::{
    decide_access, update_confidence, ConfidenceRecord, HistoryEntry, DEFAULT_ALPHA,
};
pub use table::{complete_table, weighted_sum, FusionRow, FusionTable, PUBLISHED_ROWS, WEIGHTS};
pub use tree::{infer, train, FusionModel, ModelSummary, Node};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("fusion table integrity: {0}")]
    TableIntegrity(String),
    #[error("training: {0}")]
    Training(String),
    #[error("confidence update at {now} precedes last update at {last}")]
    TimestampRegression { last: i64, now: i64 },
    #[error("{0}")]
    Parameter(String),
}

/// Trains on the published rows completed by weighted sum.
pub fn default_model() -> FusionModel {
    let table = complete_table(&FusionTable::published()).expect("published rows complete cleanly");
    train(&table).expect("complete table trains")
}
