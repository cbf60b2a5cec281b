//! Multimodal biometric authentication core: synthetic matchers, threshold
//! normalization, decision-tree fusion with smoothed per-user confidence,
//! a proof-of-work identity ledger and signed access tokens.

pub mod codec;
pub mod fusion;
pub mod ledger;
pub mod normalize;
pub mod pipeline;
pub mod sim;
pub mod token;
