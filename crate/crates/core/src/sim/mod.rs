//! Synthetic capture and matching.
//!
//! Stands in for the fingerprint and face SDKs: it generates templates from
//! seeded sources, produces genuine, degraded and impostor probes, and scores
//! probes against enrolled templates with calibrated distributions.
//!
//! Every operation is a pure function of its inputs and the [`SimConfig`];
//! randomness that is not supplied as a seed is derived from SHA-256 digests
//! of the templates involved.

mod config;
mod face;
mod finger;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{DemographicSimConfig, FaceSimConfig, FingerSimConfig, SimConfig};
pub use face::{
    draw_impostor_similarity, estimate_demographics, match_face, DemographicEstimate, FaceSource,
    FaceTemplate, GenderProbs, FACE_FEATURE_LEN, FACE_FEATURE_POINTS,
};
pub use finger::{
    enroll_finger, match_finger, sample_impostor_finger_score, FingerSource, FingerTemplate,
    Minutia, MinutiaKind, ENROLLMENT_SCANS,
};

/// Upper bound of the finger score scale; scores lie in `[0, MAXINT)`.
pub const MAXINT: u32 = 2_147_483_647;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("finger enrollment takes exactly {expected} scans, got {got}")]
    EnrollmentArity { expected: usize, got: usize },
    #[error("no enrolled template to match against")]
    NoTemplate,
    #[error("template shape: {0}")]
    TemplateShape(String),
    #[error("invalid simulation parameter {field}: {reason}")]
    Config { field: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn opposite(self) -> Self {
        match self {
            Gender::Male => Gender::Female,
            Gender::Female => Gender::Male,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub name: String,
    #[serde(default)]
    pub privileges: Vec<String>,
    pub declared_gender: Gender,
    pub declared_age: u32,
}

impl UserProfile {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.user_id.is_empty() {
            return Err(SimError::Config {
                field: "user_id",
                reason: "must be non-empty".into(),
            });
        }
        if !(1..=120).contains(&self.declared_age) {
            return Err(SimError::Config {
                field: "declared_age",
                reason: format!("{} outside [1, 120]", self.declared_age),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Finger,
    Face,
}

/// Simulation-only label; never part of anything sent to a server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Genuineness {
    Genuine,
    Impostor,
    Degraded,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProbePayload {
    Finger(FingerTemplate),
    Face(FaceTemplate),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSample {
    pub genuineness: Genuineness,
    pub noise_level: f64,
    pub payload: ProbePayload,
}

impl ProbeSample {
    pub fn modality(&self) -> Modality {
        match self.payload {
            ProbePayload::Finger(_) => Modality::Finger,
            ProbePayload::Face(_) => Modality::Face,
        }
    }
}

/// A simulated person: declared profile plus the seeded sources their
/// fingerprint and face captures are drawn from.
#[derive(Debug, Clone)]
pub struct SimSubject {
    pub profile: UserProfile,
    pub finger: FingerSource,
    pub face: FaceSource,
}

impl SimSubject {
    /// Builds a subject whose face carries the profile's declared demographics.
    pub fn new(profile: UserProfile, seed: u64) -> Self {
        let finger = FingerSource::new(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ 0xf1);
        let face = FaceSource::new(
            seed.wrapping_mul(0xbf58_476d_1ce4_e5b9) ^ 0xfa,
            profile.declared_gender,
            profile.declared_age,
        );
        Self {
            profile,
            finger,
            face,
        }
    }

    pub fn enroll_finger(
        &self,
        scan_seeds: &[u64],
        cfg: &SimConfig,
    ) -> Result<Vec<FingerTemplate>, SimError> {
        enroll_finger(&self.finger, scan_seeds, &cfg.finger)
    }

    pub fn enroll_face(&self, seed: u64, cfg: &SimConfig) -> FaceTemplate {
        self.face
            .capture(cfg.face.enrollment_noise, seed, &cfg.face)
    }

    /// Genuine and degraded probes are captures of this subject's finger;
    /// an impostor probe comes from an unrelated finger derived from `seed`.
    pub fn finger_probe(
        &self,
        genuineness: Genuineness,
        noise: f64,
        seed: u64,
        cfg: &SimConfig,
    ) -> ProbeSample {
        let template = match genuineness {
            Genuineness::Genuine | Genuineness::Degraded => {
                self.finger.capture(noise, seed, &cfg.finger)
            }
            Genuineness::Impostor => {
                let other = FingerSource::new(mix(self.finger.seed(), seed) | 1);
                other.capture(noise, seed, &cfg.finger)
            }
        };
        ProbeSample {
            genuineness,
            noise_level: noise,
            payload: ProbePayload::Finger(template),
        }
    }

    /// Impostor face probes are placed at a drawn similarity from the
    /// enrolled template, so the face false-accept rate is set by the
    /// impostor model in [`FaceSimConfig`].
    pub fn face_probe(
        &self,
        enrolled: &FaceTemplate,
        genuineness: Genuineness,
        noise: f64,
        seed: u64,
        cfg: &SimConfig,
    ) -> ProbeSample {
        let template = match genuineness {
            Genuineness::Genuine | Genuineness::Degraded => {
                self.face.capture(noise, seed, &cfg.face)
            }
            Genuineness::Impostor => {
                let mut rng = ChaCha8Rng::seed_from_u64(mix(self.face.seed(), seed));
                face::impostor_probe(enrolled, &mut rng, &cfg.face)
            }
        };
        ProbeSample {
            genuineness,
            noise_level: noise,
            payload: ProbePayload::Face(template),
        }
    }
}

fn mix(a: u64, b: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(a.to_le_bytes());
    h.update(b.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// RNG keyed on a domain tag and a byte string.
pub(crate) fn digest_rng(tag: &[u8], parts: &[&[u8]]) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(tag);
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Maps a uniform 64-bit word onto `[0, MAXINT)`.
pub(crate) fn score_from_word(x: u64) -> u32 {
    ((x as u128 * MAXINT as u128) >> 64) as u32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_mapping_covers_the_half_open_range() {
        assert_eq!(score_from_word(0), 0);
        assert_eq!(score_from_word(u64::MAX), MAXINT - 1);
    }

    #[test]
    fn profile_age_bounds() {
        let mut p = UserProfile {
            user_id: "u1".into(),
            name: "U".into(),
            privileges: vec![],
            declared_gender: Gender::Male,
            declared_age: 0,
        };
        assert!(p.validate().is_err());
        p.declared_age = 120;
        assert!(p.validate().is_ok());
        p.user_id.clear();
        assert!(p.validate().is_err());
    }
}
