use serde::{Deserialize, Serialize};

use super::SimError;

/// Distribution parameters for the synthetic matchers, loadable from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct SimConfig {
    pub finger: FingerSimConfig,
    pub face: FaceSimConfig,
    pub demographics: DemographicSimConfig,
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let cfg: SimConfig = serde_json::from_str(text).map_err(|e| SimError::Config {
            field: "sim config",
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.finger.validate()?;
        self.face.validate()?;
        self.demographics.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FingerSimConfig {
    pub width_px: u32,
    pub height_px: u32,
    pub minutiae_min: u32,
    pub minutiae_max: u32,
    /// Positional jitter (pixels, standard deviation) at noise 1.
    pub jitter_px: f64,
    /// Angular jitter (radians, standard deviation) at noise 1.
    pub angle_jitter_rad: f64,
    /// Probability of losing a minutia at noise 1.
    pub drop_rate: f64,
    pub position_tolerance_px: f64,
    pub angle_tolerance_rad: f64,
    /// Pairing ratio at or above which a template counts as the same finger.
    pub min_match_ratio: f64,
    /// Genuine scores are `floor(q * MAXINT)` with `q` in `[0, genuine_upper_q]`.
    pub genuine_upper_q: f64,
    pub enrollment_noise: f64,
}

impl Default for FingerSimConfig {
    fn default() -> Self {
        Self {
            width_px: 500,
            height_px: 550,
            minutiae_min: 30,
            minutiae_max: 45,
            jitter_px: 9.0,
            angle_jitter_rad: 0.35,
            drop_rate: 0.45,
            position_tolerance_px: 10.0,
            angle_tolerance_rad: 0.4,
            min_match_ratio: 0.6,
            genuine_upper_q: 1e-7,
            enrollment_noise: 0.05,
        }
    }
}

impl FingerSimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |field, reason: &str| {
            Err(SimError::Config {
                field,
                reason: reason.to_string(),
            })
        };
        if self.width_px == 0 || self.height_px == 0 {
            return bad("finger.width_px/height_px", "image extent must be non-zero");
        }
        if self.minutiae_min == 0 || self.minutiae_min > self.minutiae_max {
            return bad(
                "finger.minutiae_min",
                "need 0 < minutiae_min <= minutiae_max",
            );
        }
        if !(self.min_match_ratio > 0.0 && self.min_match_ratio < 1.0) {
            return bad("finger.min_match_ratio", "must lie in (0, 1)");
        }
        if !(self.genuine_upper_q >= 0.0 && self.genuine_upper_q < 1.0) {
            return bad("finger.genuine_upper_q", "must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.drop_rate) || !(0.0..=1.0).contains(&self.enrollment_noise) {
            return bad(
                "finger.drop_rate",
                "rates and noise levels must lie in [0, 1]",
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaceSimConfig {
    /// Scale applied to the mean absolute component difference.
    pub gain: f64,
    /// Feature-point jitter (standard deviation) at noise 1.
    pub capture_sigma: f64,
    /// Jitter of the demographic cue point at noise 1.
    pub cue_sigma: f64,
    /// Similarity level the impostor false-accept rate is pinned at.
    pub impostor_reference: f64,
    /// Probability that an impostor probe reaches `impostor_reference`.
    pub impostor_far: f64,
    pub enrollment_noise: f64,
}

impl Default for FaceSimConfig {
    fn default() -> Self {
        Self {
            gain: 2.0,
            capture_sigma: 0.03,
            cue_sigma: 0.3,
            impostor_reference: 0.992,
            impostor_far: 2e-6,
            enrollment_noise: 0.02,
        }
    }
}

impl FaceSimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |field, reason: &str| {
            Err(SimError::Config {
                field,
                reason: reason.to_string(),
            })
        };
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return bad("face.gain", "must be positive");
        }
        if !(self.impostor_reference > 0.0 && self.impostor_reference < 1.0) {
            return bad("face.impostor_reference", "must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.impostor_far) {
            return bad("face.impostor_far", "must lie in [0, 1]");
        }
        if self.capture_sigma < 0.0 || self.cue_sigma < 0.0 {
            return bad("face.capture_sigma", "must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemographicSimConfig {
    /// Probability mass given to the observed gender on a clean capture.
    pub clean_gender_mass: f64,
}

impl Default for DemographicSimConfig {
    fn default() -> Self {
        Self {
            clean_gender_mass: 0.969999,
        }
    }
}

impl DemographicSimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(0.5..=1.0).contains(&self.clean_gender_mass) {
            return Err(SimError::Config {
                field: "demographics.clean_gender_mass",
                reason: "must lie in [0.5, 1]".into(),
            });
        }
        Ok(())
    }
}
