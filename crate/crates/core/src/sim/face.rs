use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DemographicSimConfig, FaceSimConfig, Gender, SimError};
use crate::codec::{ByteReader, ByteWriter, DecodeError};

pub const FACE_FEATURE_POINTS: usize = 70;
pub const FACE_FEATURE_LEN: usize = FACE_FEATURE_POINTS * 2;

// The last feature point carries the demographic cue read by the estimator:
// x encodes gender (0.25 female, 0.75 male), y encodes age / 120.
const CUE_X: usize = FACE_FEATURE_LEN - 2;
const CUE_Y: usize = FACE_FEATURE_LEN - 1;
const AGE_SCALE: f64 = 120.0;

/// Normalized coordinates of the facial feature points, `[x0, y0, x1, y1, ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FaceTemplate {
    features: Vec<f64>,
}

impl TryFrom<Vec<f64>> for FaceTemplate {
    type Error = SimError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        FaceTemplate::new(v)
    }
}

impl From<FaceTemplate> for Vec<f64> {
    fn from(t: FaceTemplate) -> Self {
        t.features
    }
}

impl FaceTemplate {
    pub fn new(features: Vec<f64>) -> Result<Self, SimError> {
        if features.len() != FACE_FEATURE_LEN {
            return Err(SimError::TemplateShape(format!(
                "face template has {} components, expected {FACE_FEATURE_LEN}",
                features.len()
            )));
        }
        if let Some((i, v)) = features
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(SimError::TemplateShape(format!(
                "component {i} = {v} outside [0, 1]"
            )));
        }
        Ok(Self { features })
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.len(self.features.len());
        for &f in &self.features {
            w.f64(f);
        }
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = ByteReader::new(bytes);
        let n = r.len(8)?;
        let features = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        r.finish()?;
        Self::new(features).map_err(|_| DecodeError::InvalidValue {
            field: "face template",
            value: n as u64,
        })
    }
}

/// A simulated face with its true demographics.
#[derive(Debug, Clone)]
pub struct FaceSource {
    seed: u64,
    gender: Gender,
    age: u32,
}

impl FaceSource {
    pub fn new(seed: u64, gender: Gender, age: u32) -> Self {
        Self { seed, gender, age }
    }

    pub(crate) fn seed(&self) -> u64 {
        self.seed
    }

    fn base(&self) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut v: Vec<f64> = (0..FACE_FEATURE_LEN)
            .map(|_| rng.random_range(0.15..0.85))
            .collect();
        v[CUE_X] = match self.gender {
            Gender::Male => 0.75,
            Gender::Female => 0.25,
        };
        v[CUE_Y] = self.age as f64 / AGE_SCALE;
        v
    }

    /// One capture at the given noise level; noise 0 reproduces the base face.
    pub fn capture(&self, noise: f64, seed: u64, cfg: &FaceSimConfig) -> FaceTemplate {
        let noise = noise.clamp(0.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ self.seed.rotate_left(29));
        let geometry = Normal::new(0.0, noise * cfg.capture_sigma).expect("finite sigma");
        let cue = Normal::new(0.0, noise * cfg.cue_sigma).expect("finite sigma");
        let features = self
            .base()
            .into_iter()
            .enumerate()
            .map(|(i, f)| {
                let jitter = if i >= CUE_X {
                    cue.sample(&mut rng)
                } else {
                    geometry.sample(&mut rng)
                };
                (f + jitter).clamp(0.0, 1.0)
            })
            .collect();
        FaceTemplate::new(features).expect("capture clamps into [0, 1]")
    }
}

/// `1 - clamp(gain * mean|probe - enrolled|, 0, 1)`; match iff similarity >= T.
pub fn match_face(probe: &FaceTemplate, enrolled: &FaceTemplate, cfg: &FaceSimConfig) -> f64 {
    let mad = probe
        .features
        .iter()
        .zip(&enrolled.features)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / FACE_FEATURE_LEN as f64;
    1.0 - (cfg.gain * mad).clamp(0.0, 1.0)
}

/// Similarity an impostor attempt lands at: piecewise uniform with mass
/// `impostor_far` on `[impostor_reference, 1)` and the rest below it.
pub fn draw_impostor_similarity<R: Rng + ?Sized>(rng: &mut R, cfg: &FaceSimConfig) -> f64 {
    let u: f64 = rng.random();
    let (r, far) = (cfg.impostor_reference, cfg.impostor_far);
    if u < far {
        r + (1.0 - r) * (u / far)
    } else {
        r * (u - far) / (1.0 - far)
    }
}

/// Builds a probe whose similarity to `enrolled` is a fresh impostor draw.
/// Exact whenever `(1 - s) / gain <= 0.5`, which the default gain of 2
/// guarantees; otherwise components saturate and the similarity comes out
/// higher than drawn.
pub(crate) fn impostor_probe<R: Rng + ?Sized>(
    enrolled: &FaceTemplate,
    rng: &mut R,
    cfg: &FaceSimConfig,
) -> FaceTemplate {
    let s = draw_impostor_similarity(rng, cfg);
    let d = (1.0 - s) / cfg.gain;
    let features = enrolled
        .features
        .iter()
        .map(|&e| {
            let up = e + d <= 1.0;
            let down = e - d >= 0.0;
            match (up, down) {
                (true, true) => {
                    if rng.random_bool(0.5) {
                        e + d
                    } else {
                        e - d
                    }
                }
                (true, false) => e + d,
                (false, true) => e - d,
                (false, false) => {
                    if e < 0.5 {
                        1.0
                    } else {
                        0.0
                    }
                }
            }
        })
        .collect();
    FaceTemplate::new(features).expect("offsets stay inside [0, 1]")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenderProbs {
    pub male: f64,
    pub female: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemographicEstimate {
    pub gender_probs: GenderProbs,
    pub age_estimate: u32,
}

impl DemographicEstimate {
    pub fn prob_of(&self, gender: Gender) -> f64 {
        match gender {
            Gender::Male => self.gender_probs.male,
            Gender::Female => self.gender_probs.female,
        }
    }

    pub fn likely_gender(&self) -> Gender {
        if self.gender_probs.male >= self.gender_probs.female {
            Gender::Male
        } else {
            Gender::Female
        }
    }
}

/// Age and gender read from the probe's demographic cue. A clean capture of
/// a male face yields `{male: clean_gender_mass, female: 1 - clean_gender_mass}`
/// and its exact age; capture noise moves the cue and with it both outputs.
pub fn estimate_demographics(
    probe: &FaceTemplate,
    cfg: &DemographicSimConfig,
) -> DemographicEstimate {
    let c = ((probe.features[CUE_X] - 0.25) / 0.5).clamp(0.0, 1.0);
    let m = cfg.clean_gender_mass;
    let male = (1.0 - m) + (2.0 * m - 1.0) * c;
    let age = (probe.features[CUE_Y] * AGE_SCALE)
        .round()
        .clamp(1.0, AGE_SCALE) as u32;
    DemographicEstimate {
        gender_probs: GenderProbs {
            male,
            female: 1.0 - male,
        },
        age_estimate: age,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn face(seed: u64, gender: Gender, age: u32) -> FaceSource {
        FaceSource::new(seed, gender, age)
    }

    #[test]
    fn identical_templates_score_one() {
        let t = face(1, Gender::Male, 30).capture(0.2, 5, &FaceSimConfig::default());
        assert_eq!(match_face(&t, &t, &FaceSimConfig::default()), 1.0);
    }

    #[test]
    fn maximally_distant_templates_clamp_to_zero() {
        let zeros = FaceTemplate::new(vec![0.0; FACE_FEATURE_LEN]).unwrap();
        let ones = FaceTemplate::new(vec![1.0; FACE_FEATURE_LEN]).unwrap();
        for gain in [1.0, 2.0, 7.5] {
            let cfg = FaceSimConfig {
                gain,
                ..Default::default()
            };
            assert_eq!(match_face(&zeros, &ones, &cfg), 0.0);
        }
    }

    #[test]
    fn wrong_length_is_a_shape_error() {
        assert!(matches!(
            FaceTemplate::new(vec![0.5; 139]),
            Err(SimError::TemplateShape(_))
        ));
        assert!(matches!(
            FaceTemplate::new(vec![0.5; 141]),
            Err(SimError::TemplateShape(_))
        ));
        let mut v = vec![0.5; FACE_FEATURE_LEN];
        v[3] = f64::NAN;
        assert!(FaceTemplate::new(v).is_err());
    }

    #[test]
    fn clean_male_capture_reports_published_probabilities() {
        let t = face(3, Gender::Male, 40).capture(0.0, 1, &FaceSimConfig::default());
        let est = estimate_demographics(&t, &DemographicSimConfig::default());
        assert!((est.gender_probs.male - 0.969999).abs() < 1e-9);
        assert!((est.gender_probs.female - 0.030001).abs() < 1e-9);
        assert!((est.gender_probs.male + est.gender_probs.female - 1.0).abs() < 1e-9);
    }

    #[test]
    fn clean_capture_age_within_two_years() {
        for age in [1, 17, 40, 63, 120] {
            let t =
                face(age as u64, Gender::Female, age).capture(0.0, 9, &FaceSimConfig::default());
            let est = estimate_demographics(&t, &DemographicSimConfig::default());
            assert!(
                est.age_estimate.abs_diff(age) <= 2,
                "age {age} -> {}",
                est.age_estimate
            );
        }
    }

    #[test]
    fn genuine_low_noise_capture_clears_face_threshold() {
        let cfg = FaceSimConfig::default();
        let src = face(77, Gender::Female, 28);
        let enrolled = src.capture(cfg.enrollment_noise, 0, &cfg);
        for s in 1..100 {
            assert!(match_face(&src.capture(0.05, s, &cfg), &enrolled, &cfg) >= 0.992);
        }
    }

    #[test]
    fn impostor_probe_lands_on_the_drawn_similarity() {
        let cfg = FaceSimConfig::default();
        let enrolled = face(5, Gender::Male, 50).capture(0.0, 0, &cfg);
        for seed in 0..2000u64 {
            let mut a = ChaCha8Rng::seed_from_u64(seed);
            let mut b = a.clone();
            let drawn = draw_impostor_similarity(&mut a, &cfg);
            let probe = impostor_probe(&enrolled, &mut b, &cfg);
            assert!((match_face(&probe, &enrolled, &cfg) - drawn).abs() < 1e-9);
        }
    }
}
