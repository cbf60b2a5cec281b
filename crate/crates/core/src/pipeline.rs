//! Match and normalize one authentication attempt into a [`ModalityVector`].

use thiserror::Error;

use crate::normalize::{
    normalize_age, normalize_face, normalize_finger, normalize_gender, ModalityVector,
    NormalizeError, ThresholdPolicy,
};
use crate::sim::{
    estimate_demographics, match_face, match_finger, FaceTemplate, FingerTemplate, SimConfig,
    SimError, UserProfile,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Match(#[from] SimError),
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
}

/// Enrolled state a probe pair is compared against.
#[derive(Debug, Clone, Copy)]
pub struct Enrolled<'a> {
    pub profile: &'a UserProfile,
    pub fingers: &'a [FingerTemplate],
    pub face: &'a FaceTemplate,
}

pub fn modality_vector(
    finger_probe: &FingerTemplate,
    face_probe: &FaceTemplate,
    enrolled: Enrolled<'_>,
    policy: &ThresholdPolicy,
    sim: &SimConfig,
) -> Result<ModalityVector, PipelineError> {
    let finger_score = match_finger(finger_probe, enrolled.fingers, &sim.finger)?;
    let face_similarity = match_face(face_probe, enrolled.face, &sim.face);
    let demographics = estimate_demographics(face_probe, &sim.demographics);
    Ok(ModalityVector {
        finger: normalize_finger(finger_score, policy)?,
        face: normalize_face(face_similarity, policy)?,
        gender: normalize_gender(&demographics, enrolled.profile, policy),
        age: normalize_age(&demographics, enrolled.profile, policy),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Gender, Genuineness, ProbePayload, SimSubject};

    fn subject() -> SimSubject {
        SimSubject::new(
            UserProfile {
                user_id: "u1".into(),
                name: "Ada".into(),
                privileges: vec![],
                declared_gender: Gender::Female,
                declared_age: 36,
            },
            3,
        )
    }

    fn payloads(f: ProbePayload, g: ProbePayload) -> (FingerTemplate, FaceTemplate) {
        match (f, g) {
            (ProbePayload::Finger(f), ProbePayload::Face(g)) => (f, g),
            _ => unreachable!(),
        }
    }

    #[test]
    fn genuine_low_noise_attempt_is_all_true() {
        let cfg = SimConfig::default();
        let s = subject();
        let fingers = s.enroll_finger(&[1, 2, 3, 4], &cfg).unwrap();
        let face = s.enroll_face(5, &cfg);
        let (fp, gp) = payloads(
            s.finger_probe(Genuineness::Genuine, 0.05, 10, &cfg).payload,
            s.face_probe(&face, Genuineness::Genuine, 0.05, 11, &cfg)
                .payload,
        );
        let enrolled = Enrolled {
            profile: &s.profile,
            fingers: &fingers,
            face: &face,
        };
        let v = modality_vector(&fp, &gp, enrolled, &ThresholdPolicy::default(), &cfg).unwrap();
        assert_eq!(v, ModalityVector::new(true, true, true, true));
    }

    #[test]
    fn impostor_attempt_fails_the_biometric_modalities() {
        let cfg = SimConfig::default();
        let s = subject();
        let fingers = s.enroll_finger(&[1, 2, 3, 4], &cfg).unwrap();
        let face = s.enroll_face(5, &cfg);
        let enrolled = Enrolled {
            profile: &s.profile,
            fingers: &fingers,
            face: &face,
        };
        for seed in 0..50 {
            let (fp, gp) = payloads(
                s.finger_probe(Genuineness::Impostor, 0.05, seed, &cfg)
                    .payload,
                s.face_probe(&face, Genuineness::Impostor, 0.05, seed, &cfg)
                    .payload,
            );
            let v = modality_vector(&fp, &gp, enrolled, &ThresholdPolicy::default(), &cfg).unwrap();
            assert!(!v.finger && !v.face, "seed {seed}: {v:?}");
        }
    }
}
