#![allow(dead_code)]

use std::sync::Arc;

use bioauth_core::sim::{
    FaceTemplate, FingerTemplate, Gender, Genuineness, ProbePayload, SimConfig, SimSubject,
    UserProfile,
};
use bioauth_server::api::{AuthRequest, EnrollRequest};
use bioauth_server::bca::{router, BcaService};
use bioauth_server::clock::ManualClock;
use bioauth_server::config::BcaConfig;

pub const T0: i64 = 1_700_000_000;
pub const ADMIN: &str = "test-admin";

pub struct Bca {
    pub url: String,
    pub svc: Arc<BcaService>,
    pub clock: Arc<ManualClock>,
    pub http: reqwest::Client,
}

pub fn bca_config() -> BcaConfig {
    BcaConfig {
        listen: "127.0.0.1:0".into(),
        difficulty: 4,
        admin_secret: ADMIN.into(),
        key_seed: Some(7),
        ..Default::default()
    }
}

pub async fn start_bca(cfg: BcaConfig) -> Bca {
    let clock = Arc::new(ManualClock::new(T0));
    let svc = Arc::new(BcaService::new(cfg, clock.clone()).unwrap());
    let (addr, _) = bioauth_server::spawn(router(svc.clone()), "127.0.0.1:0")
        .await
        .unwrap();
    Bca {
        url: format!("http://{addr}"),
        svc,
        clock,
        http: reqwest::Client::new(),
    }
}

pub struct Person {
    pub subject: SimSubject,
    pub fingers: Vec<FingerTemplate>,
    pub face: FaceTemplate,
}

pub fn person(user_id: &str, gender: Gender, age: u32, seed: u64) -> Person {
    let cfg = SimConfig::default();
    let subject = SimSubject::new(
        UserProfile {
            user_id: user_id.into(),
            name: format!("Subject {user_id}"),
            privileges: vec!["read".into()],
            declared_gender: gender,
            declared_age: age,
        },
        seed,
    );
    let fingers = subject.enroll_finger(&[1, 2, 3, 4], &cfg).unwrap();
    let face = subject.enroll_face(5, &cfg);
    Person {
        subject,
        fingers,
        face,
    }
}

impl Person {
    pub fn enroll_request(&self) -> EnrollRequest {
        EnrollRequest {
            profile: self.subject.profile.clone(),
            finger_scans: self.fingers.clone(),
            face_capture: self.face.clone(),
        }
    }

    fn finger(&self, seed: u64) -> FingerTemplate {
        match self
            .subject
            .finger_probe(Genuineness::Genuine, 0.05, seed, &SimConfig::default())
            .payload
        {
            ProbePayload::Finger(f) => f,
            ProbePayload::Face(_) => unreachable!(),
        }
    }

    fn own_face(&self, seed: u64) -> FaceTemplate {
        match self
            .subject
            .face_probe(
                &self.face,
                Genuineness::Genuine,
                0.05,
                seed,
                &SimConfig::default(),
            )
            .payload
        {
            ProbePayload::Face(f) => f,
            ProbePayload::Finger(_) => unreachable!(),
        }
    }

    /// Genuine finger and face: vector (T,T,T,T), fused 100.
    pub fn genuine(&self, seed: u64, audience: &str) -> AuthRequest {
        AuthRequest {
            user_id: self.subject.profile.user_id.clone(),
            finger_probe: self.finger(seed),
            face_probe: self.own_face(seed),
            audience: audience.into(),
        }
    }

    /// Genuine finger, someone else's face of the other gender and a far
    /// age: vector (T,F,F,F), fused 40.
    pub fn finger_only(&self, seed: u64, audience: &str) -> AuthRequest {
        let p = &self.subject.profile;
        let other = person(
            "stranger",
            p.declared_gender.opposite(),
            p.declared_age + 40,
            seed ^ 0xdead,
        );
        AuthRequest {
            user_id: p.user_id.clone(),
            finger_probe: self.finger(seed),
            face_probe: other.own_face(seed),
            audience: audience.into(),
        }
    }
}
