//! In-process BCA and resource servers plus an HTTP client that talks to
//! them only through their public APIs.

use std::sync::Arc;

use anyhow::{bail, Context, Result};
use bioauth_core::sim::{
    FaceTemplate, FingerTemplate, Gender, Genuineness, ProbePayload, SimConfig, SimSubject,
    UserProfile,
};
use bioauth_server::api::{
    AuthDenied, AuthGranted, AuthRequest, ConfidenceSummary, EnrollRequest, EnrollResponse,
};
use bioauth_server::bca::{self, BcaService};
use bioauth_server::clock::ManualClock;
use bioauth_server::resource::{self, ResourceService, SyncOutcome};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reqwest::StatusCode;

use crate::config::HarnessConfig;

/// Simulated wall-clock start (2023-11-14T22:13:20Z).
pub const EPOCH: i64 = 1_700_000_000;
pub const AUDIENCE: &str = "rs-main";
pub const DOC: &str = "doc";

/// Informal "good"/"bad" samples made concrete.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    /// Genuine capture at the configured low noise.
    Good,
    /// Genuine capture at full noise.
    Degraded,
    /// Someone else's finger and face.
    Impostor,
}

pub struct Harness {
    pub cfg: HarnessConfig,
    pub bca_url: String,
    pub rs_url: String,
    clock: Arc<ManualClock>,
    rs: Arc<ResourceService>,
    http: reqwest::Client,
}

/// What one authentication transaction looked like from the outside.
#[derive(Debug, Clone, PartialEq)]
pub struct TxRecord {
    pub user_id: String,
    pub index: usize,
    pub kind: SampleKind,
    pub fused: f64,
    pub level: f64,
    /// The resource server returned the document.
    pub granted: bool,
    /// Status code the resource server answered with.
    pub resource_status: u16,
}

pub struct SimUser {
    pub subject: SimSubject,
    fingers: Vec<FingerTemplate>,
    face: FaceTemplate,
}

impl SimUser {
    pub fn new(
        user_id: &str,
        gender: Gender,
        age: u32,
        seed: u64,
        sim: &SimConfig,
    ) -> Result<Self> {
        let subject = SimSubject::new(
            UserProfile {
                user_id: user_id.into(),
                name: format!("Simulated {user_id}"),
                privileges: vec!["reader".into()],
                declared_gender: gender,
                declared_age: age,
            },
            seed,
        );
        let base = seed.wrapping_mul(1_000);
        let fingers = subject.enroll_finger(&[base + 1, base + 2, base + 3, base + 4], sim)?;
        let face = subject.enroll_face(base + 5, sim);
        Ok(Self {
            subject,
            fingers,
            face,
        })
    }

    pub fn user_id(&self) -> &str {
        &self.subject.profile.user_id
    }

    fn enroll_request(&self) -> EnrollRequest {
        EnrollRequest {
            profile: self.subject.profile.clone(),
            finger_scans: self.fingers.clone(),
            face_capture: self.face.clone(),
        }
    }

    fn probes(
        &self,
        kind: SampleKind,
        seed: u64,
        cfg: &HarnessConfig,
    ) -> (FingerTemplate, FaceTemplate) {
        let (g, noise) = match kind {
            SampleKind::Good => (Genuineness::Genuine, cfg.good_noise),
            SampleKind::Degraded => (Genuineness::Degraded, cfg.degraded_noise),
            SampleKind::Impostor => (Genuineness::Impostor, cfg.good_noise),
        };
        let sim = &cfg.bca.sim;
        let finger = match self.subject.finger_probe(g, noise, seed, sim).payload {
            ProbePayload::Finger(f) => f,
            ProbePayload::Face(_) => unreachable!("finger_probe yields a finger"),
        };
        let face = match self
            .subject
            .face_probe(&self.face, g, noise, seed ^ 0x5eed, sim)
            .payload
        {
            ProbePayload::Face(f) => f,
            ProbePayload::Finger(_) => unreachable!("face_probe yields a face"),
        };
        (finger, face)
    }
}

/// Deterministic user population: alternating genders, ages spread over 20..70.
pub fn population(count: usize, seed: u64, sim: &SimConfig) -> Result<Vec<SimUser>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7075_6c61);
    (0..count)
        .map(|i| {
            let gender = if i % 2 == 0 {
                Gender::Female
            } else {
                Gender::Male
            };
            let age = rng.random_range(20..=70);
            SimUser::new(&format!("user{:02}", i + 1), gender, age, rng.random(), sim)
        })
        .collect()
}

impl Harness {
    /// Starts both servers on ephemeral localhost ports. Signing keys are
    /// derived from `seed` so that runs are reproducible.
    pub async fn start(mut cfg: HarnessConfig, seed: u64) -> Result<Self> {
        cfg.bca.key_seed = Some(seed);
        let clock = Arc::new(ManualClock::new(EPOCH));
        let bca_svc = Arc::new(BcaService::new(cfg.bca.clone(), clock.clone())?);
        let (bca_addr, _) = bioauth_server::spawn(bca::router(bca_svc), "127.0.0.1:0").await?;
        let bca_url = format!("http://{bca_addr}");

        let rs = Arc::new(ResourceService::new(
            cfg.resource_config(&bca_url),
            clock.clone(),
        ));
        let (rs_addr, _) =
            bioauth_server::spawn(resource::router(rs.clone()), "127.0.0.1:0").await?;
        Ok(Self {
            cfg,
            bca_url,
            rs_url: format!("http://{rs_addr}"),
            clock,
            rs,
            http: reqwest::Client::new(),
        })
    }

    pub fn http(&self) -> &reqwest::Client {
        &self.http
    }

    pub fn now(&self) -> i64 {
        use bioauth_server::clock::Clock;
        self.clock.now()
    }

    pub fn advance(&self, secs: i64) {
        self.clock.advance(secs);
    }

    /// Starts an extra resource server that syncs once from the BCA and
    /// then only ever trusts its own replica.
    pub async fn start_replica(&self, gate: f64) -> Result<(String, SyncOutcome)> {
        let mut rcfg = self.cfg.resource_config(&self.bca_url);
        rcfg.gate = gate;
        let svc = ResourceService::new(rcfg, self.clock.clone());
        let outcome = svc.sync_ledger().await;
        let svc = Arc::new(svc.without_sync());
        let (addr, _) = bioauth_server::spawn(resource::router(svc), "127.0.0.1:0").await?;
        Ok((format!("http://{addr}"), outcome))
    }

    pub async fn sync_resource_server(&self) -> SyncOutcome {
        self.rs.sync_ledger().await
    }

    pub async fn enroll(&self, user: &SimUser) -> Result<EnrollResponse> {
        let r = self
            .http
            .post(format!("{}/enroll", self.bca_url))
            .json(&user.enroll_request())
            .send()
            .await?;
        if r.status() != StatusCode::CREATED {
            bail!(
                "enroll {} failed: {} {}",
                user.user_id(),
                r.status(),
                r.text().await?
            );
        }
        Ok(r.json().await?)
    }

    /// POST /authenticate. `Ok(Ok(granted))` or `Ok(Err(denied))`.
    pub async fn authenticate(&self, req: &AuthRequest) -> Result<Result<AuthGranted, AuthDenied>> {
        let r = self
            .http
            .post(format!("{}/authenticate", self.bca_url))
            .json(req)
            .send()
            .await?;
        match r.status() {
            StatusCode::OK => Ok(Ok(r.json().await?)),
            StatusCode::FORBIDDEN => Ok(Err(r.json().await?)),
            s => bail!(
                "authenticate {}: unexpected {s}: {}",
                req.user_id,
                r.text().await?
            ),
        }
    }

    pub fn auth_request(&self, user: &SimUser, kind: SampleKind, seed: u64) -> AuthRequest {
        let (finger_probe, face_probe) = user.probes(kind, seed, &self.cfg);
        AuthRequest {
            user_id: user.user_id().to_string(),
            finger_probe,
            face_probe,
            audience: AUDIENCE.into(),
        }
    }

    pub async fn latest_point(&self, user_id: &str) -> Result<ConfidenceSummary> {
        let r = self
            .http
            .get(format!("{}/confidence/{user_id}?limit=1", self.bca_url))
            .send()
            .await?
            .error_for_status()?;
        Ok(r.json().await?)
    }

    /// GET /resource/{DOC} on `base` with an optional bearer token.
    pub async fn fetch_resource(&self, base: &str, token: Option<&str>) -> Result<StatusCode> {
        let mut req = self.http.get(format!("{base}/resource/{DOC}"));
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        Ok(req.send().await?.status())
    }

    /// One full transaction: authenticate, read back the fused score, and
    /// present whatever token was issued to the resource server.
    pub async fn transact(
        &self,
        user: &SimUser,
        index: usize,
        kind: SampleKind,
        seed: u64,
    ) -> Result<TxRecord> {
        self.advance(self.cfg.seconds_per_tx);
        let req = self.auth_request(user, kind, seed);
        let outcome = self.authenticate(&req).await?;
        let token = outcome.as_ref().ok().map(|g| g.token.clone());
        let status = self.fetch_resource(&self.rs_url, token.as_deref()).await?;
        let summary = self.latest_point(user.user_id()).await?;
        let point = summary
            .recent
            .last()
            .context("confidence history is empty after an attempt")?;
        Ok(TxRecord {
            user_id: user.user_id().to_string(),
            index,
            kind,
            fused: point.fused,
            level: point.level,
            granted: status == StatusCode::OK,
            resource_status: status.as_u16(),
        })
    }
}

/// Probe seed for transaction `index` of user `u`, independent of run order.
pub fn probe_seed(seed: u64, u: usize, index: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ ((u as u64) << 32) ^ index as u64
}
