//! The experiments: Fig. 8 streams, the six-user run, the Table-1 FPIR
//! check and an end-to-end walk through both servers.

use std::io::Write;

use anyhow::{ensure, Result};
use bioauth_core::ledger::{validate_chain, Chain};
use bioauth_core::normalize::{expected_fpir, ThresholdPolicy};
use bioauth_core::sim::{sample_impostor_finger_score, Gender, SimConfig};
use bioauth_core::token::{issue, signing_key};
use bioauth_server::resource::SyncOutcome;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reqwest::StatusCode;

use crate::config::{steps_to_decay, warm_up, HarnessConfig};
use crate::harness::{population, probe_seed, Harness, SampleKind, SimUser, TxRecord, AUDIENCE};

/// A run of consecutive transactions of one sample kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub kind: SampleKind,
    pub count: usize,
}

impl Segment {
    pub const fn new(kind: SampleKind, count: usize) -> Self {
        Self { kind, count }
    }
}

/// Runs the segments back to back for one enrolled user.
pub async fn run_stream(
    h: &Harness,
    user: &SimUser,
    u: usize,
    segments: &[Segment],
    seed: u64,
) -> Result<Vec<TxRecord>> {
    let mut out = Vec::new();
    for seg in segments {
        for _ in 0..seg.count {
            let i = out.len();
            out.push(
                h.transact(user, i, seg.kind, probe_seed(seed, u, i))
                    .await?,
            );
        }
    }
    Ok(out)
}

/// Property violations of a segmented stream, empty when it behaves like
/// Fig. 8: good samples hold the level at or above the gate once warm,
/// bad samples push it below within the decay window and grants stop,
/// and good samples after bad ones recover within the same window.
pub fn check_stream(
    trace: &[TxRecord],
    segments: &[Segment],
    alpha: f64,
    gate: f64,
) -> Vec<String> {
    let window = steps_to_decay(alpha, 0.2);
    let mut problems = Vec::new();
    let mut start = 0;
    for (n, seg) in segments.iter().enumerate() {
        let txs = &trace[start..start + seg.count];
        let settle = match (seg.kind, n) {
            (SampleKind::Good, 0) => warm_up(alpha),
            _ => window,
        };
        for t in txs.iter().skip(settle) {
            let ok = match seg.kind {
                SampleKind::Good => t.level >= gate && t.granted,
                SampleKind::Degraded | SampleKind::Impostor => t.level < gate && !t.granted,
            };
            if !ok {
                problems.push(format!(
                    "{} tx {} ({:?}): level {} granted {}",
                    t.user_id, t.index, seg.kind, t.level, t.granted
                ));
            }
        }
        if seg.kind != SampleKind::Good {
            let mut prev = start.checked_sub(1).map(|i| trace[i].level);
            for t in txs {
                if let Some(p) = prev {
                    if p < gate {
                        break;
                    }
                    if t.level >= p && t.fused < p {
                        problems.push(format!(
                            "{} tx {}: level did not erode ({p} -> {})",
                            t.user_id, t.index, t.level
                        ));
                    }
                }
                prev = Some(t.level);
            }
        }
        start += seg.count;
    }
    problems
}

pub fn write_csv<W: Write>(trace: &[TxRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["user_id", "transaction_index", "fused", "level", "granted"])?;
    for t in trace {
        w.write_record([
            t.user_id.clone(),
            t.index.to_string(),
            t.fused.to_string(),
            t.level.to_string(),
            t.granted.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig8Run {
    pub trace: Vec<TxRecord>,
    /// Empty unless the stream was all good or all bad.
    pub violations: Vec<String>,
}

/// Each transaction is good with probability `good_fraction`, otherwise an
/// impostor sample. Streams that are entirely good or entirely bad are
/// checked against the Fig. 8 properties.
pub async fn run_fig8(
    cfg: HarnessConfig,
    users: usize,
    transactions: usize,
    good_fraction: f64,
    seed: u64,
) -> Result<Fig8Run> {
    ensure!(
        (0.0..=1.0).contains(&good_fraction),
        "good fraction {good_fraction} outside [0, 1]"
    );
    ensure!(
        transactions >= 100,
        "fig8 needs at least 100 transactions, got {transactions}"
    );
    ensure!(users >= 1, "need at least one user");
    let h = Harness::start(cfg, seed).await?;
    let people = population(users, seed, &h.cfg.bca.sim)?;
    let mut trace = Vec::new();
    let mut violations = Vec::new();
    let mut mix = ChaCha8Rng::seed_from_u64(seed ^ 0xf1_98);
    for (u, person) in people.iter().enumerate() {
        h.enroll(person).await?;
        let kinds: Vec<SampleKind> = (0..transactions)
            .map(|_| {
                if mix.random_bool(good_fraction) {
                    SampleKind::Good
                } else {
                    SampleKind::Impostor
                }
            })
            .collect();
        let mut user_trace = Vec::with_capacity(transactions);
        for (i, kind) in kinds.iter().enumerate() {
            user_trace.push(h.transact(person, i, *kind, probe_seed(seed, u, i)).await?);
        }
        if good_fraction == 1.0 || good_fraction == 0.0 {
            let seg = [Segment::new(kinds[0], transactions)];
            violations.extend(check_stream(&user_trace, &seg, h.cfg.alpha(), h.cfg.gate()));
        }
        trace.extend(user_trace);
    }
    Ok(Fig8Run { trace, violations })
}

#[derive(Debug, Clone)]
pub struct UserOutcome {
    pub user_id: String,
    pub plan: Vec<Segment>,
    pub transactions: usize,
    /// Grant rate over the transactions after warm-up.
    pub grant_rate: f64,
    pub final_level: f64,
}

#[derive(Debug, Clone)]
pub struct SixUsersRun {
    pub users: Vec<UserOutcome>,
    pub trace: Vec<TxRecord>,
    pub ledger_transactions: usize,
    pub chains_valid: bool,
    pub violations: Vec<String>,
}

/// Sample plans for the six users: four with good samples throughout, one
/// whose samples are taken over by an impostor half way, one who only
/// ever presents an impostor's biometrics.
pub fn six_user_plans(transactions: usize) -> Vec<Vec<Segment>> {
    let half = transactions / 2;
    let good = vec![Segment::new(SampleKind::Good, transactions)];
    vec![
        good.clone(),
        good.clone(),
        good.clone(),
        good,
        vec![
            Segment::new(SampleKind::Good, half),
            Segment::new(SampleKind::Impostor, transactions - half),
        ],
        vec![Segment::new(SampleKind::Impostor, transactions)],
    ]
}

pub async fn run_six_users(
    cfg: HarnessConfig,
    transactions: usize,
    seed: u64,
) -> Result<SixUsersRun> {
    ensure!(
        transactions >= 100,
        "six-user run needs at least 100 transactions per user"
    );
    let h = Harness::start(cfg, seed).await?;
    let people = population(6, seed, &h.cfg.bca.sim)?;
    for p in &people {
        h.enroll(p).await?;
    }
    let (alpha, gate) = (h.cfg.alpha(), h.cfg.gate());
    let warm = warm_up(alpha);
    let mut users = Vec::new();
    let mut trace = Vec::new();
    let mut violations = Vec::new();
    for (u, (person, plan)) in people.iter().zip(six_user_plans(transactions)).enumerate() {
        let t = run_stream(&h, person, u, &plan, seed).await?;
        violations.extend(check_stream(&t, &plan, alpha, gate));
        let after = &t[warm..];
        users.push(UserOutcome {
            user_id: person.user_id().to_string(),
            transactions: t.len(),
            grant_rate: after.iter().filter(|r| r.granted).count() as f64 / after.len() as f64,
            final_level: t.last().map_or(0.0, |r| r.level),
            plan,
        });
        trace.extend(t);
    }

    let bca_chain = fetch_chain(&h).await?;
    let ledger_transactions = bca_chain
        .blocks()
        .iter()
        .map(|b| b.transactions.len())
        .sum();
    // Replicas only adopt chains that validate.
    let (_, replica) = h.start_replica(gate).await?;
    let chains_valid = validate_chain(&bca_chain)
        && replica
            == SyncOutcome::Adopted {
                length: bca_chain.len(),
            };
    if ledger_transactions != 6 {
        violations.push(format!(
            "expected 6 enrollment transactions, chain has {ledger_transactions}"
        ));
    }
    if !chains_valid {
        violations.push(format!("chain invalid or not replicated: {replica:?}"));
    }
    for o in &users[..4] {
        if o.grant_rate < 0.95 {
            violations.push(format!(
                "{} grant rate {} below 0.95",
                o.user_id, o.grant_rate
            ));
        }
    }
    Ok(SixUsersRun {
        users,
        trace,
        ledger_transactions,
        chains_valid,
        violations,
    })
}

async fn fetch_chain(h: &Harness) -> Result<Chain> {
    let bytes = h
        .http()
        .get(format!("{}/chain", h.bca_url))
        .send()
        .await?
        .error_for_status()?
        .bytes()
        .await?;
    Ok(Chain::from_bytes(&bytes, h.cfg.bca.difficulty)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpirReport {
    pub finger_t: u32,
    pub trials: u64,
    pub false_positives: u64,
    pub empirical: f64,
    pub analytic: f64,
    /// Binomial z-score of the count; zero when both rate and count are zero.
    pub z: f64,
}

/// Counts impostor finger scores strictly below `finger_t`.
pub fn run_fpir_check(finger_t: u32, trials: u64, seed: u64) -> FpirReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let false_positives = (0..trials)
        .filter(|_| sample_impostor_finger_score(&mut rng) < finger_t)
        .count() as u64;
    let p = expected_fpir(finger_t);
    let n = trials as f64;
    let sd = (n * p * (1.0 - p)).sqrt();
    let diff = false_positives as f64 - n * p;
    let z = if sd > 0.0 {
        diff / sd
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    FpirReport {
        finger_t,
        trials,
        false_positives,
        empirical: false_positives as f64 / n,
        analytic: p,
        z,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub step: String,
    pub expected: u16,
    pub actual: u16,
}

#[derive(Debug, Clone)]
pub struct E2eReport {
    pub verdicts: Vec<Verdict>,
}

impl E2eReport {
    pub fn mismatches(&self) -> Vec<&Verdict> {
        self.verdicts
            .iter()
            .filter(|v| v.expected != v.actual)
            .collect()
    }
}

/// Enroll, authenticate genuinely and fetch a resource, then try the same
/// with impostor probes and with a self-signed token. Every resource call
/// is made against the live resource server and against a replica that
/// synced once and never talks to the BCA again.
pub async fn run_e2e(cfg: HarnessConfig, seed: u64) -> Result<E2eReport> {
    let h = Harness::start(cfg, seed).await?;
    let sim = SimConfig::default();
    let alice = SimUser::new("alice", Gender::Female, 34, seed ^ 0xa11ce, &sim)?;
    let mut verdicts = Vec::new();
    let mut record = |step: &str, expected: StatusCode, actual: StatusCode| {
        verdicts.push(Verdict {
            step: step.into(),
            expected: expected.as_u16(),
            actual: actual.as_u16(),
        })
    };

    h.enroll(&alice).await?;
    let (replica, _) = h.start_replica(h.cfg.resource_gate).await?;
    let servers = [("live", h.rs_url.clone()), ("replica", replica)];

    h.advance(h.cfg.seconds_per_tx);
    let granted = h
        .authenticate(&h.auth_request(&alice, SampleKind::Good, probe_seed(seed, 0, 0)))
        .await?;
    record(
        "genuine authenticate",
        StatusCode::OK,
        if granted.is_ok() {
            StatusCode::OK
        } else {
            StatusCode::FORBIDDEN
        },
    );
    let token = granted.ok().map(|g| g.token);
    for (name, url) in &servers {
        record(
            &format!("{name}: genuine token"),
            StatusCode::OK,
            h.fetch_resource(url, token.as_deref()).await?,
        );
    }

    h.advance(h.cfg.seconds_per_tx);
    let denied = h
        .authenticate(&h.auth_request(&alice, SampleKind::Impostor, probe_seed(seed, 0, 1)))
        .await?;
    record(
        "impostor authenticate",
        StatusCode::FORBIDDEN,
        if denied.is_ok() {
            StatusCode::OK
        } else {
            StatusCode::FORBIDDEN
        },
    );
    let no_token = denied.ok().map(|g| g.token);
    let forged = issue(
        "alice",
        100.0,
        AUDIENCE,
        h.cfg.bca.token_ttl_seconds,
        &signing_key(&[0x66; 32]),
        &ThresholdPolicy::default(),
        h.now(),
    )?
    .to_wire();
    for (name, url) in &servers {
        record(
            &format!("{name}: impostor without token"),
            StatusCode::UNAUTHORIZED,
            h.fetch_resource(url, no_token.as_deref()).await?,
        );
        record(
            &format!("{name}: self-signed token"),
            StatusCode::UNAUTHORIZED,
            h.fetch_resource(url, Some(&forged)).await?,
        );
    }

    // After one impostor attempt two genuine ones bring the level back into
    // [80, 90): enough for a gate of 80, not for a stricter replica.
    let bob = SimUser::new("bob", Gender::Male, 58, seed ^ 0xb0b, &sim)?;
    h.enroll(&bob).await?;
    let (strict, _) = h.start_replica(90.0).await?;
    let plan = [
        SampleKind::Good,
        SampleKind::Impostor,
        SampleKind::Good,
        SampleKind::Good,
    ];
    let mut last = None;
    for (i, kind) in plan.into_iter().enumerate() {
        h.advance(h.cfg.seconds_per_tx);
        last = h
            .authenticate(&h.auth_request(&bob, kind, probe_seed(seed, 1, i)))
            .await?
            .ok();
    }
    let bob_token = last.map(|g| g.token);
    record(
        "live: recovering user",
        StatusCode::OK,
        h.fetch_resource(&h.rs_url, bob_token.as_deref()).await?,
    );
    record(
        "strict replica: recovering user",
        StatusCode::FORBIDDEN,
        h.fetch_resource(&strict, bob_token.as_deref()).await?,
    );
    Ok(E2eReport { verdicts })
}
