mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use bioauth_core::normalize::ThresholdPolicy;
use bioauth_core::sim::Gender;
use bioauth_core::token::{issue, signing_key, AccessToken};
use bioauth_server::api::AuthGranted;
use bioauth_server::clock::ManualClock;
use bioauth_server::config::ResourceConfig;
use bioauth_server::resource::{router, ResourceService, SyncOutcome};
use common::*;
use reqwest::StatusCode;
use serde_json::json;

struct Rs {
    url: String,
    svc: Arc<ResourceService>,
}

fn rs_config(bca: &Bca, gate: f64) -> ResourceConfig {
    ResourceConfig {
        id: "rs".into(),
        gate,
        bca_endpoint: bca.url.clone(),
        difficulty: 4,
        sync_interval_seconds: 0,
        resources: BTreeMap::from([("doc".to_string(), json!({"title": "quarterly report"}))]),
        ..Default::default()
    }
}

async fn start_rs(svc: ResourceService) -> Rs {
    let svc = Arc::new(svc);
    let (addr, _) = bioauth_server::spawn(router(svc.clone()), "127.0.0.1:0")
        .await
        .unwrap();
    Rs {
        url: format!("http://{addr}"),
        svc,
    }
}

async fn token_for(b: &Bca, req: &bioauth_server::api::AuthRequest) -> String {
    let r = b
        .http
        .post(format!("{}/authenticate", b.url))
        .json(req)
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    r.json::<AuthGranted>().await.unwrap().token
}

async fn fetch(
    http: &reqwest::Client,
    rs: &Rs,
    id: &str,
    token: Option<&str>,
) -> (StatusCode, String) {
    let mut req = http.get(format!("{}/resource/{id}", rs.url));
    if let Some(t) = token {
        req = req.bearer_auth(t);
    }
    let r = req.send().await.unwrap();
    (r.status(), r.text().await.unwrap())
}

#[tokio::test]
async fn verdicts_follow_verification_and_local_gate() {
    let b = start_bca(bca_config()).await;
    let p = person("u1", Gender::Female, 29, 11);
    b.svc.enroll(p.enroll_request()).unwrap();
    b.clock.advance(1);
    let full = token_for(&b, &p.genuine(1, "rs")).await;

    let clock = b.clock.clone();
    let lenient = start_rs(ResourceService::new(rs_config(&b, 80.0), clock.clone())).await;
    let strict = start_rs(ResourceService::new(rs_config(&b, 90.0), clock.clone())).await;
    assert_eq!(
        lenient.svc.sync_ledger().await,
        SyncOutcome::Adopted { length: 1 }
    );
    strict.svc.sync_ledger().await;

    let (s, body) = fetch(&b.http, &lenient, "doc", Some(&full)).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(
        serde_json::from_str::<serde_json::Value>(&body).unwrap()["title"],
        "quarterly report"
    );
    assert_eq!(
        fetch(&b.http, &lenient, "missing", Some(&full)).await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        fetch(&b.http, &lenient, "doc", None).await.0,
        StatusCode::UNAUTHORIZED
    );
    assert_eq!(
        fetch(&b.http, &lenient, "doc", Some("garbage")).await.0,
        StatusCode::UNAUTHORIZED
    );

    // Level 82 clears the BCA gate of 80 but not a local gate of 90.
    b.clock.advance(1);
    let eighty_two = token_for(&b, &p.finger_only(2, "rs")).await;
    assert_eq!(
        fetch(&b.http, &lenient, "doc", Some(&eighty_two)).await.0,
        StatusCode::OK
    );
    let (s, body) = fetch(&b.http, &strict, "doc", Some(&eighty_two)).await;
    assert_eq!(s, StatusCode::FORBIDDEN);
    assert!(!body.contains("82"), "denial leaked the level: {body}");

    // Wrong audience.
    let other = token_for(&b, &p.genuine(3, "elsewhere")).await;
    assert_eq!(
        fetch(&b.http, &lenient, "doc", Some(&other)).await.0,
        StatusCode::UNAUTHORIZED
    );

    // Same claims, signed by a key the ledger never saw.
    let claims = AccessToken::from_wire(&full).unwrap().claims;
    let forged = issue(
        &claims.user_id,
        100.0,
        "rs",
        300,
        &signing_key(&[9; 32]),
        &ThresholdPolicy::default(),
        claims.issued_at,
    )
    .unwrap();
    assert_eq!(
        fetch(&b.http, &lenient, "doc", Some(&forged.to_wire()))
            .await
            .0,
        StatusCode::UNAUTHORIZED
    );

    // Expiry: valid through expires_at, rejected one second after.
    let fresh = token_for(&b, &p.genuine(4, "rs")).await;
    b.clock.advance(300);
    assert_eq!(
        fetch(&b.http, &lenient, "doc", Some(&fresh)).await.0,
        StatusCode::OK
    );
    b.clock.advance(1);
    assert_eq!(
        fetch(&b.http, &lenient, "doc", Some(&fresh)).await.0,
        StatusCode::UNAUTHORIZED
    );
}

#[tokio::test]
async fn unknown_user_triggers_one_resync() {
    let b = start_bca(bca_config()).await;
    let rs = start_rs(ResourceService::new(rs_config(&b, 80.0), b.clock.clone())).await;
    assert_eq!(
        rs.svc.sync_ledger().await,
        SyncOutcome::KeptLocal { length: 0 }
    );

    let p = person("late", Gender::Male, 61, 12);
    b.svc.enroll(p.enroll_request()).unwrap();
    b.clock.advance(1);
    let t = token_for(&b, &p.genuine(1, "rs")).await;
    assert_eq!(fetch(&b.http, &rs, "doc", Some(&t)).await.0, StatusCode::OK);
    assert_eq!(rs.svc.chain().snapshot().len(), 1);
}

#[tokio::test]
async fn never_synced_replica_without_sync_rejects() {
    let b = start_bca(bca_config()).await;
    let p = person("u1", Gender::Female, 22, 13);
    b.svc.enroll(p.enroll_request()).unwrap();
    b.clock.advance(1);
    let t = token_for(&b, &p.genuine(1, "rs")).await;
    let rs =
        start_rs(ResourceService::new(rs_config(&b, 0.0), b.clock.clone()).without_sync()).await;
    assert_eq!(
        fetch(&b.http, &rs, "doc", Some(&t)).await.0,
        StatusCode::UNAUTHORIZED
    );
    assert!(rs.svc.chain().snapshot().is_empty());
}

#[tokio::test]
async fn tampered_or_unreachable_remote_keeps_local_chain() {
    let b = start_bca(bca_config()).await;
    for (i, id) in ["a", "b", "c", "d", "e"].iter().enumerate() {
        b.svc
            .enroll(person(id, Gender::Male, 30, i as u64).enroll_request())
            .unwrap();
    }
    let rs = ResourceService::new(rs_config(&b, 80.0), b.clock.clone());
    assert_eq!(rs.sync_ledger().await, SyncOutcome::Adopted { length: 5 });

    let mut bytes = b.svc.chain_bytes();
    b.svc
        .enroll(person("f", Gender::Male, 30, 9).enroll_request())
        .unwrap();
    let mut longer = b.svc.chain_bytes();
    let last = longer.len() - 40;
    longer[last] ^= 0x10;
    assert_eq!(
        rs.sync_from_bytes(&longer),
        SyncOutcome::RemoteInvalid { length: 5 }
    );
    bytes.truncate(bytes.len() - 3);
    assert_eq!(
        rs.sync_from_bytes(&bytes),
        SyncOutcome::RemoteInvalid { length: 5 }
    );
    assert_eq!(rs.chain().snapshot().len(), 5);

    let offline = ResourceService::new(
        ResourceConfig {
            bca_endpoint: "http://127.0.0.1:9".into(),
            ..rs_config(&b, 80.0)
        },
        Arc::new(ManualClock::new(T0)),
    );
    assert!(matches!(
        offline.sync_ledger().await,
        SyncOutcome::Unreachable(_)
    ));
}

#[tokio::test]
async fn periodic_sync_picks_up_new_blocks() {
    let b = start_bca(bca_config()).await;
    let rs = Arc::new(ResourceService::new(
        ResourceConfig {
            sync_interval_seconds: 1,
            ..rs_config(&b, 80.0)
        },
        b.clock.clone(),
    ));
    let handle = rs.spawn_sync_loop().unwrap();
    b.svc
        .enroll(person("u1", Gender::Male, 30, 1).enroll_request())
        .unwrap();
    let deadline = std::time::Instant::now() + std::time::Duration::from_secs(5);
    while rs.chain().snapshot().is_empty() {
        assert!(
            std::time::Instant::now() < deadline,
            "replica never caught up"
        );
        tokio::time::sleep(std::time::Duration::from_millis(50)).await;
    }
    handle.abort();
}
