use bioauth_core::ledger::{
    leading_zero_bits, lookup_key, validate_chain, validate_chain_bytes, Chain, LedgerTransaction,
};
use bioauth_core::normalize::ThresholdPolicy;
use bioauth_core::token::{issue, public_key, signing_key, verify, AccessToken, TokenError};
use proptest::prelude::*;
use sha2::{Digest, Sha256};

fn tx(user: &str, key: [u8; 32], start: i64) -> LedgerTransaction {
    LedgerTransaction {
        user_id: user.into(),
        timestamp: start,
        key,
        start_date: start,
        end_date: start + 1_000_000,
    }
}

fn ten_block_chain(difficulty: u32) -> Chain {
    let mut c = Chain::new(difficulty);
    for i in 0..10u8 {
        c.mine_block(vec![tx(&format!("user-{i}"), [i; 32], i as i64 * 10)])
            .unwrap();
    }
    c
}

/// Hand-assembled block preimage hashed with an independent SHA-256 call.
#[test]
fn block_hash_matches_reference_preimage() {
    let mut c = Chain::new(8);
    let t = tx("alice", [0xaa; 32], 1_700_000_000);
    let b = c.mine_block(vec![t.clone()]).unwrap().clone();

    let mut pre = Vec::new();
    pre.extend_from_slice(&0u64.to_le_bytes());
    pre.extend_from_slice(&[0u8; 32]);
    pre.extend_from_slice(&1u32.to_le_bytes());
    pre.extend_from_slice(&5u32.to_le_bytes());
    pre.extend_from_slice(b"alice");
    pre.extend_from_slice(&t.timestamp.to_le_bytes());
    pre.extend_from_slice(&t.key);
    pre.extend_from_slice(&t.start_date.to_le_bytes());
    pre.extend_from_slice(&t.end_date.to_le_bytes());
    pre.extend_from_slice(&b.nonce.to_le_bytes());
    let reference: [u8; 32] = Sha256::digest(&pre).into();

    assert_eq!(reference, b.hash);
    assert_eq!(reference[0], 0);
    // no smaller nonce satisfies the target
    for n in 0..b.nonce {
        let mut p = pre.clone();
        let len = p.len();
        p[len - 8..].copy_from_slice(&n.to_le_bytes());
        assert_ne!(Sha256::digest(&p)[0], 0);
    }
}

#[test]
fn mean_nonce_attempts_track_two_to_the_difficulty() {
    for d in [4u32, 8, 12] {
        let mut c = Chain::new(d);
        let blocks = if d == 12 { 24 } else { 64 };
        let mut attempts = 0u64;
        for i in 0..blocks {
            let b = c
                .mine_block(vec![tx("m", [i as u8; 32], i as i64)])
                .unwrap();
            assert!(leading_zero_bits(&b.hash) >= d);
            attempts += b.nonce + 1;
        }
        let mean = attempts as f64 / blocks as f64;
        let expected = (1u64 << d) as f64;
        assert!(
            mean > expected / 2.0 && mean < expected * 2.0,
            "d={d}: mean {mean}"
        );
    }
}

#[test]
fn difficulty_is_enforced_on_validation() {
    let c = ten_block_chain(4);
    assert!(validate_chain(&c));
    let stricter = Chain::from_bytes(&c.to_bytes(), 40).unwrap();
    assert!(!validate_chain(&stricter));
}

#[test]
fn lookup_is_pure() {
    let c = ten_block_chain(0);
    assert_eq!(lookup_key(&c, "user-3", 35), lookup_key(&c, "user-3", 35));
    assert_eq!(lookup_key(&c, "user-3", 35).unwrap(), [3; 32]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn any_single_bit_flip_invalidates_the_chain(bit in 0usize..(10 * 8 * 300)) {
        let c = ten_block_chain(4);
        let mut bytes = c.to_bytes();
        let bit = bit % (bytes.len() * 8);
        bytes[bit / 8] ^= 1 << (bit % 8);
        prop_assert!(!validate_chain_bytes(&bytes, 4));
    }

    #[test]
    fn issue_verify_round_trip(
        secret in any::<[u8; 32]>(),
        user in "[a-z0-9]{1,12}",
        audience in "[a-z0-9-]{0,12}",
        confidence in 80.0f64..=100.0,
        now in 0i64..1_000_000,
        ttl in 1i64..10_000,
    ) {
        let key = signing_key(&secret);
        let mut chain = Chain::new(0);
        chain.mine_block(vec![tx(&user, public_key(&key), 0)]).unwrap();
        let t = issue(&user, confidence, &audience, ttl, &key, &ThresholdPolicy::default(), now).unwrap();
        let claims = verify(&t, &chain, now + ttl).unwrap();
        prop_assert_eq!(claims.user_id, user);
        prop_assert_eq!(claims.confidence, confidence);
        prop_assert_eq!(claims.audience, audience);
        prop_assert_eq!(claims.issued_at, now);
        prop_assert_eq!(claims.expires_at, now + ttl);
    }

    #[test]
    fn signature_and_confidence_mutations_are_forgeries(
        bit in 0usize..(64 * 8 + 64),
    ) {
        let key = signing_key(&[3; 32]);
        let mut chain = Chain::new(0);
        chain.mine_block(vec![tx("u1", public_key(&key), 0)]).unwrap();
        let t = issue("u1", 85.0, "rs", 300, &key, &ThresholdPolicy::default(), 10).unwrap();
        let mut bytes = t.to_bytes();
        let claims_len = t.claims.to_bytes().len();
        // confidence occupies the 8 bytes after the user id ("u1": 4 + 2)
        let offset = if bit < 64 { 6 * 8 + bit } else { (claims_len * 8) + (bit - 64) };
        bytes[offset / 8] ^= 1 << (offset % 8);
        let mutated = AccessToken::from_bytes(&bytes).unwrap();
        prop_assert_eq!(verify(&mutated, &chain, 10), Err(TokenError::Forgery));
    }

    #[test]
    fn foreign_signers_are_rejected(secret in any::<[u8; 32]>()) {
        prop_assume!(secret != [3; 32]);
        let anchored = signing_key(&[3; 32]);
        let mut chain = Chain::new(0);
        chain.mine_block(vec![tx("u1", public_key(&anchored), 0)]).unwrap();
        let t = issue("u1", 95.0, "rs", 300, &signing_key(&secret), &ThresholdPolicy::default(), 10).unwrap();
        prop_assert_eq!(verify(&t, &chain, 10), Err(TokenError::Forgery));
    }
}
