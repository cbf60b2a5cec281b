//! Signed access tokens.
//!
//! A token carries the user's confidence level and is signed with the
//! private half of the user's ledger-anchored Ed25519 key. Any party with a
//! valid copy of the chain can verify it.
//!
//! Wire form: `base64url(claim bytes) "." base64url(signature)`, unpadded.

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{ByteReader, ByteWriter};
use crate::ledger::{lookup_key, Chain, LedgerError};
use crate::normalize::ThresholdPolicy;

pub const DEFAULT_TTL_SECONDS: i64 = 300;
pub const SIGNATURE_LEN: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TokenError {
    #[error("confidence {confidence} is below the issuance gate {gate}")]
    IssuanceRefused { confidence: f64, gate: f64 },
    #[error("signature does not verify")]
    Forgery,
    #[error("token expired at {expires_at} (now {now})")]
    Expired { expires_at: i64, now: i64 },
    #[error("unknown user {0}")]
    UnknownUser(String),
    #[error("no ledger key for {user} covers the issue time {at}")]
    KeyExpired { user: String, at: i64 },
    #[error("malformed token: {0}")]
    Malformed(String),
}

impl From<LedgerError> for TokenError {
    fn from(e: LedgerError) -> Self {
        match e {
            LedgerError::UnknownUser(u) => TokenError::UnknownUser(u),
            LedgerError::KeyExpired { user, at } => TokenError::KeyExpired { user, at },
            other => TokenError::Malformed(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claims {
    pub user_id: String,
    pub confidence: f64,
    pub issued_at: i64,
    pub expires_at: i64,
    pub audience: String,
}

impl Claims {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.str(&self.user_id)
            .f64(self.confidence)
            .i64(self.issued_at)
            .i64(self.expires_at)
            .str(&self.audience);
        w.into_bytes()
    }

    fn read(r: &mut ByteReader<'_>) -> Result<Self, TokenError> {
        let bad = |e: crate::codec::DecodeError| TokenError::Malformed(e.to_string());
        Ok(Self {
            user_id: r.string().map_err(bad)?,
            confidence: r.f64().map_err(bad)?,
            issued_at: r.i64().map_err(bad)?,
            expires_at: r.i64().map_err(bad)?,
            audience: r.string().map_err(bad)?,
        })
    }

    fn check_shape(&self) -> Result<(), TokenError> {
        if self.user_id.is_empty() {
            return Err(TokenError::Malformed("empty user id".into()));
        }
        if !(0.0..=100.0).contains(&self.confidence) {
            return Err(TokenError::Malformed(format!(
                "confidence {} outside [0, 100]",
                self.confidence
            )));
        }
        if self.issued_at >= self.expires_at {
            return Err(TokenError::Malformed(
                "issued_at must precede expires_at".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccessToken {
    pub claims: Claims,
    pub signature: [u8; SIGNATURE_LEN],
}

impl AccessToken {
    /// Claim bytes followed by the 64 signature bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = self.claims.to_bytes();
        b.extend_from_slice(&self.signature);
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TokenError> {
        let mut r = ByteReader::new(bytes);
        let claims = Claims::read(&mut r)?;
        let signature = r
            .array()
            .map_err(|e| TokenError::Malformed(e.to_string()))?;
        r.finish()
            .map_err(|e| TokenError::Malformed(e.to_string()))?;
        Ok(Self { claims, signature })
    }

    pub fn to_wire(&self) -> String {
        format!(
            "{}.{}",
            URL_SAFE_NO_PAD.encode(self.claims.to_bytes()),
            URL_SAFE_NO_PAD.encode(self.signature)
        )
    }

    pub fn from_wire(s: &str) -> Result<Self, TokenError> {
        let (c, sig) = s
            .split_once('.')
            .ok_or_else(|| TokenError::Malformed("missing '.' separator".into()))?;
        let decode = |part: &str| {
            URL_SAFE_NO_PAD
                .decode(part)
                .map_err(|e| TokenError::Malformed(e.to_string()))
        };
        let claim_bytes = decode(c)?;
        let sig_bytes = decode(sig)?;
        let mut r = ByteReader::new(&claim_bytes);
        let claims = Claims::read(&mut r)?;
        r.finish()
            .map_err(|e| TokenError::Malformed(e.to_string()))?;
        let signature = sig_bytes
            .try_into()
            .map_err(|_| TokenError::Malformed("signature must be 64 bytes".into()))?;
        Ok(Self { claims, signature })
    }
}

/// Derives an Ed25519 signing key from 32 secret bytes.
pub fn signing_key(secret: &[u8; 32]) -> SigningKey {
    SigningKey::from_bytes(secret)
}

pub fn public_key(key: &SigningKey) -> [u8; 32] {
    key.verifying_key().to_bytes()
}

/// Signs a token valid for `ttl_seconds` from `now`. Refuses when the
/// confidence is below the policy gate.
pub fn issue(
    user_id: &str,
    confidence: f64,
    audience: &str,
    ttl_seconds: i64,
    key: &SigningKey,
    policy: &ThresholdPolicy,
    now: i64,
) -> Result<AccessToken, TokenError> {
    if confidence.is_nan() || confidence < policy.confidence_gate {
        return Err(TokenError::IssuanceRefused {
            confidence,
            gate: policy.confidence_gate,
        });
    }
    if ttl_seconds <= 0 {
        return Err(TokenError::Malformed(format!(
            "ttl {ttl_seconds} must be positive"
        )));
    }
    let claims = Claims {
        user_id: user_id.to_string(),
        confidence,
        issued_at: now,
        expires_at: now + ttl_seconds,
        audience: audience.to_string(),
    };
    claims.check_shape()?;
    let signature = key.sign(&claims.to_bytes()).to_bytes();
    Ok(AccessToken { claims, signature })
}

/// Checks the signature against the key the chain anchors for the user at
/// issue time, then expiry. Returns the claims on success.
pub fn verify(token: &AccessToken, chain: &Chain, now: i64) -> Result<Claims, TokenError> {
    let c = &token.claims;
    let key = lookup_key(chain, &c.user_id, c.issued_at)?;
    let vk = VerifyingKey::from_bytes(&key).map_err(|_| TokenError::Forgery)?;
    vk.verify_strict(&c.to_bytes(), &Signature::from_bytes(&token.signature))
        .map_err(|_| TokenError::Forgery)?;
    c.check_shape().map_err(|_| TokenError::Forgery)?;
    if now > c.expires_at {
        return Err(TokenError::Expired {
            expires_at: c.expires_at,
            now,
        });
    }
    Ok(c.clone())
}

/// Local resource policy: inclusive confidence gate.
pub fn authorize(claims: &Claims, resource_gate: f64) -> bool {
    claims.confidence >= resource_gate
}
