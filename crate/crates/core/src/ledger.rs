//! Proof-of-work identity ledger.
//!
//! Each transaction anchors a user's 32-byte public verification key with a
//! validity window. Blocks are hashed with SHA-256 over their canonical
//! bytes (`index ‖ prev_hash ‖ transactions ‖ nonce`) and must carry at
//! least `difficulty` leading zero bits. The first block is the genesis
//! block: index 0, all-zero `prev_hash`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codec::{ByteReader, ByteWriter, DecodeError};

pub type Hash32 = [u8; 32];

pub const DEFAULT_DIFFICULTY: u32 = 8;
pub const ZERO_HASH: Hash32 = [0u8; 32];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LedgerError {
    #[error("a block needs at least one transaction")]
    EmptyBlock,
    #[error("invalid transaction: {0}")]
    InvalidTransaction(String),
    #[error("block does not extend the chain: {0}")]
    BadLink(String),
    #[error("no ledger transaction for user {0}")]
    UnknownUser(String),
    #[error("no key for user {user} is valid at {at}")]
    KeyExpired { user: String, at: i64 },
    #[error("neither chain is valid")]
    SyncFailure,
    #[error("malformed chain bytes: {0}")]
    Decode(#[from] DecodeError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerTransaction {
    pub user_id: String,
    pub timestamp: i64,
    #[serde(with = "hex::serde")]
    pub key: [u8; 32],
    pub start_date: i64,
    pub end_date: i64,
}

impl LedgerTransaction {
    pub fn validate(&self) -> Result<(), LedgerError> {
        if self.user_id.is_empty() {
            return Err(LedgerError::InvalidTransaction("empty user id".into()));
        }
        if self.start_date >= self.end_date {
            return Err(LedgerError::InvalidTransaction(format!(
                "window [{}, {}] is empty",
                self.start_date, self.end_date
            )));
        }
        Ok(())
    }

    /// Inclusive on both ends.
    pub fn covers(&self, at: i64) -> bool {
        self.start_date <= at && at <= self.end_date
    }

    fn write(&self, w: &mut ByteWriter) {
        w.str(&self.user_id)
            .i64(self.timestamp)
            .raw(&self.key)
            .i64(self.start_date)
            .i64(self.end_date);
    }

    fn read(r: &mut ByteReader<'_>) -> Result<Self, DecodeError> {
        Ok(Self {
            user_id: r.string()?,
            timestamp: r.i64()?,
            key: r.array()?,
            start_date: r.i64()?,
            end_date: r.i64()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub index: u64,
    #[serde(with = "hex::serde")]
    pub prev_hash: Hash32,
    pub transactions: Vec<LedgerTransaction>,
    pub nonce: u64,
    #[serde(with = "hex::serde")]
    pub hash: Hash32,
}

// smallest encoded transaction: 4 (len) + 8 + 32 + 8 + 8
const MIN_TX_BYTES: usize = 60;

impl Block {
    fn header_bytes(index: u64, prev_hash: &Hash32, txs: &[LedgerTransaction]) -> ByteWriter {
        let mut w = ByteWriter::new();
        w.u64(index).raw(prev_hash).len(txs.len());
        for tx in txs {
            tx.write(&mut w);
        }
        w
    }

    /// SHA-256 over `index ‖ prev_hash ‖ transactions ‖ nonce`.
    pub fn compute_hash(&self) -> Hash32 {
        let mut w = Self::header_bytes(self.index, &self.prev_hash, &self.transactions);
        w.u64(self.nonce);
        Sha256::digest(w.as_slice()).into()
    }

    pub fn write(&self, w: &mut ByteWriter) {
        w.u64(self.index)
            .raw(&self.prev_hash)
            .len(self.transactions.len());
        for tx in &self.transactions {
            tx.write(w);
        }
        w.u64(self.nonce).raw(&self.hash);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        self.write(&mut w);
        w.into_bytes()
    }

    pub fn read(r: &mut ByteReader<'_>) -> Result<Self, DecodeError> {
        let index = r.u64()?;
        let prev_hash = r.array()?;
        let n = r.len(MIN_TX_BYTES)?;
        let transactions = (0..n)
            .map(|_| LedgerTransaction::read(r))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            index,
            prev_hash,
            transactions,
            nonce: r.u64()?,
            hash: r.array()?,
        })
    }

    pub fn meets_difficulty(&self, difficulty: u32) -> bool {
        leading_zero_bits(&self.hash) >= difficulty
    }
}

pub fn leading_zero_bits(h: &Hash32) -> u32 {
    let mut bits = 0;
    for b in h {
        if *b == 0 {
            bits += 8;
        } else {
            bits += b.leading_zeros();
            break;
        }
    }
    bits
}

/// Finds the first nonce from 0 upward meeting the difficulty.
fn mine(
    index: u64,
    prev_hash: Hash32,
    transactions: Vec<LedgerTransaction>,
    difficulty: u32,
) -> Block {
    let header = Block::header_bytes(index, &prev_hash, &transactions).into_bytes();
    let mut nonce = 0u64;
    loop {
        let mut h = Sha256::new();
        h.update(&header);
        h.update(nonce.to_le_bytes());
        let hash: Hash32 = h.finalize().into();
        if leading_zero_bits(&hash) >= difficulty {
            return Block {
                index,
                prev_hash,
                transactions,
                nonce,
                hash,
            };
        }
        nonce = nonce.checked_add(1).expect("nonce space exhausted");
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chain {
    blocks: Vec<Block>,
    difficulty: u32,
}

impl Chain {
    pub fn new(difficulty: u32) -> Self {
        Self {
            blocks: Vec::new(),
            difficulty,
        }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn difficulty(&self) -> u32 {
        self.difficulty
    }

    pub fn head(&self) -> Option<&Block> {
        self.blocks.last()
    }

    fn tip(&self) -> (u64, Hash32) {
        match self.blocks.last() {
            Some(b) => (b.index + 1, b.hash),
            None => (0, ZERO_HASH),
        }
    }

    /// Mines the next block without appending it.
    pub fn mine_next(&self, txs: Vec<LedgerTransaction>) -> Result<Block, LedgerError> {
        if txs.is_empty() {
            return Err(LedgerError::EmptyBlock);
        }
        for tx in &txs {
            tx.validate()?;
        }
        let (index, prev) = self.tip();
        Ok(mine(index, prev, txs, self.difficulty))
    }

    /// Appends a block after checking it extends the current head.
    pub fn append(&mut self, block: Block) -> Result<(), LedgerError> {
        let (index, prev) = self.tip();
        if block.index != index || block.prev_hash != prev {
            return Err(LedgerError::BadLink(format!(
                "expected index {index}, got {}",
                block.index
            )));
        }
        if block.transactions.is_empty() {
            return Err(LedgerError::EmptyBlock);
        }
        for tx in &block.transactions {
            tx.validate()?;
        }
        if block.compute_hash() != block.hash || !block.meets_difficulty(self.difficulty) {
            return Err(LedgerError::BadLink(
                "hash does not match contents or difficulty".into(),
            ));
        }
        self.blocks.push(block);
        Ok(())
    }

    pub fn mine_block(&mut self, txs: Vec<LedgerTransaction>) -> Result<&Block, LedgerError> {
        let block = self.mine_next(txs)?;
        self.append(block)?;
        Ok(self.blocks.last().expect("just appended"))
    }

    /// Concatenated canonical block bytes; the difficulty is not encoded.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        for b in &self.blocks {
            b.write(&mut w);
        }
        w.into_bytes()
    }

    /// Decodes blocks without validating them; see [`validate_chain`].
    pub fn from_bytes(bytes: &[u8], difficulty: u32) -> Result<Self, LedgerError> {
        let mut r = ByteReader::new(bytes);
        let mut blocks = Vec::new();
        while !r.is_empty() {
            blocks.push(Block::read(&mut r)?);
        }
        Ok(Self { blocks, difficulty })
    }

    /// Locates a transaction by (block index, position).
    pub fn transaction(&self, block: u64, position: usize) -> Option<&LedgerTransaction> {
        self.blocks.get(block as usize)?.transactions.get(position)
    }
}

pub fn validate_chain(chain: &Chain) -> bool {
    let mut prev = ZERO_HASH;
    for (i, b) in chain.blocks.iter().enumerate() {
        if b.index != i as u64 || b.prev_hash != prev || b.transactions.is_empty() {
            return false;
        }
        if b.transactions.iter().any(|tx| tx.validate().is_err()) {
            return false;
        }
        if b.compute_hash() != b.hash || !b.meets_difficulty(chain.difficulty) {
            return false;
        }
        prev = b.hash;
    }
    true
}

/// Decode-and-validate; undecodable bytes are simply invalid.
pub fn validate_chain_bytes(bytes: &[u8], difficulty: u32) -> bool {
    Chain::from_bytes(bytes, difficulty).is_ok_and(|c| validate_chain(&c))
}

/// Key of the latest transaction for `user_id` whose window contains `at`.
/// Later blocks win, then later positions within a block.
pub fn lookup_key(chain: &Chain, user_id: &str, at: i64) -> Result<[u8; 32], LedgerError> {
    lookup_transaction(chain, user_id, at).map(|(tx, _, _)| tx.key)
}

pub fn lookup_transaction<'c>(
    chain: &'c Chain,
    user_id: &str,
    at: i64,
) -> Result<(&'c LedgerTransaction, u64, usize), LedgerError> {
    let mut seen = false;
    for b in chain.blocks.iter().rev() {
        for (pos, tx) in b.transactions.iter().enumerate().rev() {
            if tx.user_id != user_id {
                continue;
            }
            seen = true;
            if tx.covers(at) {
                return Ok((tx, b.index, pos));
            }
        }
    }
    if seen {
        Err(LedgerError::KeyExpired {
            user: user_id.to_string(),
            at,
        })
    } else {
        Err(LedgerError::UnknownUser(user_id.to_string()))
    }
}

/// Longest valid chain wins; equal lengths keep `local`.
pub fn sync(local: &Chain, remote: &Chain) -> Result<Chain, LedgerError> {
    match (validate_chain(local), validate_chain(remote)) {
        (true, true) if remote.len() > local.len() => Ok(remote.clone()),
        (true, _) => Ok(local.clone()),
        (false, true) => Ok(remote.clone()),
        (false, false) => Err(LedgerError::SyncFailure),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tx(user: &str, key: u8, start: i64, end: i64) -> LedgerTransaction {
        LedgerTransaction {
            user_id: user.into(),
            timestamp: start,
            key: [key; 32],
            start_date: start,
            end_date: end,
        }
    }

    fn three_blocks(d: u32) -> Chain {
        let mut c = Chain::new(d);
        for i in 0..3u8 {
            c.mine_block(vec![tx(&format!("u{i}"), i, 0, 100)]).unwrap();
        }
        c
    }

    #[test]
    fn zero_difficulty_accepts_nonce_zero() {
        let mut c = Chain::new(0);
        let b = c.mine_block(vec![tx("u1", 1, 0, 10)]).unwrap();
        assert_eq!(b.nonce, 0);
        assert_eq!(b.index, 0);
        assert_eq!(b.prev_hash, ZERO_HASH);
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn difficulty_eight_gives_a_zero_first_byte() {
        let mut c = Chain::new(8);
        let b = c.mine_block(vec![tx("u1", 1, 0, 10)]).unwrap();
        assert_eq!(b.hash[0], 0);
    }

    #[test]
    fn mining_is_deterministic() {
        let a = Chain::new(8).mine_next(vec![tx("u1", 3, 0, 10)]).unwrap();
        let b = Chain::new(8).mine_next(vec![tx("u1", 3, 0, 10)]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_and_invalid_blocks_are_refused() {
        let mut c = Chain::new(0);
        assert_eq!(c.mine_block(vec![]).unwrap_err(), LedgerError::EmptyBlock);
        assert!(matches!(
            c.mine_block(vec![tx("u1", 1, 10, 10)]),
            Err(LedgerError::InvalidTransaction(_))
        ));
        assert!(matches!(
            c.mine_block(vec![tx("", 1, 0, 10)]),
            Err(LedgerError::InvalidTransaction(_))
        ));
        assert!(c.is_empty());
    }

    #[test]
    fn fresh_chain_validates_and_tampering_breaks_it() {
        let c = three_blocks(4);
        assert!(validate_chain(&c));

        let mut t = c.clone();
        t.blocks[1].transactions[0].key[5] ^= 1;
        assert!(!validate_chain(&t));

        let mut s = c.clone();
        s.blocks.swap(0, 1);
        assert!(!validate_chain(&s));
    }

    #[test]
    fn lookup_prefers_later_blocks() {
        let mut c = Chain::new(0);
        c.mine_block(vec![tx("u", 1, 0, 100)]).unwrap();
        assert_eq!(lookup_key(&c, "u", 50).unwrap(), [1; 32]);
        c.mine_block(vec![tx("u", 2, 0, 100)]).unwrap();
        assert_eq!(lookup_key(&c, "u", 50).unwrap(), [2; 32]);
    }

    #[test]
    fn lookup_prefers_later_positions_in_a_block() {
        let mut c = Chain::new(0);
        c.mine_block(vec![tx("u", 1, 0, 100), tx("u", 2, 0, 100)])
            .unwrap();
        assert_eq!(lookup_key(&c, "u", 0).unwrap(), [2; 32]);
    }

    #[test]
    fn lookup_errors() {
        let mut c = Chain::new(0);
        c.mine_block(vec![tx("u", 1, 0, 100), tx("u", 2, 0, 50)])
            .unwrap();
        assert_eq!(lookup_key(&c, "u", 100).unwrap(), [1; 32]);
        assert!(matches!(
            lookup_key(&c, "u", 101),
            Err(LedgerError::KeyExpired { .. })
        ));
        assert!(matches!(
            lookup_key(&c, "x", 1),
            Err(LedgerError::UnknownUser(_))
        ));
    }

    #[test]
    fn sync_rules() {
        let short = three_blocks(0);
        let mut long = short.clone();
        long.mine_block(vec![tx("u9", 9, 0, 10)]).unwrap();
        assert_eq!(sync(&short, &long).unwrap(), long);

        let mut tampered = long.clone();
        tampered.blocks[3].nonce += 1;
        assert_eq!(sync(&short, &tampered).unwrap(), short);

        let mut other = Chain::new(0);
        for i in 0..3u8 {
            other.mine_block(vec![tx("z", i, 0, 10)]).unwrap();
        }
        assert_eq!(sync(&short, &other).unwrap(), short);

        let mut bad_local = short.clone();
        bad_local.blocks[0].nonce += 1;
        assert_eq!(sync(&bad_local, &tampered), Err(LedgerError::SyncFailure));
        assert_eq!(sync(&bad_local, &other).unwrap(), other);
    }

    #[test]
    fn bytes_round_trip() {
        let c = three_blocks(2);
        let back = Chain::from_bytes(&c.to_bytes(), 2).unwrap();
        assert_eq!(back, c);
        assert!(validate_chain_bytes(&c.to_bytes(), 2));
        assert!(!validate_chain_bytes(&c.to_bytes()[1..], 2));
    }

    #[test]
    fn append_rejects_foreign_blocks() {
        let mut a = three_blocks(0);
        let b = Chain::new(0).mine_next(vec![tx("q", 1, 0, 10)]).unwrap();
        assert!(matches!(a.append(b), Err(LedgerError::BadLink(_))));
    }

    #[test]
    fn json_carries_hex_digests() {
        let c = three_blocks(0);
        let v = serde_json::to_value(&c.blocks()[1]).unwrap();
        assert_eq!(v["prev_hash"], hex::encode(c.blocks()[0].hash));
        let back: Block = serde_json::from_value(v).unwrap();
        assert_eq!(back, c.blocks()[1]);
    }
}
