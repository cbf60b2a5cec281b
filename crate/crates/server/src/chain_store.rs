//! Shared ledger replica: readers take an `Arc` snapshot, writers are
//! serialized and swap in a new chain atomically.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use bioauth_core::ledger::{validate_chain, Block, Chain, LedgerError};
use parking_lot::{Mutex, RwLock};

#[derive(Debug, thiserror::Error)]
pub enum ChainStoreError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("chain file: {0}")]
    Io(#[from] std::io::Error),
    #[error("chain file {0} does not validate")]
    Invalid(PathBuf),
}

#[derive(Debug)]
pub struct ChainStore {
    current: RwLock<Arc<Chain>>,
    writer: Mutex<()>,
    file: Option<PathBuf>,
}

impl ChainStore {
    pub fn in_memory(difficulty: u32) -> Self {
        Self::from_chain(Chain::new(difficulty))
    }

    pub fn from_chain(chain: Chain) -> Self {
        Self {
            current: RwLock::new(Arc::new(chain)),
            writer: Mutex::new(()),
            file: None,
        }
    }

    /// Loads and validates the append-only chain file, creating it if absent.
    pub fn open(path: &Path, difficulty: u32) -> Result<Self, ChainStoreError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let chain = match std::fs::read(path) {
            Ok(bytes) => Chain::from_bytes(&bytes, difficulty)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Chain::new(difficulty),
            Err(e) => return Err(e.into()),
        };
        if !validate_chain(&chain) {
            return Err(ChainStoreError::Invalid(path.to_owned()));
        }
        Ok(Self {
            current: RwLock::new(Arc::new(chain)),
            writer: Mutex::new(()),
            file: Some(path.to_owned()),
        })
    }

    pub fn snapshot(&self) -> Arc<Chain> {
        self.current.read().clone()
    }

    /// Holds the single-writer lock for a mine-then-append sequence.
    pub fn lock_writer(&self) -> parking_lot::MutexGuard<'_, ()> {
        self.writer.lock()
    }

    /// Appends a block. The caller must hold [`Self::lock_writer`].
    pub fn append_locked(&self, block: Block) -> Result<(), ChainStoreError> {
        let mut next = (*self.snapshot()).clone();
        let bytes = block.to_bytes();
        next.append(block)?;
        if let Some(path) = &self.file {
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            f.write_all(&bytes)?;
            f.sync_data()?;
        }
        *self.current.write() = Arc::new(next);
        Ok(())
    }

    /// Swaps in a replacement chain (replica sync).
    pub fn replace(&self, chain: Chain) {
        let _w = self.writer.lock();
        *self.current.write() = Arc::new(chain);
    }
}
