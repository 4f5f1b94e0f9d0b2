//! Append-only block file.
//!
//! Each record is a 4-byte big-endian length followed by the block
//! encoding. Blocks are written in the order they were first accepted, so
//! replaying the file reproduces first-seen tie-breaks.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::block::Block;
use super::chain::{BlockError, ChainState};
use crate::canonical::DecodeError;
use crate::crypto::PublicKey;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("corrupt block record at byte {offset}: {error}")]
    Corrupt { offset: u64, error: DecodeError },
    #[error("stored block {index} no longer validates: {error}")]
    Invalid { index: usize, error: BlockError },
}

pub struct BlockStore {
    path: PathBuf,
    file: File,
}

impl BlockStore {
    /// Opens (or creates) a block file and returns the blocks it holds. A
    /// record cut short by a crash is dropped and the file truncated.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Vec<Block>), StoreError> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(&path)?;
        let mut data = Vec::new();
        file.read_to_end(&mut data)?;
        let mut blocks = Vec::new();
        let mut offset = 0usize;
        while offset + 4 <= data.len() {
            let len = u32::from_be_bytes(data[offset..offset + 4].try_into().unwrap()) as usize;
            let Some(body) = data.get(offset + 4..offset + 4 + len) else { break };
            let block = Block::decode(body).map_err(|error| StoreError::Corrupt { offset: offset as u64, error })?;
            blocks.push(block);
            offset += 4 + len;
        }
        if offset < data.len() {
            file.set_len(offset as u64)?;
        }
        Ok((Self { path, file }, blocks))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, block: &Block) -> Result<(), StoreError> {
        let body = block.encode();
        let mut record = (body.len() as u32).to_be_bytes().to_vec();
        record.extend_from_slice(&body);
        self.file.write_all(&record)?;
        self.file.sync_data()?;
        Ok(())
    }

    /// Opens a block file and replays it into a fresh chain.
    pub fn load_chain(path: impl AsRef<Path>, root: PublicKey) -> Result<(Self, ChainState), StoreError> {
        let (store, blocks) = Self::open(path)?;
        let mut chain = ChainState::new(root);
        for (index, block) in blocks.into_iter().enumerate() {
            match chain.apply_block(block) {
                Ok(_) | Err(BlockError::Duplicate) => {}
                Err(error) => return Err(StoreError::Invalid { index, error }),
            }
        }
        Ok((store, chain))
    }
}
