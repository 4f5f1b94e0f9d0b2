//! Token-bearing blocks.

use super::tx::Transaction;
use crate::canonical::{ByteReader, ByteWriter, DecodeError};
use crate::crypto::{sha256, Digest256};
use crate::verifier::SignedToken;

/// A block. Every block but genesis carries a final token in place of a
/// proof-of-work nonce, and its first transaction is the coinbase.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub prev_hash: Digest256,
    pub timestamp: u64,
    pub token: Option<SignedToken>,
    pub transactions: Vec<Transaction>,
    /// Hash of the rendering of all fields above.
    pub hash: Digest256,
}

impl Block {
    /// The fixed genesis block: zero parent, no token, no transactions.
    pub fn genesis() -> Self {
        Self::new(Digest256::ZERO, 0, None, Vec::new())
    }

    /// Builds a block and computes its hash.
    pub fn new(prev_hash: Digest256, timestamp: u64, token: Option<SignedToken>, transactions: Vec<Transaction>) -> Self {
        let mut block = Self { prev_hash, timestamp, token, transactions, hash: Digest256::ZERO };
        block.hash = block.compute_hash();
        block
    }

    /// Block paying the reward for `token` to its miner, followed by `pending`.
    pub fn assemble(prev_hash: Digest256, height: u64, timestamp: u64, token: SignedToken, pending: Vec<Transaction>) -> Self {
        let mut txs = vec![Transaction::coinbase(token.miner, height)];
        txs.extend(pending);
        Self::new(prev_hash, timestamp, Some(token), txs)
    }

    pub fn is_genesis(&self) -> bool {
        self.prev_hash == Digest256::ZERO
    }

    fn header_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(self.prev_hash.as_bytes()).u64(self.timestamp);
        match &self.token {
            Some(t) => w.u8(1).bytes(t.render().as_bytes()),
            None => w.u8(0),
        };
        w.u32(self.transactions.len() as u32);
        for tx in &self.transactions {
            w.bytes(&tx.encode());
        }
        w.finish()
    }

    pub fn compute_hash(&self) -> Digest256 {
        sha256(&self.header_bytes())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.header_bytes();
        let mut w = ByteWriter::new();
        w.bytes(self.hash.as_bytes());
        out.extend(w.finish());
        out
    }

    /// Decodes a block. The stored hash is kept as-is; validation checks it.
    pub fn decode(data: &[u8]) -> Result<Self, DecodeError> {
        let mut r = ByteReader::new(data);
        let prev_hash = Digest256::from_slice(r.bytes()?).ok_or(DecodeError::Invalid("prev hash"))?;
        let timestamp = r.u64()?;
        let token = match r.u8()? {
            0 => None,
            1 => {
                let text = std::str::from_utf8(r.bytes()?).map_err(|_| DecodeError::Invalid("token"))?;
                Some(SignedToken::parse(text).map_err(|_| DecodeError::Invalid("token"))?)
            }
            _ => return Err(DecodeError::Invalid("token flag")),
        };
        let n = r.u32()?;
        let mut transactions = Vec::new();
        for _ in 0..n {
            transactions.push(Transaction::decode(r.bytes()?)?);
        }
        let hash = Digest256::from_slice(r.bytes()?).ok_or(DecodeError::Invalid("hash"))?;
        r.finish()?;
        Ok(Self { prev_hash, timestamp, token, transactions, hash })
    }
}
