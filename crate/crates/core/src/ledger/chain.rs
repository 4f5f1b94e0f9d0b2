//! Block tree, fork choice and the active UTXO set.

use std::collections::HashMap;

use thiserror::Error;

use super::block::Block;
use super::tx::{apply_transaction, validate_transaction, OutPoint, TxError, TxOutput, UtxoSet};
use super::BLOCK_REWARD;
use crate::crypto::{Digest256, PublicKey};
use crate::verifier::verify_token;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BlockError {
    #[error("block hash does not match its contents")]
    BadHash,
    #[error("parent {0} is unknown")]
    UnknownParent(Digest256),
    #[error("block already known")]
    Duplicate,
    #[error("token missing, not final, or not signed by a certified authority")]
    BadToken,
    #[error("token for this job was already used on this branch")]
    TokenReplay,
    #[error("coinbase missing or malformed")]
    BadCoinbase,
    #[error("transaction {index}: {error}")]
    Transaction { index: usize, error: TxError },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ApplyOutcome {
    /// The block extended the active branch.
    Extended,
    /// A side branch overtook the active branch.
    Reorganized,
    /// Stored on a branch that is not (yet) the longest.
    SideBranch,
}

/// Entries each transaction of a block removed from the UTXO set, in
/// block order. A later transaction may spend an output created earlier in
/// the same block, so undo has to run transaction by transaction backwards.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Undo {
    spent: Vec<Vec<(OutPoint, TxOutput)>>,
}

#[derive(Clone, Debug)]
struct StoredBlock {
    block: Block,
    height: u64,
    cumulative_fees: u64,
    undo: Undo,
}

/// All known blocks plus the state of the active branch.
///
/// The tip is the highest block; among equal heights the first one seen
/// keeps the tip.
#[derive(Clone, Debug)]
pub struct ChainState {
    root: PublicKey,
    blocks: HashMap<Digest256, StoredBlock>,
    genesis: Digest256,
    tip: Digest256,
    utxo: UtxoSet,
}

impl ChainState {
    pub fn new(root: PublicKey) -> Self {
        let genesis = Block::genesis();
        let hash = genesis.hash;
        let mut blocks = HashMap::new();
        blocks.insert(hash, StoredBlock { block: genesis, height: 0, cumulative_fees: 0, undo: Undo::default() });
        Self { root, blocks, genesis: hash, tip: hash, utxo: UtxoSet::new() }
    }

    pub fn root(&self) -> &PublicKey {
        &self.root
    }

    pub fn genesis_hash(&self) -> Digest256 {
        self.genesis
    }

    pub fn tip(&self) -> Digest256 {
        self.tip
    }

    pub fn tip_block(&self) -> &Block {
        &self.blocks[&self.tip].block
    }

    pub fn height(&self) -> u64 {
        self.blocks[&self.tip].height
    }

    pub fn height_of(&self, hash: &Digest256) -> Option<u64> {
        self.blocks.get(hash).map(|s| s.height)
    }

    /// Fees destroyed along the active branch.
    pub fn cumulative_fees(&self) -> u64 {
        self.blocks[&self.tip].cumulative_fees
    }

    pub fn utxo(&self) -> &UtxoSet {
        &self.utxo
    }

    pub fn contains(&self, hash: &Digest256) -> bool {
        self.blocks.contains_key(hash)
    }

    pub fn get(&self, hash: &Digest256) -> Option<&Block> {
        self.blocks.get(hash).map(|s| &s.block)
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn balance(&self, owner: &PublicKey) -> u64 {
        self.utxo.values().filter(|o| o.recipient == *owner).map(|o| o.amount).sum()
    }

    pub fn unspent_of(&self, owner: &PublicKey) -> Vec<(OutPoint, TxOutput)> {
        self.utxo.iter().filter(|(_, o)| o.recipient == *owner).map(|(p, o)| (*p, *o)).collect()
    }

    /// Hashes from genesis to `hash` inclusive.
    pub fn branch(&self, hash: &Digest256) -> Vec<Digest256> {
        let mut out = Vec::new();
        let mut cur = *hash;
        while let Some(s) = self.blocks.get(&cur) {
            out.push(cur);
            if s.block.is_genesis() {
                break;
            }
            cur = s.block.prev_hash;
        }
        out.reverse();
        out
    }

    pub fn active_chain(&self) -> Vec<Digest256> {
        self.branch(&self.tip)
    }

    /// Active-branch blocks after `from`; the whole branch if `from` is not
    /// on it.
    pub fn blocks_after(&self, from: &Digest256) -> Vec<Block> {
        let chain = self.active_chain();
        let start = chain.iter().position(|h| h == from).map_or(1, |i| i + 1);
        chain[start..].iter().map(|h| self.blocks[h].block.clone()).collect()
    }

    fn ancestor_at(&self, hash: &Digest256, height: u64) -> Digest256 {
        let mut cur = *hash;
        while self.blocks[&cur].height > height {
            cur = self.blocks[&cur].block.prev_hash;
        }
        cur
    }

    fn common_ancestor(&self, a: &Digest256, b: &Digest256) -> Digest256 {
        let h = self.blocks[a].height.min(self.blocks[b].height);
        let (mut x, mut y) = (self.ancestor_at(a, h), self.ancestor_at(b, h));
        while x != y {
            x = self.blocks[&x].block.prev_hash;
            y = self.blocks[&y].block.prev_hash;
        }
        x
    }

    fn undo_block(&self, hash: &Digest256, utxo: &mut UtxoSet) {
        let stored = &self.blocks[hash];
        for (tx, spent) in stored.block.transactions.iter().zip(&stored.undo.spent).rev() {
            let id = tx.hash();
            for index in 0..tx.outputs.len() {
                utxo.remove(&OutPoint { tx: id, index: index as u32 });
            }
            for (op, out) in spent {
                utxo.insert(*op, *out);
            }
        }
    }

    fn redo_block(&self, hash: &Digest256, utxo: &mut UtxoSet) {
        for tx in &self.blocks[hash].block.transactions {
            apply_transaction(tx, utxo);
        }
    }

    /// UTXO set as of `hash`, reached by undoing the active branch back to
    /// the fork point and replaying the other branch.
    pub fn utxo_at(&self, hash: &Digest256) -> UtxoSet {
        let mut utxo = self.utxo.clone();
        if *hash == self.tip {
            return utxo;
        }
        let fork = self.common_ancestor(&self.tip, hash);
        let mut cur = self.tip;
        while cur != fork {
            self.undo_block(&cur, &mut utxo);
            cur = self.blocks[&cur].block.prev_hash;
        }
        let branch = self.branch(hash);
        let fork_pos = branch.iter().position(|h| *h == fork).expect("fork is an ancestor");
        for h in &branch[fork_pos + 1..] {
            self.redo_block(h, &mut utxo);
        }
        utxo
    }

    /// UTXO set of `hash`'s branch computed from genesis, with no undo data.
    pub fn fold_from_genesis(&self, hash: &Digest256) -> UtxoSet {
        let mut utxo = UtxoSet::new();
        for h in self.branch(hash).iter().skip(1) {
            self.redo_block(h, &mut utxo);
        }
        utxo
    }

    fn token_used_on_branch(&self, parent: &Digest256, authority: &PublicKey, job_id: &str) -> bool {
        self.branch(parent).iter().any(|h| {
            self.blocks[h]
                .block
                .token
                .as_ref()
                .is_some_and(|t| t.authority() == authority && t.job_id == job_id)
        })
    }

    /// Validates `block` against its parent's branch. Returns the resulting
    /// UTXO set, undo data and fee total.
    fn check(&self, block: &Block) -> Result<(UtxoSet, Undo, u64), BlockError> {
        if block.compute_hash() != block.hash {
            return Err(BlockError::BadHash);
        }
        if self.blocks.contains_key(&block.hash) {
            return Err(BlockError::Duplicate);
        }
        let parent = self.blocks.get(&block.prev_hash).ok_or(BlockError::UnknownParent(block.prev_hash))?;
        let height = parent.height + 1;
        let token = block.token.as_ref().ok_or(BlockError::BadToken)?;
        if !verify_token(token, &self.root, block.timestamp) {
            return Err(BlockError::BadToken);
        }
        if self.token_used_on_branch(&block.prev_hash, token.authority(), &token.job_id) {
            return Err(BlockError::TokenReplay);
        }
        let coinbase = block.transactions.first().ok_or(BlockError::BadCoinbase)?;
        let coinbase_ok = coinbase.inputs.is_empty()
            && coinbase.coinbase_height == Some(height)
            && coinbase.outputs.len() == 1
            && coinbase.outputs[0].amount == BLOCK_REWARD
            && coinbase.outputs[0].recipient == token.miner;
        if !coinbase_ok {
            return Err(BlockError::BadCoinbase);
        }
        let mut utxo = self.utxo_at(&block.prev_hash);
        let mut undo = Undo::default();
        undo.spent.push(apply_transaction(coinbase, &mut utxo));
        let mut fees = 0u64;
        for (index, tx) in block.transactions.iter().enumerate().skip(1) {
            let fee = validate_transaction(tx, &utxo).map_err(|error| BlockError::Transaction { index, error })?;
            fees += fee;
            undo.spent.push(apply_transaction(tx, &mut utxo));
        }
        Ok((utxo, undo, fees))
    }

    /// Validation without storing.
    pub fn validate_block(&self, block: &Block) -> Result<(), BlockError> {
        self.check(block).map(|_| ())
    }

    /// Validates and stores a block, moving the tip if its branch is now
    /// strictly higher.
    pub fn apply_block(&mut self, block: Block) -> Result<ApplyOutcome, BlockError> {
        let (utxo, undo, fees) = self.check(&block)?;
        let parent = &self.blocks[&block.prev_hash];
        let height = parent.height + 1;
        let cumulative_fees = parent.cumulative_fees + fees;
        let hash = block.hash;
        let extends_tip = block.prev_hash == self.tip;
        self.blocks.insert(hash, StoredBlock { block, height, cumulative_fees, undo });
        if height <= self.height() {
            return Ok(ApplyOutcome::SideBranch);
        }
        self.tip = hash;
        self.utxo = utxo;
        Ok(if extends_tip { ApplyOutcome::Extended } else { ApplyOutcome::Reorganized })
    }
}
