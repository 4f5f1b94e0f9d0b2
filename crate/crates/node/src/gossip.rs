//! Node state and gossip handling.
//!
//! All ledger mutation goes through [`NodeState`]; callers wrap it in a lock
//! so there is a single writer. Handlers return the messages to send rather
//! than sending them, so the same code runs over TCP and in the simulator.

use std::collections::{HashMap, HashSet};

use coinami_core::crypto::Digest256;
use coinami_core::ledger::{validate_transaction, ApplyOutcome, Block, BlockError, BlockStore, ChainState, Transaction, TxError, UtxoSet};
use log::{debug, info, warn};

use crate::wire::Message;

pub type PeerId = String;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Route {
    /// Every peer except the one named, if any.
    AllExcept(Option<PeerId>),
    To(PeerId),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outbound {
    pub route: Route,
    pub msg: Message,
}

const MAX_ORPHANS: usize = 256;

pub struct NodeState {
    chain: ChainState,
    store: Option<BlockStore>,
    mempool: Vec<Transaction>,
    seen_blocks: HashSet<Digest256>,
    seen_txs: HashSet<Digest256>,
    orphans: HashMap<Digest256, Vec<Block>>,
}

fn apply_pending(txs: &[Transaction], utxo: &mut UtxoSet) -> Vec<Transaction> {
    let mut kept = Vec::new();
    for tx in txs {
        if validate_transaction(tx, utxo).is_ok() {
            for i in &tx.inputs {
                utxo.remove(&i.outpoint);
            }
            let id = tx.hash();
            for (index, out) in tx.outputs.iter().enumerate() {
                utxo.insert(coinami_core::ledger::OutPoint { tx: id, index: index as u32 }, *out);
            }
            kept.push(tx.clone());
        }
    }
    kept
}

impl NodeState {
    pub fn new(chain: ChainState, store: Option<BlockStore>) -> Self {
        let seen_blocks = chain.active_chain().into_iter().collect();
        Self { chain, store, mempool: Vec::new(), seen_blocks, seen_txs: HashSet::new(), orphans: HashMap::new() }
    }

    pub fn chain(&self) -> &ChainState {
        &self.chain
    }

    pub fn mempool(&self) -> &[Transaction] {
        &self.mempool
    }

    /// Pending transactions that apply in order on top of the tip.
    pub fn transactions_for_block(&self) -> Vec<Transaction> {
        apply_pending(&self.mempool, &mut self.chain.utxo().clone())
    }

    fn revalidate_mempool(&mut self) {
        self.mempool = apply_pending(&self.mempool, &mut self.chain.utxo().clone());
    }

    /// Validates, stores and persists a block, then adopts any orphans it
    /// unblocks. Returns the hashes newly stored.
    fn accept_block(&mut self, block: Block) -> Result<Vec<Block>, BlockError> {
        let mut accepted = Vec::new();
        let mut queue = vec![block];
        let mut first = true;
        while let Some(b) = queue.pop() {
            let hash = b.hash;
            match self.chain.apply_block(b.clone()) {
                Ok(outcome) => {
                    if let Some(store) = &mut self.store {
                        if let Err(e) = store.append(&b) {
                            warn!("could not persist block {hash}: {e}");
                        }
                    }
                    if outcome != ApplyOutcome::SideBranch {
                        info!("tip {} at height {} ({outcome:?})", hash, self.chain.height());
                    }
                    self.seen_blocks.insert(hash);
                    accepted.push(b);
                    if let Some(children) = self.orphans.remove(&hash) {
                        queue.extend(children);
                    }
                }
                Err(e) if first => return Err(e),
                Err(e) => debug!("orphan {hash} rejected: {e}"),
            }
            first = false;
        }
        self.revalidate_mempool();
        Ok(accepted)
    }

    /// Applies a locally assembled block and returns the announcement.
    pub fn submit_block(&mut self, block: Block) -> Result<Vec<Outbound>, BlockError> {
        let accepted = self.accept_block(block)?;
        Ok(accepted
            .into_iter()
            .map(|b| Outbound { route: Route::AllExcept(None), msg: Message::BlockAnnounce { block: b } })
            .collect())
    }

    /// Adds a local transaction to the mempool and returns the announcement.
    pub fn submit_tx(&mut self, tx: Transaction) -> Result<Vec<Outbound>, TxError> {
        let mut view = self.chain.utxo().clone();
        apply_pending(&self.mempool, &mut view);
        validate_transaction(&tx, &view)?;
        self.seen_txs.insert(tx.hash());
        self.mempool.push(tx.clone());
        Ok(vec![Outbound { route: Route::AllExcept(None), msg: Message::TxAnnounce { tx } }])
    }

    fn on_block(&mut self, block: Block, from: &Option<PeerId>) -> Vec<Outbound> {
        if !self.seen_blocks.insert(block.hash) {
            return Vec::new();
        }
        let hash = block.hash;
        let parent = block.prev_hash;
        match self.accept_block(block.clone()) {
            Ok(accepted) => accepted
                .into_iter()
                .map(|b| Outbound { route: Route::AllExcept(from.clone()), msg: Message::BlockAnnounce { block: b } })
                .collect(),
            Err(BlockError::UnknownParent(_)) => {
                if self.orphans.values().map(Vec::len).sum::<usize>() < MAX_ORPHANS {
                    self.orphans.entry(parent).or_default().push(block);
                }
                let route = match from {
                    Some(peer) => Route::To(peer.clone()),
                    None => Route::AllExcept(None),
                };
                vec![Outbound { route, msg: Message::ChainRequest { from: self.chain.tip() } }]
            }
            Err(e) => {
                debug!("dropped block {hash}: {e}");
                Vec::new()
            }
        }
    }

    /// Handles one message from `from` (`None` for a local caller) and
    /// returns what to send in reply or relay.
    pub fn handle_gossip(&mut self, msg: Message, from: Option<PeerId>) -> Vec<Outbound> {
        match msg {
            Message::BlockAnnounce { block } => self.on_block(block, &from),
            Message::ChainResponse { blocks } => blocks.into_iter().flat_map(|b| self.on_block(b, &from)).collect(),
            Message::TxAnnounce { tx } => {
                if self.seen_txs.contains(&tx.hash()) {
                    return Vec::new();
                }
                match self.submit_tx(tx.clone()) {
                    Ok(_) => vec![Outbound { route: Route::AllExcept(from), msg: Message::TxAnnounce { tx } }],
                    Err(e) => {
                        debug!("dropped transaction: {e}");
                        Vec::new()
                    }
                }
            }
            Message::ChainRequest { from: hash } => match from {
                Some(peer) => vec![Outbound {
                    route: Route::To(peer),
                    msg: Message::ChainResponse { blocks: self.chain.blocks_after(&hash) },
                }],
                None => Vec::new(),
            },
            other => {
                debug!("ignored {} from gossip", other.op());
                Vec::new()
            }
        }
    }

    /// Answers a request arriving on a connection: queries are answered
    /// directly, gossip is handled and the outbound list returned for relay.
    pub fn respond(&mut self, msg: Message, from: Option<PeerId>) -> (Message, Vec<Outbound>) {
        match msg {
            Message::UtxoQuery { owner } => (Message::Utxos { entries: self.chain.unspent_of(&owner) }, Vec::new()),
            Message::ChainRequest { from: hash } => {
                (Message::ChainResponse { blocks: self.chain.blocks_after(&hash) }, Vec::new())
            }
            other => (Message::Ack, self.handle_gossip(other, from)),
        }
    }
}
