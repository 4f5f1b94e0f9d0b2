//! Discrete-event network of in-process nodes.
//!
//! Every node talks to every other node over a link with a seeded random
//! delay, so messages overtake each other and blocks arrive before their
//! parents. [`fuzz`] drives the network with random mining, payments,
//! double spends and token replays and checks the ledger invariants.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use coinami_core::crypto::{sha256, Keypair, PublicKey};
use coinami_core::ledger::{Block, BlockError, ChainState, OutPoint, BLOCK_REWARD};
use coinami_core::pki::{issue_certificate, Certificate};
use coinami_core::rng::{seeded, AssignmentRng};
use coinami_core::verifier::{issue_token, SignedToken};
use rand::Rng;

use crate::gossip::{NodeState, Outbound, Route};
use crate::wallet::build_payment;
use crate::wire::Message;

struct Delivery {
    to: usize,
    from: usize,
    msg: Message,
}

pub struct Network {
    nodes: Vec<NodeState>,
    queue: BinaryHeap<Reverse<(u64, u64)>>,
    pending: HashMap<u64, Delivery>,
    seq: u64,
    now: u64,
    max_delay: u64,
    rng: AssignmentRng,
    delivered: usize,
}

fn peer_id(i: usize) -> String {
    format!("n{i}")
}

fn peer_index(id: &str) -> Option<usize> {
    id.strip_prefix('n')?.parse().ok()
}

impl Network {
    pub fn new(count: usize, root: PublicKey, seed: u64, max_delay: u64) -> Self {
        Self {
            nodes: (0..count).map(|_| NodeState::new(ChainState::new(root), None)).collect(),
            queue: BinaryHeap::new(),
            pending: HashMap::new(),
            seq: 0,
            now: 0,
            max_delay: max_delay.max(1),
            rng: seeded(seed),
            delivered: 0,
        }
    }

    pub fn node(&self, i: usize) -> &NodeState {
        &self.nodes[i]
    }

    pub fn node_mut(&mut self, i: usize) -> &mut NodeState {
        &mut self.nodes[i]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn in_flight(&self) -> usize {
        self.pending.len()
    }

    pub fn delivered(&self) -> usize {
        self.delivered
    }

    fn schedule(&mut self, from: usize, to: usize, msg: Message) {
        let at = self.now + self.rng.gen_range(1..=self.max_delay);
        self.seq += 1;
        self.queue.push(Reverse((at, self.seq)));
        self.pending.insert(self.seq, Delivery { to, from, msg });
    }

    /// Queues node `from`'s outbound messages on the links.
    pub fn send(&mut self, from: usize, outbound: Vec<Outbound>) {
        for out in outbound {
            match out.route {
                Route::AllExcept(skip) => {
                    let skip = skip.as_deref().and_then(peer_index);
                    for to in 0..self.nodes.len() {
                        if to != from && Some(to) != skip {
                            self.schedule(from, to, out.msg.clone());
                        }
                    }
                }
                Route::To(peer) => {
                    if let Some(to) = peer_index(&peer).filter(|&t| t < self.nodes.len()) {
                        self.schedule(from, to, out.msg);
                    }
                }
            }
        }
    }

    /// Delivers the next message. Returns false when nothing is in flight.
    pub fn step(&mut self) -> bool {
        let Some(Reverse((at, seq))) = self.queue.pop() else {
            return false;
        };
        self.now = self.now.max(at);
        let d = self.pending.remove(&seq).expect("scheduled delivery");
        let out = self.nodes[d.to].handle_gossip(d.msg, Some(peer_id(d.from)));
        self.delivered += 1;
        self.send(d.to, out);
        true
    }

    pub fn run_until_quiet(&mut self) {
        while self.step() {}
    }

    /// Every node asks every other node for blocks past its tip.
    pub fn sync_all(&mut self) {
        for i in 0..self.nodes.len() {
            let tip = self.nodes[i].chain().tip();
            self.send(i, vec![Outbound { route: Route::AllExcept(None), msg: Message::ChainRequest { from: tip } }]);
        }
    }

    pub fn converged(&self) -> bool {
        let tip = self.nodes[0].chain().tip();
        self.nodes.iter().all(|n| n.chain().tip() == tip)
    }
}

/// Value conservation on a node's active chain: unspent value plus fees
/// equals the minted rewards.
pub fn conserves_value(chain: &ChainState) -> bool {
    let unspent: u64 = chain.utxo().values().map(|o| o.amount).sum();
    unspent + chain.cumulative_fees() == BLOCK_REWARD * chain.height()
}

/// Walks the active chain from genesis and checks that no outpoint is
/// spent twice and that every input existed when it was spent.
pub fn no_double_spend(chain: &ChainState) -> bool {
    let mut created = BTreeSet::new();
    let mut spent = BTreeSet::new();
    for hash in chain.active_chain() {
        let block = chain.get(&hash).expect("active block");
        for tx in &block.transactions {
            for input in &tx.inputs {
                if !created.contains(&input.outpoint) || !spent.insert(input.outpoint) {
                    return false;
                }
            }
            let id = tx.hash();
            for index in 0..tx.outputs.len() {
                created.insert(OutPoint { tx: id, index: index as u32 });
            }
        }
    }
    true
}

/// No (authority, job) pair is paid twice on the active chain.
pub fn no_token_replay(chain: &ChainState) -> bool {
    let mut seen = BTreeSet::new();
    chain
        .active_chain()
        .iter()
        .filter_map(|h| chain.get(h).and_then(|b| b.token.as_ref()))
        .all(|t| seen.insert((t.authority().to_bytes(), t.job_id.clone())))
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FuzzReport {
    pub events: usize,
    pub blocks_mined: usize,
    pub payments: usize,
    pub double_spend_attempts: usize,
    pub replay_attempts: usize,
    pub replays_rejected: usize,
    /// Per-event checks that failed on any node.
    pub conservation_failures: usize,
    pub double_spend_failures: usize,
    pub replay_failures: usize,
    pub converged: bool,
    pub final_height: u64,
    pub messages_delivered: usize,
}

impl FuzzReport {
    pub fn ok(&self) -> bool {
        self.converged
            && self.conservation_failures == 0
            && self.double_spend_failures == 0
            && self.replay_failures == 0
            && self.replay_attempts == self.replays_rejected
    }
}

struct Actors {
    authority: Keypair,
    cert: Certificate,
    wallets: Vec<Keypair>,
    jobs: u64,
}

impl Actors {
    fn token(&mut self, miner: &PublicKey) -> SignedToken {
        self.jobs += 1;
        let job = format!("fuzz-{:06}", self.jobs);
        issue_token(&job, miner, sha256(job.as_bytes()), &self.authority, &self.cert, None, 1).expect("difficulty 1")
    }
}

fn mine(net: &mut Network, i: usize, token: SignedToken) -> Result<(), BlockError> {
    let ts = net.now();
    let node = net.node_mut(i);
    let block = Block::assemble(node.chain().tip(), node.chain().height() + 1, ts, token, node.transactions_for_block());
    let out = node.submit_block(block)?;
    net.send(i, out);
    Ok(())
}

fn check(net: &Network, report: &mut FuzzReport) {
    for i in 0..net.len() {
        let chain = net.node(i).chain();
        report.conservation_failures += usize::from(!conserves_value(chain));
        report.double_spend_failures += usize::from(!no_double_spend(chain));
        report.replay_failures += usize::from(!no_token_replay(chain));
    }
}

fn pay(net: &mut Network, rng: &mut AssignmentRng, actors: &Actors, i: usize, report: &mut FuzzReport) -> bool {
    let from = &actors.wallets[rng.gen_range(0..actors.wallets.len())];
    let to = actors.wallets[rng.gen_range(0..actors.wallets.len())].public();
    let coins = net.node(i).chain().unspent_of(&from.public());
    let available: u64 = coins.iter().map(|(_, o)| o.amount).sum();
    if available == 0 {
        return false;
    }
    let tx = build_payment(from, &coins, &to, rng.gen_range(1..=available)).expect("covered");
    match net.node_mut(i).submit_tx(tx) {
        Ok(out) => {
            net.send(i, out);
            report.payments += 1;
            true
        }
        // The coins are already committed by a pending payment.
        Err(_) => false,
    }
}

/// Spends one coin to two different wallets through two different nodes.
fn double_spend(net: &mut Network, rng: &mut AssignmentRng, actors: &Actors, i: usize, report: &mut FuzzReport) -> bool {
    let from = rng.gen_range(0..actors.wallets.len());
    let coins = net.node(i).chain().unspent_of(&actors.wallets[from].public());
    let Some(&(op, out)) = coins.first() else {
        return false;
    };
    let n = actors.wallets.len();
    let j = (i + 1 + rng.gen_range(0..net.len() - 1)) % net.len();
    let a = build_payment(&actors.wallets[from], &[(op, out)], &actors.wallets[(from + 1) % n].public(), out.amount).unwrap();
    let b = build_payment(&actors.wallets[from], &[(op, out)], &actors.wallets[(from + 2) % n].public(), out.amount).unwrap();
    report.double_spend_attempts += 1;
    for (node, tx) in [(i, a), (j, b)] {
        if let Ok(o) = net.node_mut(node).submit_tx(tx) {
            net.send(node, o);
        }
    }
    true
}

/// Mines a block carrying a token already used on node `i`'s chain.
fn replay(net: &mut Network, rng: &mut AssignmentRng, i: usize, report: &mut FuzzReport) -> bool {
    let chain = net.node(i).chain();
    let used: Vec<SignedToken> = chain.active_chain().iter().filter_map(|h| chain.get(h).and_then(|b| b.token.clone())).collect();
    if used.is_empty() {
        return false;
    }
    let token = used[rng.gen_range(0..used.len())].clone();
    report.replay_attempts += 1;
    if let Err(BlockError::TokenReplay) = mine(net, i, token) {
        report.replays_rejected += 1;
    }
    true
}

/// Runs `events` random events on a network of `nodes` nodes, lets it
/// settle, and reports the invariant checks.
///
/// Each event is a block or a transaction: a node mines a block paying one
/// of the wallets; a wallet pays another through some node; a wallet double
/// spends through two nodes; or a node tries to reuse a token already on
/// its chain. A few message deliveries run between events. Equal-height forks are settled at the end by one
/// more block, since fork choice only moves on a strictly higher tip.
pub fn fuzz(nodes: usize, events: usize, seed: u64) -> FuzzReport {
    let mut rng = seeded(seed);
    let root = Keypair::from_seed(rng.gen());
    let authority = Keypair::from_seed(rng.gen());
    let cert = issue_certificate(&root, &authority.public(), "fuzz authority", 0, u64::MAX);
    let mut actors = Actors { authority, cert, wallets: (0..4).map(|_| Keypair::from_seed(rng.gen())).collect(), jobs: 0 };
    let mut net = Network::new(nodes, root.public(), rng.gen(), 20);
    let mut report = FuzzReport { events, ..Default::default() };

    for _ in 0..events {
        for _ in 0..rng.gen_range(0..=4) {
            net.step();
        }
        let i = rng.gen_range(0..nodes);
        let roll: f64 = rng.gen();
        let done = if roll < 0.35 {
            false
        } else if roll < 0.7 {
            pay(&mut net, &mut rng, &actors, i, &mut report)
        } else if roll < 0.85 {
            double_spend(&mut net, &mut rng, &actors, i, &mut report)
        } else {
            replay(&mut net, &mut rng, i, &mut report)
        };
        if !done {
            let miner = actors.wallets[rng.gen_range(0..actors.wallets.len())].public();
            let token = actors.token(&miner);
            mine(&mut net, i, token).expect("fresh token on own tip");
            report.blocks_mined += 1;
        }
        check(&net, &mut report);
    }

    net.run_until_quiet();
    if !net.converged() {
        let miner = actors.wallets[0].public();
        let token = actors.token(&miner);
        mine(&mut net, 0, token).expect("fresh token on own tip");
        report.blocks_mined += 1;
        net.run_until_quiet();
    }
    net.sync_all();
    net.run_until_quiet();
    check(&net, &mut report);
    report.converged = net.converged();
    report.final_height = net.node(0).chain().height();
    report.messages_delivered = net.delivered();
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_fuzz_run_holds_invariants() {
        let report = fuzz(3, 60, 11);
        assert!(report.ok(), "{report:?}");
        assert!(report.blocks_mined > 0);
    }

    #[test]
    fn out_of_order_blocks_are_adopted() {
        let root = Keypair::from_seed([1; 32]);
        let auth = Keypair::from_seed([2; 32]);
        let cert = issue_certificate(&root, &auth.public(), "a", 0, u64::MAX);
        let mut actors = Actors { authority: auth, cert, wallets: vec![Keypair::from_seed([3; 32])], jobs: 0 };
        let mut net = Network::new(2, root.public(), 5, 1);
        let miner = actors.wallets[0].public();
        for _ in 0..3 {
            let t = actors.token(&miner);
            mine(&mut net, 0, t).unwrap();
        }
        // Deliver newest first to node 1.
        let mut queued: Vec<_> = net.pending.drain().collect();
        net.queue.clear();
        queued.sort_by_key(|(seq, _)| Reverse(*seq));
        for (_, d) in queued {
            let out = net.nodes[d.to].handle_gossip(d.msg, Some(peer_id(d.from)));
            net.send(d.to, out);
        }
        net.run_until_quiet();
        assert!(net.converged());
        assert_eq!(net.node(1).chain().height(), 3);
    }
}
