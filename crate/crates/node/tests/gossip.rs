mod common;

use std::sync::{Arc, Mutex};

use coinami_core::crypto::{sha256, Keypair};
use coinami_core::ledger::{Block, ChainState, BLOCK_REWARD};
use coinami_core::pki::issue_certificate;
use coinami_core::verifier::{issue_token, SignedToken};
use coinami_node::gossip::{NodeState, Outbound, Route};
use coinami_node::net::{Endpoint, Server, TcpEndpoint};
use coinami_node::peers::{serve_request, LocalNode, PeerSet};
use coinami_node::sim::{conserves_value, fuzz, Network};
use coinami_node::wallet::{build_payment, WalletError};
use coinami_node::wire::Message;

struct World {
    root: Keypair,
    authority: Keypair,
    cert: coinami_core::pki::Certificate,
    jobs: u32,
}

impl World {
    fn new() -> Self {
        let root = Keypair::from_seed([1; 32]);
        let authority = Keypair::from_seed([2; 32]);
        let cert = issue_certificate(&root, &authority.public(), "a", 0, u64::MAX);
        Self { root, authority, cert, jobs: 0 }
    }

    fn token(&mut self, miner: &Keypair) -> SignedToken {
        self.jobs += 1;
        let job = format!("job-{}", self.jobs);
        issue_token(&job, &miner.public(), sha256(job.as_bytes()), &self.authority, &self.cert, None, 1).unwrap()
    }

    fn node(&self) -> NodeState {
        NodeState::new(ChainState::new(self.root.public()), None)
    }

    fn block_on(&mut self, node: &NodeState, miner: &Keypair) -> Block {
        let token = self.token(miner);
        Block::assemble(node.chain().tip(), node.chain().height() + 1, 10, token, node.transactions_for_block())
    }
}

fn announce(block: &Block) -> Message {
    Message::BlockAnnounce { block: block.clone() }
}

#[test]
fn valid_block_is_relayed_once_to_everyone_but_the_sender() {
    let mut w = World::new();
    let mut node = w.node();
    let block = w.block_on(&node, &Keypair::from_seed([9; 32]));
    let out = node.handle_gossip(announce(&block), Some("p1".into()));
    assert_eq!(out, vec![Outbound { route: Route::AllExcept(Some("p1".into())), msg: announce(&block) }]);
    assert_eq!(node.chain().tip(), block.hash);
    assert!(node.handle_gossip(announce(&block), Some("p2".into())).is_empty());
    assert!(node.handle_gossip(announce(&block), Some("p1".into())).is_empty());
}

#[test]
fn forged_tokens_are_dropped_silently() {
    let mut w = World::new();
    let mut node = w.node();
    let miner = Keypair::from_seed([9; 32]);

    // Authority certified by some other root.
    let rogue_root = Keypair::from_seed([3; 32]);
    let rogue_cert = issue_certificate(&rogue_root, &w.authority.public(), "a", 0, u64::MAX);
    let token = issue_token("x", &miner.public(), sha256(b"x"), &w.authority, &rogue_cert, None, 1).unwrap();
    let rogue = Block::assemble(node.chain().tip(), 1, 10, token, Vec::new());
    assert!(node.handle_gossip(announce(&rogue), Some("p1".into())).is_empty());

    // Token re-pointed at another miner without re-signing.
    let mut token = w.token(&miner);
    token.miner = Keypair::from_seed([8; 32]).public();
    let stolen = Block::assemble(node.chain().tip(), 1, 10, token, Vec::new());
    assert!(node.handle_gossip(announce(&stolen), Some("p1".into())).is_empty());

    // Non-final token.
    let t1 = issue_token("y", &miner.public(), sha256(b"y"), &w.authority, &w.cert, None, 2).unwrap();
    let early = Block::assemble(node.chain().tip(), 1, 10, t1, Vec::new());
    assert!(node.handle_gossip(announce(&early), Some("p1".into())).is_empty());

    assert_eq!(node.chain().height(), 0);
}

#[test]
fn unknown_parent_asks_the_sender_and_adopts_the_answer() {
    let mut w = World::new();
    let miner = Keypair::from_seed([9; 32]);
    let mut source = w.node();
    for _ in 0..3 {
        let b = w.block_on(&source, &miner);
        source.submit_block(b).unwrap();
    }
    let mut node = w.node();
    let tip = source.chain().tip_block().clone();
    let out = node.handle_gossip(announce(&tip), Some("p1".into()));
    assert_eq!(out, vec![Outbound { route: Route::To("p1".into()), msg: Message::ChainRequest { from: node.chain().tip() } }]);
    let (reply, _) = source.respond(out[0].msg.clone(), Some("p9".into()));
    let relayed = node.handle_gossip(reply, Some("p1".into()));
    assert_eq!(node.chain().tip(), source.chain().tip());
    assert_eq!(relayed.len(), 3);
}

#[test]
fn transactions_relay_once_and_invalid_ones_are_dropped() {
    let mut w = World::new();
    let alice = Keypair::from_seed([9; 32]);
    let bob = Keypair::from_seed([10; 32]);
    let mut node = w.node();
    let b = w.block_on(&node, &alice);
    node.submit_block(b).unwrap();

    let coins = node.chain().unspent_of(&alice.public());
    let tx = build_payment(&alice, &coins, &bob.public(), 30).unwrap();
    assert_eq!(tx.outputs.iter().map(|o| o.amount).collect::<Vec<_>>(), vec![30, 20]);
    let msg = Message::TxAnnounce { tx: tx.clone() };
    assert_eq!(node.handle_gossip(msg.clone(), Some("p1".into())).len(), 1);
    assert!(node.handle_gossip(msg, Some("p2".into())).is_empty());

    let double = build_payment(&alice, &coins, &bob.public(), 50).unwrap();
    assert!(node.handle_gossip(Message::TxAnnounce { tx: double }, Some("p1".into())).is_empty());
    assert_eq!(node.mempool().len(), 1);

    assert_eq!(
        build_payment(&alice, &coins, &bob.public(), 60).unwrap_err(),
        WalletError::InsufficientFunds { needed: 60, available: 50 }
    );

    // Balance moves only once the payment is in a block.
    assert_eq!(node.chain().balance(&bob.public()), 0);
    let b = w.block_on(&node, &alice);
    assert_eq!(b.transactions.len(), 2);
    node.submit_block(b).unwrap();
    assert_eq!(node.chain().balance(&bob.public()), 30);
    assert_eq!(node.chain().balance(&alice.public()), 20 + BLOCK_REWARD);
    assert!(node.mempool().is_empty());
    assert!(conserves_value(node.chain()));
}

#[test]
fn in_process_peers_converge() {
    let mut w = World::new();
    let nodes: Vec<LocalNode> = (0..3).map(|i| LocalNode::new(format!("n{i}"), Arc::new(Mutex::new(w.node())))).collect();
    for (i, n) in nodes.iter().enumerate() {
        let others = nodes.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, o)| Arc::new(o.clone()) as Arc<dyn Endpoint>);
        n.set_peers(PeerSet::new(others.collect()));
    }
    let miner = Keypair::from_seed([9; 32]);
    for round in 0..4 {
        let n = &nodes[round % 3];
        let block = w.block_on(&n.node.lock().unwrap(), &miner);
        let out = n.node.lock().unwrap().submit_block(block).unwrap();
        let peers = n.peers.lock().unwrap().clone();
        peers.deliver(&n.node, out);
    }
    let tip = nodes[0].node.lock().unwrap().chain().tip();
    for n in &nodes {
        let node = n.node.lock().unwrap();
        assert_eq!(node.chain().tip(), tip);
        assert_eq!(node.chain().height(), 4);
    }
}

#[test]
fn tcp_nodes_gossip_blocks_and_answer_wallets() {
    let mut w = World::new();
    let a = Arc::new(Mutex::new(w.node()));
    let b = Arc::new(Mutex::new(w.node()));
    let serve = |node: Arc<Mutex<NodeState>>| {
        Server::bind("127.0.0.1:0", Arc::new(move |msg, from| serve_request(&node, &PeerSet::default(), msg, Some(from.to_string()))))
            .unwrap()
    };
    let server_b = serve(b.clone());
    let peers_a = PeerSet::new(vec![Arc::new(TcpEndpoint::new(server_b.local_addr().to_string()))]);

    let alice = Keypair::from_seed([9; 32]);
    let bob = Keypair::from_seed([10; 32]);
    for _ in 0..2 {
        let block = w.block_on(&a.lock().unwrap(), &alice);
        let out = a.lock().unwrap().submit_block(block).unwrap();
        peers_a.deliver(&a, out);
    }
    assert_eq!(b.lock().unwrap().chain().tip(), a.lock().unwrap().chain().tip());

    // Wallet round trip against node b.
    let wallet = TcpEndpoint::new(server_b.local_addr().to_string());
    let Message::Utxos { entries } = wallet.call(Message::UtxoQuery { owner: alice.public() }).unwrap() else { panic!() };
    assert_eq!(entries.iter().map(|(_, o)| o.amount).sum::<u64>(), 2 * BLOCK_REWARD);
    let tx = build_payment(&alice, &entries, &bob.public(), 70).unwrap();
    assert_eq!(wallet.call(Message::TxAnnounce { tx }).unwrap(), Message::Ack);
    assert_eq!(b.lock().unwrap().mempool().len(), 1);

    // A node that missed everything catches up by asking.
    let c = Arc::new(Mutex::new(w.node()));
    PeerSet::new(vec![Arc::new(wallet)]).sync(&c);
    assert_eq!(c.lock().unwrap().chain().height(), 2);
    server_b.shutdown();
}

#[test]
fn simulated_networks_converge() {
    for (nodes, seed) in [(2, 1), (3, 2), (4, 3), (5, 4), (5, 5)] {
        let report = fuzz(nodes, 150, seed);
        assert!(report.ok(), "{nodes} nodes, seed {seed}: {report:?}");
        assert!(report.blocks_mined >= 10 && report.payments > 0, "{report:?}");
    }
}

#[test]
fn relay_traffic_is_bounded_per_block() {
    let mut w = World::new();
    let root = w.root.public();
    let mut net = Network::new(5, root, 1, 5);
    let miner = Keypair::from_seed([9; 32]);
    let block = w.block_on(net.node(0), &miner);
    let out = net.node_mut(0).submit_block(block).unwrap();
    net.send(0, out);
    net.run_until_quiet();
    assert!(net.converged());
    // Each node forwards a block at most once to each other peer.
    assert!(net.delivered() <= 5 * 4, "{}", net.delivered());
}
