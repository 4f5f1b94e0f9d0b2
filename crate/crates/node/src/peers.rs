//! Delivery of node outbound messages to a static peer list.

use std::sync::{Arc, Mutex};

use log::debug;

use crate::gossip::{NodeState, Outbound, Route};
use crate::net::Endpoint;
use crate::wire::Message;

#[derive(Clone, Default)]
pub struct PeerSet {
    peers: Vec<Arc<dyn Endpoint>>,
}

impl PeerSet {
    pub fn new(peers: Vec<Arc<dyn Endpoint>>) -> Self {
        Self { peers }
    }

    pub fn len(&self) -> usize {
        self.peers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peers.is_empty()
    }

    /// Sends broadcasts to every peer. Chain responses that come back are
    /// fed into `node` and whatever they trigger is delivered in turn.
    /// Point-to-point routes name connection addresses that cannot be
    /// dialled back: a chain request is broadcast instead, anything else is
    /// dropped.
    pub fn deliver(&self, node: &Mutex<NodeState>, outbound: Vec<Outbound>) {
        let mut queue = outbound;
        let mut rounds = 0;
        while !queue.is_empty() && rounds < 16 {
            rounds += 1;
            let mut next = Vec::new();
            for out in queue {
                if let Route::To(peer) = &out.route {
                    if !matches!(out.msg, Message::ChainRequest { .. }) {
                        debug!("cannot route reply to {peer}");
                        continue;
                    }
                }
                for peer in &self.peers {
                    match peer.call(out.msg.clone()) {
                        Ok(reply @ Message::ChainResponse { .. }) => {
                            next.extend(node.lock().unwrap().handle_gossip(reply, None));
                        }
                        Ok(_) => {}
                        Err(e) => debug!("{}: {e}", peer.describe()),
                    }
                }
            }
            queue = next;
        }
    }

    /// Asks every peer for blocks past our tip.
    pub fn sync(&self, node: &Mutex<NodeState>) {
        let tip = node.lock().unwrap().chain().tip();
        self.deliver(node, vec![Outbound { route: Route::AllExcept(None), msg: Message::ChainRequest { from: tip } }]);
    }
}

/// Serves one request from a peer or wallet: answers it from the node and
/// relays whatever it triggers to our own peers.
pub fn serve_request(node: &Mutex<NodeState>, peers: &PeerSet, msg: Message, from: Option<String>) -> Message {
    let (reply, outbound) = node.lock().unwrap().respond(msg, from);
    peers.deliver(node, outbound);
    reply
}

/// A node in the same process, reached through [`serve_request`].
#[derive(Clone)]
pub struct LocalNode {
    pub name: String,
    pub node: Arc<Mutex<NodeState>>,
    pub peers: Arc<Mutex<PeerSet>>,
}

impl LocalNode {
    pub fn new(name: impl Into<String>, node: Arc<Mutex<NodeState>>) -> Self {
        Self { name: name.into(), node, peers: Arc::new(Mutex::new(PeerSet::default())) }
    }

    pub fn set_peers(&self, peers: PeerSet) {
        *self.peers.lock().unwrap() = peers;
    }
}

impl Endpoint for LocalNode {
    fn call(&self, msg: Message) -> Result<Message, crate::wire::WireError> {
        let peers = self.peers.lock().unwrap().clone();
        Ok(serve_request(&self.node, &peers, msg, None))
    }

    fn describe(&self) -> String {
        self.name.clone()
    }
}
