//! Networked roles for the read-mapping currency: the authority daemon,
//! the miner, gossip between full nodes, and a wallet.

pub mod authority;
pub mod bench;
pub mod clock;
pub mod gossip;
pub mod keyfile;
pub mod miner;
pub mod net;
pub mod peers;
pub mod scheduler;
pub mod sim;
pub mod wallet;
pub mod wire;
