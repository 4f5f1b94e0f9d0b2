//! Miner daemon and full node.

use std::fs;
use std::path::PathBuf;
use std::sync::atomic::AtomicBool;
use std::sync::{Arc, Mutex};

use clap::Parser;
use coinami_core::crypto::PublicKey;
use coinami_core::ledger::BlockStore;
use coinami_node::clock::SystemClock;
use coinami_node::gossip::NodeState;
use coinami_node::keyfile::read_keypair;
use coinami_node::miner::{Miner, MinerConfig};
use coinami_node::net::{Endpoint, Server, TcpEndpoint};
use coinami_node::peers::{serve_request, PeerSet};
use log::info;

#[derive(Parser)]
#[command(about = "Mapping miner and ledger node")]
struct Args {
    #[arg(long)]
    key: PathBuf,
    #[arg(long)]
    passphrase_file: Option<PathBuf>,
    /// Root authority public key, hex.
    #[arg(long)]
    root: String,
    #[arg(long = "authority", required = true)]
    authorities: Vec<String>,
    #[arg(long = "peer")]
    peers: Vec<String>,
    /// Address to accept peer and wallet connections on.
    #[arg(long)]
    listen: Option<String>,
    #[arg(long)]
    datadir: PathBuf,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// off, error, warn, info, debug or trace.
    #[arg(long, default_value = "info")]
    log_level: log::LevelFilter,
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args = Args::parse();
    env_logger::Builder::new().filter_level(args.log_level).init();
    let keypair = read_keypair(&args.key, args.passphrase_file.as_deref())?;
    let root: PublicKey = args.root.parse()?;
    fs::create_dir_all(&args.datadir)?;
    let (store, chain) = BlockStore::load_chain(args.datadir.join("blocks.dat"), root)?;
    info!("chain loaded: height {} tip {}", chain.height(), chain.tip());
    let node = Arc::new(Mutex::new(NodeState::new(chain, Some(store))));

    let peers = PeerSet::new(
        args.peers.iter().map(|a| Arc::new(TcpEndpoint::new(a.clone())) as Arc<dyn Endpoint>).collect(),
    );
    let _server = match &args.listen {
        Some(addr) => {
            let (node, peers) = (node.clone(), peers.clone());
            let server = Server::bind(
                addr,
                Arc::new(move |msg, from| serve_request(&node, &peers, msg, Some(from.to_string()))),
            )?;
            info!("node listening on {}", server.local_addr());
            Some(server)
        }
        None => None,
    };
    peers.sync(&node);

    let miner = Miner::new(
        MinerConfig {
            keypair,
            authorities: args
                .authorities
                .iter()
                .map(|a| Arc::new(TcpEndpoint::new(a.clone())) as Arc<dyn Endpoint>)
                .collect(),
            peers,
            threads: args.threads,
            datadir: Some(args.datadir),
        },
        node,
        Arc::new(SystemClock),
    )?;
    info!("mining as {}", miner.public_key());
    miner.mining_loop(&AtomicBool::new(false));
    Ok(())
}
