#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use coinami_core::crypto::Keypair;
use coinami_core::ledger::ChainState;
use coinami_core::mapper::{Mapper, MappingParams};
use coinami_core::pki::issue_certificate;
use coinami_core::synth;
use coinami_node::authority::{Authority, AuthorityConfig};
use coinami_node::clock::{Clock, ManualClock};
use coinami_node::gossip::NodeState;
use coinami_node::miner::{Miner, MinerConfig};
use coinami_node::net::{Endpoint, LocalAuthority};
use coinami_node::peers::PeerSet;

pub const START: u64 = 1_000_000;

pub struct Fixture {
    pub root: Keypair,
    pub authority: Arc<Authority>,
    pub clock: ManualClock,
}

pub struct Setup {
    pub difficulty: u32,
    pub samples: usize,
    pub pairs_per_sample: usize,
    pub pairs_per_job: usize,
    pub deadline_secs: u64,
}

impl Default for Setup {
    fn default() -> Self {
        Self { difficulty: 1, samples: 2, pairs_per_sample: 40, pairs_per_job: 40, deadline_secs: 600 }
    }
}

pub fn fixture(setup: Setup) -> Fixture {
    let root = Keypair::from_seed([1; 32]);
    let key = Keypair::from_seed([2; 32]);
    let cert = issue_certificate(&root, &key.public(), "test authority", 0, u64::MAX);
    let reference = synth::random_reference(7, &[("chr1", 10_000)]);
    let mapper = Mapper::new(reference, MappingParams::default()).unwrap();
    let samples = synth::samples(mapper.reference(), setup.samples, setup.pairs_per_sample, 100, 9);
    let clock = ManualClock::new(START);
    let config = AuthorityConfig {
        difficulty_d: setup.difficulty,
        deadline_secs: setup.deadline_secs,
        pairs_per_job: setup.pairs_per_job,
        queue_depth: 2,
        seed: 3,
        ..AuthorityConfig::default()
    };
    let authority = Arc::new(Authority::new(key, cert, mapper, config, Arc::new(clock.clone()) as Arc<dyn Clock>));
    authority.add_samples(samples);
    Fixture { root, authority, clock }
}

impl Fixture {
    pub fn endpoint(&self) -> Arc<dyn Endpoint> {
        Arc::new(LocalAuthority(self.authority.clone()))
    }

    pub fn node(&self) -> Arc<Mutex<NodeState>> {
        Arc::new(Mutex::new(NodeState::new(ChainState::new(self.root.public()), None)))
    }

    pub fn miner(&self, seed: u8, authority: Arc<dyn Endpoint>, datadir: Option<PathBuf>) -> Miner {
        self.miner_on(seed, authority, datadir, self.node())
    }

    pub fn miner_on(&self, seed: u8, authority: Arc<dyn Endpoint>, datadir: Option<PathBuf>, node: Arc<Mutex<NodeState>>) -> Miner {
        let config = MinerConfig {
            keypair: Keypair::from_seed([seed; 32]),
            authorities: vec![authority],
            peers: PeerSet::default(),
            threads: 2,
            datadir,
        };
        Miner::new(config, node, Arc::new(self.clock.clone())).unwrap()
    }
}
