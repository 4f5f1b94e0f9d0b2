//! The mining client: claim, map, submit, and turn final tokens into blocks.

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use coinami_core::assignment::AssignmentBundle;
use coinami_core::crypto::{Digest256, Keypair, PublicKey};
use coinami_core::genomics::{parse_alignment_file, parse_fasta, serialize_alignment_file};
use coinami_core::ledger::Block;
use coinami_core::mapper::{Mapper, MappingParams};
use coinami_core::verifier::SignedToken;
use log::{info, warn};
use thiserror::Error;

use crate::clock::Clock;
use crate::gossip::NodeState;
use crate::net::Endpoint;
use crate::peers::PeerSet;
use crate::wire::{Message, RejectCode, WireError};

#[derive(Debug, Error)]
pub enum MinerError {
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("unexpected response {0}")]
    Unexpected(&'static str),
    #[error("authority certificate does not chain to the root")]
    UntrustedAuthority,
    #[error("reference {0} unavailable or corrupt")]
    Reference(String),
    #[error("own block rejected: {0}")]
    Block(#[from] coinami_core::ledger::BlockError),
    #[error("local result check failed: {0}")]
    LocalCheck(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MineOutcome {
    NoJobs,
    /// The bundle failed its digest or did not parse; the job is dropped.
    BadBundle(String),
    Rejected(RejectCode, String),
    /// Result accepted; the token is not final yet.
    Progress { counter: u32, required: u32 },
    /// Result accepted with a final token; the block was applied.
    Mined(Digest256),
}

pub struct MinerConfig {
    pub keypair: Keypair,
    pub authorities: Vec<Arc<dyn Endpoint>>,
    pub peers: PeerSet,
    pub threads: usize,
    /// Open tokens are kept here across restarts.
    pub datadir: Option<PathBuf>,
}

pub struct Miner {
    keypair: Keypair,
    authorities: Vec<Arc<dyn Endpoint>>,
    authority_keys: Mutex<Vec<Option<PublicKey>>>,
    peers: PeerSet,
    node: Arc<Mutex<NodeState>>,
    clock: Arc<dyn Clock>,
    pool: rayon::ThreadPool,
    datadir: Option<PathBuf>,
    mappers: Mutex<HashMap<(String, MappingParams), Arc<Mapper>>>,
    tokens: Mutex<HashMap<PublicKey, SignedToken>>,
    next: AtomicUsize,
}

impl Miner {
    pub fn new(config: MinerConfig, node: Arc<Mutex<NodeState>>, clock: Arc<dyn Clock>) -> Result<Self, MinerError> {
        assert!(!config.authorities.is_empty(), "a miner needs at least one authority");
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads.max(1))
            .build()
            .map_err(|e| MinerError::Io(std::io::Error::other(e)))?;
        let mut tokens = HashMap::new();
        if let Some(dir) = &config.datadir {
            let tdir = dir.join("tokens");
            fs::create_dir_all(&tdir)?;
            for entry in fs::read_dir(&tdir)? {
                let path = entry?.path();
                match fs::read_to_string(&path).ok().and_then(|t| SignedToken::parse(&t).ok()) {
                    Some(t) if t.miner == config.keypair.public() && !t.is_final() => {
                        tokens.insert(*t.authority(), t);
                    }
                    _ => warn!("ignoring unreadable token file {}", path.display()),
                }
            }
        }
        Ok(Self {
            authority_keys: Mutex::new(vec![None; config.authorities.len()]),
            keypair: config.keypair,
            authorities: config.authorities,
            peers: config.peers,
            node,
            clock,
            pool,
            datadir: config.datadir,
            mappers: Mutex::new(HashMap::new()),
            tokens: Mutex::new(tokens),
            next: AtomicUsize::new(0),
        })
    }

    pub fn public_key(&self) -> PublicKey {
        self.keypair.public()
    }

    pub fn node(&self) -> &Arc<Mutex<NodeState>> {
        &self.node
    }

    pub fn open_token(&self, authority: &PublicKey) -> Option<SignedToken> {
        self.tokens.lock().unwrap().get(authority).cloned()
    }

    fn token_path(&self, authority: &PublicKey) -> Option<PathBuf> {
        self.datadir.as_ref().map(|d| d.join("tokens").join(format!("{authority}.token")))
    }

    fn set_token(&self, authority: &PublicKey, token: Option<SignedToken>) -> Result<(), MinerError> {
        let path = self.token_path(authority);
        let mut tokens = self.tokens.lock().unwrap();
        match token {
            Some(t) => {
                if let Some(p) = path {
                    let tmp = p.with_extension("tmp");
                    fs::write(&tmp, t.render())?;
                    fs::rename(tmp, p)?;
                }
                tokens.insert(*authority, t);
            }
            None => {
                if let Some(p) = path.filter(|p| p.exists()) {
                    fs::remove_file(p)?;
                }
                tokens.remove(authority);
            }
        }
        Ok(())
    }

    fn authority_key(&self, idx: usize) -> Result<PublicKey, MinerError> {
        if let Some(k) = self.authority_keys.lock().unwrap()[idx] {
            return Ok(k);
        }
        let root = *self.node.lock().unwrap().chain().root();
        match self.authorities[idx].call(Message::CertFetch)? {
            Message::Cert { certificate } if certificate.verify(&root, self.clock.now()) => {
                self.authority_keys.lock().unwrap()[idx] = Some(certificate.subject);
                Ok(certificate.subject)
            }
            Message::Cert { .. } => Err(MinerError::UntrustedAuthority),
            other => Err(MinerError::Unexpected(other.op())),
        }
    }

    fn mapper_for(&self, idx: usize, reference_id: &str, params: MappingParams) -> Result<Arc<Mapper>, MinerError> {
        let key = (reference_id.to_string(), params);
        if let Some(m) = self.mappers.lock().unwrap().get(&key) {
            return Ok(m.clone());
        }
        let bad = || MinerError::Reference(reference_id.to_string());
        let fasta = match self.authorities[idx].call(Message::ReferenceFetch { reference_id: reference_id.to_string() })? {
            Message::Reference { fasta } => fasta,
            _ => return Err(bad()),
        };
        let reference = parse_fasta(&fasta).map_err(|_| bad())?;
        if reference.reference_id() != reference_id {
            return Err(bad());
        }
        let mapper = Arc::new(Mapper::new(reference, params).map_err(|_| bad())?);
        self.mappers.lock().unwrap().insert(key, mapper.clone());
        Ok(mapper)
    }

    /// Runs one claim-map-submit round against authority `idx`.
    pub fn mine_once(&self, idx: usize) -> Result<MineOutcome, MinerError> {
        let auth = &self.authorities[idx];
        let authority = self.authority_key(idx)?;
        let me = self.keypair.public();
        let (job_id, manifest) = match auth.call(Message::JobClaim { miner: me })? {
            Message::JobOffer { job_id, manifest, .. } => (job_id, manifest),
            Message::NoJobs => return Ok(MineOutcome::NoJobs),
            other => return Err(MinerError::Unexpected(other.op())),
        };
        let bytes = match auth.call(Message::AssignmentFetch { job_id: job_id.clone(), miner: me })? {
            Message::Bundle { bytes } => bytes,
            Message::Rejected { code, detail } => return Ok(MineOutcome::Rejected(code, detail)),
            other => return Err(MinerError::Unexpected(other.op())),
        };
        let bundle = match AssignmentBundle::from_bytes(&bytes) {
            Ok(b) if b.manifest == manifest => b,
            Ok(_) => return Ok(MineOutcome::BadBundle("bundle does not match the offered manifest".into())),
            Err(e) => {
                warn!("discarding bundle for {job_id}: {e}");
                return Ok(MineOutcome::BadBundle(e.to_string()));
            }
        };
        let mapper = self.mapper_for(idx, &manifest.reference_id, manifest.params)?;
        let (mate1, mate2) = bundle.reads().map_err(|e| MinerError::LocalCheck(e.to_string()))?;
        let file = self.pool.install(|| mapper.map_assignment(&mate1, &mate2));
        let result = serialize_alignment_file(&file).map_err(|e| MinerError::LocalCheck(e.to_string()))?;
        let reparsed = parse_alignment_file(result.as_bytes()).map_err(|e| MinerError::LocalCheck(e.to_string()))?;
        if reparsed != file {
            return Err(MinerError::LocalCheck("result does not re-parse to itself".into()));
        }
        info!("mapped {job_id}: {} records", file.records.len());

        let prior = self.open_token(&authority);
        let submit = Message::ResultSubmit { job_id: job_id.clone(), miner: me, prior_token: prior, result: result.into_bytes() };
        let token = match auth.call(submit)? {
            Message::Token { token } => token,
            Message::Rejected { code, detail } => {
                if code == RejectCode::InvalidPriorToken {
                    self.set_token(&authority, None)?;
                }
                warn!("{job_id} rejected: {detail}");
                return Ok(MineOutcome::Rejected(code, detail));
            }
            other => return Err(MinerError::Unexpected(other.op())),
        };
        if token.authority() != &authority || token.miner != me {
            return Err(MinerError::Unexpected("TOKEN for another party"));
        }
        if !token.is_final() {
            let (counter, required) = (token.counter, token.required);
            self.set_token(&authority, Some(token))?;
            return Ok(MineOutcome::Progress { counter, required });
        }
        let outbound = {
            let mut node = self.node.lock().unwrap();
            let tip = node.chain().tip();
            let height = node.chain().height() + 1;
            let txs = node.transactions_for_block();
            let block = Block::assemble(tip, height, self.clock.now(), token, txs);
            let hash = block.hash;
            let out = node.submit_block(block)?;
            info!("mined block {hash} at height {height}");
            (hash, out)
        };
        self.set_token(&authority, None)?;
        self.peers.deliver(&self.node, outbound.1);
        Ok(MineOutcome::Mined(outbound.0))
    }

    /// Mines until `stop` is set, round-robin over authorities. When no
    /// authority has work the miner backs off exponentially from 1 s to at
    /// most 60 s.
    pub fn mining_loop(&self, stop: &AtomicBool) {
        let mut idle_rounds = 0u32;
        let mut idle_authorities = 0;
        while !stop.load(Ordering::SeqCst) {
            let idx = self.next.fetch_add(1, Ordering::SeqCst) % self.authorities.len();
            match self.mine_once(idx) {
                Ok(MineOutcome::NoJobs) => idle_authorities += 1,
                Ok(outcome) => {
                    info!("{}: {outcome:?}", self.authorities[idx].describe());
                    idle_authorities = 0;
                    idle_rounds = 0;
                }
                Err(e) => {
                    warn!("{}: {e}", self.authorities[idx].describe());
                    idle_authorities += 1;
                }
            }
            if idle_authorities >= self.authorities.len() {
                idle_authorities = 0;
                let delay = backoff(idle_rounds);
                idle_rounds = idle_rounds.saturating_add(1);
                sleep_unless_stopped(delay, stop);
            }
        }
    }
}

/// Delay after `n` consecutive idle rounds: 1 s doubling up to 60 s.
pub fn backoff(n: u32) -> Duration {
    Duration::from_secs(1u64.checked_shl(n.min(6)).unwrap_or(60).min(60))
}

fn sleep_unless_stopped(total: Duration, stop: &AtomicBool) {
    let step = Duration::from_millis(50);
    let mut waited = Duration::ZERO;
    while waited < total && !stop.load(Ordering::SeqCst) {
        std::thread::sleep(step);
        waited += step;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_schedule() {
        let secs: Vec<u64> = (0..9).map(|n| backoff(n).as_secs()).collect();
        assert_eq!(secs, vec![1, 2, 4, 8, 16, 32, 60, 60, 60]);
    }
}
