//! The authority service: builds assignments ahead of demand, leases them to
//! miners, verifies results and signs tokens.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fs;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use coinami_core::assignment::{
    decoy_count_for, generate_decoys, multiplex, AssignmentBundle, AssignmentError, DecoySecrets, MultiplexSettings,
    NameKey, ReadPair, Sample, SampleSet,
};
use coinami_core::crypto::{sha256, Digest256, Keypair, PublicKey};
use coinami_core::genomics::{serialize_alignment_file, serialize_fasta, AlignmentFile};
use coinami_core::mapper::Mapper;
use coinami_core::pki::Certificate;
use coinami_core::rng::derive_seed;
use coinami_core::verifier::{issue_token, verify_result_bytes, RejectReason, Verdict};
use log::{info, warn};

use crate::clock::Clock;
use crate::scheduler::{LeaseError, Scheduler};
use crate::wire::{Message, RejectCode};

#[derive(Clone, Debug)]
pub struct AuthorityConfig {
    pub difficulty_d: u32,
    pub deadline_secs: u64,
    pub decoy_fraction: f64,
    pub substitution_rate: f64,
    /// Sample read pairs per assignment, before decoys.
    pub pairs_per_job: usize,
    /// Ready assignments kept ahead of demand.
    pub queue_depth: usize,
    pub seed: u64,
    /// Where per-sample outputs of accepted jobs are written. Kept in memory
    /// when unset.
    pub output_dir: Option<PathBuf>,
}

impl Default for AuthorityConfig {
    fn default() -> Self {
        Self {
            difficulty_d: 1,
            deadline_secs: 600,
            decoy_fraction: 0.05,
            substitution_rate: 0.01,
            pairs_per_job: 950,
            queue_depth: 8,
            seed: 0,
            output_dir: None,
        }
    }
}

/// Sample reads not yet packed into an assignment.
#[derive(Debug, Default)]
struct SampleFeed {
    samples: VecDeque<(String, u64, VecDeque<ReadPair>)>,
}

impl SampleFeed {
    fn remaining(&self) -> usize {
        self.samples.iter().map(|(_, _, p)| p.len()).sum()
    }

    /// Takes up to `n` pairs spread evenly over the samples with reads left.
    fn take(&mut self, n: usize) -> Vec<Sample> {
        self.samples.retain(|(_, _, p)| !p.is_empty());
        let mut out = Vec::new();
        let mut left = n;
        let mut live = self.samples.len();
        for (id, next_serial, pairs) in self.samples.iter_mut() {
            if left == 0 {
                break;
            }
            let share = left.div_ceil(live).min(pairs.len());
            live -= 1;
            left -= share;
            let taken: Vec<ReadPair> = pairs.drain(..share).collect();
            out.push(Sample { id: id.clone(), first_serial: *next_serial, pairs: taken });
            *next_serial += share as u64;
        }
        self.samples.retain(|(_, _, p)| !p.is_empty());
        out
    }
}

#[derive(Clone)]
struct JobData {
    bundle_bytes: Arc<Vec<u8>>,
    bundle: Arc<AssignmentBundle>,
    secrets: Arc<DecoySecrets>,
}

struct State {
    scheduler: Scheduler<JobData>,
    feed: SampleFeed,
    next_job: u64,
    building: usize,
}

/// Outputs of one accepted job.
#[derive(Clone, Debug)]
pub struct CompletedJob {
    pub job_id: String,
    pub miner: PublicKey,
    pub per_sample: BTreeMap<String, AlignmentFile>,
}

pub struct Authority {
    key: Keypair,
    certificate: Certificate,
    name_key: NameKey,
    mapper: Arc<Mapper>,
    reference_fasta: Vec<u8>,
    reference_id: String,
    config: AuthorityConfig,
    clock: Arc<dyn Clock>,
    state: Mutex<State>,
    miner_locks: Mutex<HashMap<PublicKey, Arc<Mutex<()>>>>,
    spent_priors: Mutex<HashSet<Digest256>>,
    completed: Mutex<Vec<CompletedJob>>,
}

fn reject(code: RejectCode, detail: impl Into<String>) -> Message {
    Message::Rejected { code, detail: detail.into() }
}

fn lease_reject(e: LeaseError) -> Message {
    let code = match e {
        LeaseError::NoJobs | LeaseError::UnknownJob(_) => RejectCode::NoSuchJob,
        LeaseError::LeaseExpired => RejectCode::LeaseExpired,
        LeaseError::NotLeaseHolder => RejectCode::NotLeaseHolder,
        LeaseError::AlreadyCompleted => RejectCode::AlreadyCompleted,
    };
    reject(code, e.to_string())
}

fn verdict_code(reason: &RejectReason) -> RejectCode {
    match reason {
        RejectReason::MissingReads => RejectCode::MissingReads,
        RejectReason::DecoyMismatch => RejectCode::DecoyMismatch,
        RejectReason::UnknownName => RejectCode::UnknownName,
        RejectReason::NotSorted => RejectCode::NotSorted,
        RejectReason::Malformed(_) => RejectCode::Malformed,
    }
}

impl Authority {
    /// The name key is derived from the signing key, so a restarted
    /// authority can still read names of assignments it issued.
    pub fn new(
        key: Keypair,
        certificate: Certificate,
        mapper: Mapper,
        config: AuthorityConfig,
        clock: Arc<dyn Clock>,
    ) -> Self {
        assert_eq!(certificate.subject, key.public(), "certificate is for another key");
        let reference_fasta = serialize_fasta(mapper.reference()).into_bytes();
        let reference_id = mapper.reference().reference_id();
        let name_key = NameKey::from_bytes(coinami_core::crypto::hmac_sha256(&key.seed(), b"coinami/authority/name-key"));
        Self {
            key,
            certificate,
            name_key,
            mapper: Arc::new(mapper),
            reference_fasta,
            reference_id,
            config,
            clock,
            state: Mutex::new(State { scheduler: Scheduler::new(), feed: SampleFeed::default(), next_job: 0, building: 0 }),
            miner_locks: Mutex::new(HashMap::new()),
            spent_priors: Mutex::new(HashSet::new()),
            completed: Mutex::new(Vec::new()),
        }
    }

    pub fn public_key(&self) -> PublicKey {
        self.key.public()
    }

    pub fn certificate(&self) -> &Certificate {
        &self.certificate
    }

    pub fn reference_id(&self) -> &str {
        &self.reference_id
    }

    pub fn config(&self) -> &AuthorityConfig {
        &self.config
    }

    /// Queues sample reads for packing into assignments.
    pub fn add_samples(&self, samples: Vec<Sample>) {
        let mut st = self.state.lock().unwrap();
        for s in samples {
            st.feed.samples.push_back((s.id, s.first_serial, s.pairs.into()));
        }
    }

    pub fn pending_sample_pairs(&self) -> usize {
        self.state.lock().unwrap().feed.remaining()
    }

    /// Jobs not yet completed, leased or not.
    pub fn outstanding_jobs(&self) -> usize {
        self.state.lock().unwrap().scheduler.outstanding()
    }

    pub fn completions(&self) -> usize {
        self.state.lock().unwrap().scheduler.completions()
    }

    pub fn job_state(&self, job_id: &str) -> Option<crate::scheduler::LeaseState> {
        self.state.lock().unwrap().scheduler.state(job_id).cloned()
    }

    pub fn completed_jobs(&self) -> Vec<CompletedJob> {
        self.completed.lock().unwrap().clone()
    }

    pub fn expire_leases(&self) -> Vec<String> {
        let now = self.clock.now();
        let expired = self.state.lock().unwrap().scheduler.expire(now);
        for id in &expired {
            info!("lease on {id} expired; job re-queued");
        }
        expired
    }

    /// Builds assignments until `queue_depth` are ready or the sample reads
    /// run out. Multiplexing runs outside the state lock.
    pub fn refill(&self) -> Result<usize, AssignmentError> {
        let mut built = 0;
        loop {
            let (job_id, samples) = {
                let mut st = self.state.lock().unwrap();
                if st.scheduler.available() + st.building >= self.config.queue_depth || st.feed.remaining() == 0 {
                    return Ok(built);
                }
                let samples = st.feed.take(self.config.pairs_per_job);
                let job_id = format!("{}-{:06}", &self.key.public().to_hex()[..8], st.next_job);
                st.next_job += 1;
                st.building += 1;
                (job_id, samples)
            };
            let result = self.build_job(&job_id, samples);
            let mut st = self.state.lock().unwrap();
            st.building -= 1;
            let job = result?;
            st.scheduler.add(&job_id, self.config.deadline_secs, job);
            built += 1;
            info!("assignment {job_id} ready");
        }
    }

    fn build_job(&self, job_id: &str, samples: Vec<Sample>) -> Result<JobData, AssignmentError> {
        let samples = SampleSet::new(samples);
        let read_len = samples.samples.iter().flat_map(|s| &s.pairs).next().map_or(0, |p| p.mate1.len());
        let n_decoys = decoy_count_for(samples.pair_count(), self.config.decoy_fraction);
        let decoys = generate_decoys(
            &self.mapper,
            n_decoys,
            read_len,
            self.config.substitution_rate,
            derive_seed(self.config.seed, &format!("{job_id}/decoys")),
        )?;
        let settings = MultiplexSettings {
            reference_id: self.reference_id.clone(),
            params: *self.mapper.params(),
            decoy_fraction: self.config.decoy_fraction,
            deadline_secs: self.config.deadline_secs,
        };
        let seed = derive_seed(self.config.seed, &format!("{job_id}/shuffle"));
        let (bundle, secrets) = multiplex(&samples, &decoys, &self.name_key, job_id, &settings, seed)?;
        Ok(JobData { bundle_bytes: Arc::new(bundle.to_bytes()), bundle: Arc::new(bundle), secrets: Arc::new(secrets) })
    }

    pub fn handle(&self, msg: Message) -> Message {
        match msg {
            Message::JobClaim { miner } => self.claim(&miner),
            Message::AssignmentFetch { job_id, miner } => {
                let now = self.clock.now();
                let mut st = self.state.lock().unwrap();
                match st.scheduler.check_lease(&job_id, &miner, now) {
                    Ok(job) => Message::Bundle { bytes: job.bundle_bytes.as_ref().clone() },
                    Err(e) => lease_reject(e),
                }
            }
            Message::ResultSubmit { job_id, miner, prior_token, result } => {
                self.submit(&job_id, &miner, prior_token, &result)
            }
            Message::ReferenceFetch { reference_id } if reference_id == self.reference_id => {
                Message::Reference { fasta: self.reference_fasta.clone() }
            }
            Message::ReferenceFetch { .. } => reject(RejectCode::Malformed, "unknown reference"),
            Message::CertFetch => Message::Cert { certificate: self.certificate.clone() },
            other => reject(RejectCode::Malformed, format!("{} is not an authority request", other.op())),
        }
    }

    fn claim(&self, miner: &PublicKey) -> Message {
        for attempt in 0..2 {
            let now = self.clock.now();
            let claimed = {
                let mut st = self.state.lock().unwrap();
                st.scheduler.claim(miner, now).map(|(id, deadline)| {
                    let manifest = st.scheduler.payload(&id).expect("claimed job").bundle.manifest.clone();
                    (id, deadline, manifest)
                })
            };
            match claimed {
                Ok((job_id, deadline, manifest)) => {
                    info!("leased {job_id} to {miner:?} until {deadline}");
                    return Message::JobOffer { job_id, deadline, manifest };
                }
                Err(_) if attempt == 0 => {
                    if let Err(e) = self.refill() {
                        warn!("assignment build failed: {e}");
                        break;
                    }
                }
                Err(_) => {}
            }
        }
        Message::NoJobs
    }

    fn miner_lock(&self, miner: &PublicKey) -> Arc<Mutex<()>> {
        self.miner_locks.lock().unwrap().entry(*miner).or_default().clone()
    }

    fn submit(&self, job_id: &str, miner: &PublicKey, prior: Option<coinami_core::verifier::SignedToken>, result: &[u8]) -> Message {
        let lock = self.miner_lock(miner);
        let _serial = lock.lock().unwrap();
        let prior_id = prior.as_ref().map(|t| sha256(t.render().as_bytes()));
        if let (Some(p), Some(id)) = (&prior, prior_id) {
            if self.spent_priors.lock().unwrap().contains(&id) {
                return reject(RejectCode::InvalidPriorToken, "prior token already extended");
            }
            if !p.signature_valid() || p.is_final() || p.miner != *miner || p.authority() != &self.key.public() {
                return reject(RejectCode::InvalidPriorToken, "prior token is not an open token of this miner");
            }
        }
        let job = {
            let now = self.clock.now();
            let mut st = self.state.lock().unwrap();
            match st.scheduler.check_lease(job_id, miner, now) {
                Ok(job) => job.clone(),
                Err(e) => return lease_reject(e),
            }
        };
        let report = verify_result_bytes(result, &job.bundle.manifest, &job.secrets);
        if let Verdict::Reject(reason) = &report.verdict {
            warn!("result for {job_id} rejected: {reason}");
            let now = self.clock.now();
            let _ = self.state.lock().unwrap().scheduler.release(job_id, miner, now);
            return reject(verdict_code(reason), reason.to_string());
        }
        {
            let now = self.clock.now();
            if let Err(e) = self.state.lock().unwrap().scheduler.complete(job_id, miner, now) {
                return lease_reject(e);
            }
        }
        let token = match issue_token(
            job_id,
            miner,
            report.result_digest,
            &self.key,
            &self.certificate,
            prior.as_ref(),
            self.config.difficulty_d,
        ) {
            Ok(t) => t,
            Err(e) => return reject(RejectCode::InvalidPriorToken, e.to_string()),
        };
        if let Some(id) = prior_id {
            self.spent_priors.lock().unwrap().insert(id);
        }
        self.store_outputs(job_id, miner, report.per_sample_outputs);
        info!("accepted {job_id} from {miner:?}; token {}/{}", token.counter, token.required);
        Message::Token { token }
    }

    fn store_outputs(&self, job_id: &str, miner: &PublicKey, per_sample: BTreeMap<String, AlignmentFile>) {
        if let Some(dir) = &self.config.output_dir {
            let job_dir = dir.join(job_id);
            let written = fs::create_dir_all(&job_dir).and_then(|_| {
                per_sample.iter().try_for_each(|(sample, file)| {
                    let text = serialize_alignment_file(file).expect("verified output is sorted");
                    fs::write(job_dir.join(format!("{sample}.sam")), text)
                })
            });
            if let Err(e) = written {
                warn!("could not write outputs of {job_id}: {e}");
            }
            return;
        }
        self.completed.lock().unwrap().push(CompletedJob { job_id: job_id.to_string(), miner: *miner, per_sample });
    }
}
