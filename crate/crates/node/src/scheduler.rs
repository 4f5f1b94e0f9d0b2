//! FIFO job queue with deadline leases.
//!
//! A job is `Available`, `Leased` to one miner until a deadline, or
//! `Completed`. An expired lease goes straight back to the end of the queue;
//! the miner that held it gets `LeaseExpired` if it submits later.

use std::collections::{HashMap, HashSet, VecDeque};

use coinami_core::crypto::PublicKey;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LeaseState {
    Available,
    Leased { miner: PublicKey, deadline: u64 },
    Completed,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LeaseError {
    #[error("no jobs available")]
    NoJobs,
    #[error("unknown job {0}")]
    UnknownJob(String),
    #[error("lease expired")]
    LeaseExpired,
    #[error("job is not leased to this miner")]
    NotLeaseHolder,
    #[error("job already completed")]
    AlreadyCompleted,
}

#[derive(Debug)]
struct Entry<J> {
    state: LeaseState,
    payload: J,
    lapsed: HashSet<PublicKey>,
    deadline_secs: u64,
}

#[derive(Debug)]
pub struct Scheduler<J> {
    jobs: HashMap<String, Entry<J>>,
    queue: VecDeque<String>,
    completions: usize,
}

impl<J> Default for Scheduler<J> {
    fn default() -> Self {
        Self { jobs: HashMap::new(), queue: VecDeque::new(), completions: 0 }
    }
}

impl<J> Scheduler<J> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Queues a job whose leases last `deadline_secs`. Panics on a reused id.
    pub fn add(&mut self, job_id: &str, deadline_secs: u64, payload: J) {
        let entry = Entry { state: LeaseState::Available, payload, lapsed: HashSet::new(), deadline_secs };
        assert!(self.jobs.insert(job_id.to_string(), entry).is_none(), "duplicate job id {job_id}");
        self.queue.push_back(job_id.to_string());
    }

    pub fn state(&self, job_id: &str) -> Option<&LeaseState> {
        self.jobs.get(job_id).map(|e| &e.state)
    }

    pub fn payload(&self, job_id: &str) -> Option<&J> {
        self.jobs.get(job_id).map(|e| &e.payload)
    }

    pub fn available(&self) -> usize {
        self.queue.len()
    }

    pub fn outstanding(&self) -> usize {
        self.jobs.values().filter(|e| e.state != LeaseState::Completed).count()
    }

    pub fn completions(&self) -> usize {
        self.completions
    }

    /// Returns every lease with `deadline < now` to the queue.
    pub fn expire(&mut self, now: u64) -> Vec<String> {
        let mut expired: Vec<String> = self
            .jobs
            .iter()
            .filter(|(_, e)| matches!(e.state, LeaseState::Leased { deadline, .. } if deadline < now))
            .map(|(id, _)| id.clone())
            .collect();
        expired.sort();
        for id in &expired {
            let entry = self.jobs.get_mut(id).expect("listed job");
            if let LeaseState::Leased { miner, .. } = entry.state {
                entry.lapsed.insert(miner);
            }
            entry.state = LeaseState::Available;
            self.queue.push_back(id.clone());
        }
        expired
    }

    /// Leases the oldest available job to `miner` until `now + deadline`.
    pub fn claim(&mut self, miner: &PublicKey, now: u64) -> Result<(String, u64), LeaseError> {
        self.expire(now);
        let id = self.queue.pop_front().ok_or(LeaseError::NoJobs)?;
        let entry = self.jobs.get_mut(&id).expect("queued job");
        let deadline = now + entry.deadline_secs;
        entry.state = LeaseState::Leased { miner: *miner, deadline };
        entry.lapsed.remove(miner);
        Ok((id, deadline))
    }

    /// Checks that `miner` holds an unexpired lease on `job_id`.
    pub fn check_lease(&mut self, job_id: &str, miner: &PublicKey, now: u64) -> Result<&J, LeaseError> {
        self.expire(now);
        let entry = self.jobs.get(job_id).ok_or_else(|| LeaseError::UnknownJob(job_id.to_string()))?;
        match &entry.state {
            LeaseState::Leased { miner: holder, .. } if holder == miner => Ok(&entry.payload),
            LeaseState::Completed => Err(LeaseError::AlreadyCompleted),
            _ if entry.lapsed.contains(miner) => Err(LeaseError::LeaseExpired),
            _ => Err(LeaseError::NotLeaseHolder),
        }
    }

    /// Marks a leased job completed. Fails unless `miner` still holds it.
    pub fn complete(&mut self, job_id: &str, miner: &PublicKey, now: u64) -> Result<(), LeaseError> {
        self.check_lease(job_id, miner, now)?;
        let entry = self.jobs.get_mut(job_id).expect("checked job");
        entry.state = LeaseState::Completed;
        self.completions += 1;
        Ok(())
    }

    /// Ends `miner`'s lease early and re-queues the job.
    pub fn release(&mut self, job_id: &str, miner: &PublicKey, now: u64) -> Result<(), LeaseError> {
        self.check_lease(job_id, miner, now)?;
        let entry = self.jobs.get_mut(job_id).expect("checked job");
        entry.state = LeaseState::Available;
        self.queue.push_back(job_id.to_string());
        Ok(())
    }
}
