//! Authority-side result verification and demultiplexing.
//!
//! A result is accepted only if every read pair of the assignment appears
//! exactly once per mate, every decoy sits exactly at the alignment embedded
//! in its decrypted name, and the file is canonical and sorted. Sample
//! alignments are then routed back to their samples under readable names.

mod token;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

pub use token::{issue_token, verify_token, SignedToken, TokenError};

use crate::assignment::{AssignmentManifest, DecoySecrets, ExpectedAlignment, NameKind};
use crate::crypto::{sha256, Digest256};
use crate::genomics::{parse_alignment_file, serialize_alignment_file, AlignmentFile, Flags};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RejectReason {
    MissingReads,
    DecoyMismatch,
    UnknownName,
    NotSorted,
    Malformed(String),
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::MissingReads => f.write_str("missing or repeated reads"),
            RejectReason::DecoyMismatch => f.write_str("decoy alignment mismatch"),
            RejectReason::UnknownName => f.write_str("unknown read name"),
            RejectReason::NotSorted => f.write_str("alignment file not sorted"),
            RejectReason::Malformed(m) => write!(f, "malformed result: {m}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject(RejectReason),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerificationReport {
    pub job_id: String,
    pub verdict: Verdict,
    /// Decoy pairs seen in the result.
    pub decoys_checked: usize,
    /// Decoy pairs with at least one mate off its expected alignment.
    pub decoys_failed: usize,
    /// SHA-256 of the canonical serialization of the result.
    pub result_digest: Digest256,
    /// Empty unless accepted.
    pub per_sample_outputs: BTreeMap<String, AlignmentFile>,
}

impl VerificationReport {
    pub fn accepted(&self) -> bool {
        self.verdict == Verdict::Accept
    }
}

fn mate_of(flags: Flags) -> Option<usize> {
    match (flags.contains(Flags::MATE1), flags.contains(Flags::MATE2)) {
        _ if !flags.contains(Flags::PAIRED) => None,
        (true, false) => Some(0),
        (false, true) => Some(1),
        _ => None,
    }
}

/// Verifies a parsed result.
///
/// Runs one pass over the records. When several problems are present the
/// reported reason is the first of: malformed, unknown name, decoy mismatch,
/// missing reads, unsorted.
pub fn verify_result(result: &AlignmentFile, manifest: &AssignmentManifest, secrets: &DecoySecrets) -> VerificationReport {
    let digest = serialize_alignment_file(result).map(|s| sha256(s.as_bytes())).unwrap_or(Digest256::ZERO);
    let mut report = VerificationReport {
        job_id: manifest.job_id.clone(),
        verdict: Verdict::Accept,
        decoys_checked: 0,
        decoys_failed: 0,
        result_digest: digest,
        per_sample_outputs: BTreeMap::new(),
    };
    let reject = |mut report: VerificationReport, reason| {
        report.verdict = Verdict::Reject(reason);
        report.per_sample_outputs.clear();
        report
    };
    if secrets.names.len() != manifest.read_pair_count || secrets.decoy_count() != manifest.decoy_count {
        return reject(report, RejectReason::Malformed("secrets do not belong to this manifest".into()));
    }

    let mut seen: HashMap<&str, [u32; 2]> = HashMap::with_capacity(secrets.names.len());
    let mut failed: HashSet<&str> = HashSet::new();
    let mut unknown = false;
    let mut outputs: BTreeMap<String, AlignmentFile> = BTreeMap::new();
    for (i, rec) in result.records.iter().enumerate() {
        let Some(mate) = mate_of(rec.flags).filter(|_| result.check_record(rec)) else {
            return reject(report, RejectReason::Malformed(format!("record {}", i + 1)));
        };
        let Some(plain) = secrets.names.get(&rec.qname).filter(|p| p.job_id == manifest.job_id) else {
            unknown = true;
            continue;
        };
        seen.entry(rec.qname.as_str()).or_default()[mate] += 1;
        match &plain.kind {
            NameKind::Decoy { mate1, mate2 } => {
                let expected = if mate == 0 { mate1 } else { mate2 };
                let reported = rec.md.as_ref().map(|md| ExpectedAlignment {
                    rname: rec.rname.clone(),
                    pos: rec.pos,
                    cigar: rec.cigar.clone(),
                    md: md.clone(),
                });
                if reported.as_ref() != Some(expected) {
                    failed.insert(rec.qname.as_str());
                }
            }
            NameKind::Sample { sample_id, serial } => {
                let mut routed = rec.clone();
                routed.qname = format!("S{sample_id}:R{serial}");
                outputs
                    .entry(sample_id.clone())
                    .or_insert_with(|| AlignmentFile::new(result.header.clone()))
                    .records
                    .push(routed);
            }
        }
    }
    report.decoys_checked = seen.keys().filter(|n| secrets.names[**n].is_decoy()).count();
    report.decoys_failed = failed.len();
    let complete = seen.len() == secrets.names.len() && seen.values().all(|c| *c == [1, 1]);

    if unknown {
        return reject(report, RejectReason::UnknownName);
    }
    if report.decoys_failed > 0 {
        return reject(report, RejectReason::DecoyMismatch);
    }
    if !complete {
        return reject(report, RejectReason::MissingReads);
    }
    if result.check_sorted().is_err() {
        return reject(report, RejectReason::NotSorted);
    }
    for file in outputs.values_mut() {
        file.sort_records();
    }
    report.per_sample_outputs = outputs;
    report
}

/// Parses and verifies submitted bytes. The bytes must be the canonical
/// serialization of the file they encode; the digest covers them exactly.
pub fn verify_result_bytes(bytes: &[u8], manifest: &AssignmentManifest, secrets: &DecoySecrets) -> VerificationReport {
    let rejected = |reason| VerificationReport {
        job_id: manifest.job_id.clone(),
        verdict: Verdict::Reject(reason),
        decoys_checked: 0,
        decoys_failed: 0,
        result_digest: sha256(bytes),
        per_sample_outputs: BTreeMap::new(),
    };
    let file = match parse_alignment_file(bytes) {
        Ok(f) => f,
        Err(crate::genomics::FormatError::NotSorted(_)) => return rejected(RejectReason::NotSorted),
        Err(e) => return rejected(RejectReason::Malformed(e.to_string())),
    };
    if serialize_alignment_file(&file).ok().as_deref().map(str::as_bytes) != Some(bytes) {
        return rejected(RejectReason::Malformed("non-canonical serialization".into()));
    }
    verify_result(&file, manifest, secrets)
}
