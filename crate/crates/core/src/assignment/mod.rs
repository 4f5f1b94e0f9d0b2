//! Authority-side assignment manufacture.
//!
//! An assignment mixes read pairs from several samples with decoy pairs whose
//! alignments are known in advance, shuffles them, and replaces every read
//! name with an authenticated, deterministic encryption of a plaintext label.
//! Only the authority can map the labels back; miners see opaque base64.

mod bound;
mod bundle;
mod decoys;
mod multiplex;
mod names;

pub use bound::{binomial, decoy_guess_bound};
pub use bundle::{payload_digest, AssignmentBundle, AssignmentManifest};
pub use decoys::{generate_decoys, DecoyOrigin, DecoyRecord, ReadPair};
pub use multiplex::{decoy_count_for, multiplex, DecoySecrets, MultiplexSettings, Sample, SampleSet};
pub use names::{
    decrypt_name, encrypt_name, encrypted_name_len, ExpectedAlignment, NameError, NameKey, NameKind, PlainName,
    MAX_JOB_ID_LEN, PADDED_NAME_LEN,
};

use thiserror::Error;

use crate::canonical::DocumentError;
use crate::genomics::FormatError;

#[derive(Debug, Error)]
pub enum AssignmentError {
    #[error("placed only {placed} of {requested} decoys; reference too repetitive")]
    CannotPlaceDecoys { placed: usize, requested: usize },
    #[error("substitution rate {0} outside [0, 0.05]")]
    InvalidSubstitutionRate(f64),
    #[error("decoy fraction {0} outside (0, 1)")]
    InvalidDecoyFraction(f64),
    #[error("decoy count {got} does not match fraction (expected about {expected})")]
    DecoyCount { expected: usize, got: usize },
    #[error("duplicate plaintext or encrypted read name {0}")]
    DuplicateName(String),
    #[error("invalid samples: {0}")]
    InvalidSamples(String),
    #[error("payload digest does not match the manifest")]
    DigestMismatch,
    #[error("malformed bundle: {0}")]
    MalformedBundle(String),
    #[error(transparent)]
    Name(#[from] NameError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Document(#[from] DocumentError),
}
