//! Core library for a cryptocurrency whose proof-of-work is short-read mapping.
//!
//! The pieces shared by every party live here:
//!
//! - [`genomics`]: FASTA/FASTQ/SAM-subset formats and CIGAR/MD arithmetic.
//! - [`mapper`]: the deterministic seed-and-extend read mapper (the work itself)
//!   and its brute-force oracle.
//! - [`assignment`]: authority-side assignment manufacture (decoys, read-name
//!   encryption, multiplexing).
//! - [`verifier`]: result verification, demultiplexing and signed tokens.
//! - [`ledger`]: token-bearing blocks, UTXO transactions and fork choice.
//! - [`pki`]: root-issued authority certificates.
//! - [`synth`]: synthetic references and samples.

pub mod assignment;
pub mod canonical;
pub mod crypto;
pub mod genomics;
pub mod ledger;
pub mod mapper;
pub mod pki;
pub mod rng;
pub mod synth;
pub mod verifier;
