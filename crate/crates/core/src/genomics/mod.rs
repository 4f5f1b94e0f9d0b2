//! Reference, read and alignment formats shared by authorities and miners.
//!
//! Everything here is a plain value type; parsing is strict and
//! serialization is canonical, so `parse(serialize(x)) == x` and
//! `serialize(parse(bytes)) == bytes` for canonical input.

mod cigar;
mod fasta;
mod fastq;
mod md;
mod sam;

pub use cigar::{reference_span, Cigar, CigarKind, CigarOp};
pub use fasta::{parse_fasta, serialize_fasta, RefSeq, ReferenceGenome};
pub use fastq::{parse_fastq, serialize_fastq, FastqRecord};
pub use md::{compute_md, reconstruct_reference, Md, MdEdit};
pub use sam::{
    parse_alignment_file, serialize_alignment_file, AlignmentFile, AlignmentIndex,
    AlignmentRecord, Flags, RefHeader,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    /// 1-based line number of the offending line.
    #[error("malformed record at line {0}")]
    MalformedRecord(usize),
    /// 1-based index of the first out-of-order record.
    #[error("record {0} is out of sort order")]
    NotSorted(usize),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid reference: {0}")]
    InvalidReference(String),
    #[error("invalid CIGAR {0:?}")]
    InvalidCigar(String),
    #[error("invalid MD tag {0:?}")]
    InvalidMd(String),
}

/// Complement of a nucleotide; `N` maps to itself.
pub fn complement(base: u8) -> u8 {
    match base {
        b'A' => b'T',
        b'C' => b'G',
        b'G' => b'C',
        b'T' => b'A',
        other => other,
    }
}

pub fn reverse_complement(seq: &[u8]) -> Vec<u8> {
    seq.iter().rev().map(|&b| complement(b)).collect()
}

pub(crate) fn is_read_base(b: u8) -> bool {
    matches!(b, b'A' | b'C' | b'G' | b'T' | b'N')
}

pub(crate) fn is_ref_base(b: u8) -> bool {
    matches!(b, b'A' | b'C' | b'G' | b'T')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reverse_complement_keeps_n() {
        assert_eq!(reverse_complement(b"AACGTN"), b"NACGTT");
        assert_eq!(reverse_complement(b""), b"");
    }
}
