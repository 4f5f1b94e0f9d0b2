use std::collections::HashMap;

use super::MapperError;
use crate::genomics::ReferenceGenome;

/// 2-bit code of a nucleotide; `None` for `N` or anything else.
pub(crate) fn base_code(b: u8) -> Option<u64> {
    match b {
        b'A' => Some(0),
        b'C' => Some(1),
        b'G' => Some(2),
        b'T' => Some(3),
        _ => None,
    }
}

/// Packs a k-mer into 2 bits per base; `None` if it contains `N`.
pub fn pack_kmer(kmer: &[u8]) -> Option<u64> {
    kmer.iter()
        .try_fold(0u64, |acc, &b| base_code(b).map(|c| (acc << 2) | c))
}

/// Every k-mer occurrence of a reference, keyed by packed k-mer.
///
/// Occurrence lists hold `(reference index, 0-based offset)` in ascending
/// order.
#[derive(Clone, Debug)]
pub struct KmerIndex {
    k: usize,
    table: HashMap<u64, Vec<(u32, u32)>>,
}

impl KmerIndex {
    pub fn build(reference: &ReferenceGenome, k: usize) -> Result<Self, MapperError> {
        if !(4..=31).contains(&k) {
            return Err(MapperError::InvalidParams(format!("k = {k} outside 4..=31")));
        }
        let mask = (1u64 << (2 * k)) - 1;
        let mut table: HashMap<u64, Vec<(u32, u32)>> = HashMap::new();
        for (ri, seq) in reference.sequences().iter().enumerate() {
            if seq.bases.len() < k {
                return Err(MapperError::ReferenceTooShort(seq.name.clone()));
            }
            let mut packed = 0u64;
            for (i, &b) in seq.bases.iter().enumerate() {
                let code = base_code(b).expect("reference holds only ACGT");
                packed = ((packed << 2) | code) & mask;
                if i + 1 >= k {
                    table
                        .entry(packed)
                        .or_default()
                        .push((ri as u32, (i + 1 - k) as u32));
                }
            }
        }
        Ok(Self { k, table })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Occurrences of `kmer`, which must have length `k`.
    pub fn hits(&self, kmer: &[u8]) -> &[(u32, u32)] {
        debug_assert_eq!(kmer.len(), self.k);
        pack_kmer(kmer)
            .and_then(|p| self.table.get(&p))
            .map_or(&[], |v| v.as_slice())
    }

    pub fn distinct_kmers(&self) -> usize {
        self.table.len()
    }
}
