//! Exhaustive mapping oracle.
//!
//! Scores every start position on both strands with a plain dynamic program.
//! Cells with `|i - j| > max_edits` are skipped because their cost already
//! exceeds `max_edits`; rows whose minimum exceeds `max_edits` stop the scan
//! at that start, since costs never decrease down the rows.

use super::{finish_hit, rank, Candidate, MappingResult};
use crate::genomics::{reverse_complement, FastqRecord, ReferenceGenome};

fn cost_at(read: &[u8], refseq: &[u8], start: usize, max_edits: u32) -> Option<u32> {
    let limit = max_edits as usize;
    let cols = (refseq.len() - start).min(read.len() + limit);
    let window = &refseq[start..start + cols];
    let big = u32::MAX / 4;
    let mut prev: Vec<u32> = (0..=cols).map(|j| if j <= limit { j as u32 } else { big }).collect();
    let mut cur = vec![big; cols + 1];
    for i in 1..=read.len() {
        cur.iter_mut().for_each(|c| *c = big);
        let lo = i.saturating_sub(limit);
        let hi = (i + limit).min(cols);
        if lo > hi {
            return None;
        }
        for j in lo..=hi {
            let mut v = prev[j] + 1;
            if j > 0 {
                let sub = u32::from(read[i - 1] != window[j - 1] || read[i - 1] == b'N');
                v = v.min(prev[j - 1] + sub).min(cur[j - 1] + 1);
            }
            cur[j] = v.min(big);
        }
        if cur[lo..=hi].iter().min().copied().unwrap_or(big) > max_edits {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let best = prev.iter().copied().min().unwrap_or(big);
    (best <= max_edits).then_some(best)
}

/// Exhaustive mapper with the same ranking and tie rules as
/// [`map_read`](super::map_read); uniqueness uses `max_edits` as the locus
/// radius. Intended for small references in tests.
pub fn brute_force_map(read: &FastqRecord, reference: &ReferenceGenome, max_edits: u32) -> MappingResult {
    let forward = read.seq.as_bytes();
    let reverse = reverse_complement(forward);
    let mut candidates = Vec::new();
    for (ref_index, refseq) in reference.sequences().iter().enumerate() {
        for (is_reverse, seq) in [(false, forward), (true, &reverse[..])] {
            for start in 0..refseq.bases.len() {
                if let Some(edits) = cost_at(seq, &refseq.bases, start, max_edits) {
                    candidates.push(Candidate { edits, ref_index, start, reverse: is_reverse });
                }
            }
        }
    }
    let band = max_edits.max(1) as usize;
    match rank(&candidates, band) {
        Some((best, unique)) => finish_hit(forward, reference, best, unique, band),
        None => MappingResult::Unmapped,
    }
}
