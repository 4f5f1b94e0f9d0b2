//! Banded unit-cost alignment of a whole read against a reference suffix.
//!
//! An alignment "at start `s`" consumes the full read and begins consuming
//! the reference at offset `s`; its end on the reference is free. Cells are
//! restricted to `|i - j| <= band`, where `i` counts read bases and `j`
//! reference bases.

use crate::genomics::{Cigar, CigarKind};

const INF: u32 = u32::MAX / 4;

#[inline]
pub(crate) fn mismatch_cost(read_base: u8, ref_base: u8) -> u32 {
    u32::from(read_base != ref_base || read_base == b'N')
}

struct Band {
    rows: usize,
    band: usize,
    avail: usize,
    cells: Vec<u32>,
}

impl Band {
    fn width(&self) -> usize {
        2 * self.band + 1
    }

    fn get(&self, i: usize, j: usize) -> u32 {
        if j > self.avail || j + self.band < i || j > i + self.band || i >= self.rows {
            return INF;
        }
        self.cells[i * self.width() + (j + self.band - i)]
    }

    fn set(&mut self, i: usize, j: usize, v: u32) {
        let w = self.width();
        self.cells[i * w + (j + self.band - i)] = v;
    }
}

/// Fills the band; returns `None` as soon as a whole row exceeds `cutoff`.
fn fill(read: &[u8], refseq: &[u8], start: usize, band: usize, cutoff: u32) -> Option<Band> {
    let avail = (refseq.len() - start).min(read.len() + band);
    let window = &refseq[start..start + avail];
    let mut m = Band {
        rows: read.len() + 1,
        band,
        avail,
        cells: vec![INF; (read.len() + 1) * (2 * band + 1)],
    };
    for j in 0..=band.min(avail) {
        m.set(0, j, j as u32);
    }
    for i in 1..=read.len() {
        let lo = i.saturating_sub(band);
        let hi = (i + band).min(avail);
        if lo > hi {
            return None;
        }
        let mut row_min = INF;
        for j in lo..=hi {
            let mut best = m.get(i - 1, j).saturating_add(1);
            if j > 0 {
                best = best
                    .min(m.get(i - 1, j - 1) + mismatch_cost(read[i - 1], window[j - 1]))
                    .min(m.get(i, j - 1).saturating_add(1));
            }
            let best = best.min(INF);
            m.set(i, j, best);
            row_min = row_min.min(best);
        }
        if row_min > cutoff {
            return None;
        }
    }
    Some(m)
}

/// Picks the end column: lowest cost, then closest to the read length, then
/// leftmost.
fn best_end(m: &Band, read_len: usize) -> (u32, usize) {
    let lo = read_len.saturating_sub(m.band);
    let hi = (read_len + m.band).min(m.avail);
    (lo..=hi)
        .map(|j| (m.get(read_len, j), j.abs_diff(read_len), j))
        .min()
        .map(|(cost, _, j)| (cost, j))
        .unwrap_or((INF, 0))
}

/// Minimal edit cost of the read at `start`, if it is at most `cutoff`.
pub(crate) fn score_at(read: &[u8], refseq: &[u8], start: usize, band: usize, cutoff: u32) -> Option<u32> {
    let m = fill(read, refseq, start, band, cutoff)?;
    let (cost, _) = best_end(&m, read.len());
    (cost <= cutoff).then_some(cost)
}

pub(crate) struct Placement {
    pub edits: u32,
    /// Reference bases consumed, i.e. the window is `refseq[start..start + span]`.
    pub span: usize,
    pub cigar: Cigar,
}

/// Full alignment with traceback. Walking back from the end, ties prefer
/// insertion, then the diagonal, then deletion, so unalignable read tails end
/// up as terminal insertions. Terminal insertions that run
/// against a reference boundary become soft clips.
pub(crate) fn align_at(read: &[u8], refseq: &[u8], start: usize, band: usize) -> Option<Placement> {
    let m = fill(read, refseq, start, band, INF - 1)?;
    let (edits, end) = best_end(&m, read.len());
    if edits >= INF {
        return None;
    }
    let window = &refseq[start..];
    let mut kinds = Vec::with_capacity(read.len() + 8);
    let (mut i, mut j) = (read.len(), end);
    while i > 0 || j > 0 {
        let here = m.get(i, j);
        if i > 0 && here == m.get(i - 1, j).saturating_add(1) {
            kinds.push(CigarKind::Insertion);
            i -= 1;
        } else if i > 0 && j > 0 && here == m.get(i - 1, j - 1) + mismatch_cost(read[i - 1], window[j - 1]) {
            kinds.push(CigarKind::Match);
            i -= 1;
            j -= 1;
        } else {
            debug_assert!(j > 0 && here == m.get(i, j - 1) + 1);
            kinds.push(CigarKind::Deletion);
            j -= 1;
        }
    }
    kinds.reverse();
    if start == 0 {
        for k in kinds.iter_mut().take_while(|k| **k == CigarKind::Insertion) {
            *k = CigarKind::SoftClip;
        }
    }
    if start + end == refseq.len() {
        for k in kinds.iter_mut().rev().take_while(|k| **k == CigarKind::Insertion) {
            *k = CigarKind::SoftClip;
        }
    }
    Some(Placement { edits, span: end, cigar: Cigar::from_kinds(kinds) })
}
