use std::fmt;
use std::str::FromStr;

use super::{CigarKind, Cigar, FormatError};

/// Non-match event in an MD tag.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum MdEdit {
    /// Reference base at a mismatching aligned position.
    Mismatch(u8),
    /// Reference bases deleted from the read.
    Deletion(Vec<u8>),
}

/// SAM `MD:Z` tag: `number (base | ^bases number)*`, rendered with the
/// `MD:Z:` prefix.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Md {
    pub leading: u32,
    pub items: Vec<(MdEdit, u32)>,
}

impl Md {
    /// Total number of aligned (M) positions described by the tag.
    pub fn aligned_len(&self) -> usize {
        self.leading as usize
            + self
                .items
                .iter()
                .map(|(e, n)| match e {
                    MdEdit::Mismatch(_) => 1 + *n as usize,
                    MdEdit::Deletion(_) => *n as usize,
                })
                .sum::<usize>()
    }

    pub fn deleted_len(&self) -> usize {
        self.items
            .iter()
            .map(|(e, _)| match e {
                MdEdit::Deletion(b) => b.len(),
                MdEdit::Mismatch(_) => 0,
            })
            .sum()
    }

    pub fn mismatches(&self) -> usize {
        self.items
            .iter()
            .filter(|(e, _)| matches!(e, MdEdit::Mismatch(_)))
            .count()
    }

    /// Whether the tag describes the same M and D lengths as `cigar`.
    pub fn consistent_with(&self, cigar: &Cigar) -> bool {
        self.aligned_len() == cigar.total(CigarKind::Match)
            && self.deleted_len() == cigar.total(CigarKind::Deletion)
    }

    /// Tag body without the `MD:Z:` prefix.
    pub fn body(&self) -> String {
        let mut out = self.leading.to_string();
        for (edit, n) in &self.items {
            match edit {
                MdEdit::Mismatch(b) => out.push(*b as char),
                MdEdit::Deletion(bases) => {
                    out.push('^');
                    out.push_str(std::str::from_utf8(bases).expect("ASCII bases"));
                }
            }
            out.push_str(&n.to_string());
        }
        out
    }

    pub fn parse_body(body: &str) -> Result<Self, FormatError> {
        let bad = || FormatError::InvalidMd(body.to_string());
        let bytes = body.as_bytes();
        let mut i = 0;
        let read_num = |i: &mut usize| -> Result<u32, FormatError> {
            let start = *i;
            while *i < bytes.len() && bytes[*i].is_ascii_digit() {
                *i += 1;
            }
            let digits = &body[start..*i];
            if digits.is_empty() || (digits.len() > 1 && digits.starts_with('0')) {
                return Err(bad());
            }
            digits.parse().map_err(|_| bad())
        };
        let leading = read_num(&mut i)?;
        let mut items = Vec::new();
        while i < bytes.len() {
            let edit = if bytes[i] == b'^' {
                i += 1;
                let start = i;
                while i < bytes.len() && super::is_ref_base(bytes[i]) {
                    i += 1;
                }
                if i == start {
                    return Err(bad());
                }
                MdEdit::Deletion(bytes[start..i].to_vec())
            } else if super::is_ref_base(bytes[i]) {
                i += 1;
                MdEdit::Mismatch(bytes[i - 1])
            } else {
                return Err(bad());
            };
            let n = read_num(&mut i)?;
            items.push((edit, n));
        }
        Ok(Md { leading, items })
    }
}

impl fmt::Display for Md {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MD:Z:{}", self.body())
    }
}

impl FromStr for Md {
    type Err = FormatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s
            .strip_prefix("MD:Z:")
            .ok_or_else(|| FormatError::InvalidMd(s.to_string()))?;
        Md::parse_body(body)
    }
}

/// Computes the MD tag of `read_seq` aligned to `ref_window` by `cigar`.
///
/// `ref_window` must be exactly the reference bases consumed by the CIGAR's
/// M and D operations. A read `N` never matches.
pub fn compute_md(ref_window: &[u8], read_seq: &[u8], cigar: &Cigar) -> Result<Md, FormatError> {
    if cigar.query_len() != read_seq.len() {
        return Err(FormatError::LengthMismatch(format!(
            "CIGAR {cigar} covers {} read bases, read has {}",
            cigar.query_len(),
            read_seq.len()
        )));
    }
    if super::reference_span(cigar) != ref_window.len() {
        return Err(FormatError::LengthMismatch(format!(
            "CIGAR {cigar} spans {} reference bases, window has {}",
            super::reference_span(cigar),
            ref_window.len()
        )));
    }
    let mut md = Md { leading: 0, items: Vec::new() };
    let mut run = 0u32;
    let flush = |md: &mut Md, edit: MdEdit, run: &mut u32| {
        match md.items.last_mut() {
            Some((_, n)) => *n = *run,
            None => md.leading = *run,
        }
        md.items.push((edit, 0));
        *run = 0;
    };
    let (mut r, mut q) = (0usize, 0usize);
    for op in cigar.ops() {
        let len = op.len as usize;
        match op.kind {
            CigarKind::Match => {
                for _ in 0..len {
                    let rb = ref_window[r];
                    if read_seq[q] == rb && rb != b'N' {
                        run += 1;
                    } else {
                        flush(&mut md, MdEdit::Mismatch(rb), &mut run);
                    }
                    r += 1;
                    q += 1;
                }
            }
            CigarKind::Insertion | CigarKind::SoftClip => q += len,
            CigarKind::Deletion => {
                flush(&mut md, MdEdit::Deletion(ref_window[r..r + len].to_vec()), &mut run);
                r += len;
            }
        }
    }
    match md.items.last_mut() {
        Some((_, n)) => *n = run,
        None => md.leading = run,
    }
    Ok(md)
}

/// Replays `(cigar, md, read_seq)` to regenerate the reference window.
///
/// This is the consistency checker for alignments: the result must equal the
/// reference slice the alignment claims to cover.
pub fn reconstruct_reference(read_seq: &[u8], cigar: &Cigar, md: &Md) -> Result<Vec<u8>, FormatError> {
    let inconsistent = || FormatError::LengthMismatch(format!("{cigar} and {md} disagree"));
    if cigar.query_len() != read_seq.len() {
        return Err(inconsistent());
    }
    // Expand the MD tag into one event per reference position.
    enum Slot<'a> {
        Same,
        Base(u8),
        Deleted(&'a [u8]),
    }
    let mut slots: Vec<Slot> = Vec::new();
    slots.extend((0..md.leading).map(|_| Slot::Same));
    for (edit, n) in &md.items {
        match edit {
            MdEdit::Mismatch(b) => slots.push(Slot::Base(*b)),
            MdEdit::Deletion(bases) => slots.push(Slot::Deleted(bases)),
        }
        slots.extend((0..*n).map(|_| Slot::Same));
    }
    let mut slots = slots.into_iter();
    let mut out = Vec::with_capacity(read_seq.len());
    let mut q = 0usize;
    for op in cigar.ops() {
        let len = op.len as usize;
        match op.kind {
            CigarKind::Match => {
                for _ in 0..len {
                    match slots.next().ok_or_else(inconsistent)? {
                        Slot::Same => out.push(read_seq[q]),
                        Slot::Base(b) => out.push(b),
                        Slot::Deleted(_) => return Err(inconsistent()),
                    }
                    q += 1;
                }
            }
            CigarKind::Insertion | CigarKind::SoftClip => q += len,
            CigarKind::Deletion => match slots.next().ok_or_else(inconsistent)? {
                Slot::Deleted(bases) if bases.len() == len => out.extend_from_slice(bases),
                _ => return Err(inconsistent()),
            },
        }
    }
    if slots.next().is_some() {
        return Err(inconsistent());
    }
    Ok(out)
}
