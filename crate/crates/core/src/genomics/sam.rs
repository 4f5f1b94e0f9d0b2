//! Tab-separated SAM subset carrying only the fields the protocol reads.
//!
//! ```text
//! @SQ\t<name>\t<length>
//! <qname>\t<flags>\t<rname>\t<pos>\t<mapq>\t<cigar>\t<seq>\t<MD:Z:...>
//! ```
//!
//! Records are sorted by (reference index, position, qname); unmapped records
//! (`*`, `0`, `*`, `*`) follow, sorted by qname.

use std::cmp::Ordering;
use std::fmt;
use std::ops::BitOr;

use super::{is_read_base, Cigar, FormatError, Md, ReferenceGenome};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Flags(pub u16);

impl Flags {
    pub const PAIRED: Flags = Flags(0x1);
    pub const UNMAPPED: Flags = Flags(0x4);
    pub const REVERSE: Flags = Flags(0x10);
    pub const MATE1: Flags = Flags(0x40);
    pub const MATE2: Flags = Flags(0x80);
    const KNOWN: u16 = 0x1 | 0x4 | 0x10 | 0x40 | 0x80;

    pub fn contains(self, other: Flags) -> bool {
        self.0 & other.0 == other.0
    }
}

impl BitOr for Flags {
    type Output = Flags;

    fn bitor(self, rhs: Flags) -> Flags {
        Flags(self.0 | rhs.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RefHeader {
    pub name: String,
    pub length: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AlignmentRecord {
    pub qname: String,
    pub flags: Flags,
    pub rname: String,
    /// 1-based leftmost reference position; 0 when unmapped.
    pub pos: u64,
    pub mapq: u8,
    pub cigar: Cigar,
    pub seq: String,
    /// `None` renders as `*` and only occurs on unmapped records.
    pub md: Option<Md>,
}

impl AlignmentRecord {
    pub fn unmapped(qname: impl Into<String>, flags: Flags, seq: impl Into<String>) -> Self {
        Self {
            qname: qname.into(),
            flags: flags | Flags::UNMAPPED,
            rname: "*".into(),
            pos: 0,
            mapq: 0,
            cigar: Cigar::empty(),
            seq: seq.into(),
            md: None,
        }
    }

    pub fn is_unmapped(&self) -> bool {
        self.flags.contains(Flags::UNMAPPED)
    }

    fn render(&self, out: &mut String) {
        use std::fmt::Write;
        let md = self.md.as_ref().map_or_else(|| "*".to_string(), |m| m.to_string());
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.qname, self.flags.0, self.rname, self.pos, self.mapq, self.cigar, self.seq, md
        );
    }
}

impl fmt::Display for AlignmentRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.render(&mut s);
        f.write_str(s.trim_end())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AlignmentFile {
    pub header: Vec<RefHeader>,
    pub records: Vec<AlignmentRecord>,
}

impl AlignmentFile {
    pub fn new(header: Vec<RefHeader>) -> Self {
        Self { header, records: Vec::new() }
    }

    pub fn header_for(reference: &ReferenceGenome) -> Vec<RefHeader> {
        reference
            .sequences()
            .iter()
            .map(|s| RefHeader { name: s.name.clone(), length: s.bases.len() as u64 })
            .collect()
    }

    fn ref_rank(&self, rname: &str) -> usize {
        if rname == "*" {
            return usize::MAX;
        }
        self.header
            .iter()
            .position(|h| h.name == rname)
            .unwrap_or(usize::MAX - 1)
    }

    /// The key that defines sortedness.
    fn order_key<'a>(&self, r: &'a AlignmentRecord) -> (usize, u64, &'a str) {
        if r.is_unmapped() {
            (usize::MAX, 0, &r.qname)
        } else {
            (self.ref_rank(&r.rname), r.pos, &r.qname)
        }
    }

    /// Sorts records into canonical order.
    ///
    /// Records tied on (reference, position, qname) are further ordered by
    /// their remaining fields, so the result is independent of input order.
    pub fn sort_records(&mut self) {
        let mut keyed: Vec<((usize, u64), AlignmentRecord)> = std::mem::take(&mut self.records)
            .into_iter()
            .map(|r| {
                let (rank, pos, _) = self.order_key(&r);
                ((rank, pos), r)
            })
            .collect();
        keyed.sort_by(|(ka, a), (kb, b)| {
            ka.cmp(kb)
                .then_with(|| a.qname.cmp(&b.qname))
                .then_with(|| a.flags.cmp(&b.flags))
                .then_with(|| a.cigar.to_string().cmp(&b.cigar.to_string()))
                .then_with(|| a.seq.cmp(&b.seq))
                .then_with(|| a.mapq.cmp(&b.mapq))
                .then_with(|| a.to_string().cmp(&b.to_string()))
        });
        self.records = keyed.into_iter().map(|(_, r)| r).collect();
    }

    /// Returns `NotSorted(i)` with the 1-based index of the first record that
    /// sorts before its predecessor.
    pub fn check_sorted(&self) -> Result<(), FormatError> {
        for (i, pair) in self.records.windows(2).enumerate() {
            if self.order_key(&pair[0]).cmp(&self.order_key(&pair[1])) == Ordering::Greater {
                return Err(FormatError::NotSorted(i + 2));
            }
        }
        Ok(())
    }

    pub(crate) fn check_record(&self, r: &AlignmentRecord) -> bool {
        let name_ok = !r.qname.is_empty() && r.qname.bytes().all(|b| b.is_ascii_graphic());
        let seq_ok = !r.seq.is_empty() && r.seq.bytes().all(is_read_base);
        if !name_ok || !seq_ok || r.flags.0 & !Flags::KNOWN != 0 || r.mapq > 60 {
            return false;
        }
        if r.is_unmapped() {
            return r.rname == "*" && r.pos == 0 && r.cigar.is_empty() && r.md.is_none();
        }
        let Some(h) = self.header.iter().find(|h| h.name == r.rname) else {
            return false;
        };
        let Some(md) = &r.md else { return false };
        r.pos >= 1
            && !r.cigar.is_empty()
            && r.cigar.query_len() == r.seq.len()
            && md.consistent_with(&r.cigar)
            && r.pos - 1 + super::reference_span(&r.cigar) as u64 <= h.length
    }
}

/// Per-reference record ranges of a sorted file; the "index" the authority
/// uses to jump to a reference's records.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlignmentIndex {
    /// (reference name, first record, record count); unmapped under `*`.
    pub ranges: Vec<(String, usize, usize)>,
}

impl AlignmentIndex {
    pub fn build(file: &AlignmentFile) -> Self {
        let mut ranges: Vec<(String, usize, usize)> = Vec::new();
        for (i, r) in file.records.iter().enumerate() {
            match ranges.last_mut() {
                Some((name, _, count)) if *name == r.rname => *count += 1,
                _ => ranges.push((r.rname.clone(), i, 1)),
            }
        }
        Self { ranges }
    }

    pub fn lookup(&self, rname: &str) -> Option<(usize, usize)> {
        self.ranges
            .iter()
            .find(|(n, _, _)| n == rname)
            .map(|&(_, first, count)| (first, count))
    }

    pub fn render(&self) -> String {
        self.ranges
            .iter()
            .map(|(n, first, count)| format!("{n}\t{first}\t{count}\n"))
            .collect()
    }
}

pub fn parse_alignment_file(text: &[u8]) -> Result<AlignmentFile, FormatError> {
    let text = std::str::from_utf8(text).map_err(|_| FormatError::MalformedRecord(1))?;
    let mut file = AlignmentFile::default();
    let body = match text.strip_suffix('\n') {
        Some(b) => b,
        None if text.is_empty() => return Ok(file),
        None => return Err(FormatError::MalformedRecord(text.lines().count())),
    };
    for (i, line) in body.split('\n').enumerate() {
        let line_no = i + 1;
        let bad = || FormatError::MalformedRecord(line_no);
        let fields: Vec<&str> = line.split('\t').collect();
        if fields[0] == "@SQ" {
            if !file.records.is_empty() || fields.len() != 3 {
                return Err(bad());
            }
            let length: u64 = parse_canonical_int(fields[2]).ok_or_else(bad)?;
            if fields[1].is_empty() || file.header.iter().any(|h| h.name == fields[1]) {
                return Err(bad());
            }
            file.header.push(RefHeader { name: fields[1].to_string(), length });
            continue;
        }
        if fields.len() != 8 {
            return Err(bad());
        }
        let record = AlignmentRecord {
            qname: fields[0].to_string(),
            flags: Flags(parse_canonical_int(fields[1]).ok_or_else(bad)?),
            rname: fields[2].to_string(),
            pos: parse_canonical_int(fields[3]).ok_or_else(bad)?,
            mapq: parse_canonical_int(fields[4]).ok_or_else(bad)?,
            cigar: fields[5].parse().map_err(|_| bad())?,
            seq: fields[6].to_string(),
            md: match fields[7] {
                "*" => None,
                s => Some(s.parse().map_err(|_| bad())?),
            },
        };
        if !file.check_record(&record) {
            return Err(bad());
        }
        file.records.push(record);
    }
    file.check_sorted()?;
    Ok(file)
}

fn parse_canonical_int<T: std::str::FromStr>(s: &str) -> Option<T> {
    if s.is_empty() || (s.len() > 1 && s.starts_with('0')) || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// Serializes a sorted file; refuses unsorted record lists.
pub fn serialize_alignment_file(file: &AlignmentFile) -> Result<String, FormatError> {
    file.check_sorted()?;
    let mut out = String::new();
    for h in &file.header {
        out.push_str(&format!("@SQ\t{}\t{}\n", h.name, h.length));
    }
    for r in &file.records {
        r.render(&mut out);
    }
    Ok(out)
}
