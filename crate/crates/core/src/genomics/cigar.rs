use std::fmt;
use std::str::FromStr;

use super::FormatError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CigarKind {
    Match,
    Insertion,
    Deletion,
    SoftClip,
}

impl CigarKind {
    pub fn code(self) -> char {
        match self {
            CigarKind::Match => 'M',
            CigarKind::Insertion => 'I',
            CigarKind::Deletion => 'D',
            CigarKind::SoftClip => 'S',
        }
    }

    fn from_code(c: char) -> Option<Self> {
        Some(match c {
            'M' => CigarKind::Match,
            'I' => CigarKind::Insertion,
            'D' => CigarKind::Deletion,
            'S' => CigarKind::SoftClip,
            _ => return None,
        })
    }

    pub fn consumes_query(self) -> bool {
        !matches!(self, CigarKind::Deletion)
    }

    pub fn consumes_reference(self) -> bool {
        matches!(self, CigarKind::Match | CigarKind::Deletion)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CigarOp {
    pub len: u32,
    pub kind: CigarKind,
}

/// Run-length alignment operations. Adjacent operations always differ in kind;
/// an empty CIGAR renders as `*`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Cigar {
    ops: Vec<CigarOp>,
}

impl Cigar {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a CIGAR from per-base operations, merging runs.
    pub fn from_kinds(kinds: impl IntoIterator<Item = CigarKind>) -> Self {
        let mut cigar = Cigar::empty();
        for kind in kinds {
            cigar.push(1, kind);
        }
        cigar
    }

    /// Appends `len` operations of `kind`, merging with the last run.
    pub fn push(&mut self, len: u32, kind: CigarKind) {
        if len == 0 {
            return;
        }
        match self.ops.last_mut() {
            Some(last) if last.kind == kind => last.len += len,
            _ => self.ops.push(CigarOp { len, kind }),
        }
    }

    pub fn ops(&self) -> &[CigarOp] {
        &self.ops
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Bases of the read covered by the alignment (M + I + S).
    pub fn query_len(&self) -> usize {
        self.ops
            .iter()
            .filter(|op| op.kind.consumes_query())
            .map(|op| op.len as usize)
            .sum()
    }

    pub fn total(&self, kind: CigarKind) -> usize {
        self.ops
            .iter()
            .filter(|op| op.kind == kind)
            .map(|op| op.len as usize)
            .sum()
    }
}

/// Reference bases consumed by a CIGAR (M + D).
pub fn reference_span(cigar: &Cigar) -> usize {
    cigar
        .ops
        .iter()
        .filter(|op| op.kind.consumes_reference())
        .map(|op| op.len as usize)
        .sum()
}

impl fmt::Display for Cigar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ops.is_empty() {
            return f.write_str("*");
        }
        for op in &self.ops {
            write!(f, "{}{}", op.len, op.kind.code())?;
        }
        Ok(())
    }
}

impl FromStr for Cigar {
    type Err = FormatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || FormatError::InvalidCigar(s.to_string());
        if s == "*" {
            return Ok(Cigar::empty());
        }
        if s.is_empty() {
            return Err(bad());
        }
        let mut ops: Vec<CigarOp> = Vec::new();
        let mut num = String::new();
        for c in s.chars() {
            if c.is_ascii_digit() {
                num.push(c);
                continue;
            }
            let kind = CigarKind::from_code(c).ok_or_else(bad)?;
            // Leading zeros would break byte-exact round trips.
            if num.is_empty() || num.starts_with('0') {
                return Err(bad());
            }
            let len: u32 = num.parse().map_err(|_| bad())?;
            num.clear();
            if ops.last().is_some_and(|last| last.kind == kind) {
                return Err(bad());
            }
            ops.push(CigarOp { len, kind });
        }
        if !num.is_empty() {
            return Err(bad());
        }
        Ok(Cigar { ops })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> Cigar {
        s.parse().unwrap()
    }

    #[test]
    fn reference_span_examples() {
        assert_eq!(reference_span(&c("100M")), 100);
        assert_eq!(reference_span(&c("50M2I48M")), 98);
        assert_eq!(reference_span(&c("10M5D10M")), 25);
        assert_eq!(reference_span(&c("3S97M")), 97);
    }

    #[test]
    fn parse_and_render() {
        for s in ["100M", "3S5M2I1D4M2S", "*"] {
            assert_eq!(c(s).to_string(), s);
        }
        assert_eq!(c("50M2I48M").query_len(), 100);
        for bad in ["", "M", "10", "10X", "5M5M", "0M", "05M"] {
            assert!(bad.parse::<Cigar>().is_err(), "{bad}");
        }
    }

    #[test]
    fn from_kinds_merges_runs() {
        use CigarKind::*;
        let cig = Cigar::from_kinds([Match, Match, Insertion, Match]);
        assert_eq!(cig.to_string(), "2M1I1M");
    }
}
