use std::collections::HashSet;

use super::{is_ref_base, FormatError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RefSeq {
    pub name: String,
    pub bases: Vec<u8>,
}

/// Ordered set of named reference sequences over `{A,C,G,T}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReferenceGenome {
    seqs: Vec<RefSeq>,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name != "*"
        && name
            .bytes()
            .all(|b| b.is_ascii_graphic() && b != b'|' && b != b'>')
}

impl ReferenceGenome {
    pub fn new(seqs: Vec<RefSeq>) -> Result<Self, FormatError> {
        if seqs.is_empty() {
            return Err(FormatError::InvalidReference("no sequences".into()));
        }
        let mut names = HashSet::new();
        for s in &seqs {
            if !valid_name(&s.name) {
                return Err(FormatError::InvalidReference(format!("bad name {:?}", s.name)));
            }
            if !names.insert(s.name.as_str()) {
                return Err(FormatError::InvalidReference(format!("duplicate name {}", s.name)));
            }
            if s.bases.is_empty() {
                return Err(FormatError::InvalidReference(format!("{} is empty", s.name)));
            }
            if let Some(bad) = s.bases.iter().find(|&&b| !is_ref_base(b)) {
                return Err(FormatError::InvalidReference(format!(
                    "{} contains {:?}",
                    s.name, *bad as char
                )));
            }
        }
        Ok(Self { seqs })
    }

    /// Convenience constructor for a single named sequence.
    pub fn single(name: &str, bases: impl Into<Vec<u8>>) -> Result<Self, FormatError> {
        Self::new(vec![RefSeq {
            name: name.to_string(),
            bases: bases.into(),
        }])
    }

    pub fn sequences(&self) -> &[RefSeq] {
        &self.seqs
    }

    pub fn get(&self, index: usize) -> Option<&RefSeq> {
        self.seqs.get(index)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.seqs.iter().position(|s| s.name == name)
    }

    pub fn len(&self) -> usize {
        self.seqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seqs.is_empty()
    }

    pub fn total_bases(&self) -> usize {
        self.seqs.iter().map(|s| s.bases.len()).sum()
    }

    /// Content address of the reference: SHA-256 of its canonical FASTA.
    pub fn reference_id(&self) -> String {
        crate::crypto::sha256(serialize_fasta(self).as_bytes()).to_hex()
    }
}

/// Parses FASTA; sequence lines may be wrapped at any width.
pub fn parse_fasta(text: &[u8]) -> Result<ReferenceGenome, FormatError> {
    let text = std::str::from_utf8(text).map_err(|_| FormatError::MalformedRecord(1))?;
    let mut seqs: Vec<RefSeq> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if let Some(header) = line.strip_prefix('>') {
            let name = header.split_whitespace().next().unwrap_or("");
            if name.is_empty() {
                return Err(FormatError::MalformedRecord(line_no));
            }
            seqs.push(RefSeq {
                name: name.to_string(),
                bases: Vec::new(),
            });
        } else if line.is_empty() {
            continue;
        } else {
            let current = seqs.last_mut().ok_or(FormatError::MalformedRecord(line_no))?;
            if !line.bytes().all(is_ref_base) {
                return Err(FormatError::MalformedRecord(line_no));
            }
            current.bases.extend_from_slice(line.as_bytes());
        }
    }
    ReferenceGenome::new(seqs)
}

/// Canonical FASTA: one unwrapped sequence line per record.
pub fn serialize_fasta(reference: &ReferenceGenome) -> String {
    let mut out = String::with_capacity(reference.total_bases() + 64);
    for s in reference.sequences() {
        out.push('>');
        out.push_str(&s.name);
        out.push('\n');
        out.push_str(std::str::from_utf8(&s.bases).expect("validated ASCII"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrapped_input_unwrapped_output() {
        let text = b">chr1 description\nACGT\nACGT\n\n>chr2\nGG\n";
        let g = parse_fasta(text).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.get(0).unwrap().bases, b"ACGTACGT");
        assert_eq!(serialize_fasta(&g), ">chr1\nACGTACGT\n>chr2\nGG\n");
        assert_eq!(g.index_of("chr2"), Some(1));
    }

    #[test]
    fn rejects_n_duplicates_and_orphans() {
        assert!(parse_fasta(b">a\nACNT\n").is_err());
        assert!(parse_fasta(b">a\nAC\n>a\nGT\n").is_err());
        assert_eq!(
            parse_fasta(b"ACGT\n").unwrap_err(),
            FormatError::MalformedRecord(1)
        );
        assert!(parse_fasta(b">a\n").is_err());
    }
}
