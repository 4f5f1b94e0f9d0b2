use super::{is_read_base, FormatError};

/// One FASTQ read. The name is stored without the leading `@`; qualities are
/// opaque.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FastqRecord {
    pub name: String,
    pub seq: String,
    pub qual: String,
}

impl FastqRecord {
    pub fn new(name: impl Into<String>, seq: impl Into<String>, qual: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            seq: seq.into(),
            qual: qual.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq.is_empty()
    }

    pub fn is_valid(&self) -> bool {
        valid_name(&self.name)
            && !self.seq.is_empty()
            && self.seq.bytes().all(is_read_base)
            && self.qual.len() == self.seq.len()
            && self.qual.bytes().all(|b| b.is_ascii_graphic())
    }
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.bytes().all(|b| b.is_ascii_graphic())
}

/// Parses four-line FASTQ records.
///
/// Errors carry the 1-based line number where the record went wrong.
pub fn parse_fastq(text: &[u8]) -> Result<Vec<FastqRecord>, FormatError> {
    let text = std::str::from_utf8(text).map_err(|_| FormatError::MalformedRecord(1))?;
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return Ok(Vec::new());
    }
    let lines: Vec<&str> = body.split('\n').collect();
    let mut records = Vec::with_capacity(lines.len() / 4);
    for (chunk_no, chunk) in lines.chunks(4).enumerate() {
        let first = chunk_no * 4 + 1;
        let header = chunk[0];
        let name = header
            .strip_prefix('@')
            .filter(|n| valid_name(n))
            .ok_or(FormatError::MalformedRecord(first))?;
        let seq = *chunk.get(1).ok_or(FormatError::MalformedRecord(first + 1))?;
        if seq.is_empty() || !seq.bytes().all(is_read_base) {
            return Err(FormatError::MalformedRecord(first + 1));
        }
        let sep = *chunk.get(2).ok_or(FormatError::MalformedRecord(first + 2))?;
        if !sep.starts_with('+') {
            return Err(FormatError::MalformedRecord(first + 2));
        }
        let qual = *chunk.get(3).ok_or(FormatError::MalformedRecord(first + 3))?;
        if qual.len() != seq.len() || !qual.bytes().all(|b| b.is_ascii_graphic()) {
            return Err(FormatError::MalformedRecord(first + 3));
        }
        records.push(FastqRecord::new(name, seq, qual));
    }
    Ok(records)
}

pub fn serialize_fastq(records: &[FastqRecord]) -> String {
    let mut out = String::with_capacity(records.iter().map(|r| r.name.len() + 2 * r.len() + 6).sum());
    for r in records {
        out.push('@');
        out.push_str(&r.name);
        out.push('\n');
        out.push_str(&r.seq);
        out.push_str("\n+\n");
        out.push_str(&r.qual);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_record() {
        let recs = parse_fastq(b"@r1\nACGT\n+\nIIII\n").unwrap();
        assert_eq!(recs, vec![FastqRecord::new("r1", "ACGT", "IIII")]);
        assert_eq!(serialize_fastq(&recs), "@r1\nACGT\n+\nIIII\n");
    }

    #[test]
    fn empty_input() {
        assert!(parse_fastq(b"").unwrap().is_empty());
        assert_eq!(serialize_fastq(&[]), "");
    }

    #[test]
    fn quality_length_mismatch_reports_line_four() {
        assert_eq!(
            parse_fastq(b"@r1\nACGT\n+\nIII\n"),
            Err(FormatError::MalformedRecord(4))
        );
    }

    #[test]
    fn structural_errors() {
        assert_eq!(parse_fastq(b"r1\nACGT\n+\nIIII\n"), Err(FormatError::MalformedRecord(1)));
        assert_eq!(parse_fastq(b"@r1\nACXT\n+\nIIII\n"), Err(FormatError::MalformedRecord(2)));
        assert_eq!(parse_fastq(b"@r1\nACGT\n-\nIIII\n"), Err(FormatError::MalformedRecord(3)));
        assert_eq!(
            parse_fastq(b"@r1\nACGT\n+\nIIII\n@r2\nAC\n"),
            Err(FormatError::MalformedRecord(7))
        );
    }

    #[test]
    fn order_is_preserved() {
        let recs = vec![
            FastqRecord::new("b", "AC", "II"),
            FastqRecord::new("a", "NN", "##"),
        ];
        let text = serialize_fastq(&recs);
        assert_eq!(text, "@b\nAC\n+\nII\n@a\nNN\n+\n##\n");
        assert_eq!(parse_fastq(text.as_bytes()).unwrap(), recs);
    }

    fn arb_record() -> impl Strategy<Value = FastqRecord> {
        ("[!-~]{1,12}", "[ACGTN]{1,40}").prop_flat_map(|(name, seq)| {
            let n = seq.len();
            proptest::string::string_regex(&format!("[!-~]{{{n}}}"))
                .unwrap()
                .prop_map(move |qual| FastqRecord::new(name.clone(), seq.clone(), qual))
        })
    }

    proptest! {
        #[test]
        fn round_trip(records in proptest::collection::vec(arb_record(), 0..8)) {
            let text = serialize_fastq(&records);
            let back = parse_fastq(text.as_bytes()).unwrap();
            prop_assert_eq!(&back, &records);
            prop_assert_eq!(serialize_fastq(&back), text);
        }
    }
}
