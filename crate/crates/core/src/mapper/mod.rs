//! The proof-of-work: a deterministic seed-and-extend read mapper.
//!
//! Seeds are k-mers sampled from the read at offsets `0, stride, 2*stride, ...`.
//! Each seed hit fixes a diagonal; every start within `band` of that diagonal
//! is scored with a banded unit-cost edit distance. The winner is the
//! candidate with the fewest edits, then the lowest (reference index,
//! position), then the forward strand. Both strands are always tried.
//!
//! [`brute_force_map`] scores every reference position exhaustively with the
//! same ordering and serves as the test oracle.

mod align;
mod index;
mod oracle;

use std::collections::BTreeSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::genomics::{
    compute_md, reverse_complement, AlignmentFile, AlignmentRecord, Cigar, FastqRecord, Flags,
    Md, ReferenceGenome,
};

pub use index::{pack_kmer, KmerIndex};
pub use oracle::brute_force_map;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MapperError {
    #[error("invalid mapping parameters: {0}")]
    InvalidParams(String),
    #[error("reference sequence {0} is shorter than the seed length")]
    ReferenceTooShort(String),
}

/// Mapper parameters; carried in every assignment manifest so authority and
/// miner always agree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MappingParams {
    pub k: usize,
    pub stride: usize,
    pub max_edits: u32,
    pub band: usize,
}

impl Default for MappingParams {
    fn default() -> Self {
        Self { k: 16, stride: 16, max_edits: 5, band: 5 }
    }
}

impl MappingParams {
    pub fn validate(&self) -> Result<(), MapperError> {
        if !(4..=31).contains(&self.k) {
            return Err(MapperError::InvalidParams(format!("k = {} outside 4..=31", self.k)));
        }
        if self.stride == 0 {
            return Err(MapperError::InvalidParams("stride must be at least 1".into()));
        }
        if self.band == 0 {
            return Err(MapperError::InvalidParams("band must be at least 1".into()));
        }
        Ok(())
    }
}

/// Best alignment of a read.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hit {
    pub ref_index: usize,
    pub rname: String,
    /// 1-based position of the first aligned reference base.
    pub pos: u64,
    pub reverse: bool,
    pub cigar: Cigar,
    pub md: Md,
    pub edits: u32,
    /// False when another locus reaches the same edit count.
    pub unique: bool,
}

impl Hit {
    pub fn mapq(&self) -> u8 {
        if self.unique {
            60
        } else {
            0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MappingStatus {
    Mapped,
    Unmapped,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MappingResult {
    Mapped(Hit),
    Unmapped,
}

impl MappingResult {
    pub fn status(&self) -> MappingStatus {
        match self {
            MappingResult::Mapped(_) => MappingStatus::Mapped,
            MappingResult::Unmapped => MappingStatus::Unmapped,
        }
    }

    pub fn hit(&self) -> Option<&Hit> {
        match self {
            MappingResult::Mapped(h) => Some(h),
            MappingResult::Unmapped => None,
        }
    }
}

/// A scored start position. Field order is the ranking order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct Candidate {
    pub edits: u32,
    pub ref_index: usize,
    pub start: usize,
    pub reverse: bool,
}

impl Candidate {
    /// Whether `other` is a different locus from `self`, as opposed to a
    /// shifted variant of the same alignment.
    pub fn distinct_locus(&self, other: &Candidate, band: usize) -> bool {
        self.ref_index != other.ref_index
            || self.reverse != other.reverse
            || self.start.abs_diff(other.start) > band
    }
}

/// Picks the winner and decides uniqueness among equally good loci.
pub(crate) fn rank(candidates: &[Candidate], band: usize) -> Option<(Candidate, bool)> {
    let best = *candidates.iter().min()?;
    let unique = !candidates
        .iter()
        .any(|c| c.edits == best.edits && best.distinct_locus(c, band));
    Some((best, unique))
}

/// Builds the reported hit for a chosen candidate.
pub(crate) fn finish_hit(
    read_seq: &[u8],
    reference: &ReferenceGenome,
    best: Candidate,
    unique: bool,
    band: usize,
) -> MappingResult {
    let refseq = reference.get(best.ref_index).expect("candidate on known reference");
    let oriented;
    let seq = if best.reverse {
        oriented = reverse_complement(read_seq);
        &oriented[..]
    } else {
        read_seq
    };
    let Some(placement) = align::align_at(seq, &refseq.bases, best.start, band) else {
        return MappingResult::Unmapped;
    };
    let window = &refseq.bases[best.start..best.start + placement.span];
    let md = compute_md(window, seq, &placement.cigar).expect("traceback is self-consistent");
    MappingResult::Mapped(Hit {
        ref_index: best.ref_index,
        rname: refseq.name.clone(),
        pos: best.start as u64 + 1,
        reverse: best.reverse,
        cigar: placement.cigar,
        md,
        edits: placement.edits,
        unique,
    })
}

/// Maps one read. Never fails: a read without a candidate within
/// `max_edits` is [`MappingResult::Unmapped`].
pub fn map_read(
    read: &FastqRecord,
    index: &KmerIndex,
    reference: &ReferenceGenome,
    params: &MappingParams,
) -> MappingResult {
    let k = index.k();
    let forward = read.seq.as_bytes();
    let reverse = reverse_complement(forward);
    let mut candidates = Vec::new();
    for (is_reverse, seq) in [(false, forward), (true, &reverse[..])] {
        let mut starts: BTreeSet<(usize, usize)> = BTreeSet::new();
        let mut offset = 0;
        while offset + k <= seq.len() {
            for &(ri, ref_off) in index.hits(&seq[offset..offset + k]) {
                let diagonal = ref_off as i64 - offset as i64;
                let ref_len = reference.get(ri as usize).map_or(0, |r| r.bases.len()) as i64;
                let lo = (diagonal - params.band as i64).max(0);
                let hi = (diagonal + params.band as i64).min(ref_len - 1);
                for start in lo..=hi {
                    starts.insert((ri as usize, start as usize));
                }
            }
            offset += params.stride;
        }
        for (ref_index, start) in starts {
            let bases = &reference.get(ref_index).expect("indexed reference").bases;
            if let Some(edits) = align::score_at(seq, bases, start, params.band, params.max_edits) {
                candidates.push(Candidate { edits, ref_index, start, reverse: is_reverse });
            }
        }
    }
    match rank(&candidates, params.band) {
        Some((best, unique)) => finish_hit(forward, reference, best, unique, params.band),
        None => MappingResult::Unmapped,
    }
}

/// Builds the alignment record for a mapped or unmapped read.
pub fn to_record(read: &FastqRecord, result: &MappingResult, flags: Flags) -> AlignmentRecord {
    match result {
        MappingResult::Unmapped => AlignmentRecord::unmapped(&read.name, flags, &read.seq),
        MappingResult::Mapped(hit) => {
            let (flags, seq) = if hit.reverse {
                let rc = reverse_complement(read.seq.as_bytes());
                (flags | Flags::REVERSE, String::from_utf8(rc).expect("ASCII"))
            } else {
                (flags, read.seq.clone())
            };
            AlignmentRecord {
                qname: read.name.clone(),
                flags,
                rname: hit.rname.clone(),
                pos: hit.pos,
                mapq: hit.mapq(),
                cigar: hit.cigar.clone(),
                seq,
                md: Some(hit.md.clone()),
            }
        }
    }
}

/// Maps an assignment into a sorted alignment file.
///
/// `mate2` may be empty for single-end input; otherwise both files hold the
/// same number of reads and pairs are positional. Mates are mapped
/// independently and duplicates are kept. Reads are mapped in parallel on
/// the current rayon pool; output is identical for any thread count.
pub fn map_assignment(
    mate1: &[FastqRecord],
    mate2: &[FastqRecord],
    index: &KmerIndex,
    reference: &ReferenceGenome,
    params: &MappingParams,
) -> AlignmentFile {
    let paired = !mate2.is_empty();
    let tagged: Vec<(&FastqRecord, Flags)> = if paired {
        mate1
            .iter()
            .map(|r| (r, Flags::PAIRED | Flags::MATE1))
            .chain(mate2.iter().map(|r| (r, Flags::PAIRED | Flags::MATE2)))
            .collect()
    } else {
        mate1.iter().map(|r| (r, Flags::default())).collect()
    };
    let records: Vec<AlignmentRecord> = tagged
        .par_iter()
        .map(|(read, flags)| to_record(read, &map_read(read, index, reference, params), *flags))
        .collect();
    let mut file = AlignmentFile::new(AlignmentFile::header_for(reference));
    file.records = records;
    file.sort_records();
    file
}

/// A reference with its index and parameters, ready to map.
#[derive(Clone, Debug)]
pub struct Mapper {
    reference: ReferenceGenome,
    index: KmerIndex,
    params: MappingParams,
}

impl Mapper {
    pub fn new(reference: ReferenceGenome, params: MappingParams) -> Result<Self, MapperError> {
        params.validate()?;
        let index = KmerIndex::build(&reference, params.k)?;
        Ok(Self { reference, index, params })
    }

    pub fn reference(&self) -> &ReferenceGenome {
        &self.reference
    }

    pub fn index(&self) -> &KmerIndex {
        &self.index
    }

    pub fn params(&self) -> &MappingParams {
        &self.params
    }

    pub fn map_read(&self, read: &FastqRecord) -> MappingResult {
        map_read(read, &self.index, &self.reference, &self.params)
    }

    pub fn map_assignment(&self, mate1: &[FastqRecord], mate2: &[FastqRecord]) -> AlignmentFile {
        map_assignment(mate1, mate2, &self.index, &self.reference, &self.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genomics::{parse_alignment_file, reconstruct_reference, serialize_alignment_file, RefSeq};
    use rand::Rng;

    pub(crate) fn random_bases(n: usize, rng: &mut impl Rng) -> Vec<u8> {
        (0..n).map(|_| b"ACGT"[rng.gen_range(0..4)]).collect()
    }

    fn read_of(name: &str, seq: &[u8]) -> FastqRecord {
        FastqRecord::new(name, String::from_utf8(seq.to_vec()).unwrap(), "I".repeat(seq.len()))
    }

    fn genome(seed: u64, len: usize) -> ReferenceGenome {
        ReferenceGenome::single("chr1", random_bases(len, &mut crate::rng::seeded(seed))).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(MappingParams::default().validate().is_ok());
        assert!(MappingParams { k: 3, ..Default::default() }.validate().is_err());
        assert!(MappingParams { k: 32, ..Default::default() }.validate().is_err());
        assert!(MappingParams { stride: 0, ..Default::default() }.validate().is_err());
        assert!(MappingParams { band: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn exact_substring_maps_to_its_origin() {
        let g = genome(1, 2000);
        let mapper = Mapper::new(g.clone(), MappingParams::default()).unwrap();
        let bases = &g.get(0).unwrap().bases;
        let read = read_of("r", &bases[100..200]);
        let hit = mapper.map_read(&read).hit().cloned().unwrap();
        assert_eq!((hit.pos, hit.cigar.to_string(), hit.edits), (101, "100M".to_string(), 0));
        assert_eq!(hit.md.to_string(), "MD:Z:100");
        assert!(!hit.reverse && hit.unique);
        assert_eq!(mapper.map_read(&read), brute_force_map(&read, &g, 5));
    }

    #[test]
    fn single_substitution() {
        let g = genome(2, 2000);
        let mapper = Mapper::new(g.clone(), MappingParams::default()).unwrap();
        let mut seq = g.get(0).unwrap().bases[100..200].to_vec();
        let original = seq[40];
        seq[40] = if original == b'A' { b'C' } else { b'A' };
        let read = read_of("r", &seq);
        let hit = mapper.map_read(&read).hit().cloned().unwrap();
        assert_eq!((hit.pos, hit.cigar.to_string(), hit.edits), (101, "100M".to_string(), 1));
        assert_eq!(hit.md.to_string(), format!("MD:Z:40{}59", original as char));
        let oracle = brute_force_map(&read, &g, 5).hit().cloned().unwrap();
        assert_eq!((oracle.pos, oracle.edits), (101, 1));
    }

    #[test]
    fn reverse_strand_read() {
        let g = genome(3, 2000);
        let mapper = Mapper::new(g.clone(), MappingParams::default()).unwrap();
        let seq = reverse_complement(&g.get(0).unwrap().bases[500..600]);
        let hit = mapper.map_read(&read_of("r", &seq)).hit().cloned().unwrap();
        assert!(hit.reverse);
        assert_eq!((hit.pos, hit.edits), (501, 0));
    }

    #[test]
    fn random_read_is_unmapped() {
        let g = genome(4, 2000);
        let params = MappingParams { max_edits: 2, band: 2, ..Default::default() };
        let mapper = Mapper::new(g.clone(), params).unwrap();
        let read = read_of("r", &random_bases(100, &mut crate::rng::seeded(99)));
        assert_eq!(mapper.map_read(&read), MappingResult::Unmapped);
        assert_eq!(brute_force_map(&read, &g, 2), MappingResult::Unmapped);
    }

    #[test]
    fn all_n_read_is_unmapped() {
        let g = genome(5, 500);
        let read = read_of("r", &[b'N'; 100]);
        assert_eq!(brute_force_map(&read, &g, 5), MappingResult::Unmapped);
        assert_eq!(Mapper::new(g, MappingParams::default()).unwrap().map_read(&read), MappingResult::Unmapped);
    }

    #[test]
    fn read_overhanging_reference_end_is_soft_clipped() {
        let g = genome(6, 500);
        let mapper = Mapper::new(g.clone(), MappingParams::default()).unwrap();
        let mut seq = g.get(0).unwrap().bases[403..500].to_vec();
        seq.extend_from_slice(b"ACG");
        let hit = mapper.map_read(&read_of("r", &seq)).hit().cloned().unwrap();
        assert_eq!(hit.pos, 404);
        assert_eq!(hit.cigar.to_string(), "97M3S");
        assert_eq!(hit.edits, 3);
    }

    #[test]
    fn tied_loci_get_mapq_zero_and_lowest_position() {
        let mut rng = crate::rng::seeded(7);
        let repeat = random_bases(100, &mut rng);
        let mut bases = random_bases(300, &mut rng);
        bases.extend_from_slice(&repeat);
        bases.extend(random_bases(300, &mut rng));
        bases.extend_from_slice(&repeat);
        bases.extend(random_bases(300, &mut rng));
        let g = ReferenceGenome::single("chr1", bases).unwrap();
        let mapper = Mapper::new(g.clone(), MappingParams::default()).unwrap();
        let hit = mapper.map_read(&read_of("r", &repeat)).hit().cloned().unwrap();
        assert_eq!(hit.pos, 301);
        assert!(!hit.unique);
        assert_eq!(hit.mapq(), 0);
    }

    #[test]
    fn multiple_reference_sequences_prefer_lower_index() {
        let mut rng = crate::rng::seeded(8);
        let shared = random_bases(120, &mut rng);
        let mut a = random_bases(200, &mut rng);
        a.extend_from_slice(&shared);
        let mut b = shared.clone();
        b.extend(random_bases(200, &mut rng));
        let g = ReferenceGenome::new(vec![
            RefSeq { name: "a".into(), bases: a },
            RefSeq { name: "b".into(), bases: b },
        ])
        .unwrap();
        let read = read_of("r", &shared[10..110]);
        let mapper = Mapper::new(g.clone(), MappingParams::default()).unwrap();
        let hit = mapper.map_read(&read).hit().cloned().unwrap();
        assert_eq!((hit.rname.as_str(), hit.pos), ("a", 211));
        let oracle = brute_force_map(&read, &g, 5).hit().cloned().unwrap();
        assert_eq!((oracle.rname.as_str(), oracle.pos), ("a", 211));
    }

    #[test]
    fn assignment_keeps_duplicates_and_sorts() {
        let g = genome(9, 3000);
        let mapper = Mapper::new(g.clone(), MappingParams::default()).unwrap();
        let bases = &g.get(0).unwrap().bases;
        let m1 = vec![
            read_of("b", &bases[900..1000]),
            read_of("a", &bases[900..1000]),
            read_of("c", &random_bases(100, &mut crate::rng::seeded(1234))),
        ];
        let m2 = vec![
            read_of("b", &reverse_complement(&bases[1100..1200])),
            read_of("a", &reverse_complement(&bases[1100..1200])),
            read_of("c", &bases[10..110]),
        ];
        let file = mapper.map_assignment(&m1, &m2);
        assert_eq!(file.records.len(), 6);
        let text = serialize_alignment_file(&file).unwrap();
        assert_eq!(parse_alignment_file(text.as_bytes()).unwrap(), file);
        assert_eq!(file.records[0].qname, "c");
        assert_eq!(file.records[1].qname, "a");
        assert_eq!(file.records[2].qname, "b");
        assert!(file.records[5].is_unmapped());
        for r in file.records.iter().filter(|r| !r.is_unmapped()) {
            let start = r.pos as usize - 1;
            let span = crate::genomics::reference_span(&r.cigar);
            let rebuilt = reconstruct_reference(r.seq.as_bytes(), &r.cigar, r.md.as_ref().unwrap()).unwrap();
            assert_eq!(rebuilt, &bases[start..start + span]);
        }
    }

    #[test]
    fn empty_assignment_has_header() {
        let g = genome(10, 100);
        let mapper = Mapper::new(g, MappingParams::default()).unwrap();
        let file = mapper.map_assignment(&[], &[]);
        assert!(file.records.is_empty());
        assert_eq!(file.header.len(), 1);
        assert_eq!(serialize_alignment_file(&file).unwrap(), "@SQ\tchr1\t100\n");
    }
}
