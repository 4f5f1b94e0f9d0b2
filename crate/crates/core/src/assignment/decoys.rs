//! Decoy read pairs with pre-computed alignments.

use rand::Rng;

use super::names::{ExpectedAlignment, PlainName, MAX_JOB_ID_LEN, PADDED_NAME_LEN};
use super::AssignmentError;
use crate::genomics::{reverse_complement, FastqRecord};
use crate::mapper::{Hit, Mapper, MappingResult};
use crate::rng::seeded;

/// Two mates of one fragment; pairing is positional in the assignment files.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ReadPair {
    pub mate1: FastqRecord,
    pub mate2: FastqRecord,
}

impl ReadPair {
    pub fn new(mate1: FastqRecord, mate2: FastqRecord) -> Self {
        Self { mate1, mate2 }
    }
}

/// Where a decoy was cut from. Starts are 0-based; mate 1 lies on the
/// forward strand and mate 2 on the reverse strand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecoyOrigin {
    pub ref_index: usize,
    pub mate1_start: usize,
    pub mate2_start: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecoyRecord {
    pub pair: ReadPair,
    pub expected: [ExpectedAlignment; 2],
}

fn accept(hit: Option<&Hit>, ref_index: usize, start: usize, reverse: bool) -> Option<ExpectedAlignment> {
    let hit = hit?;
    (hit.unique && hit.ref_index == ref_index && hit.pos == start as u64 + 1 && hit.reverse == reverse)
        .then(|| ExpectedAlignment::from_hit(hit))
}

impl DecoyRecord {
    /// Maps both mates and keeps the pair only if each is the unique best
    /// hit at its origin. The expected alignments come from the mapper.
    pub fn from_pair(pair: ReadPair, origin: DecoyOrigin, mapper: &Mapper) -> Option<Self> {
        let r1 = mapper.map_read(&pair.mate1);
        let m1 = accept(r1.hit(), origin.ref_index, origin.mate1_start, false)?;
        let r2 = mapper.map_read(&pair.mate2);
        let m2 = accept(r2.hit(), origin.ref_index, origin.mate2_start, true)?;
        let longest = PlainName::decoy(&"J".repeat(MAX_JOB_ID_LEN), m1.clone(), m2.clone());
        if longest.render().len() > PADDED_NAME_LEN {
            return None;
        }
        Some(Self { pair, expected: [m1, m2] })
    }

    /// Whether a mapping reproduces the expected alignment of mate 1 or 2.
    pub fn matches(&self, mate: usize, result: &MappingResult) -> bool {
        result.hit().map(ExpectedAlignment::from_hit).as_ref() == Some(&self.expected[mate])
    }
}

fn substitute(bases: &mut [u8], rate: f64, rng: &mut impl Rng) {
    for b in bases.iter_mut() {
        if rate > 0.0 && rng.gen_bool(rate) {
            let others: Vec<u8> = b"ACGT".iter().copied().filter(|x| x != b).collect();
            *b = others[rng.gen_range(0..others.len())];
        }
    }
}

fn read(name: String, seq: Vec<u8>) -> FastqRecord {
    let qual = "I".repeat(seq.len());
    FastqRecord::new(name, String::from_utf8(seq).expect("ASCII bases"), qual)
}

/// Samples `count` decoy pairs from the mapper's reference.
///
/// Fragments are 2 to 3 read lengths long (shorter if the sequence is);
/// mate 1 reads the fragment start forward and mate 2 reads its end on the
/// reverse strand. Each base is substituted with probability `sub_rate`.
/// Pairs that do not map back uniquely to their origin are discarded and
/// resampled, up to `100 * count` attempts in total. Decoy names and
/// qualities are placeholders; multiplexing replaces both.
pub fn generate_decoys(
    mapper: &Mapper,
    count: usize,
    read_len: usize,
    sub_rate: f64,
    seed: u64,
) -> Result<Vec<DecoyRecord>, AssignmentError> {
    if !(0.0..=0.05).contains(&sub_rate) {
        return Err(AssignmentError::InvalidSubstitutionRate(sub_rate));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let eligible: Vec<(usize, usize)> = mapper
        .reference()
        .sequences()
        .iter()
        .enumerate()
        .filter(|(_, s)| read_len > 0 && s.bases.len() >= read_len)
        .map(|(i, s)| (i, s.bases.len()))
        .collect();
    let total: usize = eligible.iter().map(|(_, l)| l).sum();
    let mut rng = seeded(seed);
    let mut decoys = Vec::with_capacity(count);
    let mut attempts = 0;
    while decoys.len() < count && attempts < 100 * count && total > 0 {
        attempts += 1;
        let mut pick = rng.gen_range(0..total);
        let &(ref_index, len) = eligible
            .iter()
            .find(|(_, l)| {
                let hit = pick < *l;
                if !hit {
                    pick -= l;
                }
                hit
            })
            .expect("pick below total length");
        let bases = &mapper.reference().sequences()[ref_index].bases;
        let frag_len = rng.gen_range(2 * read_len..=3 * read_len).min(len);
        let frag_start = rng.gen_range(0..=len - frag_len);
        let mate2_start = frag_start + frag_len - read_len;
        let mut s1 = bases[frag_start..frag_start + read_len].to_vec();
        let mut s2 = bases[mate2_start..mate2_start + read_len].to_vec();
        substitute(&mut s1, sub_rate, &mut rng);
        substitute(&mut s2, sub_rate, &mut rng);
        let name = format!("decoy{}", decoys.len());
        let pair = ReadPair::new(read(name.clone(), s1), read(name, reverse_complement(&s2)));
        let origin = DecoyOrigin { ref_index, mate1_start: frag_start, mate2_start };
        if let Some(decoy) = DecoyRecord::from_pair(pair, origin, mapper) {
            decoys.push(decoy);
        }
    }
    if decoys.len() < count {
        return Err(AssignmentError::CannotPlaceDecoys { placed: decoys.len(), requested: count });
    }
    Ok(decoys)
}
