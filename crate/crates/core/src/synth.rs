//! Synthetic references and read samples for tests, demos and benchmarks.

use rand::Rng;

use crate::assignment::{ReadPair, Sample};
use crate::genomics::{reverse_complement, FastqRecord, RefSeq, ReferenceGenome};
use crate::rng::seeded;

pub fn random_bases(len: usize, rng: &mut impl Rng) -> Vec<u8> {
    (0..len).map(|_| b"ACGT"[rng.gen_range(0..4)]).collect()
}

/// Uniform random reference with the given sequence names and lengths.
pub fn random_reference(seed: u64, sequences: &[(&str, usize)]) -> ReferenceGenome {
    let mut rng = seeded(seed);
    let seqs = sequences
        .iter()
        .map(|(name, len)| RefSeq { name: name.to_string(), bases: random_bases(*len, &mut rng) })
        .collect();
    ReferenceGenome::new(seqs).expect("valid synthetic reference")
}

fn mutate(seq: &mut [u8], rate: f64, rng: &mut impl Rng) {
    for b in seq.iter_mut() {
        if rng.gen_bool(rate) {
            *b = loop {
                let c = b"ACGT"[rng.gen_range(0..4)];
                if c != *b {
                    break c;
                }
            };
        }
    }
}

fn quals(len: usize, rng: &mut impl Rng) -> String {
    (0..len).map(|_| (b'5' + rng.gen_range(0..10)) as char).collect()
}

/// Paired reads drawn from random fragments of `reference` (forward mate 1,
/// reverse-strand mate 2) with per-base substitution probability `sub_rate`.
pub fn sample_pairs(
    reference: &ReferenceGenome,
    count: usize,
    read_len: usize,
    sub_rate: f64,
    seed: u64,
) -> Vec<ReadPair> {
    let mut rng = seeded(seed);
    let seqs: Vec<&RefSeq> = reference.sequences().iter().filter(|s| s.bases.len() >= read_len).collect();
    assert!(!seqs.is_empty(), "no sequence long enough for the read length");
    (0..count)
        .map(|i| {
            let s = seqs[rng.gen_range(0..seqs.len())];
            let frag = rng.gen_range(2 * read_len..=3 * read_len).min(s.bases.len());
            let start = rng.gen_range(0..=s.bases.len() - frag);
            let mut a = s.bases[start..start + read_len].to_vec();
            let mut b = reverse_complement(&s.bases[start + frag - read_len..start + frag]);
            mutate(&mut a, sub_rate, &mut rng);
            mutate(&mut b, sub_rate, &mut rng);
            let name = format!("read{i}");
            ReadPair::new(
                FastqRecord::new(&name, String::from_utf8(a).unwrap(), quals(read_len, &mut rng)),
                FastqRecord::new(&name, String::from_utf8(b).unwrap(), quals(read_len, &mut rng)),
            )
        })
        .collect()
}

/// `count` samples of `pairs` read pairs each, named "1", "2", ...
pub fn samples(reference: &ReferenceGenome, count: usize, pairs: usize, read_len: usize, seed: u64) -> Vec<Sample> {
    (0..count)
        .map(|i| {
            let reads = sample_pairs(reference, pairs, read_len, 0.01, crate::rng::derive_seed(seed, &i.to_string()));
            Sample::new((i + 1).to_string(), reads)
        })
        .collect()
}
