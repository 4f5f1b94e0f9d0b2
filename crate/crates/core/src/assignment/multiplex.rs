//! Mixing samples and decoys into one shuffled, renamed assignment.

use std::collections::{BTreeMap, HashSet};

use rand::Rng;

use super::bundle::{payload_digest, AssignmentBundle, AssignmentManifest};
use super::decoys::{DecoyRecord, ReadPair};
use super::names::{encrypt_name, valid_field, NameKey, PlainName};
use super::AssignmentError;
use crate::genomics::{serialize_fastq, FastqRecord};
use crate::mapper::MappingParams;
use crate::rng::{permutation, seeded};

/// Reads of one sample. Pair `i` gets serial `first_serial + i`, so a
/// sample split over several jobs keeps globally unique serials.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    pub id: String,
    pub first_serial: u64,
    pub pairs: Vec<ReadPair>,
}

impl Sample {
    pub fn new(id: impl Into<String>, pairs: Vec<ReadPair>) -> Self {
        Self { id: id.into(), first_serial: 0, pairs }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
}

impl SampleSet {
    pub fn new(samples: Vec<Sample>) -> Self {
        Self { samples }
    }

    pub fn pair_count(&self) -> usize {
        self.samples.iter().map(|s| s.pairs.len()).sum()
    }

    fn validate(&self) -> Result<(), AssignmentError> {
        let bad = |m: String| Err(AssignmentError::InvalidSamples(m));
        let mut ids = HashSet::new();
        for s in &self.samples {
            if !valid_field(&s.id) || !ids.insert(&s.id) {
                return bad(format!("sample id {:?} is invalid or repeated", s.id));
            }
            for p in &s.pairs {
                if p.mate1.name != p.mate2.name || !p.mate1.is_valid() || !p.mate2.is_valid() {
                    return bad(format!("pair {:?} of sample {:?} is malformed", p.mate1.name, s.id));
                }
            }
        }
        Ok(())
    }
}

/// Everything in the manifest that does not come from the reads.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplexSettings {
    pub reference_id: String,
    pub params: MappingParams,
    pub decoy_fraction: f64,
    pub deadline_secs: u64,
}

impl MultiplexSettings {
    pub fn new(reference_id: impl Into<String>, params: MappingParams) -> Self {
        Self { reference_id: reference_id.into(), params, decoy_fraction: 0.05, deadline_secs: 3600 }
    }
}

/// Authority-private map from encrypted name to label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecoySecrets {
    pub key_id: String,
    pub names: BTreeMap<String, PlainName>,
}

impl DecoySecrets {
    pub fn decoy_count(&self) -> usize {
        self.names.values().filter(|n| n.is_decoy()).count()
    }
}

/// Decoys to add to `sample_pairs` so they make up `fraction` of the total.
pub fn decoy_count_for(sample_pairs: usize, fraction: f64) -> usize {
    (fraction / (1.0 - fraction) * sample_pairs as f64).round() as usize
}

fn renamed(read: &FastqRecord, name: &str, qual: Option<&str>) -> FastqRecord {
    FastqRecord::new(name, read.seq.clone(), qual.unwrap_or(&read.qual))
}

/// Builds an assignment.
///
/// Decoy qualities are copied from randomly chosen sample reads, then the
/// combined pair list is shuffled by one seeded Fisher–Yates permutation
/// applied to both mate files.
pub fn multiplex(
    samples: &SampleSet,
    decoys: &[DecoyRecord],
    key: &NameKey,
    job_id: &str,
    settings: &MultiplexSettings,
    seed: u64,
) -> Result<(AssignmentBundle, DecoySecrets), AssignmentError> {
    let fraction = settings.decoy_fraction;
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(AssignmentError::InvalidDecoyFraction(fraction));
    }
    samples.validate()?;
    let total = samples.pair_count() + decoys.len();
    let target = (fraction * total as f64).round() as usize;
    if decoys.len().abs_diff(target) > 1 {
        return Err(AssignmentError::DecoyCount { expected: target, got: decoys.len() });
    }
    // Name, reads, and for decoys the qualities borrowed from a sample pair.
    type Entry<'a> = (PlainName, &'a ReadPair, Option<(&'a str, &'a str)>);
    let mut entries: Vec<Entry> = Vec::with_capacity(total);
    for s in &samples.samples {
        for (i, pair) in s.pairs.iter().enumerate() {
            entries.push((PlainName::sample(job_id, &s.id, s.first_serial + i as u64), pair, None));
        }
    }
    let sample_pairs: Vec<&ReadPair> = samples.samples.iter().flat_map(|s| &s.pairs).collect();
    let mut rng = seeded(seed);
    for d in decoys {
        let donor = if sample_pairs.is_empty() {
            None
        } else {
            let p = sample_pairs[rng.gen_range(0..sample_pairs.len())];
            Some((p.mate1.qual.as_str(), p.mate2.qual.as_str()))
        };
        let [m1, m2] = d.expected.clone();
        entries.push((PlainName::decoy(job_id, m1, m2), &d.pair, donor));
    }
    let read_length = entries.first().map_or(0, |(_, p, _)| p.mate1.len());
    if entries.iter().any(|(_, p, _)| p.mate1.len() != read_length || p.mate2.len() != read_length) {
        return Err(AssignmentError::InvalidSamples("reads differ in length".into()));
    }

    let mut names = BTreeMap::new();
    let mut mate1 = Vec::with_capacity(total);
    let mut mate2 = Vec::with_capacity(total);
    for i in permutation(total, &mut rng) {
        let (plain, pair, donor) = &entries[i];
        let cipher = encrypt_name(plain, key)?;
        if names.insert(cipher.clone(), plain.clone()).is_some() {
            return Err(AssignmentError::DuplicateName(plain.render()));
        }
        mate1.push(renamed(&pair.mate1, &cipher, donor.map(|d| d.0)));
        mate2.push(renamed(&pair.mate2, &cipher, donor.map(|d| d.1)));
    }
    let mate1 = serialize_fastq(&mate1).into_bytes();
    let mate2 = serialize_fastq(&mate2).into_bytes();
    let manifest = AssignmentManifest {
        job_id: job_id.to_string(),
        reference_id: settings.reference_id.clone(),
        params: settings.params,
        read_length,
        read_pair_count: total,
        decoy_count: decoys.len(),
        decoy_fraction: fraction,
        deadline_secs: settings.deadline_secs,
        payload_digest: payload_digest(&mate1, &mate2),
    };
    let secrets = DecoySecrets { key_id: key.key_id(), names };
    Ok((AssignmentBundle { manifest, mate1, mate2 }, secrets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::{decrypt_name, ExpectedAlignment};
    use crate::genomics::parse_fastq;

    fn pair(name: &str, a: &str, b: &str) -> ReadPair {
        ReadPair::new(FastqRecord::new(name, a, "A".repeat(a.len())), FastqRecord::new(name, b, "B".repeat(b.len())))
    }

    fn two_by_two() -> SampleSet {
        SampleSet::new(vec![
            Sample::new("1", vec![pair("x", "AAAA", "CCCC"), pair("y", "AAAC", "CCCA")]),
            Sample::new("2", vec![pair("x", "GGGG", "TTTT"), pair("z", "GGGT", "TTTG")]),
        ])
    }

    fn settings(fraction: f64) -> MultiplexSettings {
        MultiplexSettings { decoy_fraction: fraction, ..MultiplexSettings::new("ref", MappingParams::default()) }
    }

    fn fake_decoy(i: u64) -> DecoyRecord {
        let e = ExpectedAlignment {
            rname: "chr1".into(),
            pos: i + 1,
            cigar: "4M".parse().unwrap(),
            md: "MD:Z:4".parse().unwrap(),
        };
        DecoyRecord { pair: pair("d", "ACGT", "ACGT"), expected: [e.clone(), e] }
    }

    #[test]
    fn deterministic_and_complete() {
        let key = NameKey::from_bytes([5; 32]);
        let (a, secrets) = multiplex(&two_by_two(), &[], &key, "JOB1", &settings(0.05), 11).unwrap();
        let (b, _) = multiplex(&two_by_two(), &[], &key, "JOB1", &settings(0.05), 11).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        a.verify_digest().unwrap();
        let (m1, m2) = a.reads().unwrap();
        assert_eq!(m1.len(), 4);
        assert_eq!(secrets.names.len(), 4);
        let mut seen = Vec::new();
        for (r1, r2) in m1.iter().zip(&m2) {
            assert_eq!(r1.name, r2.name);
            seen.push((decrypt_name(&r1.name, &key).unwrap().render(), r1.seq.clone(), r2.seq.clone()));
        }
        seen.sort();
        assert_eq!(
            seen,
            vec![
                ("JOB1|S1|R0".to_string(), "AAAA".to_string(), "CCCC".to_string()),
                ("JOB1|S1|R1".into(), "AAAC".into(), "CCCA".into()),
                ("JOB1|S2|R0".into(), "GGGG".into(), "TTTT".into()),
                ("JOB1|S2|R1".into(), "GGGT".into(), "TTTG".into()),
            ]
        );
        let (c, _) = multiplex(&two_by_two(), &[], &key, "JOB1", &settings(0.05), 12).unwrap();
        assert_ne!(a.mate1, c.mate1);
    }

    #[test]
    fn fraction_is_enforced() {
        assert_eq!(decoy_count_for(950, 0.05), 50);
        let key = NameKey::from_bytes([5; 32]);
        let many: Vec<DecoyRecord> = (0..3).map(fake_decoy).collect();
        assert!(matches!(
            multiplex(&two_by_two(), &many, &key, "J", &settings(0.05), 1),
            Err(AssignmentError::DecoyCount { .. })
        ));
        let (bundle, secrets) = multiplex(&two_by_two(), &many[..1], &key, "J", &settings(0.2), 1).unwrap();
        assert_eq!(bundle.manifest.decoy_count, 1);
        assert_eq!(bundle.manifest.read_pair_count, 5);
        assert_eq!(secrets.decoy_count(), 1);
        let (m1, _) = bundle.reads().unwrap();
        let decoy = m1.iter().find(|r| secrets.names[&r.name].is_decoy()).unwrap();
        assert_eq!(decoy.qual, "AAAA");
    }

    #[test]
    fn names_do_not_reveal_kind() {
        let key = NameKey::from_bytes([9; 32]);
        let d: Vec<DecoyRecord> = (0..1).map(fake_decoy).collect();
        let (bundle, _) = multiplex(&two_by_two(), &d, &key, "J", &settings(0.2), 3).unwrap();
        let reads = parse_fastq(&bundle.mate1).unwrap();
        let len = reads[0].name.len();
        for r in &reads {
            assert_eq!(r.name.len(), len);
            assert!(r.name.bytes().all(|b| b.is_ascii_alphanumeric() || b"+/=".contains(&b)));
        }
    }

    #[test]
    fn invalid_inputs() {
        let key = NameKey::from_bytes([5; 32]);
        let dup = SampleSet::new(vec![Sample::new("1", vec![]), Sample::new("1", vec![])]);
        assert!(multiplex(&dup, &[], &key, "J", &settings(0.05), 1).is_err());
        let uneven = SampleSet::new(vec![Sample::new("1", vec![pair("a", "AAAA", "CCCC"), pair("b", "AAA", "CCC")])]);
        assert!(multiplex(&uneven, &[], &key, "J", &settings(0.05), 1).is_err());
        let mismatched = SampleSet::new(vec![Sample::new("1", vec![ReadPair::new(
            FastqRecord::new("a", "AC", "II"),
            FastqRecord::new("b", "AC", "II"),
        )])]);
        assert!(multiplex(&mismatched, &[], &key, "J", &settings(0.05), 1).is_err());
        assert!(multiplex(&two_by_two(), &[], &key, "J", &settings(1.0), 1).is_err());
    }
}
