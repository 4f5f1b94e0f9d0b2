use coinami_core::assignment::{
    decoy_count_for, generate_decoys, multiplex, AssignmentBundle, DecoySecrets, MultiplexSettings, NameKey, SampleSet,
};
use coinami_core::genomics::{serialize_alignment_file, AlignmentFile, FastqRecord};
use coinami_core::mapper::{Mapper, MappingParams};
use coinami_core::synth;
use coinami_core::verifier::{verify_result, verify_result_bytes, RejectReason, Verdict};

struct Job {
    mapper: Mapper,
    samples: SampleSet,
    bundle: AssignmentBundle,
    secrets: DecoySecrets,
}

fn build_job(samples: usize, pairs: usize) -> Job {
    let reference = synth::random_reference(10, &[("chr1", 10_000)]);
    let mapper = Mapper::new(reference, MappingParams::default()).unwrap();
    let samples = SampleSet::new(synth::samples(mapper.reference(), samples, pairs, 100, 20));
    let n_decoys = decoy_count_for(samples.pair_count(), 0.05);
    let decoys = generate_decoys(&mapper, n_decoys, 100, 0.01, 30).unwrap();
    let settings = MultiplexSettings::new(mapper.reference().reference_id(), *mapper.params());
    let key = NameKey::from_bytes([7; 32]);
    let (bundle, secrets) = multiplex(&samples, &decoys, &key, "JOB1", &settings, 40).unwrap();
    Job { mapper, samples, bundle, secrets }
}

fn map_bundle(job: &Job) -> AlignmentFile {
    let (m1, m2) = job.bundle.reads().unwrap();
    job.mapper.map_assignment(&m1, &m2)
}

#[test]
fn honest_result_demultiplexes_to_solo_mappings() {
    let job = build_job(3, 200);
    assert_eq!(job.bundle.manifest.decoy_count, 32);
    let result = map_bundle(&job);
    let bytes = serialize_alignment_file(&result).unwrap();
    let report = verify_result_bytes(bytes.as_bytes(), &job.bundle.manifest, &job.secrets);
    assert_eq!(report.verdict, Verdict::Accept);
    assert_eq!(report.decoys_checked, 32);
    assert_eq!(report.decoys_failed, 0);
    assert_eq!(report.per_sample_outputs.len(), 3);
    for sample in &job.samples.samples {
        let rename = |r: &FastqRecord, i: usize| FastqRecord { name: format!("S{}:R{}", sample.id, i), ..r.clone() };
        let m1: Vec<_> = sample.pairs.iter().enumerate().map(|(i, p)| rename(&p.mate1, i)).collect();
        let m2: Vec<_> = sample.pairs.iter().enumerate().map(|(i, p)| rename(&p.mate2, i)).collect();
        let solo = job.mapper.map_assignment(&m1, &m2);
        assert_eq!(report.per_sample_outputs[&sample.id], solo, "sample {}", sample.id);
    }
}

#[test]
fn tampering_is_rejected() {
    let job = build_job(2, 60);
    let honest = map_bundle(&job);
    let decoy_idx = honest
        .records
        .iter()
        .position(|r| job.secrets.names[&r.qname].is_decoy())
        .unwrap();

    let mut shifted = honest.clone();
    shifted.records[decoy_idx].pos += 1;
    assert_eq!(
        verify_result(&shifted, &job.bundle.manifest, &job.secrets).verdict,
        Verdict::Reject(RejectReason::DecoyMismatch)
    );

    let mut missing = honest.clone();
    let name = missing.records[0].qname.clone();
    missing.records.retain(|r| r.qname != name);
    assert_eq!(
        verify_result(&missing, &job.bundle.manifest, &job.secrets).verdict,
        Verdict::Reject(RejectReason::MissingReads)
    );

    let mut foreign = honest.clone();
    foreign.records[0].qname = "bm90IGEgbmFtZQ==".into();
    assert_eq!(
        verify_result(&foreign, &job.bundle.manifest, &job.secrets).verdict,
        Verdict::Reject(RejectReason::UnknownName)
    );

    let mut unsorted = honest.clone();
    unsorted.records.swap(0, 1);
    if unsorted.check_sorted().is_err() {
        assert_eq!(
            verify_result(&unsorted, &job.bundle.manifest, &job.secrets).verdict,
            Verdict::Reject(RejectReason::NotSorted)
        );
    }
}
