//! Mapper throughput harness.

use std::time::Instant;

use coinami_core::mapper::{Mapper, MappingParams};
use coinami_core::synth::{random_reference, sample_pairs};

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub reads: usize,
    pub threads: usize,
    pub seconds: f64,
    pub reads_per_sec: f64,
    pub mapped: usize,
}

/// Maps `pairs` synthetic pairs against a random reference of `ref_len`
/// bases on a pool of `threads` workers.
pub fn run(ref_len: usize, pairs: usize, read_len: usize, threads: usize, seed: u64) -> BenchReport {
    let reference = random_reference(seed, &[("chr1", ref_len)]);
    let mapper = Mapper::new(reference, MappingParams::default()).expect("default parameters are valid");
    let reads = sample_pairs(mapper.reference(), pairs, read_len, 0.01, seed ^ 1);
    let (mate1, mate2): (Vec<_>, Vec<_>) = reads.into_iter().map(|p| (p.mate1, p.mate2)).unzip();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build().expect("thread pool");
    let start = Instant::now();
    let file = pool.install(|| mapper.map_assignment(&mate1, &mate2));
    let seconds = start.elapsed().as_secs_f64();
    let reads = mate1.len() + mate2.len();
    BenchReport {
        reads,
        threads: threads.max(1),
        seconds,
        reads_per_sec: reads as f64 / seconds.max(1e-9),
        mapped: file.records.iter().filter(|r| !r.is_unmapped()).count(),
    }
}
