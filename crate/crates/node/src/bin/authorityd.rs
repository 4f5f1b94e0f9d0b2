//! Authority daemon: packs sample reads into assignments, leases them to
//! miners and signs tokens for verified results.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use clap::Parser;
use coinami_core::assignment::{ReadPair, Sample};
use coinami_core::genomics::{parse_fasta, parse_fastq};
use coinami_core::mapper::{Mapper, MappingParams};
use coinami_core::pki::Certificate;
use coinami_node::authority::{Authority, AuthorityConfig};
use coinami_node::clock::{Clock, SystemClock};
use coinami_node::keyfile::read_keypair;
use coinami_node::net::Server;
use log::{info, warn};

#[derive(Parser)]
#[command(about = "Assignment-issuing and result-verifying authority server")]
struct Args {
    #[arg(long)]
    listen: String,
    /// This authority's certificate, as issued by the root.
    #[arg(long)]
    root_cert: PathBuf,
    #[arg(long)]
    key: PathBuf,
    #[arg(long)]
    passphrase_file: Option<PathBuf>,
    /// Directory of `<sample>_1.fastq` / `<sample>_2.fastq` mate files.
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    reference: PathBuf,
    #[arg(long, default_value_t = 1)]
    difficulty_d: u32,
    #[arg(long, default_value_t = 600)]
    deadline_secs: u64,
    #[arg(long, default_value_t = 0.05)]
    decoy_fraction: f64,
    #[arg(long, default_value_t = 950)]
    pairs_per_job: usize,
    #[arg(long, default_value_t = 8)]
    queue_depth: usize,
    /// Where accepted per-sample alignments are written.
    #[arg(long, default_value = "outputs")]
    output_dir: PathBuf,
    /// Seed for decoy placement and shuffling. Random when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// off, error, warn, info, debug or trace.
    #[arg(long, default_value = "info")]
    log_level: log::LevelFilter,
}

fn load_samples(dir: &Path) -> Result<Vec<Sample>, Box<dyn std::error::Error>> {
    let mut ids: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter_map(|n| n.strip_suffix("_1.fastq").map(str::to_string))
        .collect();
    ids.sort();
    let mut samples = Vec::new();
    for id in ids {
        let m1 = parse_fastq(&fs::read(dir.join(format!("{id}_1.fastq")))?)?;
        let m2 = parse_fastq(&fs::read(dir.join(format!("{id}_2.fastq")))?)?;
        if m1.len() != m2.len() {
            return Err(format!("sample {id}: mate files differ in length").into());
        }
        info!("sample {id}: {} pairs", m1.len());
        samples.push(Sample::new(id, m1.into_iter().zip(m2).map(|(a, b)| ReadPair::new(a, b)).collect()));
    }
    Ok(samples)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args = Args::parse();
    env_logger::Builder::new().filter_level(args.log_level).init();
    let key = read_keypair(&args.key, args.passphrase_file.as_deref())?;
    let cert = Certificate::parse(&fs::read_to_string(&args.root_cert)?)?;
    if cert.subject != key.public() {
        return Err("certificate subject does not match the key".into());
    }
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    if !cert.verify(&cert.root, clock.now()) {
        return Err("certificate is outside its validity window or badly signed".into());
    }
    let reference = parse_fasta(&fs::read(&args.reference)?)?;
    let mapper = Mapper::new(reference, MappingParams::default())?;
    let config = AuthorityConfig {
        difficulty_d: args.difficulty_d,
        deadline_secs: args.deadline_secs,
        decoy_fraction: args.decoy_fraction,
        pairs_per_job: args.pairs_per_job,
        queue_depth: args.queue_depth,
        seed: args.seed.unwrap_or_else(rand::random),
        output_dir: Some(args.output_dir),
        ..AuthorityConfig::default()
    };
    let authority = Arc::new(Authority::new(key, cert, mapper, config, clock));
    authority.add_samples(load_samples(&args.samples)?);
    info!("reference {}; {} sample pairs queued", authority.reference_id(), authority.pending_sample_pairs());

    let handler_auth = authority.clone();
    let server = Server::bind(&args.listen, Arc::new(move |msg, _peer| handler_auth.handle(msg)))?;
    info!("authority {} listening on {}", authority.public_key(), server.local_addr());
    loop {
        authority.expire_leases();
        if let Err(e) = authority.refill() {
            warn!("assignment build failed: {e}");
        }
        thread::sleep(Duration::from_secs(1));
    }
}
