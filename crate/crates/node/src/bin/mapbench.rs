//! Reports mapper throughput on synthetic data.

use clap::Parser;
use coinami_node::bench;

#[derive(Parser)]
#[command(about = "Built-in mapper throughput on synthetic reads")]
struct Args {
    #[arg(long, default_value_t = 1_000_000)]
    reference_len: usize,
    #[arg(long, default_value_t = 20_000)]
    pairs: usize,
    #[arg(long, default_value_t = 100)]
    read_len: usize,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn main() {
    let a = Args::parse();
    let r = bench::run(a.reference_len, a.pairs, a.read_len, a.threads, a.seed);
    println!(
        "{} reads in {:.3} s on {} thread(s): {:.0} reads/s ({} mapped)",
        r.reads, r.seconds, r.threads, r.reads_per_sec, r.mapped
    );
}
