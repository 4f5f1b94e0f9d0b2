//! Root certificate authority tool.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use coinami_core::crypto::PublicKey;
use coinami_core::pki::{issue_certificate, Certificate};
use coinami_node::keyfile::{read_keypair, write_new_keypair};

#[derive(Parser)]
#[command(about = "Root authority: keys and authority certificates")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Create a sealed root key.
    Keygen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        passphrase_file: Option<PathBuf>,
    },
    /// Certify an authority public key.
    Issue {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        passphrase_file: Option<PathBuf>,
        /// Authority public key, hex.
        #[arg(long)]
        subject: String,
        #[arg(long)]
        name: String,
        /// Validity in days from now.
        #[arg(long, default_value_t = 365)]
        days: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a certificate against a root public key.
    Verify {
        #[arg(long)]
        cert: PathBuf,
        /// Root public key, hex.
        #[arg(long)]
        root: String,
    },
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn run(cli: Cli) -> Result<bool, Box<dyn std::error::Error>> {
    match cli.cmd {
        Cmd::Keygen { out, passphrase_file } => {
            let kp = write_new_keypair(&out, passphrase_file.as_deref())?;
            println!("{}", kp.public());
        }
        Cmd::Issue { key, passphrase_file, subject, name, days, out } => {
            let root = read_keypair(&key, passphrase_file.as_deref())?;
            let subject: PublicKey = subject.parse()?;
            let start = now();
            let cert = issue_certificate(&root, &subject, &name, start, start + days * 86_400);
            fs::write(&out, cert.render())?;
            println!("issued certificate for {name} valid until {}", cert.not_after);
        }
        Cmd::Verify { cert, root } => {
            let cert = Certificate::parse(&fs::read_to_string(cert)?)?;
            let root: PublicKey = root.parse()?;
            let ok = cert.verify(&root, now());
            println!("{} {} {}", if ok { "valid" } else { "invalid" }, cert.name, cert.subject);
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("rootca: {e}");
            ExitCode::from(2)
        }
    }
}
