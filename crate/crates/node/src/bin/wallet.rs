//! Command-line wallet.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use coinami_core::crypto::PublicKey;
use coinami_node::keyfile::{read_keypair, write_new_keypair};
use coinami_node::net::{Endpoint, TcpEndpoint};
use coinami_node::wallet::build_payment;
use coinami_node::wire::Message;

#[derive(Parser)]
#[command(about = "Keys, balances and payments")]
struct Cli {
    /// Key file.
    #[arg(long, global = true, default_value = "wallet.key")]
    key: PathBuf,
    #[arg(long, global = true)]
    passphrase_file: Option<PathBuf>,
    /// Node to query and send through.
    #[arg(long, global = true, default_value = "127.0.0.1:7400")]
    node: String,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    Keygen,
    Balance,
    Send {
        #[arg(long)]
        to: String,
        #[arg(long)]
        amount: u64,
    },
}

fn coins(node: &TcpEndpoint, owner: PublicKey) -> Result<Vec<(coinami_core::ledger::OutPoint, coinami_core::ledger::TxOutput)>, Box<dyn std::error::Error>> {
    match node.call(Message::UtxoQuery { owner })? {
        Message::Utxos { entries } => Ok(entries),
        other => Err(format!("unexpected reply {}", other.op()).into()),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cli = Cli::parse();
    let node = TcpEndpoint::new(cli.node.clone());
    match cli.cmd {
        Cmd::Keygen => {
            let kp = write_new_keypair(&cli.key, cli.passphrase_file.as_deref())?;
            println!("{}", kp.public());
        }
        Cmd::Balance => {
            let kp = read_keypair(&cli.key, cli.passphrase_file.as_deref())?;
            let total: u64 = coins(&node, kp.public())?.iter().map(|(_, o)| o.amount).sum();
            println!("{total}");
        }
        Cmd::Send { to, amount } => {
            let kp = read_keypair(&cli.key, cli.passphrase_file.as_deref())?;
            let recipient: PublicKey = to.parse()?;
            let tx = build_payment(&kp, &coins(&node, kp.public())?, &recipient, amount)?;
            let id = tx.hash();
            match node.call(Message::TxAnnounce { tx })? {
                Message::Ack => println!("sent {id}"),
                other => return Err(format!("unexpected reply {}", other.op()).into()),
            }
        }
    }
    Ok(())
}
