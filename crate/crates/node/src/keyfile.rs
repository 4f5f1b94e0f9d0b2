//! Key file helpers shared by the command-line tools.

use std::fs;
use std::io::{self, BufRead};
use std::path::Path;

use coinami_core::crypto::{load_keypair, seal_keypair, Keypair};

/// Reads the passphrase from `file` if given, otherwise one line from stdin.
pub fn passphrase(file: Option<&Path>) -> io::Result<String> {
    let text = match file {
        Some(p) => fs::read_to_string(p)?,
        None => {
            eprint!("passphrase: ");
            let mut line = String::new();
            io::stdin().lock().read_line(&mut line)?;
            line
        }
    };
    Ok(text.trim_end_matches(['\r', '\n']).to_string())
}

/// Loads a sealed or plain key file. The passphrase is only asked for when
/// the file is sealed.
pub fn read_keypair(path: &Path, passphrase_file: Option<&Path>) -> io::Result<Keypair> {
    let text = fs::read_to_string(path)?;
    let kp = match load_keypair(&text, None) {
        Ok(kp) => Ok(kp),
        Err(_) => load_keypair(&text, Some(&passphrase(passphrase_file)?)),
    }
    .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))?;
    Ok(kp)
}

/// Generates a keypair and writes it sealed under a passphrase.
pub fn write_new_keypair(path: &Path, passphrase_file: Option<&Path>) -> io::Result<Keypair> {
    let mut rng = rand::rngs::OsRng;
    let kp = Keypair::generate(&mut rng);
    let sealed = seal_keypair(&kp, &passphrase(passphrase_file)?, &mut rng);
    if path.exists() {
        return Err(io::Error::new(io::ErrorKind::AlreadyExists, format!("{} exists", path.display())));
    }
    fs::write(path, sealed)?;
    Ok(kp)
}
