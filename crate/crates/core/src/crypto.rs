//! Hashes, signing keys and passphrase-sealed key files.

use std::fmt;
use std::str::FromStr;

use aes_gcm::aead::Aead;
use aes_gcm::{Aes256Gcm, KeyInit, Nonce};
use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use hmac::{Hmac, Mac};
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::canonical::{Document, DocumentError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("invalid hex encoding")]
    Hex,
    #[error("invalid key material")]
    InvalidKey,
    #[error("wrong passphrase or corrupted key file")]
    Unseal,
    #[error(transparent)]
    Document(#[from] DocumentError),
}

/// SHA-256 digest, rendered as lowercase hex.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Digest256(pub [u8; 32]);

impl Digest256 {
    pub const ZERO: Digest256 = Digest256([0; 32]);

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Self> {
        bytes.try_into().ok().map(Digest256)
    }
}

impl fmt::Display for Digest256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Digest256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest256({})", &self.to_hex()[..16])
    }
}

impl FromStr for Digest256 {
    type Err = CryptoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 64 || s.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(CryptoError::Hex);
        }
        let bytes = hex::decode(s).map_err(|_| CryptoError::Hex)?;
        Digest256::from_slice(&bytes).ok_or(CryptoError::Hex)
    }
}

pub fn sha256(data: &[u8]) -> Digest256 {
    Digest256(<Sha256 as Digest>::digest(data).into())
}

pub fn hmac_sha256(key: &[u8], data: &[u8]) -> [u8; 32] {
    let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(key).expect("hmac accepts any key length");
    mac.update(data);
    mac.finalize().into_bytes().into()
}

/// Ed25519 verification key.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PublicKey(VerifyingKey);

impl PublicKey {
    pub fn from_bytes(bytes: &[u8; 32]) -> Result<Self, CryptoError> {
        VerifyingKey::from_bytes(bytes)
            .map(PublicKey)
            .map_err(|_| CryptoError::InvalidKey)
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0.to_bytes()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn verify(&self, message: &[u8], signature: &Signature) -> bool {
        let sig = ed25519_dalek::Signature::from_bytes(&signature.0);
        self.0.verify_strict(message, &sig).is_ok()
    }
}

impl PartialOrd for PublicKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PublicKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.to_bytes().cmp(&other.to_bytes())
    }
}

impl fmt::Display for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", &self.to_hex()[..16])
    }
}

impl FromStr for PublicKey {
    type Err = CryptoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = hex::decode(s.trim()).map_err(|_| CryptoError::Hex)?;
        let arr: [u8; 32] = bytes.try_into().map_err(|_| CryptoError::InvalidKey)?;
        PublicKey::from_bytes(&arr)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature(pub [u8; 64]);

impl Signature {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}..)", &self.to_hex()[..16])
    }
}

impl FromStr for Signature {
    type Err = CryptoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = hex::decode(s).map_err(|_| CryptoError::Hex)?;
        bytes.try_into().map(Signature).map_err(|_| CryptoError::Hex)
    }
}

/// Ed25519 signing key.
#[derive(Clone)]
pub struct Keypair(SigningKey);

impl Keypair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        Keypair(SigningKey::generate(rng))
    }

    /// Deterministic key from a 32-byte seed; used by tests and simulations.
    pub fn from_seed(seed: [u8; 32]) -> Self {
        Keypair(SigningKey::from_bytes(&seed))
    }

    pub fn seed(&self) -> [u8; 32] {
        self.0.to_bytes()
    }

    pub fn public(&self) -> PublicKey {
        PublicKey(self.0.verifying_key())
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        Signature(self.0.sign(message).to_bytes())
    }
}

impl fmt::Debug for Keypair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Keypair({:?})", self.public())
    }
}

const SEALED_FORMAT: &str = "coinami-sealed-key-v1";
const PLAIN_FORMAT: &str = "coinami-key-v1";
pub const KDF_ROUNDS: u32 = 100_000;

fn passphrase_key(passphrase: &str, salt: &[u8], rounds: u32) -> [u8; 32] {
    let mut out = [0u8; 32];
    pbkdf2::pbkdf2_hmac::<Sha256>(passphrase.as_bytes(), salt, rounds, &mut out);
    out
}

/// Encrypts a keypair under a passphrase (PBKDF2-HMAC-SHA256 + AES-256-GCM).
pub fn seal_keypair<R: RngCore + CryptoRng>(
    keypair: &Keypair,
    passphrase: &str,
    rng: &mut R,
) -> String {
    let mut salt = [0u8; 16];
    let mut nonce = [0u8; 12];
    rng.fill_bytes(&mut salt);
    rng.fill_bytes(&mut nonce);
    let key = passphrase_key(passphrase, &salt, KDF_ROUNDS);
    let cipher = Aes256Gcm::new_from_slice(&key).expect("32-byte key");
    let sealed = cipher
        .encrypt(Nonce::from_slice(&nonce), keypair.seed().as_slice())
        .expect("aes-gcm encryption cannot fail for short inputs");
    Document::new()
        .with("format", SEALED_FORMAT)
        .with("public", keypair.public().to_hex())
        .with("kdf", "pbkdf2-hmac-sha256")
        .with("rounds", KDF_ROUNDS.to_string())
        .with("salt", hex::encode(salt))
        .with("nonce", hex::encode(nonce))
        .with("ciphertext", hex::encode(sealed))
        .render()
}

pub fn open_sealed_keypair(text: &str, passphrase: &str) -> Result<Keypair, CryptoError> {
    let doc = Document::parse(text)?;
    doc.expect_keys(&["format", "public", "kdf", "rounds", "salt", "nonce", "ciphertext"])?;
    if doc.require("format")? != SEALED_FORMAT {
        return Err(CryptoError::InvalidKey);
    }
    let rounds: u32 = doc.require_parsed("rounds")?;
    let salt = hex::decode(doc.require("salt")?).map_err(|_| CryptoError::Hex)?;
    let nonce = hex::decode(doc.require("nonce")?).map_err(|_| CryptoError::Hex)?;
    let sealed = hex::decode(doc.require("ciphertext")?).map_err(|_| CryptoError::Hex)?;
    if nonce.len() != 12 {
        return Err(CryptoError::InvalidKey);
    }
    let key = passphrase_key(passphrase, &salt, rounds);
    let cipher = Aes256Gcm::new_from_slice(&key).expect("32-byte key");
    let seed = cipher
        .decrypt(Nonce::from_slice(&nonce), sealed.as_slice())
        .map_err(|_| CryptoError::Unseal)?;
    let seed: [u8; 32] = seed.try_into().map_err(|_| CryptoError::InvalidKey)?;
    let keypair = Keypair::from_seed(seed);
    if keypair.public().to_hex() != doc.require("public")? {
        return Err(CryptoError::Unseal);
    }
    Ok(keypair)
}

/// Unencrypted key file, for service keys whose protection is left to the host.
pub fn render_plain_keypair(keypair: &Keypair) -> String {
    Document::new()
        .with("format", PLAIN_FORMAT)
        .with("public", keypair.public().to_hex())
        .with("secret", hex::encode(keypair.seed()))
        .render()
}

/// Loads either key file flavour; `passphrase` is only consulted for sealed files.
pub fn load_keypair(text: &str, passphrase: Option<&str>) -> Result<Keypair, CryptoError> {
    let doc = Document::parse(text)?;
    match doc.require("format")? {
        SEALED_FORMAT => open_sealed_keypair(text, passphrase.ok_or(CryptoError::Unseal)?),
        PLAIN_FORMAT => {
            let seed = hex::decode(doc.require("secret")?).map_err(|_| CryptoError::Hex)?;
            let seed: [u8; 32] = seed.try_into().map_err(|_| CryptoError::InvalidKey)?;
            Ok(Keypair::from_seed(seed))
        }
        _ => Err(CryptoError::InvalidKey),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::OsRng;

    #[test]
    fn sign_and_verify() {
        let kp = Keypair::from_seed([7; 32]);
        let sig = kp.sign(b"hello");
        assert!(kp.public().verify(b"hello", &sig));
        assert!(!kp.public().verify(b"hellp", &sig));
        let other = Keypair::from_seed([8; 32]);
        assert!(!other.public().verify(b"hello", &sig));
    }

    #[test]
    fn hex_round_trips() {
        let kp = Keypair::from_seed([1; 32]);
        let pk: PublicKey = kp.public().to_hex().parse().unwrap();
        assert_eq!(pk, kp.public());
        let d = sha256(b"abc");
        assert_eq!(
            d.to_hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(d.to_hex().parse::<Digest256>().unwrap(), d);
        assert!(d.to_hex().to_uppercase().parse::<Digest256>().is_err());
    }

    #[test]
    fn sealed_key_round_trip() {
        let kp = Keypair::generate(&mut OsRng);
        let text = seal_keypair(&kp, "correct horse", &mut OsRng);
        let back = open_sealed_keypair(&text, "correct horse").unwrap();
        assert_eq!(back.public(), kp.public());
        assert_eq!(
            open_sealed_keypair(&text, "wrong").unwrap_err(),
            CryptoError::Unseal
        );
        assert!(!text.contains(&hex::encode(kp.seed())));
        let plain = render_plain_keypair(&kp);
        assert_eq!(load_keypair(&plain, None).unwrap().public(), kp.public());
        assert_eq!(
            load_keypair(&text, Some("correct horse")).unwrap().public(),
            kp.public()
        );
    }
}
