//! Plaintext read labels and their deterministic authenticated encryption.
//!
//! The ciphertext is `base64(nonce || AES-256-GCM(padded label))` where the
//! nonce is an HMAC-SHA256 of the padded label. Equal labels therefore give
//! equal names (both mates of a pair share one), the job id prefix makes the
//! same decoy look different in every job, and padding hides whether a label
//! is a sample read or a decoy.

use std::fmt;

use aes_gcm::aead::Aead;
use aes_gcm::{Aes256Gcm, KeyInit, Nonce};
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::crypto::{hmac_sha256, sha256};
use crate::genomics::{Cigar, Md};
use crate::mapper::Hit;

pub const PADDED_NAME_LEN: usize = 256;
pub const MAX_JOB_ID_LEN: usize = 32;
const NONCE_LEN: usize = 12;
const TAG_LEN: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NameError {
    #[error("field {0:?} is empty or contains '|' or non-printable characters")]
    InvalidField(String),
    #[error("label of {0} bytes exceeds the padded length")]
    TooLong(usize),
    #[error("malformed label {0:?}")]
    Malformed(String),
    #[error("read name failed to decrypt")]
    DecryptFailure,
}

/// Alignment a decoy mate must be reported at.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExpectedAlignment {
    pub rname: String,
    pub pos: u64,
    pub cigar: Cigar,
    pub md: Md,
}

impl ExpectedAlignment {
    pub fn from_hit(hit: &Hit) -> Self {
        Self {
            rname: hit.rname.clone(),
            pos: hit.pos,
            cigar: hit.cigar.clone(),
            md: hit.md.clone(),
        }
    }

    fn render(&self) -> String {
        format!("{}|{}|{}|{}", self.rname, self.pos, self.cigar, self.md)
    }

    fn parse(fields: &[&str]) -> Option<Self> {
        let [rname, pos, cigar, md] = fields else { return None };
        Some(Self {
            rname: rname.to_string(),
            pos: pos.parse::<u64>().ok().filter(|p| *p >= 1 && *pos == p.to_string())?,
            cigar: cigar.parse().ok().filter(|c: &Cigar| !c.is_empty())?,
            md: md.parse().ok()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum NameKind {
    Sample { sample_id: String, serial: u64 },
    /// Expected alignments for mate 1 and mate 2.
    Decoy { mate1: ExpectedAlignment, mate2: ExpectedAlignment },
}

/// Plaintext label of a read pair.
///
/// Renders as `JOBID|S<sample>|R<serial>` or
/// `JOBID|DECOY|<rname>|<pos>|<cigar>|<md>|<rname>|<pos>|<cigar>|<md>` with one
/// expected alignment per mate.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PlainName {
    pub job_id: String,
    pub kind: NameKind,
}

pub(crate) fn valid_field(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_graphic() && b != b'|')
}

impl PlainName {
    pub fn sample(job_id: &str, sample_id: &str, serial: u64) -> Self {
        Self {
            job_id: job_id.to_string(),
            kind: NameKind::Sample { sample_id: sample_id.to_string(), serial },
        }
    }

    pub fn decoy(job_id: &str, mate1: ExpectedAlignment, mate2: ExpectedAlignment) -> Self {
        Self { job_id: job_id.to_string(), kind: NameKind::Decoy { mate1, mate2 } }
    }

    pub fn is_decoy(&self) -> bool {
        matches!(self.kind, NameKind::Decoy { .. })
    }

    pub fn validate(&self) -> Result<(), NameError> {
        if !valid_field(&self.job_id) || self.job_id.len() > MAX_JOB_ID_LEN {
            return Err(NameError::InvalidField(self.job_id.clone()));
        }
        match &self.kind {
            NameKind::Sample { sample_id, .. } if !valid_field(sample_id) => {
                Err(NameError::InvalidField(sample_id.clone()))
            }
            NameKind::Decoy { mate1, mate2 } => {
                for m in [mate1, mate2] {
                    if !valid_field(&m.rname) {
                        return Err(NameError::InvalidField(m.rname.clone()));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn render(&self) -> String {
        match &self.kind {
            NameKind::Sample { sample_id, serial } => format!("{}|S{}|R{}", self.job_id, sample_id, serial),
            NameKind::Decoy { mate1, mate2 } => {
                format!("{}|DECOY|{}|{}", self.job_id, mate1.render(), mate2.render())
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self, NameError> {
        let bad = || NameError::Malformed(text.to_string());
        let fields: Vec<&str> = text.split('|').collect();
        let name = match fields.as_slice() {
            [job, "DECOY", rest @ ..] if rest.len() == 8 => PlainName::decoy(
                job,
                ExpectedAlignment::parse(&rest[..4]).ok_or_else(bad)?,
                ExpectedAlignment::parse(&rest[4..]).ok_or_else(bad)?,
            ),
            [job, sample, serial] => {
                let sample_id = sample.strip_prefix('S').ok_or_else(bad)?;
                let serial_text = serial.strip_prefix('R').ok_or_else(bad)?;
                let serial: u64 = serial_text.parse().map_err(|_| bad())?;
                if serial.to_string() != serial_text {
                    return Err(bad());
                }
                PlainName::sample(job, sample_id, serial)
            }
            _ => return Err(bad()),
        };
        name.validate().map_err(|_| bad())?;
        if name.render() != text {
            return Err(bad());
        }
        Ok(name)
    }
}

impl fmt::Display for PlainName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// The authority's read-name key.
#[derive(Clone)]
pub struct NameKey {
    master: [u8; 32],
}

impl NameKey {
    pub fn from_bytes(master: [u8; 32]) -> Self {
        Self { master }
    }

    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut master = [0u8; 32];
        rng.fill_bytes(&mut master);
        Self { master }
    }

    /// Short public identifier of the key.
    pub fn key_id(&self) -> String {
        sha256(&hmac_sha256(&self.master, b"coinami/read-name/id")).to_hex()[..16].to_string()
    }

    fn cipher(&self) -> Aes256Gcm {
        let key = hmac_sha256(&self.master, b"coinami/read-name/enc");
        Aes256Gcm::new_from_slice(&key).expect("32-byte key")
    }

    fn nonce_for(&self, padded: &[u8]) -> [u8; NONCE_LEN] {
        let iv_key = hmac_sha256(&self.master, b"coinami/read-name/iv");
        hmac_sha256(&iv_key, padded)[..NONCE_LEN].try_into().unwrap()
    }
}

impl fmt::Debug for NameKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NameKey({})", self.key_id())
    }
}

/// Length of every encrypted name in characters.
pub fn encrypted_name_len() -> usize {
    (NONCE_LEN + PADDED_NAME_LEN + TAG_LEN).div_ceil(3) * 4
}

pub fn encrypt_name(plain: &PlainName, key: &NameKey) -> Result<String, NameError> {
    plain.validate()?;
    let rendered = plain.render();
    if rendered.len() > PADDED_NAME_LEN {
        return Err(NameError::TooLong(rendered.len()));
    }
    let mut padded = rendered.into_bytes();
    padded.resize(PADDED_NAME_LEN, 0);
    let nonce = key.nonce_for(&padded);
    let sealed = key
        .cipher()
        .encrypt(Nonce::from_slice(&nonce), padded.as_slice())
        .expect("aes-gcm encryption of a fixed-size block");
    let mut out = nonce.to_vec();
    out.extend_from_slice(&sealed);
    Ok(STANDARD.encode(out))
}

pub fn decrypt_name(cipher_text: &str, key: &NameKey) -> Result<PlainName, NameError> {
    let raw = STANDARD.decode(cipher_text).map_err(|_| NameError::DecryptFailure)?;
    if raw.len() != NONCE_LEN + PADDED_NAME_LEN + TAG_LEN {
        return Err(NameError::DecryptFailure);
    }
    let (nonce, sealed) = raw.split_at(NONCE_LEN);
    let padded = key
        .cipher()
        .decrypt(Nonce::from_slice(nonce), sealed)
        .map_err(|_| NameError::DecryptFailure)?;
    if key.nonce_for(&padded) != nonce {
        return Err(NameError::DecryptFailure);
    }
    let len = padded.iter().position(|&b| b == 0).unwrap_or(padded.len());
    if padded[len..].iter().any(|&b| b != 0) {
        return Err(NameError::DecryptFailure);
    }
    let text = std::str::from_utf8(&padded[..len]).map_err(|_| NameError::DecryptFailure)?;
    PlainName::parse(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key() -> NameKey {
        NameKey::from_bytes([42; 32])
    }

    fn fig4_decoy(job: &str) -> PlainName {
        let expected = ExpectedAlignment {
            rname: "chr1".into(),
            pos: 156433,
            cigar: "100M".parse().unwrap(),
            md: "MD:Z:35T64".parse().unwrap(),
        };
        let mate2 = ExpectedAlignment { pos: 156633, md: "MD:Z:100".parse().unwrap(), ..expected.clone() };
        PlainName::decoy(job, expected, mate2)
    }

    #[test]
    fn canonical_renderings() {
        assert_eq!(PlainName::sample("JOB12345", "3", 17).render(), "JOB12345|S3|R17");
        assert_eq!(
            fig4_decoy("JOB12345").render(),
            "JOB12345|DECOY|chr1|156433|100M|MD:Z:35T64|chr1|156633|100M|MD:Z:100"
        );
        for name in [PlainName::sample("J", "x", 0), fig4_decoy("JOB12345")] {
            assert_eq!(PlainName::parse(&name.render()).unwrap(), name);
        }
        for bad in ["J|S1", "J|X1|R2", "J|S1|R02", "J|S1|Rx", "J|DECOY|chr1|0|100M|MD:Z:100|chr1|1|100M|MD:Z:100", "|S1|R2"] {
            assert!(PlainName::parse(bad).is_err(), "{bad}");
        }
        assert!(PlainName::sample("J|K", "1", 0).validate().is_err());
    }

    #[test]
    fn round_trip_and_determinism() {
        for name in [PlainName::sample("JOB1", "a", 5), fig4_decoy("JOB1")] {
            let c1 = encrypt_name(&name, &key()).unwrap();
            let c2 = encrypt_name(&name, &key()).unwrap();
            assert_eq!(c1, c2);
            assert_eq!(c1.len(), encrypted_name_len());
            assert_eq!(decrypt_name(&c1, &key()).unwrap(), name);
        }
    }

    #[test]
    fn job_id_salts_the_ciphertext() {
        let a = encrypt_name(&fig4_decoy("JOB1"), &key()).unwrap();
        let b = encrypt_name(&fig4_decoy("JOB2"), &key()).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn tampering_and_wrong_key_fail() {
        let c = encrypt_name(&fig4_decoy("JOB1"), &key()).unwrap();
        let mut raw = STANDARD.decode(&c).unwrap();
        for i in [0, 20, raw.len() - 1] {
            raw[i] ^= 1;
            assert_eq!(decrypt_name(&STANDARD.encode(&raw), &key()), Err(NameError::DecryptFailure));
            raw[i] ^= 1;
        }
        assert_eq!(
            decrypt_name(&c, &NameKey::from_bytes([1; 32])),
            Err(NameError::DecryptFailure)
        );
        assert_eq!(decrypt_name("not base64!", &key()), Err(NameError::DecryptFailure));
    }

    #[test]
    fn overlong_labels_are_refused() {
        let long = "A".repeat(MAX_JOB_ID_LEN + 1);
        assert!(encrypt_name(&PlainName::sample(&long, "1", 1), &key()).is_err());
        let sample = "s".repeat(300);
        assert!(matches!(
            encrypt_name(&PlainName::sample("J", &sample, 1), &key()),
            Err(NameError::TooLong(_))
        ));
    }
}
