//! Signed tokens: the authority's attestation that replaces a block nonce.

use thiserror::Error;

use crate::canonical::{Document, DocumentError};
use crate::crypto::{Digest256, Keypair, PublicKey, Signature};
use crate::pki::Certificate;

const TOKEN_FORMAT: &str = "coinami-token-v1";
const TOKEN_KEYS: [&str; 13] = [
    "format",
    "job_id",
    "miner",
    "result_digest",
    "counter",
    "required",
    "cert_subject",
    "cert_name",
    "cert_not_before",
    "cert_not_after",
    "cert_root",
    "cert_signature",
    "signature",
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TokenError {
    #[error("prior token rejected: {0}")]
    InvalidPriorToken(&'static str),
    #[error("certificate subject is not the signing key")]
    CertificateMismatch,
    #[error("difficulty must be at least 1")]
    InvalidDifficulty,
}

/// Counter token signed by an authority.
///
/// The authority's certificate travels inside the token, so a block carries
/// everything needed to check it against the root key. The token is final
/// once `counter == required`; only final tokens mint blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignedToken {
    pub job_id: String,
    pub miner: PublicKey,
    pub result_digest: Digest256,
    pub counter: u32,
    pub required: u32,
    pub certificate: Certificate,
    pub signature: Signature,
}

impl SignedToken {
    pub fn authority(&self) -> &PublicKey {
        &self.certificate.subject
    }

    pub fn is_final(&self) -> bool {
        self.counter == self.required
    }

    pub fn to_document(&self) -> Document {
        let c = &self.certificate;
        Document::new()
            .with("format", TOKEN_FORMAT)
            .with("job_id", &self.job_id)
            .with("miner", self.miner.to_hex())
            .with("result_digest", self.result_digest.to_hex())
            .with("counter", self.counter.to_string())
            .with("required", self.required.to_string())
            .with("cert_subject", c.subject.to_hex())
            .with("cert_name", &c.name)
            .with("cert_not_before", c.not_before.to_string())
            .with("cert_not_after", c.not_after.to_string())
            .with("cert_root", c.root.to_hex())
            .with("cert_signature", c.signature.to_hex())
            .with("signature", self.signature.to_hex())
    }

    /// Every field except the token signature, rendered canonically.
    pub fn signing_preimage(&self) -> String {
        self.to_document().render_prefix(TOKEN_KEYS.len() - 1)
    }

    pub fn render(&self) -> String {
        self.to_document().render()
    }

    pub fn from_document(doc: &Document) -> Result<Self, DocumentError> {
        doc.expect_keys(&TOKEN_KEYS)?;
        if doc.require("format")? != TOKEN_FORMAT {
            return Err(DocumentError::BadValue("format".into()));
        }
        let token = Self {
            job_id: doc.require("job_id")?.to_string(),
            miner: doc.require_parsed("miner")?,
            result_digest: doc.require_parsed("result_digest")?,
            counter: doc.require_parsed("counter")?,
            required: doc.require_parsed("required")?,
            certificate: Certificate {
                subject: doc.require_parsed("cert_subject")?,
                name: doc.require("cert_name")?.to_string(),
                not_before: doc.require_parsed("cert_not_before")?,
                not_after: doc.require_parsed("cert_not_after")?,
                root: doc.require_parsed("cert_root")?,
                signature: doc.require_parsed("cert_signature")?,
            },
            signature: doc.require_parsed("signature")?,
        };
        if token.render() != doc.render() {
            return Err(DocumentError::BadValue("non-canonical value".into()));
        }
        Ok(token)
    }

    pub fn parse(text: &str) -> Result<Self, DocumentError> {
        Self::from_document(&Document::parse(text)?)
    }

    /// Whether the token signature verifies under the embedded subject key.
    pub fn signature_valid(&self) -> bool {
        self.counter >= 1
            && self.counter <= self.required
            && self.authority().verify(self.signing_preimage().as_bytes(), &self.signature)
    }
}

/// Issues the next token in a miner's counter chain.
///
/// Without a prior token the counter starts at 1. A prior token must be
/// validly signed by the same authority, belong to the same miner, carry the
/// same difficulty and not yet be final.
#[allow(clippy::too_many_arguments)]
pub fn issue_token(
    job_id: &str,
    miner: &PublicKey,
    result_digest: Digest256,
    authority_key: &Keypair,
    certificate: &Certificate,
    prior: Option<&SignedToken>,
    required: u32,
) -> Result<SignedToken, TokenError> {
    if required == 0 {
        return Err(TokenError::InvalidDifficulty);
    }
    if certificate.subject != authority_key.public() {
        return Err(TokenError::CertificateMismatch);
    }
    let counter = match prior {
        None => 1,
        Some(p) => {
            if !p.signature_valid() {
                return Err(TokenError::InvalidPriorToken("bad signature"));
            }
            if p.authority() != &authority_key.public() {
                return Err(TokenError::InvalidPriorToken("issued by another authority"));
            }
            if p.miner != *miner {
                return Err(TokenError::InvalidPriorToken("wrong miner"));
            }
            if p.is_final() {
                return Err(TokenError::InvalidPriorToken("already final"));
            }
            if p.required != required {
                return Err(TokenError::InvalidPriorToken("difficulty changed"));
            }
            p.counter + 1
        }
    };
    let mut token = SignedToken {
        job_id: job_id.to_string(),
        miner: *miner,
        result_digest,
        counter,
        required,
        certificate: certificate.clone(),
        signature: Signature([0; 64]),
    };
    token.signature = authority_key.sign(token.signing_preimage().as_bytes());
    Ok(token)
}

/// True iff the embedded certificate chains to `root` at time `now`, the
/// signature verifies, and the token is final.
pub fn verify_token(token: &SignedToken, root: &PublicKey, now: u64) -> bool {
    token.is_final() && token.certificate.verify(root, now) && token.signature_valid()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::sha256;
    use crate::pki::issue_certificate;

    struct Fixture {
        root: Keypair,
        auth: Keypair,
        cert: Certificate,
        miner: PublicKey,
    }

    fn fixture() -> Fixture {
        let root = Keypair::from_seed([1; 32]);
        let auth = Keypair::from_seed([2; 32]);
        let cert = issue_certificate(&root, &auth.public(), "auth", 0, 1000);
        Fixture { root, auth, cert, miner: Keypair::from_seed([3; 32]).public() }
    }

    fn issue(f: &Fixture, prior: Option<&SignedToken>, d: u32) -> Result<SignedToken, TokenError> {
        issue_token("JOB", &f.miner, sha256(b"r"), &f.auth, &f.cert, prior, d)
    }

    #[test]
    fn single_step_is_final() {
        let f = fixture();
        let t = issue(&f, None, 1).unwrap();
        assert_eq!((t.counter, t.required), (1, 1));
        assert!(verify_token(&t, &f.root.public(), 10));
        assert!(!verify_token(&t, &f.root.public(), 1001));
        assert_eq!(SignedToken::parse(&t.render()).unwrap(), t);
    }

    #[test]
    fn counter_chain() {
        let f = fixture();
        let t1 = issue(&f, None, 3).unwrap();
        let t2 = issue(&f, Some(&t1), 3).unwrap();
        assert_eq!((t2.counter, t2.is_final()), (2, false));
        assert!(!verify_token(&t2, &f.root.public(), 10));
        let t3 = issue(&f, Some(&t2), 3).unwrap();
        assert!(verify_token(&t3, &f.root.public(), 10));
        assert_eq!(issue(&f, Some(&t3), 3), Err(TokenError::InvalidPriorToken("already final")));
    }

    #[test]
    fn bad_priors() {
        let f = fixture();
        let t1 = issue(&f, None, 2).unwrap();
        let other = issue_token("JOB", &f.auth.public(), sha256(b"r"), &f.auth, &f.cert, Some(&t1), 2);
        assert_eq!(other, Err(TokenError::InvalidPriorToken("wrong miner")));
        let mut forged = t1.clone();
        forged.counter = 0;
        assert!(issue(&f, Some(&forged), 2).is_err());
        let mut forged = t1;
        forged.job_id = "X".into();
        assert_eq!(issue(&f, Some(&forged), 2), Err(TokenError::InvalidPriorToken("bad signature")));
    }

    #[test]
    fn uncertified_signer_fails() {
        let f = fixture();
        let rogue = Keypair::from_seed([9; 32]);
        let rogue_cert = issue_certificate(&rogue, &rogue.public(), "rogue", 0, 1000);
        let t = issue_token("JOB", &f.miner, sha256(b"r"), &rogue, &rogue_cert, None, 1).unwrap();
        assert!(!verify_token(&t, &f.root.public(), 10));
        assert_eq!(
            issue_token("JOB", &f.miner, sha256(b"r"), &rogue, &f.cert, None, 1),
            Err(TokenError::CertificateMismatch)
        );
    }

    #[test]
    fn every_byte_flip_fails() {
        let f = fixture();
        let text = issue(&f, None, 1).unwrap().render();
        let bytes = text.as_bytes();
        for i in 0..bytes.len() {
            let mut b = bytes.to_vec();
            b[i] ^= 0x01;
            let ok = std::str::from_utf8(&b)
                .ok()
                .and_then(|s| SignedToken::parse(s).ok())
                .is_some_and(|t| verify_token(&t, &f.root.public(), 10));
            assert!(!ok, "flip at byte {i} still verifies");
        }
    }
}
