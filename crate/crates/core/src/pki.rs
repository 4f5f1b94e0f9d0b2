//! Root-issued authority certificates.

use crate::canonical::{Document, DocumentError};
use crate::crypto::{Keypair, PublicKey, Signature};

const CERT_FORMAT: &str = "coinami-cert-v1";
const CERT_KEYS: [&str; 7] = ["format", "subject", "name", "not_before", "not_after", "root", "signature"];

/// Binds an authority key to a name for a validity window (Unix seconds,
/// inclusive at both ends).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub subject: PublicKey,
    pub name: String,
    pub not_before: u64,
    pub not_after: u64,
    pub root: PublicKey,
    pub signature: Signature,
}

fn unsigned_document(subject: &PublicKey, name: &str, not_before: u64, not_after: u64, root: &PublicKey) -> Document {
    Document::new()
        .with("format", CERT_FORMAT)
        .with("subject", subject.to_hex())
        .with("name", name)
        .with("not_before", not_before.to_string())
        .with("not_after", not_after.to_string())
        .with("root", root.to_hex())
}

/// Signs a certificate for `subject`. `name` must be a single line.
pub fn issue_certificate(root: &Keypair, subject: &PublicKey, name: &str, not_before: u64, not_after: u64) -> Certificate {
    let preimage = unsigned_document(subject, name, not_before, not_after, &root.public()).render();
    Certificate {
        subject: *subject,
        name: name.to_string(),
        not_before,
        not_after,
        root: root.public(),
        signature: root.sign(preimage.as_bytes()),
    }
}

impl Certificate {
    pub fn signing_preimage(&self) -> String {
        unsigned_document(&self.subject, &self.name, self.not_before, self.not_after, &self.root).render()
    }

    /// True iff issued by `root`, correctly signed, and valid at `now`.
    pub fn verify(&self, root: &PublicKey, now: u64) -> bool {
        self.root == *root
            && self.not_before <= now
            && now <= self.not_after
            && root.verify(self.signing_preimage().as_bytes(), &self.signature)
    }

    pub fn to_document(&self) -> Document {
        unsigned_document(&self.subject, &self.name, self.not_before, self.not_after, &self.root)
            .with("signature", self.signature.to_hex())
    }

    pub fn render(&self) -> String {
        self.to_document().render()
    }

    pub fn from_document(doc: &Document) -> Result<Self, DocumentError> {
        doc.expect_keys(&CERT_KEYS)?;
        if doc.require("format")? != CERT_FORMAT {
            return Err(DocumentError::BadValue("format".into()));
        }
        let cert = Self {
            subject: doc.require_parsed("subject")?,
            name: doc.require("name")?.to_string(),
            not_before: doc.require_parsed("not_before")?,
            not_after: doc.require_parsed("not_after")?,
            root: doc.require_parsed("root")?,
            signature: doc.require_parsed("signature")?,
        };
        if cert.render() != doc.render() {
            return Err(DocumentError::BadValue("non-canonical value".into()));
        }
        Ok(cert)
    }

    pub fn parse(text: &str) -> Result<Self, DocumentError> {
        Self::from_document(&Document::parse(text)?)
    }
}
