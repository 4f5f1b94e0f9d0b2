//! Assignment manifest and the bundle shipped to miners.

use super::AssignmentError;
use crate::canonical::{Document, DocumentError};
use crate::crypto::{sha256, Digest256};
use crate::genomics::{parse_fastq, FastqRecord};
use crate::mapper::MappingParams;

const MANIFEST_FORMAT: &str = "coinami-assignment-v1";
const BUNDLE_MAGIC: &str = "COINAMI-BUNDLE v1\n";
const ENTRY_NAMES: [&str; 3] = ["manifest", "mate1.fastq", "mate2.fastq"];

const MANIFEST_KEYS: [&str; 13] = [
    "format",
    "job_id",
    "reference_id",
    "mapper_k",
    "mapper_stride",
    "mapper_max_edits",
    "mapper_band",
    "read_length",
    "read_pair_count",
    "decoy_count",
    "decoy_fraction",
    "deadline_secs",
    "payload_digest",
];

#[derive(Clone, Debug, PartialEq)]
pub struct AssignmentManifest {
    pub job_id: String,
    pub reference_id: String,
    pub params: MappingParams,
    pub read_length: usize,
    /// All pairs in the payload, decoys included.
    pub read_pair_count: usize,
    pub decoy_count: usize,
    pub decoy_fraction: f64,
    pub deadline_secs: u64,
    /// SHA-256 of the mate 1 FASTQ bytes followed by the mate 2 bytes.
    pub payload_digest: Digest256,
}

pub fn payload_digest(mate1: &[u8], mate2: &[u8]) -> Digest256 {
    sha256(&[mate1, mate2].concat())
}

impl AssignmentManifest {
    pub fn to_document(&self) -> Document {
        Document::new()
            .with("format", MANIFEST_FORMAT)
            .with("job_id", &self.job_id)
            .with("reference_id", &self.reference_id)
            .with("mapper_k", self.params.k.to_string())
            .with("mapper_stride", self.params.stride.to_string())
            .with("mapper_max_edits", self.params.max_edits.to_string())
            .with("mapper_band", self.params.band.to_string())
            .with("read_length", self.read_length.to_string())
            .with("read_pair_count", self.read_pair_count.to_string())
            .with("decoy_count", self.decoy_count.to_string())
            .with("decoy_fraction", self.decoy_fraction.to_string())
            .with("deadline_secs", self.deadline_secs.to_string())
            .with("payload_digest", self.payload_digest.to_hex())
    }

    pub fn render(&self) -> String {
        self.to_document().render()
    }

    pub fn from_document(doc: &Document) -> Result<Self, DocumentError> {
        doc.expect_keys(&MANIFEST_KEYS)?;
        if doc.require("format")? != MANIFEST_FORMAT {
            return Err(DocumentError::BadValue("format".into()));
        }
        let manifest = Self {
            job_id: doc.require("job_id")?.to_string(),
            reference_id: doc.require("reference_id")?.to_string(),
            params: MappingParams {
                k: doc.require_parsed("mapper_k")?,
                stride: doc.require_parsed("mapper_stride")?,
                max_edits: doc.require_parsed("mapper_max_edits")?,
                band: doc.require_parsed("mapper_band")?,
            },
            read_length: doc.require_parsed("read_length")?,
            read_pair_count: doc.require_parsed("read_pair_count")?,
            decoy_count: doc.require_parsed("decoy_count")?,
            decoy_fraction: doc.require_parsed("decoy_fraction")?,
            deadline_secs: doc.require_parsed("deadline_secs")?,
            payload_digest: doc.require_parsed("payload_digest")?,
        };
        if !(manifest.decoy_fraction > 0.0 && manifest.decoy_fraction < 1.0) {
            return Err(DocumentError::BadValue("decoy_fraction".into()));
        }
        if manifest.decoy_count > manifest.read_pair_count {
            return Err(DocumentError::BadValue("decoy_count".into()));
        }
        if manifest.render() != doc.render() {
            return Err(DocumentError::BadValue("non-canonical value".into()));
        }
        Ok(manifest)
    }

    pub fn parse(text: &str) -> Result<Self, DocumentError> {
        Self::from_document(&Document::parse(text)?)
    }
}

/// Manifest plus the two mate files.
#[derive(Clone, Debug, PartialEq)]
pub struct AssignmentBundle {
    pub manifest: AssignmentManifest,
    pub mate1: Vec<u8>,
    pub mate2: Vec<u8>,
}

impl AssignmentBundle {
    pub fn verify_digest(&self) -> Result<(), AssignmentError> {
        if payload_digest(&self.mate1, &self.mate2) != self.manifest.payload_digest {
            return Err(AssignmentError::DigestMismatch);
        }
        Ok(())
    }

    pub fn reads(&self) -> Result<(Vec<FastqRecord>, Vec<FastqRecord>), AssignmentError> {
        Ok((parse_fastq(&self.mate1)?, parse_fastq(&self.mate2)?))
    }

    /// Archive rendering: a magic line, then per entry `<name> <len>\n`,
    /// the bytes and a newline.
    pub fn to_bytes(&self) -> Vec<u8> {
        let manifest = self.manifest.render().into_bytes();
        let mut out = BUNDLE_MAGIC.as_bytes().to_vec();
        for (name, data) in ENTRY_NAMES.iter().zip([&manifest, &self.mate1, &self.mate2]) {
            out.extend_from_slice(format!("{name} {}\n", data.len()).as_bytes());
            out.extend_from_slice(data);
            out.push(b'\n');
        }
        out
    }

    /// Parses an archive and checks the payload digest.
    pub fn from_bytes(data: &[u8]) -> Result<Self, AssignmentError> {
        let bad = |m: &str| AssignmentError::MalformedBundle(m.to_string());
        let mut rest = data
            .strip_prefix(BUNDLE_MAGIC.as_bytes())
            .ok_or_else(|| bad("missing magic"))?;
        let mut parts = Vec::with_capacity(3);
        for name in ENTRY_NAMES {
            let nl = rest.iter().position(|&b| b == b'\n').ok_or_else(|| bad("truncated"))?;
            let header = std::str::from_utf8(&rest[..nl]).map_err(|_| bad("header"))?;
            let len_text = header
                .strip_prefix(name)
                .and_then(|h| h.strip_prefix(' '))
                .ok_or_else(|| bad("entry name"))?;
            let len: usize = len_text.parse().map_err(|_| bad("entry length"))?;
            if len.to_string() != len_text {
                return Err(bad("entry length"));
            }
            let body = &rest[nl + 1..];
            if body.len() < len + 1 || body[len] != b'\n' {
                return Err(bad("truncated"));
            }
            parts.push(body[..len].to_vec());
            rest = &body[len + 1..];
        }
        if !rest.is_empty() {
            return Err(bad("trailing bytes"));
        }
        let mate2 = parts.pop().unwrap();
        let mate1 = parts.pop().unwrap();
        let manifest_text = String::from_utf8(parts.pop().unwrap()).map_err(|_| bad("manifest"))?;
        let bundle = Self { manifest: AssignmentManifest::parse(&manifest_text)?, mate1, mate2 };
        bundle.verify_digest()?;
        Ok(bundle)
    }
}
