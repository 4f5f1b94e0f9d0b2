//! Wire messages.
//!
//! Every message is one canonical key/value document, framed as
//! `<decimal length>\n<document>`. The first two keys are always
//! `version=v1` and `op=<OPERATION>`. Nested documents and binary payloads
//! travel base64-encoded.

use std::io::{self, BufRead, Read, Write};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use coinami_core::assignment::AssignmentManifest;
use coinami_core::canonical::{Document, DocumentError};
use coinami_core::crypto::{Digest256, PublicKey};
use coinami_core::ledger::{Block, OutPoint, Transaction, TxOutput};
use coinami_core::pki::Certificate;
use coinami_core::verifier::SignedToken;
use thiserror::Error;

pub const PROTOCOL_VERSION: &str = "v1";
pub const MAX_FRAME: usize = 512 << 20;

#[derive(Debug, Error)]
pub enum WireError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad frame: {0}")]
    Frame(String),
    #[error("bad message: {0}")]
    Message(String),
    #[error(transparent)]
    Document(#[from] DocumentError),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum RejectCode {
    NoSuchJob,
    LeaseExpired,
    NotLeaseHolder,
    AlreadyCompleted,
    InvalidPriorToken,
    MissingReads,
    DecoyMismatch,
    UnknownName,
    NotSorted,
    Malformed,
    Busy,
}

impl RejectCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectCode::NoSuchJob => "NO_SUCH_JOB",
            RejectCode::LeaseExpired => "LEASE_EXPIRED",
            RejectCode::NotLeaseHolder => "NOT_LEASE_HOLDER",
            RejectCode::AlreadyCompleted => "ALREADY_COMPLETED",
            RejectCode::InvalidPriorToken => "INVALID_PRIOR_TOKEN",
            RejectCode::MissingReads => "MISSING_READS",
            RejectCode::DecoyMismatch => "DECOY_MISMATCH",
            RejectCode::UnknownName => "UNKNOWN_NAME",
            RejectCode::NotSorted => "NOT_SORTED",
            RejectCode::Malformed => "MALFORMED",
            RejectCode::Busy => "BUSY",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        use RejectCode::*;
        [NoSuchJob, LeaseExpired, NotLeaseHolder, AlreadyCompleted, InvalidPriorToken, MissingReads, DecoyMismatch, UnknownName, NotSorted, Malformed, Busy]
            .into_iter()
            .find(|c| c.as_str() == s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Message {
    // Miner to authority.
    JobClaim { miner: PublicKey },
    AssignmentFetch { job_id: String, miner: PublicKey },
    ResultSubmit { job_id: String, miner: PublicKey, prior_token: Option<SignedToken>, result: Vec<u8> },
    ReferenceFetch { reference_id: String },
    CertFetch,
    // Authority to miner.
    JobOffer { job_id: String, deadline: u64, manifest: AssignmentManifest },
    NoJobs,
    Bundle { bytes: Vec<u8> },
    Token { token: SignedToken },
    Rejected { code: RejectCode, detail: String },
    Reference { fasta: Vec<u8> },
    Cert { certificate: Certificate },
    // Between nodes, and wallet queries.
    BlockAnnounce { block: Block },
    TxAnnounce { tx: Transaction },
    ChainRequest { from: Digest256 },
    ChainResponse { blocks: Vec<Block> },
    UtxoQuery { owner: PublicKey },
    Utxos { entries: Vec<(OutPoint, TxOutput)> },
    Ack,
}

fn b64(data: &[u8]) -> String {
    STANDARD.encode(data)
}

fn unb64(doc: &Document, key: &str) -> Result<Vec<u8>, WireError> {
    STANDARD
        .decode(doc.require(key)?)
        .map_err(|_| WireError::Message(format!("{key} is not base64")))
}

fn nested(doc: &Document, key: &str) -> Result<String, WireError> {
    String::from_utf8(unb64(doc, key)?).map_err(|_| WireError::Message(format!("{key} is not UTF-8")))
}

fn bad(m: impl Into<String>) -> WireError {
    WireError::Message(m.into())
}

impl Message {
    pub fn op(&self) -> &'static str {
        match self {
            Message::JobClaim { .. } => "JOB_CLAIM",
            Message::AssignmentFetch { .. } => "ASSIGNMENT_FETCH",
            Message::ResultSubmit { .. } => "RESULT_SUBMIT",
            Message::ReferenceFetch { .. } => "REFERENCE_FETCH",
            Message::CertFetch => "CERT_FETCH",
            Message::JobOffer { .. } => "JOB_OFFER",
            Message::NoJobs => "NO_JOBS",
            Message::Bundle { .. } => "BUNDLE",
            Message::Token { .. } => "TOKEN",
            Message::Rejected { .. } => "REJECTED",
            Message::Reference { .. } => "REFERENCE",
            Message::Cert { .. } => "CERT",
            Message::BlockAnnounce { .. } => "BLOCK_ANNOUNCE",
            Message::TxAnnounce { .. } => "TX_ANNOUNCE",
            Message::ChainRequest { .. } => "CHAIN_REQUEST",
            Message::ChainResponse { .. } => "CHAIN_RESPONSE",
            Message::UtxoQuery { .. } => "UTXO_QUERY",
            Message::Utxos { .. } => "UTXOS",
            Message::Ack => "ACK",
        }
    }

    pub fn to_document(&self) -> Document {
        let mut d = Document::new().with("version", PROTOCOL_VERSION).with("op", self.op());
        match self {
            Message::JobClaim { miner } => {
                d.push("miner", miner.to_hex());
            }
            Message::AssignmentFetch { job_id, miner } => {
                d.push("job_id", job_id).push("miner", miner.to_hex());
            }
            Message::ResultSubmit { job_id, miner, prior_token, result } => {
                d.push("job_id", job_id).push("miner", miner.to_hex());
                d.push("prior_token", prior_token.as_ref().map_or(String::new(), |t| b64(t.render().as_bytes())));
                d.push("result", b64(result));
            }
            Message::ReferenceFetch { reference_id } => {
                d.push("reference_id", reference_id);
            }
            Message::JobOffer { job_id, deadline, manifest } => {
                d.push("job_id", job_id).push("deadline", deadline.to_string());
                d.push("manifest", b64(manifest.render().as_bytes()));
            }
            Message::Bundle { bytes } => {
                d.push("bundle", b64(bytes));
            }
            Message::Token { token } => {
                d.push("token", b64(token.render().as_bytes()));
            }
            Message::Rejected { code, detail } => {
                d.push("code", code.as_str()).push("detail", detail.replace('\n', " "));
            }
            Message::Reference { fasta } => {
                d.push("fasta", b64(fasta));
            }
            Message::Cert { certificate } => {
                d.push("certificate", b64(certificate.render().as_bytes()));
            }
            Message::BlockAnnounce { block } => {
                d.push("block", b64(&block.encode()));
            }
            Message::TxAnnounce { tx } => {
                d.push("tx", b64(&tx.encode()));
            }
            Message::ChainRequest { from } => {
                d.push("from", from.to_hex());
            }
            Message::ChainResponse { blocks } => {
                d.push("count", blocks.len().to_string());
                for (i, b) in blocks.iter().enumerate() {
                    d.push(&format!("block_{i}"), b64(&b.encode()));
                }
            }
            Message::UtxoQuery { owner } => {
                d.push("owner", owner.to_hex());
            }
            Message::Utxos { entries } => {
                d.push("count", entries.len().to_string());
                for (i, (op, out)) in entries.iter().enumerate() {
                    d.push(&format!("utxo_{i}"), format!("{}:{}:{}:{}", op.tx, op.index, out.recipient, out.amount));
                }
            }
            Message::CertFetch | Message::NoJobs | Message::Ack => {}
        }
        d
    }

    pub fn from_document(d: &Document) -> Result<Self, WireError> {
        if d.require("version")? != PROTOCOL_VERSION {
            return Err(bad("unsupported protocol version"));
        }
        let op = d.require("op")?;
        let keys: Vec<&str> = d.keys().collect();
        let msg = match op {
            "JOB_CLAIM" => Message::JobClaim { miner: d.require_parsed("miner")? },
            "ASSIGNMENT_FETCH" => Message::AssignmentFetch {
                job_id: d.require("job_id")?.to_string(),
                miner: d.require_parsed("miner")?,
            },
            "RESULT_SUBMIT" => Message::ResultSubmit {
                job_id: d.require("job_id")?.to_string(),
                miner: d.require_parsed("miner")?,
                prior_token: match d.require("prior_token")? {
                    "" => None,
                    _ => Some(SignedToken::parse(&nested(d, "prior_token")?)?),
                },
                result: unb64(d, "result")?,
            },
            "REFERENCE_FETCH" => Message::ReferenceFetch { reference_id: d.require("reference_id")?.to_string() },
            "CERT_FETCH" => Message::CertFetch,
            "JOB_OFFER" => Message::JobOffer {
                job_id: d.require("job_id")?.to_string(),
                deadline: d.require_parsed("deadline")?,
                manifest: AssignmentManifest::parse(&nested(d, "manifest")?)?,
            },
            "NO_JOBS" => Message::NoJobs,
            "BUNDLE" => Message::Bundle { bytes: unb64(d, "bundle")? },
            "TOKEN" => Message::Token { token: SignedToken::parse(&nested(d, "token")?)? },
            "REJECTED" => Message::Rejected {
                code: RejectCode::parse(d.require("code")?).ok_or_else(|| bad("unknown reject code"))?,
                detail: d.require("detail")?.to_string(),
            },
            "REFERENCE" => Message::Reference { fasta: unb64(d, "fasta")? },
            "CERT" => Message::Cert { certificate: Certificate::parse(&nested(d, "certificate")?)? },
            "BLOCK_ANNOUNCE" => Message::BlockAnnounce {
                block: Block::decode(&unb64(d, "block")?).map_err(|e| bad(e.to_string()))?,
            },
            "TX_ANNOUNCE" => Message::TxAnnounce {
                tx: Transaction::decode(&unb64(d, "tx")?).map_err(|e| bad(e.to_string()))?,
            },
            "CHAIN_REQUEST" => Message::ChainRequest { from: d.require_parsed("from")? },
            "CHAIN_RESPONSE" => {
                let n: usize = d.require_parsed("count")?;
                if keys.len() != n + 3 {
                    return Err(bad("block count mismatch"));
                }
                let blocks = (0..n)
                    .map(|i| Block::decode(&unb64(d, &format!("block_{i}"))?).map_err(|e| bad(e.to_string())))
                    .collect::<Result<_, _>>()?;
                Message::ChainResponse { blocks }
            }
            "UTXO_QUERY" => Message::UtxoQuery { owner: d.require_parsed("owner")? },
            "UTXOS" => {
                let n: usize = d.require_parsed("count")?;
                if keys.len() != n + 3 {
                    return Err(bad("utxo count mismatch"));
                }
                let entries = (0..n)
                    .map(|i| parse_utxo(d.require(&format!("utxo_{i}"))?))
                    .collect::<Result<_, _>>()?;
                Message::Utxos { entries }
            }
            "ACK" => Message::Ack,
            other => return Err(bad(format!("unknown op {other:?}"))),
        };
        if msg.to_document().keys().ne(d.keys()) {
            return Err(bad(format!("unexpected fields for {op}")));
        }
        Ok(msg)
    }

    pub fn encode(&self) -> Vec<u8> {
        let body = self.to_document().render();
        let mut out = format!("{}\n", body.len()).into_bytes();
        out.extend_from_slice(body.as_bytes());
        out
    }

    pub fn decode(body: &[u8]) -> Result<Self, WireError> {
        let text = std::str::from_utf8(body).map_err(|_| bad("message is not UTF-8"))?;
        Self::from_document(&Document::parse(text)?)
    }
}

fn parse_utxo(s: &str) -> Result<(OutPoint, TxOutput), WireError> {
    let parts: Vec<&str> = s.split(':').collect();
    let [tx, index, recipient, amount] = parts.as_slice() else {
        return Err(bad("bad utxo entry"));
    };
    let err = |_| bad("bad utxo entry");
    Ok((
        OutPoint { tx: tx.parse().map_err(err)?, index: index.parse().map_err(|_| bad("bad utxo index"))? },
        TxOutput { recipient: recipient.parse().map_err(err)?, amount: amount.parse().map_err(|_| bad("bad amount"))? },
    ))
}

pub fn write_message(w: &mut impl Write, msg: &Message) -> Result<(), WireError> {
    w.write_all(&msg.encode())?;
    w.flush()?;
    Ok(())
}

/// Reads one frame. Returns `None` on a clean end of stream.
pub fn read_message<R: BufRead>(r: &mut R) -> Result<Option<Message>, WireError> {
    let mut header = Vec::new();
    let n = <&mut R as Read>::take(r, 21).read_until(b'\n', &mut header)?;
    if n == 0 {
        return Ok(None);
    }
    let len_text = header
        .strip_suffix(b"\n")
        .and_then(|h| std::str::from_utf8(h).ok())
        .ok_or_else(|| WireError::Frame("missing length line".into()))?;
    let len: usize = len_text.parse().map_err(|_| WireError::Frame(format!("bad length {len_text:?}")))?;
    if len > MAX_FRAME {
        return Err(WireError::Frame(format!("frame of {len} bytes exceeds limit")));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    Message::decode(&body).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;
    use coinami_core::crypto::{sha256, Keypair};
    use std::io::Cursor;

    #[test]
    fn frames_round_trip() {
        let miner = Keypair::from_seed([1; 32]).public();
        let messages = vec![
            Message::JobClaim { miner },
            Message::ResultSubmit { job_id: "J1".into(), miner, prior_token: None, result: b"@SQ\tchr1\t5\n".to_vec() },
            Message::Rejected { code: RejectCode::DecoyMismatch, detail: "x".into() },
            Message::ChainRequest { from: sha256(b"a") },
            Message::ChainResponse { blocks: vec![Block::genesis()] },
            Message::Utxos {
                entries: vec![(OutPoint { tx: sha256(b"t"), index: 3 }, TxOutput { recipient: miner, amount: 7 })],
            },
            Message::NoJobs,
        ];
        let mut buf = Vec::new();
        for m in &messages {
            write_message(&mut buf, m).unwrap();
        }
        let mut cursor = Cursor::new(buf);
        for m in &messages {
            assert_eq!(read_message(&mut cursor).unwrap().as_ref(), Some(m));
        }
        assert!(read_message(&mut cursor).unwrap().is_none());
    }

    #[test]
    fn rejects_bad_frames() {
        assert!(read_message(&mut Cursor::new(b"abc\n".to_vec())).is_err());
        assert!(read_message(&mut Cursor::new(b"99999999999\n".to_vec())).is_err());
        assert!(read_message(&mut Cursor::new(b"5\nver".to_vec())).is_err());
        let extra = b"version=v1\nop=ACK\nx=1\n";
        assert!(Message::decode(extra).is_err());
        let old = b"version=v0\nop=ACK\n";
        assert!(Message::decode(old).is_err());
    }
}
