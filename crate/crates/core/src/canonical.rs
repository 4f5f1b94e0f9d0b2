//! Canonical encodings used as signing and hashing preimages.
//!
//! Two flavours exist. [`Document`] is an ordered `key=value` text document
//! used for manifests, certificates, tokens and wire messages. [`ByteWriter`]
//! and [`ByteReader`] implement the length-prefixed binary rendering used for
//! transactions and blocks.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DocumentError {
    #[error("malformed document line {0}")]
    MalformedLine(usize),
    #[error("invalid key {0:?}")]
    InvalidKey(String),
    #[error("value for {0:?} contains a newline")]
    InvalidValue(String),
    #[error("missing key {0:?}")]
    MissingKey(String),
    #[error("bad value for {0:?}")]
    BadValue(String),
    #[error("unexpected key layout: expected {expected:?}, found {found:?}")]
    KeyOrder { expected: Vec<String>, found: Vec<String> },
}

/// Ordered list of `key=value` lines.
///
/// Keys are `[a-z0-9_]+`; values are arbitrary text without newlines. The
/// rendering is the exact byte sequence that gets signed or hashed, so key
/// order is significant.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Document {
    entries: Vec<(String, String)>,
}

fn valid_key(key: &str) -> bool {
    !key.is_empty()
        && key
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

impl Document {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an entry. Panics on an invalid key or a value containing a
    /// newline; both are programming errors for the fixed schemas built here.
    pub fn push(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        let value = value.into();
        assert!(valid_key(key), "invalid document key {key:?}");
        assert!(!value.contains('\n'), "newline in document value for {key:?}");
        self.entries.push((key.to_string(), value));
        self
    }

    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.push(key, value);
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, DocumentError> {
        self.get(key)
            .ok_or_else(|| DocumentError::MissingKey(key.to_string()))
    }

    pub fn require_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T, DocumentError> {
        self.require(key)?
            .parse()
            .map_err(|_| DocumentError::BadValue(key.to_string()))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// Fails unless the document holds exactly `expected`, in that order.
    pub fn expect_keys(&self, expected: &[&str]) -> Result<(), DocumentError> {
        let found: Vec<&str> = self.keys().collect();
        if found == expected {
            Ok(())
        } else {
            Err(DocumentError::KeyOrder {
                expected: expected.iter().map(|s| s.to_string()).collect(),
                found: found.iter().map(|s| s.to_string()).collect(),
            })
        }
    }

    /// Rendering restricted to the first `n` entries.
    pub fn render_prefix(&self, n: usize) -> String {
        let mut out = String::new();
        for (k, v) in self.entries.iter().take(n) {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn render(&self) -> String {
        self.render_prefix(self.entries.len())
    }

    pub fn parse(text: &str) -> Result<Self, DocumentError> {
        let mut entries = Vec::new();
        if text.is_empty() {
            return Ok(Self { entries });
        }
        let body = text
            .strip_suffix('\n')
            .ok_or(DocumentError::MalformedLine(text.lines().count()))?;
        for (i, line) in body.split('\n').enumerate() {
            let (k, v) = line
                .split_once('=')
                .ok_or(DocumentError::MalformedLine(i + 1))?;
            if !valid_key(k) {
                return Err(DocumentError::InvalidKey(k.to_string()));
            }
            entries.push((k.to_string(), v.to_string()));
        }
        Ok(Self { entries })
    }
}

impl fmt::Display for Document {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("unexpected end of input")]
    Truncated,
    #[error("trailing bytes after record")]
    Trailing,
    #[error("invalid field: {0}")]
    Invalid(&'static str),
}

/// Length-prefixed binary writer. Integers are big-endian.
#[derive(Default)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, data: &[u8]) -> &mut Self {
        self.u32(u32::try_from(data.len()).expect("field longer than 4 GiB"));
        self.buf.extend_from_slice(data);
        self
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct ByteReader<'a> {
    data: &'a [u8],
}

impl<'a> ByteReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.data.len() < n {
            return Err(DecodeError::Truncated);
        }
        let (head, tail) = self.data.split_at(n);
        self.data = tail;
        Ok(head)
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], DecodeError> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn finish(self) -> Result<(), DecodeError> {
        if self.data.is_empty() {
            Ok(())
        } else {
            Err(DecodeError::Trailing)
        }
    }
}
