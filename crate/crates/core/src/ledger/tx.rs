//! UTXO transactions.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::BLOCK_REWARD;
use crate::canonical::{ByteReader, ByteWriter, DecodeError};
use crate::crypto::{sha256, Digest256, Keypair, PublicKey, Signature};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TxError {
    #[error("input {0:?} is not an unspent output")]
    UnknownInput(OutPoint),
    #[error("signature on input {0} does not verify")]
    BadSignature(usize),
    #[error("outputs exceed inputs")]
    Overspend,
    #[error("outpoint {0:?} spent twice in one transaction")]
    DuplicateInput(OutPoint),
    #[error("transaction has no inputs")]
    NoInputs,
    #[error("transaction has no outputs or a zero-amount output")]
    BadOutputs,
    #[error("coinbase outside the first block position")]
    UnexpectedCoinbase,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OutPoint {
    pub tx: Digest256,
    pub index: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TxInput {
    pub outpoint: OutPoint,
    pub signature: Signature,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TxOutput {
    pub recipient: PublicKey,
    pub amount: u64,
}

/// A transfer, or a coinbase when `coinbase_height` is set.
///
/// The coinbase height keeps otherwise identical reward transactions from
/// sharing a hash.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transaction {
    pub inputs: Vec<TxInput>,
    pub outputs: Vec<TxOutput>,
    pub coinbase_height: Option<u64>,
}

pub type UtxoSet = BTreeMap<OutPoint, TxOutput>;

const BLANK_SIGNATURE: Signature = Signature([0; 64]);

impl Transaction {
    pub fn coinbase(recipient: PublicKey, height: u64) -> Self {
        Self {
            inputs: Vec::new(),
            outputs: vec![TxOutput { recipient, amount: BLOCK_REWARD }],
            coinbase_height: Some(height),
        }
    }

    /// Builds a transfer spending `inputs`, every one owned by `owner`.
    pub fn spend(inputs: &[OutPoint], outputs: Vec<TxOutput>, owner: &Keypair) -> Self {
        let mut tx = Self {
            inputs: inputs.iter().map(|&outpoint| TxInput { outpoint, signature: BLANK_SIGNATURE }).collect(),
            outputs,
            coinbase_height: None,
        };
        let sig = owner.sign(&tx.signing_preimage());
        for input in &mut tx.inputs {
            input.signature = sig;
        }
        tx
    }

    pub fn is_coinbase(&self) -> bool {
        self.coinbase_height.is_some()
    }

    fn encode_into(&self, w: &mut ByteWriter, with_signatures: bool) {
        match self.coinbase_height {
            Some(h) => w.u8(1).u64(h),
            None => w.u8(0),
        };
        w.u32(self.inputs.len() as u32);
        for input in &self.inputs {
            let sig = if with_signatures { input.signature } else { BLANK_SIGNATURE };
            w.bytes(input.outpoint.tx.as_bytes()).u32(input.outpoint.index).bytes(&sig.0);
        }
        w.u32(self.outputs.len() as u32);
        for out in &self.outputs {
            w.bytes(&out.recipient.to_bytes()).u64(out.amount);
        }
    }

    /// The transaction with every signature blanked; what each input signs.
    pub fn signing_preimage(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        self.encode_into(&mut w, false);
        w.finish()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        self.encode_into(&mut w, true);
        w.finish()
    }

    pub fn hash(&self) -> Digest256 {
        sha256(&self.encode())
    }

    pub fn decode(data: &[u8]) -> Result<Self, DecodeError> {
        let mut r = ByteReader::new(data);
        let tx = Self::decode_from(&mut r)?;
        r.finish()?;
        Ok(tx)
    }

    pub(crate) fn decode_from(r: &mut ByteReader<'_>) -> Result<Self, DecodeError> {
        let coinbase_height = match r.u8()? {
            0 => None,
            1 => Some(r.u64()?),
            _ => return Err(DecodeError::Invalid("transaction kind")),
        };
        let n_in = r.u32()?;
        let mut inputs = Vec::new();
        for _ in 0..n_in {
            let tx = Digest256::from_slice(r.bytes()?).ok_or(DecodeError::Invalid("outpoint hash"))?;
            let index = r.u32()?;
            let sig: [u8; 64] = r.bytes()?.try_into().map_err(|_| DecodeError::Invalid("signature"))?;
            inputs.push(TxInput { outpoint: OutPoint { tx, index }, signature: Signature(sig) });
        }
        let n_out = r.u32()?;
        let mut outputs = Vec::new();
        for _ in 0..n_out {
            let key: [u8; 32] = r.bytes()?.try_into().map_err(|_| DecodeError::Invalid("public key"))?;
            let recipient = PublicKey::from_bytes(&key).map_err(|_| DecodeError::Invalid("public key"))?;
            outputs.push(TxOutput { recipient, amount: r.u64()? });
        }
        Ok(Self { inputs, outputs, coinbase_height })
    }

    pub fn output_total(&self) -> Option<u64> {
        self.outputs.iter().try_fold(0u64, |acc, o| acc.checked_add(o.amount))
    }
}

/// Checks a non-coinbase transaction against `utxo` and returns its fee.
pub fn validate_transaction(tx: &Transaction, utxo: &UtxoSet) -> Result<u64, TxError> {
    if tx.is_coinbase() {
        return Err(TxError::UnexpectedCoinbase);
    }
    if tx.inputs.is_empty() {
        return Err(TxError::NoInputs);
    }
    if tx.outputs.is_empty() || tx.outputs.iter().any(|o| o.amount == 0) {
        return Err(TxError::BadOutputs);
    }
    let preimage = tx.signing_preimage();
    let mut seen = BTreeSet::new();
    let mut total_in: u64 = 0;
    for (i, input) in tx.inputs.iter().enumerate() {
        if !seen.insert(input.outpoint) {
            return Err(TxError::DuplicateInput(input.outpoint));
        }
        let spent = utxo.get(&input.outpoint).ok_or(TxError::UnknownInput(input.outpoint))?;
        if !spent.recipient.verify(&preimage, &input.signature) {
            return Err(TxError::BadSignature(i));
        }
        total_in = total_in.checked_add(spent.amount).ok_or(TxError::Overspend)?;
    }
    let total_out = tx.output_total().ok_or(TxError::Overspend)?;
    total_in.checked_sub(total_out).ok_or(TxError::Overspend)
}

/// Spends the inputs and adds the outputs; returns the spent entries.
pub(crate) fn apply_transaction(tx: &Transaction, utxo: &mut UtxoSet) -> Vec<(OutPoint, TxOutput)> {
    let spent = tx
        .inputs
        .iter()
        .map(|i| (i.outpoint, utxo.remove(&i.outpoint).expect("validated input")))
        .collect();
    let hash = tx.hash();
    for (index, out) in tx.outputs.iter().enumerate() {
        utxo.insert(OutPoint { tx: hash, index: index as u32 }, *out);
    }
    spent
}
