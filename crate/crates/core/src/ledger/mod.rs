//! The currency: UTXO transactions, token-bearing blocks and fork choice.

mod block;
mod chain;
mod store;
mod tx;

pub use block::Block;
pub use chain::{ApplyOutcome, BlockError, ChainState};
pub use store::{BlockStore, StoreError};
pub use tx::{validate_transaction, OutPoint, Transaction, TxError, TxInput, TxOutput, UtxoSet};

/// Coins minted per block. There is no halving.
pub const BLOCK_REWARD: u64 = 50;
