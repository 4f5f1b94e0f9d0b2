//! Coin selection and payment construction.

use coinami_core::crypto::{Keypair, PublicKey};
use coinami_core::ledger::{OutPoint, Transaction, TxOutput};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WalletError {
    #[error("insufficient funds: need {needed}, have {available}")]
    InsufficientFunds { needed: u64, available: u64 },
    #[error("amount must be positive")]
    ZeroAmount,
}

/// Pays `amount` to `recipient` from `owner`'s coins.
///
/// Coins are taken smallest first until they cover the amount; any excess
/// returns to the owner as a change output. No fee is paid.
pub fn build_payment(
    owner: &Keypair,
    coins: &[(OutPoint, TxOutput)],
    recipient: &PublicKey,
    amount: u64,
) -> Result<Transaction, WalletError> {
    if amount == 0 {
        return Err(WalletError::ZeroAmount);
    }
    let mut mine: Vec<&(OutPoint, TxOutput)> = coins.iter().filter(|(_, o)| o.recipient == owner.public()).collect();
    mine.sort_by_key(|(op, o)| (o.amount, *op));
    let available: u64 = mine.iter().map(|(_, o)| o.amount).sum();
    let mut picked = Vec::new();
    let mut total = 0u64;
    for (op, out) in mine {
        if total >= amount {
            break;
        }
        picked.push(*op);
        total += out.amount;
    }
    if total < amount {
        return Err(WalletError::InsufficientFunds { needed: amount, available });
    }
    let mut outputs = vec![TxOutput { recipient: *recipient, amount }];
    if total > amount {
        outputs.push(TxOutput { recipient: owner.public(), amount: total - amount });
    }
    Ok(Transaction::spend(&picked, outputs, owner))
}
