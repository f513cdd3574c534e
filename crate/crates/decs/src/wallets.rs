//! Sender wallets for outgoing trades.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::decoder::SwapIntent;
use crate::primitives::{Address, U256};

/// Default pool rotation interval: one hour.
pub const DEFAULT_ROTATION_SECS: u64 = 3_600;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wallet {
    pub address: Address,
    pub native_balance: U256,
    pub token_balances: BTreeMap<Address, U256>,
    /// (token, spender) pairs with a standing allowance. The spender is a
    /// router identifier, matched against the trade target.
    pub approvals: BTreeSet<(Address, String)>,
}

/// Wallets eligible for sending, frozen at `refreshed_at` (unix seconds).
/// Kept sorted by address so selection is deterministic.
#[derive(Debug, Clone)]
pub struct WalletPool {
    pub wallets: Vec<Wallet>,
    pub refreshed_at: u64,
}

#[derive(Debug, Error)]
pub enum WalletError {
    #[error("cannot read wallet snapshot: {0}")]
    Io(#[from] std::io::Error),
    #[error("wallet snapshot is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("wallet source returned an empty batch")]
    EmptyBatch,
    #[error("no wallet can fund {amount} of {token} plus gas")]
    NoEligibleWallet { token: Address, amount: U256 },
}

/// Where wallets come from. The snapshot file covers replay; live setups plug
/// in their own indexer client behind this trait.
pub trait WalletSource {
    fn fetch(&self) -> Result<Vec<Wallet>, WalletError>;
}

#[derive(Deserialize)]
struct SnapshotRow {
    address: Address,
    native_balance: U256,
    #[serde(default)]
    token_balances: BTreeMap<Address, U256>,
    #[serde(default)]
    approvals: Vec<(Address, String)>,
}

/// JSON snapshot on disk.
pub struct SnapshotSource {
    path: PathBuf,
}

impl SnapshotSource {
    pub fn new(path: &Path) -> SnapshotSource {
        SnapshotSource { path: path.to_path_buf() }
    }
}

impl WalletSource for SnapshotSource {
    fn fetch(&self) -> Result<Vec<Wallet>, WalletError> {
        let rows: Vec<SnapshotRow> = serde_json::from_str(&fs::read_to_string(&self.path)?)?;
        Ok(rows
            .into_iter()
            .map(|r| Wallet {
                address: r.address,
                native_balance: r.native_balance,
                token_balances: r.token_balances,
                approvals: r.approvals.into_iter().collect(),
            })
            .collect())
    }
}

/// Fixed in-memory batch; handy for tests and embedded setups.
pub struct StaticSource(pub Vec<Wallet>);

impl WalletSource for StaticSource {
    fn fetch(&self) -> Result<Vec<Wallet>, WalletError> {
        Ok(self.0.clone())
    }
}

/// Holds the current pool and refreshes it at most once per interval.
pub struct WalletRotator {
    interval_secs: u64,
    current: Option<Arc<WalletPool>>,
}

impl WalletRotator {
    pub fn new(interval_secs: u64) -> WalletRotator {
        WalletRotator { interval_secs, current: None }
    }

    /// Returns the active pool, refreshing from `source` only if the interval
    /// has elapsed. Within the interval the exact same pool object comes back.
    /// A failed or empty fetch leaves the previous pool untouched.
    pub fn refresh(
        &mut self,
        source: &dyn WalletSource,
        now: u64,
    ) -> Result<Arc<WalletPool>, WalletError> {
        if let Some(current) = &self.current {
            if now.saturating_sub(current.refreshed_at) < self.interval_secs {
                return Ok(Arc::clone(current));
            }
        }
        let mut wallets = source.fetch()?;
        if wallets.is_empty() {
            return Err(WalletError::EmptyBatch);
        }
        wallets.sort_by_key(|w| w.address);
        let pool = Arc::new(WalletPool { wallets, refreshed_at: now });
        self.current = Some(Arc::clone(&pool));
        Ok(pool)
    }
}

/// Picks the sending wallet for `intent`: it must hold an allowance for the
/// source token toward `spender`, the full input amount, and enough native
/// balance for `gas_reserve`. All bounds are inclusive. Among eligible
/// wallets the lexicographically smallest address wins.
pub fn select_wallet<'a>(
    pool: &'a WalletPool,
    intent: &SwapIntent,
    gas_reserve: &U256,
    spender: &str,
) -> Result<&'a Wallet, WalletError> {
    pool.wallets
        .iter()
        .find(|w| {
            w.approvals.contains(&(intent.src_token, spender.to_string()))
                && w.token_balances
                    .get(&intent.src_token)
                    .map_or(false, |bal| *bal >= intent.amount_in)
                && w.native_balance >= *gas_reserve
        })
        .ok_or(WalletError::NoEligibleWallet {
            token: intent.src_token,
            amount: intent.amount_in.clone(),
        })
}
