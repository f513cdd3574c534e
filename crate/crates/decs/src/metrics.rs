//! Comparison metrics.
//!
//! This is where raw execution results turn into dollars-and-winners. The
//! conventions, in one place:
//!
//! * A comparison is fresh when the incoming transaction's mined block (or an
//!   intent's last fill block) is at most `max_block_lag` blocks after the
//!   simulation block, and never before it.
//! * The effective amount of a side is its output valued in USD minus the USD
//!   gas cost. Intent-side executions carry no gas term: resolvers pay gas and
//!   price it into the fill.
//! * The baseline wins when its effective amount beats the incoming one by
//!   more than a volume-dependent parity threshold; differences inside the
//!   threshold are draws.
//! * `uplift_pct` is stored in percentage points (1.0 means one percent of
//!   the input volume), the unit every downstream clip, window, and table
//!   uses.
//!
//! Filtering is a partition: every candidate either becomes a record or is
//! dropped with exactly one reason, and callers can audit
//! `kept + dropped == input`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::primitives::{Address, U256};
use crate::simulator::ExecutionResult;

/// Where a USD quote came from. Quotes for one comparison must all share a
/// source; mixing engines inside a single comparison skews the rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceSource {
    PrimaryEngine,
    SpotFallback,
}

/// USD price of one token at one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceQuote {
    pub token: Address,
    pub usd_price: f64,
    pub decimals: u32,
    pub source: PriceSource,
    pub block: u64,
}

#[derive(Debug, Error)]
pub enum PriceError {
    #[error("cannot read price file: {0}")]
    Io(#[from] std::io::Error),
    #[error("price file is not valid CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("price file row {row}: {detail}")]
    BadRow { row: usize, detail: String },
}

/// Block-indexed quotes per (token, source). Lookups return the most recent
/// quote at or before the requested block.
#[derive(Debug, Default, Clone)]
pub struct PriceTable {
    by_key: BTreeMap<(Address, PriceSource), Vec<PriceQuote>>,
}

/// Outcome of pricing a full token set for one comparison from one source.
#[derive(Debug, Clone, PartialEq)]
pub enum QuoteSet {
    /// Every token priced by a single source.
    Complete(Vec<PriceQuote>),
    /// Coverage exists only by mixing sources.
    Mixed,
    /// At least one token has no quote anywhere.
    Missing(Address),
}

impl PriceTable {
    pub fn insert(&mut self, quote: PriceQuote) {
        let list = self.by_key.entry((quote.token, quote.source)).or_default();
        list.push(quote);
        list.sort_by_key(|q| q.block);
    }

    /// Loads `token,block,usd_price,source[,decimals]` CSV. The decimals
    /// column may be omitted, in which case 18 is assumed.
    pub fn load(path: &Path) -> Result<PriceTable, PriceError> {
        Self::from_csv_str(&fs::read_to_string(path)?)
    }

    pub fn from_csv_str(data: &str) -> Result<PriceTable, PriceError> {
        let mut reader = csv::Reader::from_reader(data.as_bytes());
        let headers = reader.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (t, b, p, s) = match (col("token"), col("block"), col("usd_price"), col("source")) {
            (Some(t), Some(b), Some(p), Some(s)) => (t, b, p, s),
            _ => {
                return Err(PriceError::BadRow {
                    row: 0,
                    detail: "header must name token, block, usd_price, source".into(),
                })
            }
        };
        let d = col("decimals");
        let mut table = PriceTable::default();
        for (i, row) in reader.records().enumerate() {
            let row = row?;
            let bad = |detail: String| PriceError::BadRow { row: i + 1, detail };
            let token = Address::from_hex(&row[t]).map_err(|e| bad(e.to_string()))?;
            let block: u64 = row[b].parse().map_err(|_| bad("bad block number".into()))?;
            let usd_price: f64 = row[p].parse().map_err(|_| bad("bad usd_price".into()))?;
            if !(usd_price > 0.0) {
                return Err(bad(format!("usd_price must be positive, got {usd_price}")));
            }
            let source = match &row[s] {
                "primary_engine" => PriceSource::PrimaryEngine,
                "spot_fallback" => PriceSource::SpotFallback,
                other => return Err(bad(format!("unknown source {other:?}"))),
            };
            let decimals: u32 = match d {
                Some(d) => row[d].parse().map_err(|_| bad("bad decimals".into()))?,
                None => 18,
            };
            if decimals > 36 {
                return Err(bad(format!("decimals {decimals} out of range")));
            }
            table.insert(PriceQuote { token, usd_price, decimals, source, block });
        }
        Ok(table)
    }

    /// Most recent quote for `token` from `source` at or before `block`.
    pub fn quote(&self, token: &Address, block: u64, source: PriceSource) -> Option<&PriceQuote> {
        let list = self.by_key.get(&(*token, source))?;
        let idx = list.partition_point(|q| q.block <= block);
        if idx == 0 {
            None
        } else {
            Some(&list[idx - 1])
        }
    }

    /// Prices every token from a single source, preferring the primary
    /// engine. Reports `Mixed` when only a cross-source combination covers
    /// the set and `Missing` when some token has no quote at all.
    pub fn quote_set(&self, tokens: &[Address], block: u64) -> QuoteSet {
        for source in [PriceSource::PrimaryEngine, PriceSource::SpotFallback] {
            let quotes: Vec<_> =
                tokens.iter().filter_map(|t| self.quote(t, block, source)).cloned().collect();
            if quotes.len() == tokens.len() {
                return QuoteSet::Complete(quotes);
            }
        }
        for token in tokens {
            let any = self.quote(token, block, PriceSource::PrimaryEngine).is_some()
                || self.quote(token, block, PriceSource::SpotFallback).is_some();
            if !any {
                return QuoteSet::Missing(*token);
            }
        }
        QuoteSet::Mixed
    }
}

/// Per-chain comparison parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub chain_id: u64,
    /// Maximum blocks between simulation and inclusion for a comparison to
    /// count as fresh. Scales with block time, hence per chain.
    pub max_block_lag: u64,
    /// Wrapped-native token address; used for gas pricing and as the
    /// substitute for the native-asset sentinel.
    pub native_token: Address,
    /// Wei per whole native unit.
    #[serde(default = "default_gas_price_unit")]
    pub gas_price_unit: u64,
    /// Gas price assumed for outgoing trades in intent comparisons (the
    /// "send now" preset). Required for intent mode; deliberately has no
    /// default because it is an operator judgment call.
    #[serde(default)]
    pub instant_gas_price: Option<U256>,
}

fn default_gas_price_unit() -> u64 {
    1_000_000_000_000_000_000
}

/// Shipped freshness windows, roughly one minute of wall time per chain.
pub fn default_chain_configs() -> Vec<ChainConfig> {
    let cfg = |chain_id, max_block_lag, native: &str| ChainConfig {
        chain_id,
        max_block_lag,
        native_token: Address::from_hex(native).expect("static address"),
        gas_price_unit: default_gas_price_unit(),
        instant_gas_price: None,
    };
    vec![
        cfg(1, 4, "0xc02aaa39b223fe8d0a0e5c4f27ead9083c756cc2"),
        cfg(56, 16, "0xbb4cdb9cbd36b01bd1cbaebf2de08d9173bc095c"),
        cfg(137, 24, "0x0d500b1d8e8ef31e21c99d1db9a6444d3adf1270"),
        cfg(42161, 192, "0x82af49447d8a07e3bd95bd0d56f35241523fbab1"),
    ]
}

#[derive(Debug, Clone, Default)]
pub struct ChainTable {
    by_id: BTreeMap<u64, ChainConfig>,
}

impl ChainTable {
    pub fn new(configs: Vec<ChainConfig>) -> ChainTable {
        ChainTable { by_id: configs.into_iter().map(|c| (c.chain_id, c)).collect() }
    }

    pub fn defaults() -> ChainTable {
        ChainTable::new(default_chain_configs())
    }

    pub fn load(path: &Path) -> Result<ChainTable, MetricsError> {
        let text = fs::read_to_string(path).map_err(|e| MetricsError::Config(e.to_string()))?;
        let configs: Vec<ChainConfig> =
            serde_json::from_str(&text).map_err(|e| MetricsError::Config(e.to_string()))?;
        Ok(ChainTable::new(configs))
    }

    pub fn get(&self, chain_id: u64) -> Result<&ChainConfig, MetricsError> {
        self.by_id.get(&chain_id).ok_or(MetricsError::UnknownChain { chain_id })
    }
}

/// True when the mined block is no earlier than the simulation block and at
/// most `max_block_lag` blocks after it.
pub fn check_freshness(mined_block: u64, simulation_block: u64, cfg: &ChainConfig) -> bool {
    mined_block >= simulation_block && mined_block - simulation_block <= cfg.max_block_lag
}

/// Comparison flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Classic,
    Intent,
}

/// Who a comparison went to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    Oneinch,
    Draw,
    Competitor,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("effective amount of a reverted execution is undefined")]
    RevertedInput,
    #[error("uplift is undefined for zero input volume")]
    ZeroVolume,
    #[error("win/loss ratio is undefined with zero competitor wins ({wins} baseline wins)")]
    NoLosses { wins: u64 },
    #[error("no configuration for chain {chain_id}")]
    UnknownChain { chain_id: u64 },
    #[error("chain {chain_id} has no instant_gas_price configured; intent mode requires one")]
    MissingInstantGasPrice { chain_id: u64 },
    #[error("configuration error: {0}")]
    Config(String),
}

/// Draw band in USD for a trade of `v_in_usd` input volume. Tiers are
/// lower-inclusive: a $10,000 trade already uses the $5 band.
pub fn parity_threshold(v_in_usd: f64) -> f64 {
    if v_in_usd < 10_000.0 {
        1.0
    } else if v_in_usd < 100_000.0 {
        5.0
    } else if v_in_usd < 500_000.0 {
        10.0
    } else {
        50.0
    }
}

/// Gas pricing inputs for the classic effective amount.
#[derive(Debug, Clone)]
pub struct GasContext {
    pub gas_price: U256,
    pub native_usd: f64,
    /// Wei per whole native unit, from the chain config.
    pub gas_price_unit: u64,
}

impl GasContext {
    pub fn cost_usd(&self, gas_used: u64) -> f64 {
        gas_used as f64 * (self.gas_price.to_f64() / self.gas_price_unit as f64) * self.native_usd
    }
}

/// USD value a side actually delivers: output valued at the destination
/// price, minus gas for classic executions. Intent-side settlements carry no
/// explicit gas cost, so the gas term vanishes for them.
pub fn effective_amount(
    result: &ExecutionResult,
    dst_price: f64,
    dst_decimals: u32,
    gas: &GasContext,
    side_mode: Mode,
) -> Result<f64, MetricsError> {
    if result.reverted {
        return Err(MetricsError::RevertedInput);
    }
    let out_usd = result.actual_out.to_f64() / 10f64.powi(dst_decimals as i32) * dst_price;
    let gas_usd = match side_mode {
        Mode::Classic => gas.cost_usd(result.gas_used),
        Mode::Intent => 0.0,
    };
    Ok(out_usd - gas_usd)
}

/// Three-way outcome. The order of the branches is the definition: a positive
/// difference beyond the threshold goes to the baseline, anything inside the
/// band is a draw, the rest goes to the competitor.
pub fn determine_winner(a_eff_in: f64, a_eff_out: f64, epsilon_usd: f64) -> Winner {
    let diff = a_eff_out - a_eff_in;
    if diff > epsilon_usd {
        Winner::Oneinch
    } else if diff.abs() <= epsilon_usd {
        Winner::Draw
    } else {
        Winner::Competitor
    }
}

/// USD uplift of the baseline over the incoming side, and the same value as a
/// share of input volume in percentage points.
pub fn uplift(a_eff_in: f64, a_eff_out: f64, v_in_usd: f64) -> Result<(f64, f64), MetricsError> {
    if !(v_in_usd > 0.0) {
        return Err(MetricsError::ZeroVolume);
    }
    let usd = a_eff_out - a_eff_in;
    Ok((usd, 100.0 * usd / v_in_usd))
}

/// Baseline wins per competitor win.
pub fn win_loss_ratio(baseline_wins: u64, competitor_wins: u64) -> Result<f64, MetricsError> {
    if competitor_wins == 0 {
        return Err(MetricsError::NoLosses { wins: baseline_wins });
    }
    Ok(baseline_wins as f64 / competitor_wins as f64)
}

/// Rounded presentation of a win/loss ratio, e.g. "27x".
pub fn format_ratio(ratio: f64) -> String {
    format!("{}x", ratio.round() as i64)
}

/// Win/loss ratio over a record set.
pub fn winrate(records: &[ComparisonRecord]) -> Result<f64, MetricsError> {
    let wins = records.iter().filter(|r| r.winner == Winner::Oneinch).count() as u64;
    let losses = records.iter().filter(|r| r.winner == Winner::Competitor).count() as u64;
    win_loss_ratio(wins, losses)
}

/// Share of comparisons the baseline won outright (draws count against it).
/// Distinct from [`winrate`], which is wins per loss.
pub fn win_share(records: &[ComparisonRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().filter(|r| r.winner == Winner::Oneinch).count() as f64 / records.len() as f64
}

/// Volume bucketing used by the benchmark tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BucketScheme {
    /// Three coarse tiers for classic-router tables.
    Classic3,
    /// Seven tiers for intent tables.
    Intent7,
    /// Nine fine-grained tiers for distribution studies.
    Fine9,
}

impl BucketScheme {
    /// Bucket labels in ascending volume order.
    pub fn labels(&self) -> &'static [&'static str] {
        match self {
            BucketScheme::Classic3 => &["<$10k", "$10k–100k", ">$100k"],
            BucketScheme::Intent7 => &[
                "<$1k", "$1k–10k", "$10k–50k", "$50k–100k", "$100k–500k", "$500k–1m", ">$1m",
            ],
            BucketScheme::Fine9 => &[
                "<$100", "$100–500", "$500–1k", "$1k–5k", "$5k–10k", "$10k–50k", "$50k–100k",
                "$100k–500k", ">$500k",
            ],
        }
    }

    /// Upper edges of all buckets but the last.
    fn edges(&self) -> &'static [f64] {
        match self {
            BucketScheme::Classic3 => &[10_000.0, 100_000.0],
            BucketScheme::Intent7 => {
                &[1_000.0, 10_000.0, 50_000.0, 100_000.0, 500_000.0, 1_000_000.0]
            }
            BucketScheme::Fine9 => &[
                100.0, 500.0, 1_000.0, 5_000.0, 10_000.0, 50_000.0, 100_000.0, 500_000.0,
            ],
        }
    }
}

/// Bucket label for a trade volume. Buckets are lower-inclusive and
/// upper-exclusive; a volume exactly on an edge lands in the higher bucket.
pub fn assign_bucket(v_in_usd: f64, scheme: BucketScheme) -> &'static str {
    let edges = scheme.edges();
    let labels = scheme.labels();
    for (i, edge) in edges.iter().enumerate() {
        if v_in_usd < *edge {
            return labels[i];
        }
    }
    labels[labels.len() - 1]
}

/// Reason a candidate never became a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    ExactOutput,
    NeverMined,
    StaleBlock,
    Reverted,
    MissingPrice,
    MixedPriceSources,
}

impl DropReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            DropReason::ExactOutput => "exact_output",
            DropReason::NeverMined => "never_mined",
            DropReason::StaleBlock => "stale_block",
            DropReason::Reverted => "reverted",
            DropReason::MissingPrice => "missing_price",
            DropReason::MixedPriceSources => "mixed_price_sources",
        }
    }

    pub const ALL: [DropReason; 6] = [
        DropReason::ExactOutput,
        DropReason::NeverMined,
        DropReason::StaleBlock,
        DropReason::Reverted,
        DropReason::MissingPrice,
        DropReason::MixedPriceSources,
    ];
}

/// A comparison waiting to be priced and filtered. Execution results are
/// optional because candidates dropped before simulation never get any.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub chain_id: u64,
    pub mode: Mode,
    pub competitor: String,
    pub src_token: Address,
    pub dst_token: Address,
    pub amount_in: U256,
    pub exact_output: bool,
    pub sim_block: u64,
    /// Mined block of the incoming tx, or the last fill block of an intent.
    pub mined_block: Option<u64>,
    pub incoming: Option<ExecutionResult>,
    /// Gas price of the incoming transaction; zero for intents, which have
    /// no gas envelope of their own.
    pub incoming_gas_price: U256,
    pub outgoing: Option<ExecutionResult>,
    /// Gas price applied to the outgoing side: the incoming one in classic
    /// mode, the configured instant preset in intent mode.
    pub outgoing_gas_price: U256,
}

/// One finished comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub chain_id: u64,
    pub mode: Mode,
    pub competitor: String,
    pub sim_block: u64,
    pub incoming: ExecutionResult,
    pub incoming_gas_price: U256,
    pub outgoing: ExecutionResult,
    pub v_in_usd: f64,
    pub a_eff_in: f64,
    pub a_eff_out: f64,
    pub epsilon_usd: f64,
    pub winner: Winner,
    pub uplift_usd: f64,
    pub uplift_pct: f64,
    pub bucket: String,
}

/// Result of [`apply_filters`]: a strict partition of the input.
#[derive(Debug, Default)]
pub struct FilterOutput {
    pub kept: Vec<ComparisonRecord>,
    pub dropped: Vec<(DropReason, Candidate)>,
}

impl FilterOutput {
    pub fn drop_counts(&self) -> BTreeMap<&'static str, u64> {
        let mut counts: BTreeMap<&'static str, u64> =
            DropReason::ALL.iter().map(|r| (r.as_str(), 0)).collect();
        for (reason, _) in &self.dropped {
            *counts.get_mut(reason.as_str()).expect("all reasons present") += 1;
        }
        counts
    }
}

/// Drop decision available before simulation. The pipeline consults this to
/// avoid simulating candidates that can never survive filtering; the same
/// check runs again inside [`apply_filters`] so the partition is complete
/// regardless of who calls it.
pub fn presim_drop(
    exact_output: bool,
    mined_block: Option<u64>,
    sim_block: u64,
    cfg: &ChainConfig,
) -> Option<DropReason> {
    if exact_output {
        return Some(DropReason::ExactOutput);
    }
    let mined = match mined_block {
        Some(b) => b,
        None => return Some(DropReason::NeverMined),
    };
    if !check_freshness(mined, sim_block, cfg) {
        return Some(DropReason::StaleBlock);
    }
    None
}

/// Filters, prices, and scores candidates. Every input candidate lands in
/// exactly one of the two output lists.
pub fn apply_filters(
    candidates: Vec<Candidate>,
    prices: &PriceTable,
    chains: &ChainTable,
    scheme: BucketScheme,
) -> Result<FilterOutput, MetricsError> {
    let mut out = FilterOutput::default();
    for cand in candidates {
        let cfg = chains.get(cand.chain_id)?;
        match score_candidate(&cand, prices, cfg, scheme)? {
            Ok(record) => out.kept.push(record),
            Err(reason) => out.dropped.push((reason, cand)),
        }
    }
    Ok(out)
}

/// Inner Ok/Err distinguishes "record" from "dropped with reason"; the outer
/// Result is reserved for configuration failures that should abort the run.
fn score_candidate(
    cand: &Candidate,
    prices: &PriceTable,
    cfg: &ChainConfig,
    scheme: BucketScheme,
) -> Result<Result<ComparisonRecord, DropReason>, MetricsError> {
    if let Some(reason) = presim_drop(cand.exact_output, cand.mined_block, cand.sim_block, cfg) {
        return Ok(Err(reason));
    }
    let (incoming, outgoing) = match (&cand.incoming, &cand.outgoing) {
        (Some(i), Some(o)) if !i.reverted && !o.reverted => (i, o),
        // Missing execution on a candidate that passed the pre-sim checks can
        // only mean the simulation attempt went nowhere; treat it as a revert.
        _ => return Ok(Err(DropReason::Reverted)),
    };

    let tokens = [cand.src_token, cand.dst_token, cfg.native_token];
    let quotes = match prices.quote_set(&tokens, cand.sim_block) {
        QuoteSet::Complete(q) => q,
        QuoteSet::Missing(_) => return Ok(Err(DropReason::MissingPrice)),
        QuoteSet::Mixed => return Ok(Err(DropReason::MixedPriceSources)),
    };
    let (src_q, dst_q, native_q) = (&quotes[0], &quotes[1], &quotes[2]);

    let v_in_usd =
        cand.amount_in.to_f64() / 10f64.powi(src_q.decimals as i32) * src_q.usd_price;

    let in_gas = GasContext {
        gas_price: cand.incoming_gas_price.clone(),
        native_usd: native_q.usd_price,
        gas_price_unit: cfg.gas_price_unit,
    };
    let out_gas = GasContext {
        gas_price: cand.outgoing_gas_price.clone(),
        native_usd: native_q.usd_price,
        gas_price_unit: cfg.gas_price_unit,
    };
    // The incoming side of an intent comparison is the settled fill and is
    // gas-free; the rebuilt outgoing trade always pays gas like any classic
    // transaction.
    let incoming_side_mode = cand.mode;
    let a_eff_in =
        effective_amount(incoming, dst_q.usd_price, dst_q.decimals, &in_gas, incoming_side_mode)?;
    let a_eff_out =
        effective_amount(outgoing, dst_q.usd_price, dst_q.decimals, &out_gas, Mode::Classic)?;

    let epsilon_usd = parity_threshold(v_in_usd);
    let winner = determine_winner(a_eff_in, a_eff_out, epsilon_usd);
    let (uplift_usd, uplift_pct) = uplift(a_eff_in, a_eff_out, v_in_usd)?;

    Ok(Ok(ComparisonRecord {
        chain_id: cand.chain_id,
        mode: cand.mode,
        competitor: cand.competitor.clone(),
        sim_block: cand.sim_block,
        incoming: incoming.clone(),
        incoming_gas_price: cand.incoming_gas_price.clone(),
        outgoing: outgoing.clone(),
        v_in_usd,
        a_eff_in,
        a_eff_out,
        epsilon_usd,
        winner,
        uplift_usd,
        uplift_pct,
        bucket: assign_bucket(v_in_usd, scheme).to_string(),
    }))
}
