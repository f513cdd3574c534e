//! End-to-end run orchestration: feed in, record store out.
//!
//! The run is a strict funnel with explicit accounting at every stage. A feed
//! line is either rejected at parse time (counted per reject code) or parsed;
//! a parsed record is either outside the run's mode (skipped), not a
//! recognizable swap, undecodable, unfundable from the wallet batch,
//! unroutable, dropped by the comparison filters (counted per drop reason),
//! or kept as a record. [`RunSummary::conserves`] checks both identities and
//! every test corpus asserts them.
//!
//! Determinism is a contract: records are processed in feed order, all maps
//! are ordered, and the synthetic backend replays every trade against the
//! same immutable pool snapshot, so two runs over identical inputs write
//! byte-identical stores.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::builder::{
    build_equivalent, ExhaustiveRouter, RouteError, RouteFinder, TradeRequest, DEFAULT_MAX_HOPS,
};
use crate::decoder::{
    abi_decode, normalize, DecodeError, RegistryError, SelectorRegistry, SwapIntent,
};
use crate::ingest::{open_feed, parse_record, FeedError, FeedMode, RawTransaction, TxKind};
use crate::metrics::{
    apply_filters, presim_drop, BucketScheme, Candidate, ChainTable, MetricsError, Mode,
    PriceError, PriceTable,
};
use crate::primitives::U256;
use crate::reporting::{write_records_csv, RecordStore, StoreError};
use crate::simulator::{
    parse_trace, simulate, ExecutionBackend, ExecutionResult, PoolFileError, PoolSet, SimError,
    SyntheticAmm,
};
use crate::wallets::{select_wallet, SnapshotSource, WalletError, WalletRotator};

/// Venue label of the baseline router's pools.
pub const DEFAULT_BASELINE_VENUE: &str = "oneinch";
/// Native balance a wallet must hold to be eligible, in wei. Generous enough
/// for any route the builder produces at sane gas prices.
pub const DEFAULT_GAS_RESERVE_WEI: u64 = 10_000_000_000_000_000;

pub const RECORDS_CSV_FILE: &str = "records.csv";
pub const DROPS_FILE: &str = "drops.json";

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    /// Feed source: a file path in replay mode, host:port in stream mode.
    pub feed: String,
    pub feed_mode: FeedMode,
    pub pools: PathBuf,
    pub prices: PathBuf,
    pub registry: PathBuf,
    pub wallets: PathBuf,
    /// Chain config file; the shipped per-chain defaults when absent.
    pub chains: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub baseline_venue: String,
    /// Bucket scheme for stored records; defaults per mode.
    pub scheme: Option<BucketScheme>,
    pub max_hops: usize,
    pub gas_reserve: U256,
}

impl RunConfig {
    pub fn new(
        mode: Mode,
        feed: impl Into<String>,
        pools: impl Into<PathBuf>,
        prices: impl Into<PathBuf>,
        registry: impl Into<PathBuf>,
        wallets: impl Into<PathBuf>,
        out_dir: impl Into<PathBuf>,
    ) -> RunConfig {
        RunConfig {
            mode,
            feed: feed.into(),
            feed_mode: FeedMode::Replay,
            pools: pools.into(),
            prices: prices.into(),
            registry: registry.into(),
            wallets: wallets.into(),
            chains: None,
            out_dir: out_dir.into(),
            baseline_venue: DEFAULT_BASELINE_VENUE.to_string(),
            scheme: None,
            max_hops: DEFAULT_MAX_HOPS,
            gas_reserve: U256::from_u64(DEFAULT_GAS_RESERVE_WEI),
        }
    }

    fn effective_scheme(&self) -> BucketScheme {
        self.scheme.unwrap_or(match self.mode {
            Mode::Classic => BucketScheme::Classic3,
            Mode::Intent => BucketScheme::Intent7,
        })
    }
}

/// Stage-by-stage accounting of one run. Two conservation identities hold:
/// `lines == parsed + Σ rejected` and `parsed == skipped_kind + non_swap +
/// decode_errors + no_wallet + no_route + Σ dropped + kept`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub lines: u64,
    /// Parse rejections by reject code.
    pub rejected: BTreeMap<String, u64>,
    pub parsed: u64,
    /// Records whose kind does not belong to the run mode.
    pub skipped_kind: u64,
    /// Transactions to unknown contracts or selectors: not swaps for us.
    pub non_swap: u64,
    /// Swap-shaped calldata that failed strict decoding or normalization.
    pub decode_errors: u64,
    /// No wallet could fund the equivalent trade.
    pub no_wallet: u64,
    /// No route over the relevant venue's pools.
    pub no_route: u64,
    /// Comparison-filter drops by reason; all six reasons always present.
    pub dropped: BTreeMap<String, u64>,
    pub kept: u64,
}

impl RunSummary {
    pub fn rejected_total(&self) -> u64 {
        self.rejected.values().sum()
    }

    pub fn dropped_total(&self) -> u64 {
        self.dropped.values().sum()
    }

    /// Both funnel identities.
    pub fn conserves(&self) -> bool {
        self.lines == self.parsed + self.rejected_total()
            && self.parsed
                == self.skipped_kind
                    + self.non_swap
                    + self.decode_errors
                    + self.no_wallet
                    + self.no_route
                    + self.dropped_total()
                    + self.kept
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Feed(#[from] FeedError),
    #[error("feed read failed: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Pools(#[from] PoolFileError),
    #[error(transparent)]
    Prices(#[from] PriceError),
    #[error(transparent)]
    Wallets(#[from] WalletError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

struct RunContext {
    registry: SelectorRegistry,
    pools: PoolSet,
    baseline_pools: PoolSet,
    chains: ChainTable,
    wallets: std::sync::Arc<crate::wallets::WalletPool>,
    router: ExhaustiveRouter,
    backend: SyntheticAmm,
    baseline_venue: String,
    gas_reserve: U256,
}

/// Executes a full run: ingest, decode, rebuild, simulate, filter, persist.
/// Writes `records.jsonl` + `manifest.json` (the store), `records.csv`, and
/// `drops.json` into the output directory and returns the funnel summary.
pub fn run(config: &RunConfig) -> Result<RunSummary, PipelineError> {
    let registry = SelectorRegistry::load(&config.registry)?;
    let pools = PoolSet::load(&config.pools)?;
    let prices = PriceTable::load(&config.prices)?;
    let chains = match &config.chains {
        Some(path) => ChainTable::load(path)?,
        None => ChainTable::defaults(),
    };
    let mut rotator = WalletRotator::new(crate::wallets::DEFAULT_ROTATION_SECS);
    let wallets = rotator.refresh(&SnapshotSource::new(&config.wallets), 0)?;

    let ctx = RunContext {
        baseline_pools: pools.venue_subset(&config.baseline_venue),
        registry,
        pools,
        chains,
        wallets,
        router: ExhaustiveRouter { max_hops: config.max_hops },
        backend: SyntheticAmm::default(),
        baseline_venue: config.baseline_venue.clone(),
        gas_reserve: config.gas_reserve.clone(),
    };

    let mut summary = RunSummary::default();
    let mut candidates: Vec<Candidate> = Vec::new();

    let feed = open_feed(&config.feed, config.feed_mode)?;
    for line in feed {
        let line = line?;
        summary.lines += 1;
        let tx = match parse_record(&line) {
            Ok(tx) => tx,
            Err(reason) => {
                *summary.rejected.entry(reason.code().to_string()).or_insert(0) += 1;
                continue;
            }
        };
        summary.parsed += 1;
        let in_mode = matches!(
            (config.mode, tx.kind),
            (Mode::Classic, TxKind::Mined | TxKind::Mempool) | (Mode::Intent, TxKind::IntentOrder)
        );
        if !in_mode {
            summary.skipped_kind += 1;
            continue;
        }
        let candidate = match config.mode {
            Mode::Classic => classic_candidate(&tx, &ctx, &mut summary)?,
            Mode::Intent => intent_candidate(&tx, &ctx, &mut summary)?,
        };
        if let Some(c) = candidate {
            candidates.push(c);
        }
    }

    let outcome = apply_filters(candidates, &prices, &ctx.chains, config.effective_scheme())?;
    summary.kept = outcome.kept.len() as u64;
    summary.dropped =
        outcome.drop_counts().into_iter().map(|(k, v)| (k.to_string(), v)).collect();

    let mut store = RecordStore::open(&config.out_dir)?;
    store.append(&outcome.kept)?;
    write_records_csv(&outcome.kept, File::create(config.out_dir.join(RECORDS_CSV_FILE))?)?;
    write_drop_summary_file(&summary, &config.out_dir)?;

    debug_assert!(summary.conserves(), "funnel accounting must balance: {summary:?}");
    Ok(summary)
}

fn write_drop_summary_file(
    summary: &RunSummary,
    out_dir: &std::path::Path,
) -> Result<(), PipelineError> {
    let mut file = File::create(out_dir.join(DROPS_FILE))?;
    use std::io::Write;
    file.write_all(serde_json::to_string_pretty(summary).expect("plain struct").as_bytes())?;
    file.write_all(b"\n")?;
    Ok(())
}

/// Simulates a trade over `venue_pools`, pinning the request to the snapshot
/// block. Observed blocks in the feed need not match the snapshot; freshness
/// is judged on the candidate, not here.
fn run_simulation(
    request: &TradeRequest,
    venue_pools: &PoolSet,
    backend: &dyn ExecutionBackend,
) -> Result<ExecutionResult, PipelineError> {
    let pinned = TradeRequest { sim_block: venue_pools.block_number, ..request.clone() };
    let trace = simulate(&pinned, backend, venue_pools)?;
    Ok(parse_trace(&trace, &pinned))
}

/// Classic flow: decode the observed swap, replay it over the competitor's
/// venue, rebuild the equivalent baseline trade, simulate both.
fn classic_candidate(
    tx: &RawTransaction,
    ctx: &RunContext,
    summary: &mut RunSummary,
) -> Result<Option<Candidate>, PipelineError> {
    let entry = match ctx.registry.match_selector(&tx.recipient, &tx.calldata) {
        Ok(entry) if entry.chain_id == tx.chain_id => entry,
        Ok(_)
        | Err(DecodeError::UnknownContract { .. })
        | Err(DecodeError::UnknownSelector { .. })
        | Err(DecodeError::CalldataTooShort { .. }) => {
            summary.non_swap += 1;
            return Ok(None);
        }
        Err(_) => {
            summary.decode_errors += 1;
            return Ok(None);
        }
    };
    let cfg = ctx.chains.get(tx.chain_id)?;
    let intent = match abi_decode(&tx.calldata, &entry.sig)
        .and_then(|decoded| normalize(&entry.sig, &decoded, tx, cfg.native_token))
    {
        Ok(intent) => intent,
        Err(_) => {
            summary.decode_errors += 1;
            return Ok(None);
        }
    };

    let base = Candidate {
        chain_id: tx.chain_id,
        mode: Mode::Classic,
        competitor: intent.protocol.clone(),
        src_token: intent.src_token,
        dst_token: intent.dst_token,
        amount_in: intent.amount_in.clone(),
        exact_output: intent.exact_output,
        sim_block: tx.observed_block,
        mined_block: tx.mined_block,
        incoming: None,
        incoming_gas_price: tx.gas_price.clone(),
        outgoing: None,
        outgoing_gas_price: tx.gas_price.clone(),
    };
    // Candidates that cannot survive filtering skip simulation entirely; the
    // filter stage classifies them from the same predicate.
    if presim_drop(base.exact_output, base.mined_block, base.sim_block, cfg).is_some() {
        return Ok(Some(base));
    }

    let wallet = match select_wallet(&ctx.wallets, &intent, &ctx.gas_reserve, &ctx.baseline_venue)
    {
        Ok(w) => w,
        Err(WalletError::NoEligibleWallet { .. }) => {
            summary.no_wallet += 1;
            return Ok(None);
        }
        Err(e) => return Err(e.into()),
    };

    let competitor_pools = ctx.pools.venue_subset(&intent.protocol);
    let incoming_route = match ctx.router.find_route(
        &competitor_pools,
        &intent.src_token,
        &intent.dst_token,
        &intent.amount_in,
    ) {
        Ok((route, _)) => route,
        Err(_) => {
            summary.no_route += 1;
            return Ok(None);
        }
    };
    let incoming_request = TradeRequest {
        wallet: tx.sender,
        target: intent.protocol.clone(),
        src_token: intent.src_token,
        dst_token: intent.dst_token,
        amount_in: intent.amount_in.clone(),
        route: incoming_route,
        gas_price: tx.gas_price.clone(),
        gas_limit: tx.gas_limit,
        sim_block: competitor_pools.block_number,
    };
    let incoming = run_simulation(&incoming_request, &competitor_pools, &ctx.backend)?;

    let outgoing_request = match build_equivalent(
        &intent,
        wallet.address,
        tx,
        &ctx.router,
        &ctx.baseline_pools,
        &ctx.baseline_venue,
    ) {
        Ok(request) => request,
        Err(RouteError::NoRoute { .. }) | Err(RouteError::ExactOutputUnsupported) => {
            summary.no_route += 1;
            return Ok(None);
        }
    };
    let outgoing = run_simulation(&outgoing_request, &ctx.baseline_pools, &ctx.backend)?;

    Ok(Some(Candidate { incoming: Some(incoming), outgoing: Some(outgoing), ..base }))
}

/// Intent flow: the settled fill is the incoming side as-is; the outgoing
/// side is the rebuilt baseline trade priced at the configured instant gas
/// preset.
fn intent_candidate(
    tx: &RawTransaction,
    ctx: &RunContext,
    summary: &mut RunSummary,
) -> Result<Option<Candidate>, PipelineError> {
    let fill = tx.intent_fill.as_ref().expect("parser enforces fills on intent orders");
    let cfg = ctx.chains.get(tx.chain_id)?;
    let instant_gas_price = cfg
        .instant_gas_price
        .clone()
        .ok_or(MetricsError::MissingInstantGasPrice { chain_id: tx.chain_id })?;

    let incoming = ExecutionResult {
        actual_in: fill.amount_in.clone(),
        actual_out: fill.amount_out.clone(),
        gas_used: 0,
        reverted: false,
    };
    let base = Candidate {
        chain_id: tx.chain_id,
        mode: Mode::Intent,
        competitor: fill.protocol.clone(),
        src_token: fill.src_token,
        dst_token: fill.dst_token,
        amount_in: fill.amount_in.clone(),
        exact_output: false,
        sim_block: tx.observed_block,
        mined_block: Some(fill.fill_block),
        incoming: Some(incoming),
        incoming_gas_price: U256::zero(),
        outgoing: None,
        outgoing_gas_price: instant_gas_price.clone(),
    };
    if presim_drop(false, base.mined_block, base.sim_block, cfg).is_some() {
        return Ok(Some(base));
    }

    let pseudo_intent = SwapIntent {
        src_token: fill.src_token,
        dst_token: fill.dst_token,
        amount_in: fill.amount_in.clone(),
        min_out: None,
        deadline: None,
        recipient: None,
        exact_output: false,
        protocol: fill.protocol.clone(),
        origin: tx.tx_hash,
    };
    let wallet =
        match select_wallet(&ctx.wallets, &pseudo_intent, &ctx.gas_reserve, &ctx.baseline_venue) {
            Ok(w) => w,
            Err(WalletError::NoEligibleWallet { .. }) => {
                summary.no_wallet += 1;
                return Ok(None);
            }
            Err(e) => return Err(e.into()),
        };

    let outgoing_request = match build_equivalent(
        &pseudo_intent,
        wallet.address,
        tx,
        &ctx.router,
        &ctx.baseline_pools,
        &ctx.baseline_venue,
    ) {
        Ok(request) => TradeRequest { gas_price: instant_gas_price, ..request },
        Err(RouteError::NoRoute { .. }) | Err(RouteError::ExactOutputUnsupported) => {
            summary.no_route += 1;
            return Ok(None);
        }
    };
    let outgoing = run_simulation(&outgoing_request, &ctx.baseline_pools, &ctx.backend)?;

    Ok(Some(Candidate { outgoing: Some(outgoing), ..base }))
}
