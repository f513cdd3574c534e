//! Command-line front end for the comparison pipeline: decode router
//! calldata, replay feed captures into a record store, build benchmark
//! tables, and run statistical comparisons between competitor groups.
//!
//! Exit codes: 0 success, 1 usage error, 2 input format error, 3 empty
//! result.

use std::fs;
use std::fs::File;
use std::io::{self, ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use decs::decoder::{abi_decode, RegistryEntry, SelectorRegistry};
use decs::metrics::{BucketScheme, Mode, Winner};
use decs::pipeline::{run, RunConfig};
use decs::primitives::{bytes_to_hex, hex_to_bytes, Address};
use decs::reporting::{
    build_mart, emit_histogram, write_mart_csv, RecordStore, ReportError, Scope,
    DEFAULT_HIST_BINS, DEFAULT_HIST_WINDOW,
};
use decs::stats::{
    clip_outliers, indirect_compare, mann_whitney_u_test, proportion_z_test, SampleGroup,
    StatsError, Tail,
};
use serde_json::json;

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_EMPTY: u8 = 3;

#[derive(Parser)]
#[command(name = "decs", version, about = "Decentralized exchange comparison pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode router calldata against a selector registry.
    Decode {
        #[arg(long)]
        registry: PathBuf,
        /// 0x-prefixed calldata, selector included.
        #[arg(long)]
        calldata: String,
        /// Router address; without it the registry is searched by selector.
        #[arg(long)]
        contract: Option<String>,
    },
    /// Replay a feed capture through the pipeline into a record store.
    Run {
        #[arg(long)]
        feed: String,
        #[arg(long)]
        pools: PathBuf,
        #[arg(long)]
        prices: PathBuf,
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        wallets: PathBuf,
        /// Chain config file; built-in defaults apply when omitted.
        #[arg(long)]
        chains: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
        /// Venue label of the baseline router's pools.
        #[arg(long)]
        baseline_venue: Option<String>,
        /// Bucket scheme override; the mode picks a default otherwise.
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
    },
    /// Build a benchmark table and histogram for one scope.
    Report {
        #[arg(long)]
        store: PathBuf,
        /// Scope filter as JSON.
        #[arg(long)]
        scope: PathBuf,
        /// Output CSV path for the benchmark table.
        #[arg(long)]
        table: PathBuf,
        /// Output JSON path for the uplift histogram.
        #[arg(long)]
        hist: PathBuf,
    },
    /// Compare the uplift of two competitor groups.
    Stats {
        #[arg(long)]
        store: PathBuf,
        #[arg(long = "group-a")]
        group_a: String,
        #[arg(long = "group-b")]
        group_b: String,
        #[arg(long, value_enum)]
        test: TestArg,
        #[arg(long, default_value_t = decs::stats::DEFAULT_ALPHA)]
        alpha: f64,
        /// Outlier clip bound in percentage points, applied to t and mwu.
        #[arg(long, default_value_t = decs::stats::DEFAULT_CLIP_PCT)]
        clip: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Classic,
    Intent,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Classic => Mode::Classic,
            ModeArg::Intent => Mode::Intent,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Classic3,
    Intent7,
    Fine9,
}

impl From<SchemeArg> for BucketScheme {
    fn from(s: SchemeArg) -> BucketScheme {
        match s {
            SchemeArg::Classic3 => BucketScheme::Classic3,
            SchemeArg::Intent7 => BucketScheme::Intent7,
            SchemeArg::Fine9 => BucketScheme::Fine9,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TestArg {
    /// One-tailed Welch mean comparison with outlier clipping.
    T,
    /// Mann-Whitney U rank comparison with outlier clipping.
    Mwu,
    /// Per-group win-share z-test against an even split.
    Prop,
}

struct Failure {
    code: u8,
    message: String,
}

fn input(e: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_INPUT, message: e.to_string() }
}

fn empty(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_EMPTY, message: message.into() }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

fn stats_failure(e: StatsError) -> Failure {
    match e {
        StatsError::EmptySample { .. } | StatsError::TooSmall { .. } => empty(e.to_string()),
        StatsError::BadAlpha { .. } | StatsError::BadQuantile { .. } => usage(e.to_string()),
        _ => input(e.to_string()),
    }
}

fn report_failure(e: ReportError) -> Failure {
    match e {
        ReportError::EmptyScope => empty(e.to_string()),
        ReportError::BadHistogramShape => usage(e.to_string()),
    }
}

/// Prints one document to stdout. A pipe closed downstream (`decs ... |
/// head`) just ends the output early; anything else is a real failure.
fn emit(doc: &str) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    match writeln!(out, "{doc}").and_then(|()| out.flush()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(input(format!("cannot write to stdout: {e}"))),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Decode { registry, calldata, contract } => cmd_decode(&registry, &calldata, contract.as_deref()),
        Command::Run { feed, pools, prices, registry, wallets, chains, mode, out, baseline_venue, scheme } => {
            cmd_run(feed, pools, prices, registry, wallets, chains, mode, out, baseline_venue, scheme)
        }
        Command::Report { store, scope, table, hist } => cmd_report(&store, &scope, &table, &hist),
        Command::Stats { store, group_a, group_b, test, alpha, clip } => {
            cmd_stats(&store, &group_a, &group_b, test, alpha, clip)
        }
    }
}

fn cmd_decode(registry: &Path, calldata: &str, contract: Option<&str>) -> Result<(), Failure> {
    let registry = SelectorRegistry::load(registry).map_err(input)?;
    let bytes = hex_to_bytes(calldata).map_err(input)?;
    let entry: &RegistryEntry = match contract {
        Some(c) => {
            let addr = Address::from_hex(c).map_err(input)?;
            registry.match_selector(&addr, &bytes).map_err(input)?
        }
        None => registry.match_selector_any(&bytes).map_err(input)?,
    };
    let decoded = abi_decode(&bytes, &entry.sig).map_err(input)?;
    let args: Vec<_> = entry
        .sig
        .params
        .iter()
        .zip(&decoded.values)
        .enumerate()
        .map(|(i, (ty, value))| {
            let roles: Vec<&str> = entry
                .sig
                .semantics
                .iter()
                .filter(|(_, &pos)| pos == i)
                .map(|(role, _)| role.as_str())
                .collect();
            json!({ "type": ty.canonical(), "value": value.to_json(), "roles": roles })
        })
        .collect();
    let out = json!({
        "contract": entry.contract,
        "selector": bytes_to_hex(&entry.selector),
        "function": entry.sig.name,
        "protocol": entry.sig.protocol,
        "exact_output": entry.sig.exact_output,
        "trailing_bytes": decoded.trailing_bytes,
        "args": args,
    });
    emit(&serde_json::to_string_pretty(&out).expect("plain json"))
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    feed: String,
    pools: PathBuf,
    prices: PathBuf,
    registry: PathBuf,
    wallets: PathBuf,
    chains: Option<PathBuf>,
    mode: ModeArg,
    out: PathBuf,
    baseline_venue: Option<String>,
    scheme: Option<SchemeArg>,
) -> Result<(), Failure> {
    let mut config = RunConfig::new(mode.into(), feed, pools, prices, registry, wallets, out);
    config.chains = chains;
    if let Some(venue) = baseline_venue {
        config.baseline_venue = venue;
    }
    config.scheme = scheme.map(Into::into);
    let summary = run(&config).map_err(input)?;
    emit(&serde_json::to_string_pretty(&summary).expect("plain struct"))
}

fn cmd_report(store: &Path, scope: &Path, table: &Path, hist: &Path) -> Result<(), Failure> {
    let records = RecordStore::open(store).map_err(input)?.read_all().map_err(input)?;
    let scope_text = fs::read_to_string(scope).map_err(input)?;
    let scope = Scope::from_json_str(&scope_text).map_err(input)?;

    let mart = build_mart(&records, &scope).map_err(report_failure)?;
    let table_file = File::create(table).map_err(input)?;
    write_mart_csv(&mart, table_file).map_err(input)?;

    let histogram = emit_histogram(&records, &scope, DEFAULT_HIST_WINDOW, DEFAULT_HIST_BINS)
        .map_err(report_failure)?;
    let mut hist_json = serde_json::to_string_pretty(&histogram).expect("plain struct");
    hist_json.push('\n');
    fs::write(hist, hist_json).map_err(input)?;
    Ok(())
}

fn cmd_stats(
    store: &Path,
    group_a: &str,
    group_b: &str,
    test: TestArg,
    alpha: f64,
    clip: f64,
) -> Result<(), Failure> {
    let records = RecordStore::open(store).map_err(input)?.read_all().map_err(input)?;
    let uplifts = |label: &str| -> Vec<f64> {
        records.iter().filter(|r| r.competitor == label).map(|r| r.uplift_pct).collect()
    };
    let wins = |label: &str| -> (u64, u64) {
        let group: Vec<_> = records.iter().filter(|r| r.competitor == label).collect();
        let won = group.iter().filter(|r| r.winner == Winner::Oneinch).count() as u64;
        (won, group.len() as u64)
    };
    let a = uplifts(group_a);
    let b = uplifts(group_b);
    if a.is_empty() {
        return Err(empty(format!("no records for group {group_a:?}")));
    }
    if b.is_empty() {
        return Err(empty(format!("no records for group {group_b:?}")));
    }

    let output = match test {
        TestArg::T => {
            let ga = SampleGroup::new(group_a, a);
            let gb = SampleGroup::new(group_b, b);
            let cmp = indirect_compare(&ga, &gb, clip, alpha).map_err(stats_failure)?;
            serde_json::to_value(&cmp).expect("plain struct")
        }
        TestArg::Mwu => {
            let ga = SampleGroup::new(group_a, clip_outliers(&a, clip));
            let gb = SampleGroup::new(group_b, clip_outliers(&b, clip));
            let result =
                mann_whitney_u_test(&ga, &gb, Tail::Less, alpha).map_err(stats_failure)?;
            serde_json::to_value(&result).expect("plain struct")
        }
        TestArg::Prop => {
            let (won_a, n_a) = wins(group_a);
            let (won_b, n_b) = wins(group_b);
            let ra = proportion_z_test(won_a, n_a, 0.5, Tail::Greater, alpha)
                .map_err(stats_failure)?;
            let rb = proportion_z_test(won_b, n_b, 0.5, Tail::Greater, alpha)
                .map_err(stats_failure)?;
            json!({ "group_a": ra, "group_b": rb })
        }
    };
    emit(&serde_json::to_string_pretty(&output).expect("plain json"))
}
