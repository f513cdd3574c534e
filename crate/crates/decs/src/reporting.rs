//! Persistence and report generation.
//!
//! Records live in an append-only JSONL file, each line wrapped in a CRC32
//! envelope, next to a manifest with the count and block range. The format is
//! deliberately boring: a crash mid-append leaves at most one torn line,
//! which reopening detects by checksum and truncates, and the previous
//! manifest stays consistent because it is only rewritten (atomically) after
//! a successful append.
//!
//! On top of the store sit pure read-side aggregations: the benchmark mart
//! (per-winner rows plus volume/uplift footer) and the uplift histogram.
//! Given the same records and scope they are byte-identical on every rebuild.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{BucketScheme, ComparisonRecord, Mode, Winner};
use crate::stats::percentile;

pub const SCHEMA_VERSION: u32 = 1;
pub const RECORDS_FILE: &str = "records.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DEFAULT_HIST_WINDOW: f64 = 1.5;
pub const DEFAULT_HIST_BINS: usize = 60;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store I/O failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("store line {line} is not valid JSON: {detail}")]
    Json { line: usize, detail: String },
    #[error("store schema version {found}, this build reads {expected}")]
    SchemaVersionMismatch { found: u32, expected: u32 },
}

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("scope matches no records")]
    EmptyScope,
    #[error("histogram needs a positive window and at least one bin")]
    BadHistogramShape,
}

/// Sidecar summary of a record file. `count` always equals the number of
/// valid lines; the block range covers the simulation blocks seen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub count: u64,
    pub first_block: Option<u64>,
    pub last_block: Option<u64>,
}

impl Default for Manifest {
    fn default() -> Manifest {
        Manifest { schema_version: SCHEMA_VERSION, count: 0, first_block: None, last_block: None }
    }
}

/// One line on disk: schema version, CRC32 of the record's JSON bytes (8 hex
/// digits), and the record itself.
#[derive(Serialize)]
struct LineOut<'a> {
    v: u32,
    crc: String,
    record: &'a ComparisonRecord,
}

#[derive(Deserialize)]
struct LineIn<'a> {
    v: u32,
    crc: String,
    #[serde(borrow)]
    record: &'a serde_json::value::RawValue,
}

fn crc_hex(bytes: &[u8]) -> String {
    format!("{:08x}", crc32fast::hash(bytes))
}

/// Append-only store of comparison records in a directory.
#[derive(Debug)]
pub struct RecordStore {
    dir: PathBuf,
    manifest: Manifest,
}

impl RecordStore {
    /// Opens (or creates) a store. Scans the record file, truncates any torn
    /// tail left by a crash, and reconciles the manifest with what is
    /// actually on disk.
    pub fn open(dir: &Path) -> Result<RecordStore, StoreError> {
        fs::create_dir_all(dir)?;
        let manifest_path = dir.join(MANIFEST_FILE);
        if manifest_path.exists() {
            let manifest: Manifest =
                serde_json::from_str(&fs::read_to_string(&manifest_path)?)
                    .map_err(|e| StoreError::Json { line: 0, detail: e.to_string() })?;
            if manifest.schema_version != SCHEMA_VERSION {
                return Err(StoreError::SchemaVersionMismatch {
                    found: manifest.schema_version,
                    expected: SCHEMA_VERSION,
                });
            }
        }
        let mut store = RecordStore { dir: dir.to_path_buf(), manifest: Manifest::default() };
        let scanned = store.scan_and_repair()?;
        store.manifest = scanned;
        store.write_manifest()?;
        Ok(store)
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn records_path(&self) -> PathBuf {
        self.dir.join(RECORDS_FILE)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.dir.join(MANIFEST_FILE)
    }

    /// Walks the record file line by line. The first line that fails to
    /// parse, fails its checksum, or lacks a terminating newline marks a torn
    /// write: the file is truncated right before it. Returns the manifest
    /// describing the surviving lines.
    fn scan_and_repair(&self) -> Result<Manifest, StoreError> {
        let path = self.records_path();
        let mut manifest = Manifest::default();
        if !path.exists() {
            return Ok(manifest);
        }
        let file = File::open(&path)?;
        let mut reader = BufReader::new(file);
        let mut offset: u64 = 0;
        let mut line_no = 0usize;
        let mut buf = Vec::new();
        loop {
            buf.clear();
            let read = reader.read_until(b'\n', &mut buf)?;
            if read == 0 {
                break;
            }
            line_no += 1;
            let complete = buf.last() == Some(&b'\n');
            let valid = complete && Self::validate_line(&buf[..buf.len() - 1], line_no)?;
            if !valid {
                drop(reader);
                let file = OpenOptions::new().write(true).open(&path)?;
                file.set_len(offset)?;
                file.sync_all()?;
                break;
            }
            offset += read as u64;
            manifest.count += 1;
            let record: ComparisonRecord = {
                let parsed: LineIn = serde_json::from_slice(&buf[..buf.len() - 1])
                    .expect("validated just above");
                serde_json::from_str(parsed.record.get())
                    .map_err(|e| StoreError::Json { line: line_no, detail: e.to_string() })?
            };
            Self::extend_range(&mut manifest, record.sim_block);
        }
        Ok(manifest)
    }

    /// True when the line is a well-formed envelope whose checksum matches.
    /// A wrong schema version is a hard error rather than a torn line; it
    /// means the file was written by an incompatible build, not interrupted.
    fn validate_line(bytes: &[u8], _line_no: usize) -> Result<bool, StoreError> {
        let parsed: LineIn = match serde_json::from_slice(bytes) {
            Ok(p) => p,
            Err(_) => return Ok(false),
        };
        if parsed.v != SCHEMA_VERSION {
            return Err(StoreError::SchemaVersionMismatch {
                found: parsed.v,
                expected: SCHEMA_VERSION,
            });
        }
        Ok(parsed.crc == crc_hex(parsed.record.get().as_bytes()))
    }

    fn extend_range(manifest: &mut Manifest, block: u64) {
        manifest.first_block =
            Some(manifest.first_block.map_or(block, |b| b.min(block)));
        manifest.last_block = Some(manifest.last_block.map_or(block, |b| b.max(block)));
    }

    fn write_manifest(&self) -> Result<(), StoreError> {
        let tmp = self.dir.join(format!("{MANIFEST_FILE}.tmp"));
        let mut file = File::create(&tmp)?;
        file.write_all(serde_json::to_string_pretty(&self.manifest).expect("plain struct").as_bytes())?;
        file.write_all(b"\n")?;
        file.sync_all()?;
        fs::rename(&tmp, self.manifest_path())?;
        Ok(())
    }

    /// Appends records and returns the updated manifest. The data file is
    /// synced before the manifest is rewritten, so a crash between the two
    /// leaves extra valid lines that the next open reconciles.
    pub fn append(&mut self, records: &[ComparisonRecord]) -> Result<&Manifest, StoreError> {
        let mut file = OpenOptions::new().create(true).append(true).open(self.records_path())?;
        for record in records {
            let body = serde_json::to_string(record).expect("record is plain data");
            let line = LineOut { v: SCHEMA_VERSION, crc: crc_hex(body.as_bytes()), record };
            let mut encoded = serde_json::to_string(&line).expect("envelope is plain data");
            encoded.push('\n');
            file.write_all(encoded.as_bytes())?;
            self.manifest.count += 1;
            Self::extend_range(&mut self.manifest, record.sim_block);
        }
        file.sync_all()?;
        self.write_manifest()?;
        Ok(&self.manifest)
    }

    pub fn read_all(&self) -> Result<Vec<ComparisonRecord>, StoreError> {
        let path = self.records_path();
        if !path.exists() {
            return Ok(Vec::new());
        }
        let mut text = String::new();
        BufReader::new(File::open(&path)?).read_to_string(&mut text)?;
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let parsed: LineIn = serde_json::from_str(line)
                .map_err(|e| StoreError::Json { line: i + 1, detail: e.to_string() })?;
            records.push(
                serde_json::from_str(parsed.record.get())
                    .map_err(|e| StoreError::Json { line: i + 1, detail: e.to_string() })?,
            );
        }
        Ok(records)
    }
}

/// Record filter for reports. Every field is optional; an empty scope
/// matches everything. `scheme` is not a filter but the bucket scheme the
/// mart should group by (stored buckets are labels from the run's scheme).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scope {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chains: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub competitor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<BucketScheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bucket: Option<String>,
    /// Inclusive simulation-block range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_range: Option<(u64, u64)>,
}

impl Scope {
    pub fn from_json_str(text: &str) -> Result<Scope, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn matches(&self, record: &ComparisonRecord) -> bool {
        if let Some(chains) = &self.chains {
            if !chains.contains(&record.chain_id) {
                return false;
            }
        }
        if let Some(mode) = self.mode {
            if record.mode != mode {
                return false;
            }
        }
        if let Some(competitor) = &self.competitor {
            if &record.competitor != competitor {
                return false;
            }
        }
        if let Some(bucket) = &self.bucket {
            if &record.bucket != bucket {
                return false;
            }
        }
        if let Some((lo, hi)) = self.block_range {
            if record.sim_block < lo || record.sim_block > hi {
                return false;
            }
        }
        true
    }

    pub fn filter<'a>(&self, records: &'a [ComparisonRecord]) -> Vec<&'a ComparisonRecord> {
        records.iter().filter(|r| self.matches(r)).collect()
    }
}

/// One mart row: a winner class with its count, share, and the distribution
/// of USD uplift inside the class. Distribution fields are absent for empty
/// classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartRow {
    pub winner: String,
    pub comparisons: u64,
    /// Share of all scoped comparisons, in percent.
    pub pct_won: f64,
    pub p05: Option<f64>,
    pub median: Option<f64>,
    pub mean: Option<f64>,
    pub p95: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartFooter {
    pub total_volume_usd: f64,
    pub total_uplift_usd: f64,
    /// Total uplift as a share of total volume, in percent.
    pub total_uplift_pct: f64,
    /// Baseline wins per competitor win; absent when there are no losses.
    pub win_loss_ratio: Option<f64>,
    /// Rounded presentation, "27x", or "NoLosses" when undefined.
    pub win_loss_label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTable {
    pub scope: Scope,
    pub rows: Vec<MartRow>,
    pub footer: MartFooter,
}

pub const ROW_TOTAL: &str = "TOTAL";
pub const ROW_BASELINE: &str = "1inch";
pub const ROW_PARITY: &str = "Parity";
pub const ROW_COMPETITORS: &str = "Competitors";

fn distribution(uplifts: &[f64]) -> (Option<f64>, Option<f64>, Option<f64>, Option<f64>) {
    if uplifts.is_empty() {
        return (None, None, None, None);
    }
    let mean = uplifts.iter().sum::<f64>() / uplifts.len() as f64;
    let p = |q| percentile(uplifts, q).expect("non-empty, finite");
    (Some(p(5.0)), Some(p(50.0)), Some(mean), Some(p(95.0)))
}

fn mart_row(winner: &str, uplifts: &[f64], total: u64) -> MartRow {
    let (p05, median, mean, p95) = distribution(uplifts);
    MartRow {
        winner: winner.to_string(),
        comparisons: uplifts.len() as u64,
        pct_won: if total == 0 { 0.0 } else { 100.0 * uplifts.len() as f64 / total as f64 },
        p05,
        median,
        mean,
        p95,
    }
}

/// Aggregates scoped records into the benchmark table: a TOTAL row and one
/// row per winner class, with USD uplift percentiles per class, plus the
/// volume/uplift footer.
pub fn build_mart(records: &[ComparisonRecord], scope: &Scope) -> Result<BenchTable, ReportError> {
    let scoped = scope.filter(records);
    if scoped.is_empty() {
        return Err(ReportError::EmptyScope);
    }
    let total = scoped.len() as u64;
    let all: Vec<f64> = scoped.iter().map(|r| r.uplift_usd).collect();
    let class = |w: Winner| -> Vec<f64> {
        scoped.iter().filter(|r| r.winner == w).map(|r| r.uplift_usd).collect()
    };
    let wins = class(Winner::Oneinch);
    let draws = class(Winner::Draw);
    let losses = class(Winner::Competitor);

    let rows = vec![
        mart_row(ROW_TOTAL, &all, total),
        mart_row(ROW_BASELINE, &wins, total),
        mart_row(ROW_PARITY, &draws, total),
        mart_row(ROW_COMPETITORS, &losses, total),
    ];

    let total_volume_usd: f64 = scoped.iter().map(|r| r.v_in_usd).sum();
    let total_uplift_usd: f64 = all.iter().sum();
    let win_loss_ratio = if losses.is_empty() {
        None
    } else {
        Some(wins.len() as f64 / losses.len() as f64)
    };
    let footer = MartFooter {
        total_volume_usd,
        total_uplift_usd,
        total_uplift_pct: if total_volume_usd == 0.0 {
            0.0
        } else {
            100.0 * total_uplift_usd / total_volume_usd
        },
        win_loss_ratio,
        win_loss_label: win_loss_ratio
            .map(crate::metrics::format_ratio)
            .unwrap_or_else(|| "NoLosses".to_string()),
    };
    Ok(BenchTable { scope: scope.clone(), rows, footer })
}

/// Uplift-percentage histogram over a symmetric window. Bins are
/// lower-inclusive; the top edge of the window folds into the last bin so a
/// value exactly at +window is kept. Values outside the window tally in the
/// overflow counters rather than disappearing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub window: f64,
    pub bins: usize,
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub overflow_low: u64,
    pub overflow_high: u64,
    pub total: u64,
    pub scope: Scope,
}

pub fn emit_histogram(
    records: &[ComparisonRecord],
    scope: &Scope,
    window: f64,
    bins: usize,
) -> Result<Histogram, ReportError> {
    if !(window > 0.0) || bins == 0 {
        return Err(ReportError::BadHistogramShape);
    }
    let scoped = scope.filter(records);
    if scoped.is_empty() {
        return Err(ReportError::EmptyScope);
    }
    let (lo, hi) = (-window, window);
    let step = (hi - lo) / bins as f64;
    let mut hist = Histogram {
        window,
        bins,
        lo,
        hi,
        counts: vec![0; bins],
        overflow_low: 0,
        overflow_high: 0,
        total: scoped.len() as u64,
        scope: scope.clone(),
    };
    for record in scoped {
        let v = record.uplift_pct;
        if v < lo {
            hist.overflow_low += 1;
        } else if v > hi {
            hist.overflow_high += 1;
        } else {
            let idx = (((v - lo) / step).floor() as usize).min(bins - 1);
            hist.counts[idx] += 1;
        }
    }
    Ok(hist)
}

fn fmt_usd(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.2}")).unwrap_or_default()
}

fn fmt_pct(v: f64) -> String {
    format!("{v:.2}%")
}

/// Writes a mart as CSV: the four winner rows, then `metric,value` footer
/// rows. USD amounts carry two decimals, percentages two decimals and a
/// percent sign.
pub fn write_mart_csv<W: Write>(table: &BenchTable, out: W) -> Result<(), StoreError> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    let io_err = |e: csv::Error| StoreError::Io(std::io::Error::other(e));
    w.write_record(["winner", "comparisons", "pct_won", "p05", "median", "mean", "p95"])
        .map_err(io_err)?;
    for row in &table.rows {
        w.write_record([
            row.winner.clone(),
            row.comparisons.to_string(),
            fmt_pct(row.pct_won),
            fmt_usd(row.p05),
            fmt_usd(row.median),
            fmt_usd(row.mean),
            fmt_usd(row.p95),
        ])
        .map_err(io_err)?;
    }
    w.write_record(["total_volume_usd", &fmt_usd(Some(table.footer.total_volume_usd))])
        .map_err(io_err)?;
    w.write_record(["total_uplift_usd", &fmt_usd(Some(table.footer.total_uplift_usd))])
        .map_err(io_err)?;
    w.write_record(["total_uplift_pct", &fmt_pct(table.footer.total_uplift_pct)])
        .map_err(io_err)?;
    w.write_record(["win_loss_ratio", &table.footer.win_loss_label]).map_err(io_err)?;
    w.flush()?;
    Ok(())
}

/// Flat CSV export of records, full float precision, one row per comparison.
pub fn write_records_csv<W: Write>(
    records: &[ComparisonRecord],
    out: W,
) -> Result<(), StoreError> {
    let mut w = csv::Writer::from_writer(out);
    let io_err = |e: csv::Error| StoreError::Io(std::io::Error::other(e));
    w.write_record([
        "chain_id",
        "mode",
        "competitor",
        "sim_block",
        "bucket",
        "winner",
        "v_in_usd",
        "a_eff_in",
        "a_eff_out",
        "epsilon_usd",
        "uplift_usd",
        "uplift_pct",
    ])
    .map_err(io_err)?;
    for r in records {
        let mode = match r.mode {
            Mode::Classic => "classic",
            Mode::Intent => "intent",
        };
        let winner = match r.winner {
            Winner::Oneinch => "oneinch",
            Winner::Draw => "draw",
            Winner::Competitor => "competitor",
        };
        w.write_record([
            r.chain_id.to_string(),
            mode.to_string(),
            r.competitor.clone(),
            r.sim_block.to_string(),
            r.bucket.clone(),
            winner.to_string(),
            r.v_in_usd.to_string(),
            r.a_eff_in.to_string(),
            r.a_eff_out.to_string(),
            r.epsilon_usd.to_string(),
            r.uplift_usd.to_string(),
            r.uplift_pct.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a drop-reason summary as pretty JSON with stable key order.
pub fn write_drop_summary<W: Write>(
    counts: &BTreeMap<String, u64>,
    mut out: W,
) -> Result<(), StoreError> {
    out.write_all(serde_json::to_string_pretty(counts).expect("plain map").as_bytes())?;
    out.write_all(b"\n")?;
    Ok(())
}
