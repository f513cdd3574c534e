//! Swap feed ingestion.
//!
//! A feed is newline-delimited JSON, one transaction observation per line,
//! consumed either from a capture file (replay) or a line-oriented socket
//! (stream). Parsing is total: every input line becomes either a
//! [`RawTransaction`] or a [`RejectReason`], so downstream accounting can
//! prove `parsed + rejected == lines read`.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::net::TcpStream;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::primitives::{Address, TxHash, U256};

/// How a transaction entered the feed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxKind {
    /// Already included in a block when observed.
    Mined,
    /// Seen in the mempool; may or may not be mined later.
    Mempool,
    /// An intent order (settlement outcome arrives as a fill, not calldata).
    IntentOrder,
}

impl TxKind {
    fn parse(s: &str) -> Option<TxKind> {
        match s {
            "mined" => Some(TxKind::Mined),
            "mempool" => Some(TxKind::Mempool),
            "intent_order" => Some(TxKind::IntentOrder),
            _ => None,
        }
    }

    fn as_str(&self) -> &'static str {
        match self {
            TxKind::Mined => "mined",
            TxKind::Mempool => "mempool",
            TxKind::IntentOrder => "intent_order",
        }
    }
}

/// Realized settlement of an intent order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntentFill {
    pub src_token: Address,
    pub dst_token: Address,
    /// Amount the maker paid in; always positive.
    pub amount_in: U256,
    /// Amount received; zero means the order expired unfilled.
    pub amount_out: U256,
    /// Block of the last fill; plays the mined-block role for freshness.
    pub fill_block: u64,
    /// Settlement protocol label, e.g. "fusion" or "uniswapx".
    pub protocol: String,
}

/// One observed transaction, either a router call or an intent order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTransaction {
    pub chain_id: u64,
    pub tx_hash: TxHash,
    pub sender: Address,
    pub recipient: Address,
    pub value: U256,
    pub gas_price: U256,
    pub gas_limit: u64,
    pub calldata: Vec<u8>,
    pub observed_block: u64,
    pub mined_block: Option<u64>,
    pub kind: TxKind,
    pub intent_fill: Option<IntentFill>,
}

/// Why a feed line was rejected. `code()` gives the stable counter key used
/// in run summaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectReason {
    BadUtf8,
    BadJson(String),
    MissingField(&'static str),
    NonHex { field: &'static str, detail: String },
    NegativeNumber(&'static str),
    NotAnInteger(&'static str),
    NotAString(&'static str),
    UnknownKind(String),
    /// Kind is `intent_order` but no fill payload is attached.
    MissingIntentFill,
    /// Hash or address with the wrong byte width.
    BadByteLength(&'static str),
    /// Mined block earlier than the observation block.
    BlockOrder { observed: u64, mined: u64 },
    /// Fill amount_in of zero carries no comparable trade.
    ZeroFillAmount,
}

impl RejectReason {
    pub fn code(&self) -> &'static str {
        match self {
            RejectReason::BadUtf8 => "bad_utf8",
            RejectReason::BadJson(_) => "bad_json",
            RejectReason::MissingField(_) => "missing_field",
            RejectReason::NonHex { .. } => "non_hex",
            RejectReason::NegativeNumber(_) => "negative_number",
            RejectReason::NotAnInteger(_) => "not_an_integer",
            RejectReason::NotAString(_) => "not_a_string",
            RejectReason::UnknownKind(_) => "unknown_kind",
            RejectReason::MissingIntentFill => "missing_intent_fill",
            RejectReason::BadByteLength(_) => "bad_byte_length",
            RejectReason::BlockOrder { .. } => "block_order",
            RejectReason::ZeroFillAmount => "zero_fill_amount",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::BadUtf8 => write!(f, "line is not valid UTF-8"),
            RejectReason::BadJson(e) => write!(f, "malformed JSON: {e}"),
            RejectReason::MissingField(name) => write!(f, "missing required field `{name}`"),
            RejectReason::NonHex { field, detail } => {
                write!(f, "field `{field}` is not valid hex: {detail}")
            }
            RejectReason::NegativeNumber(name) => write!(f, "field `{name}` is negative"),
            RejectReason::NotAnInteger(name) => write!(f, "field `{name}` is not an integer"),
            RejectReason::NotAString(name) => write!(f, "field `{name}` is not a string"),
            RejectReason::UnknownKind(k) => write!(f, "unknown kind {k:?}"),
            RejectReason::MissingIntentFill => {
                write!(f, "kind is intent_order but `intent_fill` is absent")
            }
            RejectReason::BadByteLength(name) => write!(f, "field `{name}` has wrong byte width"),
            RejectReason::BlockOrder { observed, mined } => {
                write!(f, "mined_block {mined} precedes observed_block {observed}")
            }
            RejectReason::ZeroFillAmount => write!(f, "intent fill with amount_in of zero"),
        }
    }
}

#[derive(Debug, Error)]
pub enum FeedError {
    #[error("cannot open feed source {source_name:?}: {err}")]
    Unreachable { source_name: String, err: io::Error },
    #[error("feed read failed: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedMode {
    /// Read a capture file to the end.
    Replay,
    /// Read a live socket until the peer closes it.
    Stream,
}

/// A line-delimited feed. Lines come back as raw bytes; UTF-8 validation is
/// part of record parsing so a bad line is counted, not fatal.
pub struct FeedHandle {
    reader: Box<dyn BufRead + Send>,
    mode: FeedMode,
    done: bool,
}

/// Opens a feed. In replay mode `source` is a file path; in stream mode it is
/// a `host:port` endpoint.
pub fn open_feed(source: &str, mode: FeedMode) -> Result<FeedHandle, FeedError> {
    let reader: Box<dyn BufRead + Send> = match mode {
        FeedMode::Replay => {
            let file = File::open(Path::new(source)).map_err(|err| FeedError::Unreachable {
                source_name: source.to_string(),
                err,
            })?;
            Box::new(BufReader::new(file))
        }
        FeedMode::Stream => {
            let sock = TcpStream::connect(source).map_err(|err| FeedError::Unreachable {
                source_name: source.to_string(),
                err,
            })?;
            Box::new(BufReader::new(sock))
        }
    };
    Ok(FeedHandle { reader, mode, done: false })
}

impl FeedHandle {
    /// Wraps an arbitrary reader; used by tests and the fault-injection
    /// harness to emulate a socket cut mid-record.
    pub fn from_reader(reader: Box<dyn BufRead + Send>, mode: FeedMode) -> FeedHandle {
        FeedHandle { reader, mode, done: false }
    }
}

impl Iterator for FeedHandle {
    type Item = io::Result<Vec<u8>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut buf = Vec::new();
        match self.reader.read_until(b'\n', &mut buf) {
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
            Ok(0) => {
                self.done = true;
                None
            }
            Ok(_) => {
                if buf.last() == Some(&b'\n') {
                    buf.pop();
                    if buf.last() == Some(&b'\r') {
                        buf.pop();
                    }
                    Some(Ok(buf))
                } else {
                    // No terminator: a replay file may simply lack a trailing
                    // newline, but on a stream this is a connection cut in the
                    // middle of a record, so the fragment is dropped.
                    self.done = true;
                    match self.mode {
                        FeedMode::Replay => Some(Ok(buf)),
                        FeedMode::Stream => None,
                    }
                }
            }
        }
    }
}

fn get_u64(obj: &serde_json::Map<String, Value>, field: &'static str) -> Result<u64, RejectReason> {
    let v = obj.get(field).ok_or(RejectReason::MissingField(field))?;
    match v {
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                Ok(u)
            } else if n.as_i64().is_some() || n.as_f64().map(|f| f < 0.0).unwrap_or(false) {
                Err(RejectReason::NegativeNumber(field))
            } else {
                Err(RejectReason::NotAnInteger(field))
            }
        }
        _ => Err(RejectReason::NotAnInteger(field)),
    }
}

fn get_str<'a>(
    obj: &'a serde_json::Map<String, Value>,
    field: &'static str,
) -> Result<&'a str, RejectReason> {
    obj.get(field)
        .ok_or(RejectReason::MissingField(field))?
        .as_str()
        .ok_or(RejectReason::NotAString(field))
}

fn get_u256(
    obj: &serde_json::Map<String, Value>,
    field: &'static str,
) -> Result<U256, RejectReason> {
    let s = get_str(obj, field)?;
    U256::from_hex(s).map_err(|e| RejectReason::NonHex { field, detail: e.to_string() })
}

fn get_address(
    obj: &serde_json::Map<String, Value>,
    field: &'static str,
) -> Result<Address, RejectReason> {
    let s = get_str(obj, field)?;
    Address::from_hex(s).map_err(|e| match e {
        crate::primitives::HexError::BadLength { .. } => RejectReason::BadByteLength(field),
        other => RejectReason::NonHex { field, detail: other.to_string() },
    })
}

/// Parses one feed line. Every failure maps to a [`RejectReason`] so callers
/// can keep the loss accounting exact.
pub fn parse_record(line: &[u8]) -> Result<RawTransaction, RejectReason> {
    let text = std::str::from_utf8(line).map_err(|_| RejectReason::BadUtf8)?;
    let value: Value =
        serde_json::from_str(text).map_err(|e| RejectReason::BadJson(e.to_string()))?;
    let obj = value.as_object().ok_or_else(|| RejectReason::BadJson("not an object".into()))?;

    let chain_id = get_u64(obj, "chain_id")?;
    let tx_hash_str = get_str(obj, "tx_hash")?;
    let tx_hash = TxHash::from_hex(tx_hash_str).map_err(|e| match e {
        crate::primitives::HexError::BadLength { .. } => RejectReason::BadByteLength("tx_hash"),
        other => RejectReason::NonHex { field: "tx_hash", detail: other.to_string() },
    })?;
    let sender = get_address(obj, "from")?;
    let recipient = get_address(obj, "to")?;
    let value_wei = get_u256(obj, "value")?;
    let gas_price = get_u256(obj, "gas_price")?;
    let gas_limit = get_u64(obj, "gas_limit")?;
    let input = get_str(obj, "input")?;
    let calldata = crate::primitives::hex_to_bytes(input)
        .map_err(|e| RejectReason::NonHex { field: "input", detail: e.to_string() })?;
    let observed_block = get_u64(obj, "observed_block")?;
    let kind_str = get_str(obj, "kind")?;
    let kind =
        TxKind::parse(kind_str).ok_or_else(|| RejectReason::UnknownKind(kind_str.to_string()))?;

    let mined_block = match obj.get("mined_block") {
        None | Some(Value::Null) => None,
        Some(_) => Some(get_u64(obj, "mined_block")?),
    };
    if let Some(mined) = mined_block {
        if mined < observed_block {
            return Err(RejectReason::BlockOrder { observed: observed_block, mined });
        }
    }

    let intent_fill = match obj.get("intent_fill") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let fill_obj = v
                .as_object()
                .ok_or_else(|| RejectReason::BadJson("intent_fill is not an object".into()))?;
            let amount_in = get_u256(fill_obj, "amount_in")?;
            if amount_in.is_zero() {
                return Err(RejectReason::ZeroFillAmount);
            }
            Some(IntentFill {
                src_token: get_address(fill_obj, "src_token")?,
                dst_token: get_address(fill_obj, "dst_token")?,
                amount_in,
                amount_out: get_u256(fill_obj, "amount_out")?,
                fill_block: get_u64(fill_obj, "fill_block")?,
                protocol: get_str(fill_obj, "protocol")?.to_string(),
            })
        }
    };

    if kind == TxKind::IntentOrder && intent_fill.is_none() {
        return Err(RejectReason::MissingIntentFill);
    }

    Ok(RawTransaction {
        chain_id,
        tx_hash,
        sender,
        recipient,
        value: value_wei,
        gas_price,
        gas_limit,
        calldata,
        observed_block,
        mined_block,
        kind,
        intent_fill,
    })
}

#[derive(Serialize)]
struct WireFill<'a> {
    src_token: &'a Address,
    dst_token: &'a Address,
    amount_in: &'a U256,
    amount_out: &'a U256,
    fill_block: u64,
    protocol: &'a str,
}

#[derive(Serialize)]
struct WireRecord<'a> {
    chain_id: u64,
    tx_hash: &'a TxHash,
    from: &'a Address,
    to: &'a Address,
    value: &'a U256,
    gas_price: &'a U256,
    gas_limit: u64,
    input: String,
    observed_block: u64,
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    mined_block: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    intent_fill: Option<WireFill<'a>>,
}

/// Canonical single-line rendering of a record. Stable field order and
/// minimal hex make the output suitable for hashing in replay checks;
/// `parse_record` inverts it exactly.
pub fn serialize_record(tx: &RawTransaction) -> String {
    let wire = WireRecord {
        chain_id: tx.chain_id,
        tx_hash: &tx.tx_hash,
        from: &tx.sender,
        to: &tx.recipient,
        value: &tx.value,
        gas_price: &tx.gas_price,
        gas_limit: tx.gas_limit,
        input: crate::primitives::bytes_to_hex(&tx.calldata),
        observed_block: tx.observed_block,
        kind: tx.kind.as_str(),
        mined_block: tx.mined_block,
        intent_fill: tx.intent_fill.as_ref().map(|f| WireFill {
            src_token: &f.src_token,
            dst_token: &f.dst_token,
            amount_in: &f.amount_in,
            amount_out: &f.amount_out,
            fill_block: f.fill_block,
            protocol: &f.protocol,
        }),
    };
    serde_json::to_string(&wire).expect("record serialization cannot fail")
}
