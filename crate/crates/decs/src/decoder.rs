//! Calldata decoding for registered router functions.
//!
//! The decoder understands the ABI v2 subset that swap entry points actually
//! use: `uint256`, `address`, `bool`, `bytesN`, dynamic `bytes`, single-level
//! dynamic arrays of static scalars, and flat tuples of static scalars.
//! Anything nested deeper is rejected up front with `UnsupportedType` rather
//! than half-decoded.
//!
//! Layout rules: arguments start after the 4-byte selector; static values sit
//! in the head, one 32-byte word per scalar; each dynamic value contributes an
//! offset word to the head pointing at its tail (length word plus padded
//! payload), with offsets relative to the start of the argument block.
//!
//! Decoding is strict. Every word is bounds-checked before it is read, address
//! and `bytesN` padding must be zero, and booleans must be canonical 0 or 1.
//! Strictness is what makes the fuzz guarantee hold: a truncated buffer always
//! surfaces as a typed error, never as a value read past the end or a silently
//! mangled amount. Extra bytes after the last tail are legal (routers append
//! permit blobs and referral tags) and are reported, not rejected.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::RawTransaction;
use crate::primitives::{bytes_to_hex, hex_to_bytes, Address, TxHash, U256};

/// ABI type of one function parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AbiType {
    Uint256,
    Address,
    Bool,
    /// `bytesN`, 1 ..= 32.
    FixedBytes(usize),
    /// Dynamic `bytes`.
    Bytes,
    /// Dynamic array; the element must be a static scalar.
    Array(Box<AbiType>),
    /// Inline tuple; members must be static scalars.
    Tuple(Vec<AbiType>),
}

impl AbiType {
    /// Parses the canonical textual form used in registry files, e.g.
    /// `"uint256"`, `"bytes4"`, `"address[]"`, `"(address,uint256)"`.
    pub fn parse(s: &str) -> Result<AbiType, String> {
        let s = s.trim();
        if let Some(elem) = s.strip_suffix("[]") {
            return Ok(AbiType::Array(Box::new(AbiType::parse(elem)?)));
        }
        if let Some(inner) = s.strip_prefix('(') {
            let inner = inner.strip_suffix(')').ok_or_else(|| format!("unbalanced tuple: {s}"))?;
            let mut members = Vec::new();
            let mut depth = 0usize;
            let mut start = 0usize;
            for (i, c) in inner.char_indices() {
                match c {
                    '(' => depth += 1,
                    ')' => depth = depth.checked_sub(1).ok_or(format!("unbalanced tuple: {s}"))?,
                    ',' if depth == 0 => {
                        members.push(AbiType::parse(&inner[start..i])?);
                        start = i + 1;
                    }
                    _ => {}
                }
            }
            if !inner.is_empty() {
                members.push(AbiType::parse(&inner[start..])?);
            }
            if members.is_empty() {
                return Err(format!("empty tuple: {s}"));
            }
            return Ok(AbiType::Tuple(members));
        }
        match s {
            "uint256" => Ok(AbiType::Uint256),
            "address" => Ok(AbiType::Address),
            "bool" => Ok(AbiType::Bool),
            "bytes" => Ok(AbiType::Bytes),
            _ => {
                if let Some(n) = s.strip_prefix("bytes") {
                    let n: usize = n.parse().map_err(|_| format!("unknown type: {s}"))?;
                    if (1..=32).contains(&n) {
                        return Ok(AbiType::FixedBytes(n));
                    }
                    return Err(format!("bytes width out of range: {s}"));
                }
                Err(format!("unknown type: {s}"))
            }
        }
    }

    pub fn canonical(&self) -> String {
        match self {
            AbiType::Uint256 => "uint256".into(),
            AbiType::Address => "address".into(),
            AbiType::Bool => "bool".into(),
            AbiType::FixedBytes(n) => format!("bytes{n}"),
            AbiType::Bytes => "bytes".into(),
            AbiType::Array(e) => format!("{}[]", e.canonical()),
            AbiType::Tuple(ms) => {
                let inner: Vec<String> = ms.iter().map(|m| m.canonical()).collect();
                format!("({})", inner.join(","))
            }
        }
    }

    pub fn is_dynamic(&self) -> bool {
        match self {
            AbiType::Bytes | AbiType::Array(_) => true,
            AbiType::Tuple(ms) => ms.iter().any(|m| m.is_dynamic()),
            _ => false,
        }
    }

    fn is_static_scalar(&self) -> bool {
        matches!(
            self,
            AbiType::Uint256 | AbiType::Address | AbiType::Bool | AbiType::FixedBytes(_)
        )
    }

    /// Number of 32-byte words this type occupies in the head.
    fn head_words(&self) -> usize {
        match self {
            AbiType::Tuple(ms) if !self.is_dynamic() => ms.iter().map(|m| m.head_words()).sum(),
            _ => 1,
        }
    }

    /// Rejects types outside the supported subset: nested dynamics, dynamic
    /// tuple members, arrays of composites.
    pub fn ensure_supported(&self) -> Result<(), DecodeError> {
        match self {
            AbiType::FixedBytes(n) if !(1..=32).contains(n) => {
                Err(DecodeError::UnsupportedType { ty: self.canonical() })
            }
            AbiType::Array(elem) => {
                if elem.is_static_scalar() {
                    Ok(())
                } else {
                    Err(DecodeError::UnsupportedType { ty: self.canonical() })
                }
            }
            AbiType::Tuple(members) => {
                if members.iter().all(|m| m.is_static_scalar()) {
                    Ok(())
                } else {
                    Err(DecodeError::UnsupportedType { ty: self.canonical() })
                }
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for AbiType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

/// A decoded parameter value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AbiValue {
    Uint(U256),
    Address(Address),
    Bool(bool),
    FixedBytes(Vec<u8>),
    Bytes(Vec<u8>),
    Array(Vec<AbiValue>),
    Tuple(Vec<AbiValue>),
}

impl AbiValue {
    /// JSON rendering used by the decode CLI: amounts as hex strings, bytes as
    /// hex, composites as arrays.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            AbiValue::Uint(v) => serde_json::Value::String(v.to_hex()),
            AbiValue::Address(a) => serde_json::Value::String(a.to_hex()),
            AbiValue::Bool(b) => serde_json::Value::Bool(*b),
            AbiValue::FixedBytes(b) | AbiValue::Bytes(b) => {
                serde_json::Value::String(bytes_to_hex(b))
            }
            AbiValue::Array(vs) | AbiValue::Tuple(vs) => {
                serde_json::Value::Array(vs.iter().map(|v| v.to_json()).collect())
            }
        }
    }
}

/// Swap-semantic role a parameter can play.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwapRole {
    SrcToken,
    DstToken,
    AmountIn,
    MinOut,
    Deadline,
    Recipient,
}

impl SwapRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            SwapRole::SrcToken => "src_token",
            SwapRole::DstToken => "dst_token",
            SwapRole::AmountIn => "amount_in",
            SwapRole::MinOut => "min_out",
            SwapRole::Deadline => "deadline",
            SwapRole::Recipient => "recipient",
        }
    }
}

/// Shape and meaning of one registered function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSig {
    pub name: String,
    /// Protocol label, e.g. "uniswap" or "oneinch"; doubles as the pool venue
    /// the protocol routes over.
    pub protocol: String,
    pub params: Vec<AbiType>,
    /// Role to parameter position. A token role may point at an `address[]`
    /// path parameter: the source is the first element, the destination the
    /// last.
    pub semantics: BTreeMap<SwapRole, usize>,
    /// True for exact-output variants (input amount is a cap, not a spend).
    pub exact_output: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("no registry entries for contract {contract}")]
    UnknownContract { contract: Address },
    #[error("selector {selector} not registered for contract {contract}")]
    UnknownSelector { contract: Address, selector: String },
    #[error("calldata of {len} bytes is too short to carry a selector")]
    CalldataTooShort { len: usize },
    #[error("offset word points outside calldata (offset {offset}, available {available})")]
    OffsetOutOfBounds { offset: u64, available: usize },
    #[error("expected a 32-byte word at byte {at}, only {available} bytes available")]
    WordUnderflow { at: usize, available: usize },
    #[error("declared length {len} runs past the end of calldata")]
    LengthOverflow { len: u64 },
    #[error("type {ty} is outside the supported subset")]
    UnsupportedType { ty: String },
    #[error("non-canonical encoding: {what}")]
    NonCanonical { what: &'static str },
    #[error("signature lacks a usable `{role}` mapping")]
    SemanticsMissing { role: &'static str },
    #[error("decoded swap has zero input amount")]
    ZeroAmount,
}

/// The output of [`abi_decode`]: one value per parameter, plus how many bytes
/// after the encoded region were ignored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedCall {
    pub values: Vec<AbiValue>,
    pub trailing_bytes: usize,
}

fn read_word<'a>(args: &'a [u8], at: usize) -> Result<&'a [u8], DecodeError> {
    let end = at
        .checked_add(32)
        .ok_or(DecodeError::WordUnderflow { at, available: args.len() })?;
    if end > args.len() {
        return Err(DecodeError::WordUnderflow { at, available: args.len() });
    }
    Ok(&args[at..end])
}

/// Reads a word that must fit in a usize and land inside the buffer.
fn read_offset(args: &[u8], at: usize) -> Result<usize, DecodeError> {
    let word = read_word(args, at)?;
    let value = U256::from_be_bytes(word).expect("32 bytes always fit");
    let offset = value
        .as_u64()
        .ok_or(DecodeError::OffsetOutOfBounds { offset: u64::MAX, available: args.len() })?;
    if offset as usize > args.len() {
        return Err(DecodeError::OffsetOutOfBounds { offset, available: args.len() });
    }
    Ok(offset as usize)
}

fn read_length(args: &[u8], at: usize) -> Result<usize, DecodeError> {
    let word = read_word(args, at)?;
    let value = U256::from_be_bytes(word).expect("32 bytes always fit");
    let len = value.as_u64().ok_or(DecodeError::LengthOverflow { len: u64::MAX })?;
    if len as usize > args.len() {
        return Err(DecodeError::LengthOverflow { len });
    }
    Ok(len as usize)
}

fn decode_static(args: &[u8], at: usize, ty: &AbiType) -> Result<(AbiValue, usize), DecodeError> {
    match ty {
        AbiType::Uint256 => {
            let word = read_word(args, at)?;
            Ok((AbiValue::Uint(U256::from_be_bytes(word).expect("word fits")), 1))
        }
        AbiType::Address => {
            let word = read_word(args, at)?;
            if word[..12].iter().any(|&b| b != 0) {
                return Err(DecodeError::NonCanonical { what: "address padding not zero" });
            }
            let mut a = [0u8; 20];
            a.copy_from_slice(&word[12..]);
            Ok((AbiValue::Address(Address(a)), 1))
        }
        AbiType::Bool => {
            let word = read_word(args, at)?;
            if word[..31].iter().any(|&b| b != 0) || word[31] > 1 {
                return Err(DecodeError::NonCanonical { what: "bool word not 0 or 1" });
            }
            Ok((AbiValue::Bool(word[31] == 1), 1))
        }
        AbiType::FixedBytes(n) => {
            let word = read_word(args, at)?;
            if word[*n..].iter().any(|&b| b != 0) {
                return Err(DecodeError::NonCanonical { what: "bytesN padding not zero" });
            }
            Ok((AbiValue::FixedBytes(word[..*n].to_vec()), 1))
        }
        AbiType::Tuple(members) => {
            let mut vals = Vec::with_capacity(members.len());
            let mut cursor = at;
            let mut words = 0usize;
            for m in members {
                let (v, w) = decode_static(args, cursor, m)?;
                cursor += w * 32;
                words += w;
                vals.push(v);
            }
            Ok((AbiValue::Tuple(vals), words))
        }
        AbiType::Bytes | AbiType::Array(_) => {
            unreachable!("dynamic types are decoded through their tail")
        }
    }
}

/// Decodes a dynamic value whose tail starts at `offset`. Returns the value
/// and the end of the consumed region.
fn decode_tail(args: &[u8], offset: usize, ty: &AbiType) -> Result<(AbiValue, usize), DecodeError> {
    match ty {
        AbiType::Bytes => {
            let len = read_length(args, offset)?;
            let padded = len.div_ceil(32) * 32;
            let data_start = offset + 32;
            let end = data_start
                .checked_add(padded)
                .ok_or(DecodeError::LengthOverflow { len: len as u64 })?;
            if end > args.len() {
                return Err(DecodeError::LengthOverflow { len: len as u64 });
            }
            if args[data_start + len..end].iter().any(|&b| b != 0) {
                return Err(DecodeError::NonCanonical { what: "bytes padding not zero" });
            }
            Ok((AbiValue::Bytes(args[data_start..data_start + len].to_vec()), end))
        }
        AbiType::Array(elem) => {
            let count = read_length(args, offset)?;
            let elem_words = elem.head_words();
            let total = count
                .checked_mul(elem_words * 32)
                .ok_or(DecodeError::LengthOverflow { len: count as u64 })?;
            let data_start = offset + 32;
            let end = data_start
                .checked_add(total)
                .ok_or(DecodeError::LengthOverflow { len: count as u64 })?;
            if end > args.len() {
                return Err(DecodeError::LengthOverflow { len: count as u64 });
            }
            let mut vals = Vec::with_capacity(count);
            for i in 0..count {
                let (v, _) = decode_static(args, data_start + i * elem_words * 32, elem)?;
                vals.push(v);
            }
            Ok((AbiValue::Array(vals), end))
        }
        _ => unreachable!("static types are decoded in the head"),
    }
}

/// Decodes the argument block of `calldata` (after the selector) against the
/// parameter list of `sig`.
pub fn abi_decode(calldata: &[u8], sig: &FunctionSig) -> Result<DecodedCall, DecodeError> {
    if calldata.len() < 4 {
        return Err(DecodeError::CalldataTooShort { len: calldata.len() });
    }
    for p in &sig.params {
        p.ensure_supported()?;
    }
    let args = &calldata[4..];
    let head_len: usize = sig.params.iter().map(|p| p.head_words()).sum::<usize>() * 32;
    let mut cursor = 0usize;
    let mut extent = head_len;
    let mut values = Vec::with_capacity(sig.params.len());
    for p in &sig.params {
        if p.is_dynamic() {
            let offset = read_offset(args, cursor)?;
            let (v, end) = decode_tail(args, offset, p)?;
            extent = extent.max(end);
            values.push(v);
            cursor += 32;
        } else {
            let (v, words) = decode_static(args, cursor, p)?;
            values.push(v);
            cursor += words * 32;
        }
    }
    Ok(DecodedCall { values, trailing_bytes: args.len() - extent })
}

/// A registry row: which function lives behind (contract, selector).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistryEntry {
    pub contract: Address,
    pub chain_id: u64,
    pub selector: [u8; 4],
    pub sig: FunctionSig,
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("cannot read registry: {0}")]
    Io(#[from] std::io::Error),
    #[error("registry is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad ABI type in registry entry {name:?}: {detail}")]
    BadType { name: String, detail: String },
    #[error("bad selector {selector:?}: must be 4 bytes of 0x hex")]
    BadSelector { selector: String },
    #[error("bad address {address:?} in registry")]
    BadAddress { address: String },
    #[error("duplicate registry entry for ({contract}, {selector})")]
    Duplicate { contract: Address, selector: String },
    #[error("unsupported parameter type in entry {name:?}: {ty}")]
    Unsupported { name: String, ty: String },
}

#[derive(Deserialize)]
struct RegistryRow {
    contract: String,
    chain_id: u64,
    selector: String,
    name: String,
    protocol: String,
    params: Vec<String>,
    #[serde(default)]
    semantics: BTreeMap<SwapRole, usize>,
    #[serde(default)]
    exact_output: bool,
}

/// Lookup table from (contract address, 4-byte selector) to function shape.
pub struct SelectorRegistry {
    entries: Vec<RegistryEntry>,
    by_key: HashMap<(Address, [u8; 4]), usize>,
    contracts: HashSet<Address>,
}

impl SelectorRegistry {
    pub fn load(path: &Path) -> Result<SelectorRegistry, RegistryError> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    pub fn from_json_str(json: &str) -> Result<SelectorRegistry, RegistryError> {
        let rows: Vec<RegistryRow> = serde_json::from_str(json)?;
        let mut entries = Vec::with_capacity(rows.len());
        let mut by_key = HashMap::new();
        let mut contracts = HashSet::new();
        for row in rows {
            let contract = Address::from_hex(&row.contract)
                .map_err(|_| RegistryError::BadAddress { address: row.contract.clone() })?;
            let sel_bytes = hex_to_bytes(&row.selector)
                .map_err(|_| RegistryError::BadSelector { selector: row.selector.clone() })?;
            let selector: [u8; 4] = sel_bytes
                .try_into()
                .map_err(|_| RegistryError::BadSelector { selector: row.selector.clone() })?;
            let mut params = Vec::with_capacity(row.params.len());
            for p in &row.params {
                let ty = AbiType::parse(p).map_err(|detail| RegistryError::BadType {
                    name: row.name.clone(),
                    detail,
                })?;
                ty.ensure_supported().map_err(|_| RegistryError::Unsupported {
                    name: row.name.clone(),
                    ty: ty.canonical(),
                })?;
                params.push(ty);
            }
            let entry = RegistryEntry {
                contract,
                chain_id: row.chain_id,
                selector,
                sig: FunctionSig {
                    name: row.name,
                    protocol: row.protocol,
                    params,
                    semantics: row.semantics,
                    exact_output: row.exact_output,
                },
            };
            if by_key.insert((contract, selector), entries.len()).is_some() {
                return Err(RegistryError::Duplicate {
                    contract,
                    selector: bytes_to_hex(&selector),
                });
            }
            contracts.insert(contract);
            entries.push(entry);
        }
        Ok(SelectorRegistry { entries, by_key, contracts })
    }

    /// Resolves the function behind a call to `contract`.
    pub fn match_selector(
        &self,
        contract: &Address,
        calldata: &[u8],
    ) -> Result<&RegistryEntry, DecodeError> {
        if calldata.len() < 4 {
            return Err(DecodeError::CalldataTooShort { len: calldata.len() });
        }
        if !self.contracts.contains(contract) {
            return Err(DecodeError::UnknownContract { contract: *contract });
        }
        let selector: [u8; 4] = calldata[..4].try_into().expect("length checked");
        self.by_key
            .get(&(*contract, selector))
            .map(|&i| &self.entries[i])
            .ok_or(DecodeError::UnknownSelector {
                contract: *contract,
                selector: bytes_to_hex(&selector),
            })
    }

    /// Selector-only lookup for ad-hoc decoding when the target contract is
    /// not known; scans entries in file order so the result is deterministic.
    pub fn match_selector_any(&self, calldata: &[u8]) -> Result<&RegistryEntry, DecodeError> {
        if calldata.len() < 4 {
            return Err(DecodeError::CalldataTooShort { len: calldata.len() });
        }
        let selector: [u8; 4] = calldata[..4].try_into().expect("length checked");
        self.entries.iter().find(|e| e.selector == selector).ok_or(DecodeError::UnknownSelector {
            contract: Address::ZERO,
            selector: bytes_to_hex(&selector),
        })
    }

    pub fn entries(&self) -> &[RegistryEntry] {
        &self.entries
    }
}

/// A normalized swap extracted from one transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwapIntent {
    pub src_token: Address,
    pub dst_token: Address,
    pub amount_in: U256,
    pub min_out: Option<U256>,
    pub deadline: Option<U256>,
    pub recipient: Option<Address>,
    pub exact_output: bool,
    pub protocol: String,
    pub origin: TxHash,
}

fn role_token(
    values: &[AbiValue],
    idx: usize,
    role: SwapRole,
    first: bool,
) -> Result<Address, DecodeError> {
    let missing = DecodeError::SemanticsMissing { role: role.as_str() };
    match values.get(idx) {
        Some(AbiValue::Address(a)) => Ok(*a),
        Some(AbiValue::Array(items)) => {
            let item = if first { items.first() } else { items.last() };
            match item {
                Some(AbiValue::Address(a)) => Ok(*a),
                _ => Err(missing),
            }
        }
        _ => Err(missing),
    }
}

fn role_uint(values: &[AbiValue], idx: usize, role: SwapRole) -> Result<U256, DecodeError> {
    match values.get(idx) {
        Some(AbiValue::Uint(v)) => Ok(v.clone()),
        _ => Err(DecodeError::SemanticsMissing { role: role.as_str() }),
    }
}

/// Builds a [`SwapIntent`] from decoded values using the signature's role map.
/// The native-asset sentinel address is replaced by `wrapped_native` so the
/// rest of the pipeline only ever sees ERC-20 pairs.
pub fn normalize(
    sig: &FunctionSig,
    decoded: &DecodedCall,
    tx: &RawTransaction,
    wrapped_native: Address,
) -> Result<SwapIntent, DecodeError> {
    let values = &decoded.values;
    let src_idx = *sig
        .semantics
        .get(&SwapRole::SrcToken)
        .ok_or(DecodeError::SemanticsMissing { role: "src_token" })?;
    let dst_idx = *sig
        .semantics
        .get(&SwapRole::DstToken)
        .ok_or(DecodeError::SemanticsMissing { role: "dst_token" })?;
    let amount_idx = *sig
        .semantics
        .get(&SwapRole::AmountIn)
        .ok_or(DecodeError::SemanticsMissing { role: "amount_in" })?;

    let mut src_token = role_token(values, src_idx, SwapRole::SrcToken, true)?;
    let mut dst_token = role_token(values, dst_idx, SwapRole::DstToken, false)?;
    let amount_in = role_uint(values, amount_idx, SwapRole::AmountIn)?;
    if amount_in.is_zero() {
        return Err(DecodeError::ZeroAmount);
    }
    if src_token == Address::NATIVE_SENTINEL {
        src_token = wrapped_native;
    }
    if dst_token == Address::NATIVE_SENTINEL {
        dst_token = wrapped_native;
    }

    let min_out = match sig.semantics.get(&SwapRole::MinOut) {
        Some(&i) => Some(role_uint(values, i, SwapRole::MinOut)?),
        None => None,
    };
    let deadline = match sig.semantics.get(&SwapRole::Deadline) {
        Some(&i) => Some(role_uint(values, i, SwapRole::Deadline)?),
        None => None,
    };
    let recipient = match sig.semantics.get(&SwapRole::Recipient) {
        Some(&i) => Some(role_token(values, i, SwapRole::Recipient, true)?),
        None => None,
    };

    Ok(SwapIntent {
        src_token,
        dst_token,
        amount_in,
        min_out,
        deadline,
        recipient,
        exact_output: sig.exact_output,
        protocol: sig.protocol.clone(),
        origin: tx.tx_hash,
    })
}
