//! Deterministic synthetic corpora: feed captures, pool snapshots, price
//! tables, selector registries, wallet snapshots, and chain configs that the
//! end-to-end and CLI tests run against.
//!
//! Everything is seeded, so two calls with the same arguments produce
//! byte-identical files.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use decs::decoder::{AbiType, AbiValue};
use decs::ingest::{serialize_record, IntentFill, RawTransaction, TxKind};
use decs::metrics::ChainConfig;
use decs::primitives::{Address, TxHash, U256};
use decs::simulator::{Pool, DEFAULT_BASE_GAS_OVERHEAD};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::route_oracle::{best_route, OracleEnv};

pub const SRC_TOKEN: Address = Address([0x11; 20]);
pub const DST_TOKEN: Address = Address([0x22; 20]);
pub const ROUTER: Address = Address([0x7a; 20]);
pub const WALLET: Address = Address([0xaa; 20]);

/// `swapExactTokensForTokens(uint256,uint256,address[],address,uint256)`.
pub const SWAP_SELECTOR: [u8; 4] = [0x38, 0xed, 0x17, 0x39];

pub const SNAPSHOT_BLOCK: u64 = 1_000;
pub const GAS_PRICE_WEI: u64 = 25_000_000_000;
pub const SWAP_GAS: u64 = 60_000;
pub const BASELINE_FEE_PPM: u32 = 0;
pub const COMPETITOR_FEE_PPM: u32 = 3_000;
pub const SRC_PRICE: f64 = 1.0;
pub const DST_PRICE: f64 = 1.0;
pub const NATIVE_PRICE: f64 = 3_000.0;
pub const MAX_BLOCK_LAG: u64 = 4;

/// Mainnet wrapped-native address, matching the built-in chain table.
pub fn native_token() -> Address {
    Address::from_hex("0xc02aaa39b223fe8d0a0e5c4f27ead9083c756cc2").unwrap()
}

fn pow10(exp: u32) -> BigUint {
    BigUint::from(10u32).pow(exp)
}

fn u256(v: BigUint) -> U256 {
    U256::from_biguint(v).expect("fixture value fits in 256 bits")
}

/// Both venues quote the same pair from identical reserves; only the fee
/// differs, so the baseline's edge over the competitor is exactly the fee.
pub fn benchmark_pools() -> Vec<Pool> {
    let reserve = u256(pow10(25));
    vec![
        Pool {
            id: "oneinch-src-dst".into(),
            venue: "oneinch".into(),
            token0: SRC_TOKEN,
            token1: DST_TOKEN,
            reserve0: reserve.clone(),
            reserve1: reserve.clone(),
            fee_ppm: BASELINE_FEE_PPM,
            gas_per_swap: SWAP_GAS,
        },
        Pool {
            id: "uniswap-src-dst".into(),
            venue: "uniswap".into(),
            token0: SRC_TOKEN,
            token1: DST_TOKEN,
            reserve0: reserve.clone(),
            reserve1: reserve,
            fee_ppm: COMPETITOR_FEE_PPM,
            gas_per_swap: SWAP_GAS,
        },
    ]
}

pub fn pools_json(block_number: u64, pools: &[Pool]) -> String {
    let rows: Vec<_> = pools
        .iter()
        .map(|p| {
            json!({
                "id": p.id,
                "venue": p.venue,
                "token0": p.token0,
                "token1": p.token1,
                "reserve0": p.reserve0,
                "reserve1": p.reserve1,
                "fee_ppm": p.fee_ppm,
                "gas_per_swap": p.gas_per_swap,
            })
        })
        .collect();
    serde_json::to_string_pretty(&json!({ "block_number": block_number, "pools": rows }))
        .expect("plain json")
}

pub fn registry_json() -> String {
    serde_json::to_string_pretty(&json!([{
        "contract": ROUTER,
        "chain_id": 1,
        "selector": "0x38ed1739",
        "name": "swapExactTokensForTokens",
        "protocol": "uniswap",
        "params": ["uint256", "uint256", "address[]", "address", "uint256"],
        "semantics": {
            "amount_in": 0,
            "min_out": 1,
            "src_token": 2,
            "dst_token": 2,
            "recipient": 3,
            "deadline": 4
        },
        "exact_output": false
    }]))
    .expect("plain json")
}

pub fn prices_csv() -> String {
    let mut out = String::from("token,block,usd_price,source\n");
    let native = serde_json::to_value(native_token()).unwrap();
    let native = native.as_str().unwrap().to_string();
    let src = serde_json::to_value(SRC_TOKEN).unwrap().as_str().unwrap().to_string();
    let dst = serde_json::to_value(DST_TOKEN).unwrap().as_str().unwrap().to_string();
    out.push_str(&format!("{src},1,{SRC_PRICE},primary_engine\n"));
    out.push_str(&format!("{dst},1,{DST_PRICE},primary_engine\n"));
    out.push_str(&format!("{native},1,{NATIVE_PRICE},primary_engine\n"));
    out
}

pub fn wallets_json() -> String {
    let src = serde_json::to_value(SRC_TOKEN).unwrap();
    serde_json::to_string_pretty(&json!([{
        "address": WALLET,
        "native_balance": u256(pow10(21)),
        "token_balances": { src.as_str().unwrap(): u256(pow10(27)) },
        "approvals": [[src, "oneinch"]]
    }]))
    .expect("plain json")
}

pub fn chains_json(instant_gas_price_wei: Option<u64>) -> String {
    let cfg = ChainConfig {
        chain_id: 1,
        max_block_lag: MAX_BLOCK_LAG,
        native_token: native_token(),
        gas_price_unit: 1_000_000_000_000_000_000,
        instant_gas_price: instant_gas_price_wei.map(U256::from_u64),
    };
    serde_json::to_string_pretty(&vec![cfg]).expect("plain json")
}

fn swap_params() -> Vec<AbiType> {
    vec![
        AbiType::Uint256,
        AbiType::Uint256,
        AbiType::Array(Box::new(AbiType::Address)),
        AbiType::Address,
        AbiType::Uint256,
    ]
}

pub fn swap_calldata(amount_in: &U256, min_out: u64, recipient: Address, deadline: u64) -> Vec<u8> {
    let values = vec![
        AbiValue::Uint(amount_in.clone()),
        AbiValue::Uint(U256::from_u64(min_out)),
        AbiValue::Array(vec![AbiValue::Address(SRC_TOKEN), AbiValue::Address(DST_TOKEN)]),
        AbiValue::Address(recipient),
        AbiValue::Uint(U256::from_u64(deadline)),
    ];
    crate::abi_ref::encode_call(SWAP_SELECTOR, &swap_params(), &values)
}

fn tx_hash(i: usize) -> TxHash {
    let mut bytes = [0u8; 32];
    bytes[24..].copy_from_slice(&(i as u64).to_be_bytes());
    TxHash(bytes)
}

/// Paths of one corpus on disk, plus the raw input amounts and the analytic
/// oracle environment matching its geometry.
pub struct Corpus {
    pub feed: PathBuf,
    pub pools: PathBuf,
    pub prices: PathBuf,
    pub registry: PathBuf,
    pub wallets: PathBuf,
    pub chains: PathBuf,
    pub amounts: Vec<BigUint>,
    pub oracle: OracleEnv,
}

fn oracle_env() -> OracleEnv {
    let pools = benchmark_pools();
    OracleEnv {
        baseline: pools.iter().filter(|p| p.venue == "oneinch").cloned().collect(),
        competitor: pools.iter().filter(|p| p.venue == "uniswap").cloned().collect(),
        src: SRC_TOKEN,
        dst: DST_TOKEN,
        src_decimals: 18,
        dst_decimals: 18,
        src_price: SRC_PRICE,
        dst_price: DST_PRICE,
        native_price: NATIVE_PRICE,
        gas_price_wei: GAS_PRICE_WEI,
        base_gas: DEFAULT_BASE_GAS_OVERHEAD,
        max_hops: 3,
        wei_per_native: 1e18,
    }
}

fn write_common(dir: &Path, instant_gas: Option<u64>) -> io::Result<Corpus> {
    fs::create_dir_all(dir)?;
    let corpus = Corpus {
        feed: dir.join("feed.jsonl"),
        pools: dir.join("pools.json"),
        prices: dir.join("prices.csv"),
        registry: dir.join("registry.json"),
        wallets: dir.join("wallets.json"),
        chains: dir.join("chains.json"),
        amounts: Vec::new(),
        oracle: oracle_env(),
    };
    fs::write(&corpus.pools, pools_json(SNAPSHOT_BLOCK, &benchmark_pools()))?;
    fs::write(&corpus.prices, prices_csv())?;
    fs::write(&corpus.registry, registry_json())?;
    fs::write(&corpus.wallets, wallets_json())?;
    fs::write(&corpus.chains, chains_json(instant_gas))?;
    Ok(corpus)
}

/// Seeded classic-mode corpus: `count` mined swaps through the competitor
/// router, $1,000 to $5,000 each, all within the freshness window.
pub fn write_classic_corpus(dir: &Path, seed: u64, count: usize) -> io::Result<Corpus> {
    let mut corpus = write_common(dir, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut feed = String::new();
    for i in 0..count {
        let dollars: u64 = rng.gen_range(1_000..=5_000);
        let amount = BigUint::from(dollars) * pow10(18);
        let amount_u256 = u256(amount.clone());
        let tx = RawTransaction {
            chain_id: 1,
            tx_hash: tx_hash(i),
            sender: WALLET,
            recipient: ROUTER,
            value: U256::zero(),
            gas_price: U256::from_u64(GAS_PRICE_WEI),
            gas_limit: 250_000,
            calldata: swap_calldata(&amount_u256, 1, WALLET, 9_999_999_999),
            observed_block: SNAPSHOT_BLOCK,
            mined_block: Some(SNAPSHOT_BLOCK + rng.gen_range(0..=MAX_BLOCK_LAG)),
            kind: TxKind::Mined,
            intent_fill: None,
        };
        feed.push_str(&serialize_record(&tx));
        feed.push('\n');
        corpus.amounts.push(amount);
    }
    fs::write(&corpus.feed, feed)?;
    Ok(corpus)
}

/// Seeded intent-mode corpus: `count` orders filled on the competitor venue.
/// Fill outputs are computed with the reference router so the corpus stays
/// consistent with its own pool snapshot.
pub fn write_intent_corpus(dir: &Path, seed: u64, count: usize) -> io::Result<Corpus> {
    let mut corpus = write_common(dir, Some(GAS_PRICE_WEI))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut feed = String::new();
    for i in 0..count {
        let dollars: u64 = rng.gen_range(1_000..=5_000);
        let amount = BigUint::from(dollars) * pow10(18);
        let filled = best_route(&corpus.oracle.competitor, &SRC_TOKEN, &DST_TOKEN, &amount, 3)
            .expect("competitor pool routes the pair")
            .output;
        let tx = RawTransaction {
            chain_id: 1,
            tx_hash: tx_hash(i),
            sender: WALLET,
            recipient: ROUTER,
            value: U256::zero(),
            gas_price: U256::zero(),
            gas_limit: 0,
            calldata: Vec::new(),
            observed_block: SNAPSHOT_BLOCK,
            mined_block: None,
            kind: TxKind::IntentOrder,
            intent_fill: Some(IntentFill {
                src_token: SRC_TOKEN,
                dst_token: DST_TOKEN,
                amount_in: u256(amount.clone()),
                amount_out: u256(filled),
                fill_block: SNAPSHOT_BLOCK + rng.gen_range(0..=MAX_BLOCK_LAG),
                protocol: "fusion".into(),
            }),
        };
        feed.push_str(&serialize_record(&tx));
        feed.push('\n');
        corpus.amounts.push(amount);
    }
    fs::write(&corpus.feed, feed)?;
    Ok(corpus)
}
