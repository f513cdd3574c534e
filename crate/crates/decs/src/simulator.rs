//! Synthetic market execution.
//!
//! Trades run against a block-stamped set of constant-product pools. All pool
//! math is integer math on 256-bit amounts with flooring at every division,
//! matching on-chain behavior; intermediate products are computed at full
//! width so `reserve_out * amount_in` cannot overflow silently.
//!
//! A failed swap is not an error of the simulator: it comes back as a trace
//! with `reverted` set, exactly like a revert observed on chain, and the
//! filtering layer decides what to do with it. The only hard error is asking
//! to simulate at a block the pool snapshot was not taken at.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::builder::TradeRequest;
use crate::primitives::{Address, U256};

pub const FEE_DENOMINATOR: u32 = 1_000_000;

/// Fixed transaction overhead added on top of per-pool swap gas.
pub const DEFAULT_BASE_GAS_OVERHEAD: u64 = 21_000;

/// One constant-product pool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pool {
    pub id: String,
    /// Routing venue this pool belongs to ("oneinch", "uniswap", ...). Route
    /// search is always scoped to one venue.
    pub venue: String,
    pub token0: Address,
    pub token1: Address,
    pub reserve0: U256,
    pub reserve1: U256,
    /// Swap fee in parts per million, below 1_000_000.
    pub fee_ppm: u32,
    pub gas_per_swap: u64,
}

impl Pool {
    pub fn other_token(&self, token: &Address) -> Option<Address> {
        if *token == self.token0 {
            Some(self.token1)
        } else if *token == self.token1 {
            Some(self.token0)
        } else {
            None
        }
    }

    pub fn connects(&self, a: &Address, b: &Address) -> bool {
        (self.token0 == *a && self.token1 == *b) || (self.token0 == *b && self.token1 == *a)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SwapError {
    #[error("pool {pool} does not hold token {token}")]
    UnknownToken { pool: String, token: Address },
    #[error("swap input amount is zero")]
    ZeroAmountIn,
    #[error("swap output floors to zero")]
    OutputZero,
    #[error("reserve arithmetic left the 256-bit range")]
    ReserveOverflow,
}

/// Executes one swap against a pool copy. Returns the floored output amount
/// and the updated pool. The full input (fee included) lands in the input
/// reserve; only the effective input participates in the quote.
pub fn swap_cpmm(pool: &Pool, token_in: &Address, amount_in: &U256) -> Result<(U256, Pool), SwapError> {
    if amount_in.is_zero() {
        return Err(SwapError::ZeroAmountIn);
    }
    let (reserve_in, reserve_out, into_token0) = if *token_in == pool.token0 {
        (&pool.reserve0, &pool.reserve1, true)
    } else if *token_in == pool.token1 {
        (&pool.reserve1, &pool.reserve0, false)
    } else {
        return Err(SwapError::UnknownToken { pool: pool.id.clone(), token: *token_in });
    };

    let fee_keep = BigUint::from(FEE_DENOMINATOR - pool.fee_ppm);
    let denom = BigUint::from(FEE_DENOMINATOR);
    let in_eff = amount_in.biguint() * fee_keep / denom;
    let numer = reserve_out.biguint() * &in_eff;
    let divisor = reserve_in.biguint() + &in_eff;
    let out = numer / divisor;
    if out == BigUint::from(0u8) {
        return Err(SwapError::OutputZero);
    }
    let amount_out = U256::from_biguint(out).map_err(|_| SwapError::ReserveOverflow)?;

    let new_in = reserve_in.checked_add(amount_in).map_err(|_| SwapError::ReserveOverflow)?;
    let new_out = reserve_out
        .checked_sub(&amount_out)
        .expect("output is a strict fraction of the reserve");
    let mut updated = pool.clone();
    if into_token0 {
        updated.reserve0 = new_in;
        updated.reserve1 = new_out;
    } else {
        updated.reserve1 = new_in;
        updated.reserve0 = new_out;
    }
    Ok((amount_out, updated))
}

/// All pools known at one block.
#[derive(Debug, Clone)]
pub struct PoolSet {
    pub block_number: u64,
    pools: BTreeMap<String, Pool>,
}

#[derive(Debug, Error)]
pub enum PoolFileError {
    #[error("cannot read pool file: {0}")]
    Io(#[from] std::io::Error),
    #[error("pool file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("pool {id}: reserves must be positive")]
    EmptyReserve { id: String },
    #[error("pool {id}: fee_ppm {fee_ppm} is not below 1000000")]
    BadFee { id: String, fee_ppm: u32 },
    #[error("duplicate pool id {id}")]
    DuplicateId { id: String },
}

#[derive(Serialize, Deserialize)]
struct PoolRow {
    id: String,
    venue: String,
    token0: Address,
    token1: Address,
    reserve0: U256,
    reserve1: U256,
    fee_ppm: u32,
    gas_per_swap: u64,
}

#[derive(Serialize, Deserialize)]
struct PoolFile {
    block_number: u64,
    pools: Vec<PoolRow>,
}

impl PoolSet {
    pub fn new(block_number: u64, pools: Vec<Pool>) -> Result<PoolSet, PoolFileError> {
        let mut map = BTreeMap::new();
        for p in pools {
            if p.reserve0.is_zero() || p.reserve1.is_zero() {
                return Err(PoolFileError::EmptyReserve { id: p.id });
            }
            if p.fee_ppm >= FEE_DENOMINATOR {
                return Err(PoolFileError::BadFee { id: p.id, fee_ppm: p.fee_ppm });
            }
            if map.contains_key(&p.id) {
                return Err(PoolFileError::DuplicateId { id: p.id });
            }
            map.insert(p.id.clone(), p);
        }
        Ok(PoolSet { block_number, pools: map })
    }

    pub fn load(path: &Path) -> Result<PoolSet, PoolFileError> {
        let file: PoolFile = serde_json::from_str(&fs::read_to_string(path)?)?;
        let pools = file
            .pools
            .into_iter()
            .map(|r| Pool {
                id: r.id,
                venue: r.venue,
                token0: r.token0,
                token1: r.token1,
                reserve0: r.reserve0,
                reserve1: r.reserve1,
                fee_ppm: r.fee_ppm,
                gas_per_swap: r.gas_per_swap,
            })
            .collect();
        PoolSet::new(file.block_number, pools)
    }

    pub fn get(&self, id: &str) -> Option<&Pool> {
        self.pools.get(id)
    }

    /// Pools in id order, so every traversal is deterministic.
    pub fn pools(&self) -> impl Iterator<Item = &Pool> {
        self.pools.values()
    }

    pub fn len(&self) -> usize {
        self.pools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pools.is_empty()
    }

    /// Subset visible to one routing venue, same block stamp.
    pub fn venue_subset(&self, venue: &str) -> PoolSet {
        PoolSet {
            block_number: self.block_number,
            pools: self
                .pools
                .iter()
                .filter(|(_, p)| p.venue == venue)
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }
}

/// One executed hop in a trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub pool_id: String,
    pub token_in: Address,
    pub amount_in: U256,
    pub amount_out: U256,
    pub gas: u64,
}

/// Raw outcome of executing a trade, successful or reverted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub steps: Vec<TraceStep>,
    /// Total gas including the base transaction overhead.
    pub gas_used: u64,
    pub reverted: bool,
    pub revert_reason: Option<String>,
}

/// Distilled execution outcome consumed by the metrics layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub actual_in: U256,
    pub actual_out: U256,
    pub gas_used: u64,
    pub reverted: bool,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("pool snapshot is at block {pool_block} but the request simulates block {sim_block}")]
    BlockMismatch { pool_block: u64, sim_block: u64 },
    #[error("route references pool {id} missing from the snapshot")]
    UnknownPool { id: String },
    #[error("execution backend failure: {0}")]
    Backend(String),
}

/// Anything that can turn a trade request into a trace.
pub trait ExecutionBackend {
    fn execute(&self, request: &TradeRequest, pools: &PoolSet) -> Result<SimulationTrace, SimError>;
}

/// In-process backend that walks the route over private pool copies.
#[derive(Debug, Clone)]
pub struct SyntheticAmm {
    pub base_gas_overhead: u64,
}

impl Default for SyntheticAmm {
    fn default() -> Self {
        SyntheticAmm { base_gas_overhead: DEFAULT_BASE_GAS_OVERHEAD }
    }
}

impl ExecutionBackend for SyntheticAmm {
    fn execute(&self, request: &TradeRequest, pools: &PoolSet) -> Result<SimulationTrace, SimError> {
        let mut steps = Vec::with_capacity(request.route.hops.len());
        let mut gas = self.base_gas_overhead;
        let mut amount = request.amount_in.clone();
        for (i, pool_id) in request.route.hops.iter().enumerate() {
            let pool = pools.get(pool_id).ok_or(SimError::UnknownPool { id: pool_id.clone() })?;
            let token_in = request.route.token_path[i];
            match swap_cpmm(pool, &token_in, &amount) {
                Ok((out, _updated)) => {
                    gas += pool.gas_per_swap;
                    steps.push(TraceStep {
                        pool_id: pool_id.clone(),
                        token_in,
                        amount_in: amount.clone(),
                        amount_out: out.clone(),
                        gas: pool.gas_per_swap,
                    });
                    amount = out;
                }
                Err(e) => {
                    return Ok(SimulationTrace {
                        steps,
                        gas_used: gas,
                        reverted: true,
                        revert_reason: Some(e.to_string()),
                    });
                }
            }
        }
        Ok(SimulationTrace { steps, gas_used: gas, reverted: false, revert_reason: None })
    }
}

/// Runs `request` on `backend` after checking the snapshot is for the block
/// the trade is meant to execute at.
pub fn simulate(
    request: &TradeRequest,
    backend: &dyn ExecutionBackend,
    pools: &PoolSet,
) -> Result<SimulationTrace, SimError> {
    if pools.block_number != request.sim_block {
        return Err(SimError::BlockMismatch {
            pool_block: pools.block_number,
            sim_block: request.sim_block,
        });
    }
    backend.execute(request, pools)
}

/// Reduces a trace to the amounts that actually moved. Reverts are carried
/// through as data; a non-reverted trace with no steps should not happen and
/// is defensively converted into a reverted result.
pub fn parse_trace(trace: &SimulationTrace, request: &TradeRequest) -> ExecutionResult {
    if trace.reverted {
        return ExecutionResult {
            actual_in: U256::zero(),
            actual_out: U256::zero(),
            gas_used: trace.gas_used,
            reverted: true,
        };
    }
    let (first, last) = match (trace.steps.first(), trace.steps.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => {
            return ExecutionResult {
                actual_in: request.amount_in.clone(),
                actual_out: U256::zero(),
                gas_used: trace.gas_used,
                reverted: true,
            }
        }
    };
    ExecutionResult {
        actual_in: first.amount_in.clone(),
        actual_out: last.amount_out.clone(),
        gas_used: trace.gas_used,
        reverted: false,
    }
}

/// JSON-RPC envelope for a trace-call against a remote node. The pipeline
/// never requires this path; it exists so a debug-trace backend can be slotted
/// in without touching callers.
pub fn build_trace_call(request: &TradeRequest, block: u64) -> serde_json::Value {
    serde_json::json!({
        "jsonrpc": "2.0",
        "id": 1,
        "method": "debug_traceCall",
        "params": [
            {
                "from": request.wallet.to_hex(),
                "to": request.target,
                "gas": format!("0x{:x}", request.gas_limit),
                "gasPrice": request.gas_price.to_hex(),
            },
            format!("0x{block:x}"),
            { "tracer": "callTracer" }
        ]
    })
}

/// Parses the `result` member of a trace-call response into a trace.
pub fn parse_trace_response(response: &serde_json::Value) -> Result<SimulationTrace, SimError> {
    let result = response
        .get("result")
        .ok_or_else(|| SimError::Backend("response has no result member".into()))?;
    serde_json::from_value(result.clone())
        .map_err(|e| SimError::Backend(format!("malformed trace payload: {e}")))
}

/// Replays pre-recorded traces in order; the stand-in for a trace-RPC node in
/// interface tests.
pub struct CannedTraceBackend {
    responses: Mutex<std::collections::VecDeque<SimulationTrace>>,
}

impl CannedTraceBackend {
    pub fn new(responses: Vec<SimulationTrace>) -> Self {
        CannedTraceBackend { responses: Mutex::new(responses.into()) }
    }
}

impl ExecutionBackend for CannedTraceBackend {
    fn execute(&self, _request: &TradeRequest, _pools: &PoolSet) -> Result<SimulationTrace, SimError> {
        self.responses
            .lock()
            .expect("canned backend lock poisoned")
            .pop_front()
            .ok_or_else(|| SimError::Backend("canned trace queue exhausted".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::Route;

    fn tok(byte: u8) -> Address {
        Address([byte; 20])
    }

    fn pool(id: &str, t0: u8, t1: u8, r0: u64, r1: u64, fee_ppm: u32) -> Pool {
        Pool {
            id: id.into(),
            venue: "test".into(),
            token0: tok(t0),
            token1: tok(t1),
            reserve0: U256::from_u64(r0),
            reserve1: U256::from_u64(r1),
            fee_ppm,
            gas_per_swap: 60_000,
        }
    }

    fn request(hops: &[&str], path: &[u8], amount: u64, sim_block: u64) -> TradeRequest {
        TradeRequest {
            wallet: tok(0xaa),
            target: "test".into(),
            src_token: tok(path[0]),
            dst_token: tok(*path.last().unwrap()),
            amount_in: U256::from_u64(amount),
            route: Route {
                hops: hops.iter().map(|s| s.to_string()).collect(),
                token_path: path.iter().map(|b| tok(*b)).collect(),
            },
            gas_price: U256::from_u64(25_000_000_000),
            gas_limit: 300_000,
            sim_block,
        }
    }

    #[test]
    fn feeless_swap_floors_output() {
        let p = pool("p", 1, 2, 1_000, 1_000, 0);
        let (out, updated) = swap_cpmm(&p, &tok(1), &U256::from_u64(100)).unwrap();
        // 1000 * 100 / 1100 = 90.909..., floored.
        assert_eq!(out, U256::from_u64(90));
        assert_eq!(updated.reserve0, U256::from_u64(1_100));
        assert_eq!(updated.reserve1, U256::from_u64(910));
    }

    #[test]
    fn fee_is_floored_before_the_quote() {
        let p = pool("p", 1, 2, 1_000, 1_000, 3_000);
        // Effective input: 100 * 997000 / 1000000 = 99 (floored from 99.7),
        // quote: 1000 * 99 / 1099 = 90.08 -> 90.
        let (out, updated) = swap_cpmm(&p, &tok(1), &U256::from_u64(100)).unwrap();
        assert_eq!(out, U256::from_u64(90));
        // The whole input, fee included, joins the reserve.
        assert_eq!(updated.reserve0, U256::from_u64(1_100));
    }

    #[test]
    fn product_never_decreases() {
        let p = pool("p", 1, 2, 1_000, 1_000, 0);
        let (out, updated) = swap_cpmm(&p, &tok(1), &U256::from_u64(333)).unwrap();
        let before = p.reserve0.biguint() * p.reserve1.biguint();
        let after = updated.reserve0.biguint() * updated.reserve1.biguint();
        assert!(after >= before, "k must not shrink: {before} -> {after}");
        assert!(out < p.reserve1);
    }

    #[test]
    fn zero_input_is_a_precondition_error() {
        let p = pool("p", 1, 2, 1_000, 1_000, 0);
        assert_eq!(swap_cpmm(&p, &tok(1), &U256::zero()), Err(SwapError::ZeroAmountIn));
    }

    #[test]
    fn foreign_token_is_rejected() {
        let p = pool("p", 1, 2, 1_000, 1_000, 0);
        assert!(matches!(
            swap_cpmm(&p, &tok(9), &U256::from_u64(10)),
            Err(SwapError::UnknownToken { .. })
        ));
    }

    #[test]
    fn dust_input_that_floors_to_nothing_errors() {
        let p = pool("p", 1, 2, 1_000_000, 10, 0);
        assert_eq!(swap_cpmm(&p, &tok(1), &U256::from_u64(1)), Err(SwapError::OutputZero));
    }

    #[test]
    fn simulate_requires_matching_block() {
        let pools = PoolSet::new(100, vec![pool("p", 1, 2, 1_000, 1_000, 0)]).unwrap();
        let req = request(&["p"], &[1, 2], 100, 101);
        let backend = SyntheticAmm::default();
        assert!(matches!(
            simulate(&req, &backend, &pools),
            Err(SimError::BlockMismatch { pool_block: 100, sim_block: 101 })
        ));
    }

    #[test]
    fn two_hop_trade_accumulates_gas() {
        let pools = PoolSet::new(
            100,
            vec![
                pool("a", 1, 2, 1_000_000, 1_000_000, 0),
                pool("b", 2, 3, 1_000_000, 1_000_000, 0),
            ],
        )
        .unwrap();
        let req = request(&["a", "b"], &[1, 2, 3], 10_000, 100);
        let trace = simulate(&req, &SyntheticAmm::default(), &pools).unwrap();
        assert!(!trace.reverted);
        assert_eq!(trace.gas_used, 21_000 + 60_000 + 60_000);
        assert_eq!(trace.steps.len(), 2);
        let result = parse_trace(&trace, &req);
        assert_eq!(result.actual_in, U256::from_u64(10_000));
        assert_eq!(result.actual_out, trace.steps[1].amount_out);
    }

    #[test]
    fn mid_route_failure_is_a_reverted_trace_not_an_error() {
        let pools = PoolSet::new(
            100,
            vec![
                pool("a", 1, 2, 1_000_000_000, 10, 0),
                pool("b", 2, 3, 1_000, 1_000, 0),
            ],
        )
        .unwrap();
        // First hop floors to zero output, so the route cannot continue.
        let req = request(&["a", "b"], &[1, 2, 3], 5, 100);
        let trace = simulate(&req, &SyntheticAmm::default(), &pools).unwrap();
        assert!(trace.reverted);
        assert!(trace.revert_reason.as_deref().unwrap().contains("zero"));
        let result = parse_trace(&trace, &req);
        assert!(result.reverted);
        assert!(result.actual_out.is_zero());
    }

    #[test]
    fn trace_without_steps_converts_to_revert() {
        let req = request(&["a"], &[1, 2], 100, 5);
        let trace =
            SimulationTrace { steps: vec![], gas_used: 21_000, reverted: false, revert_reason: None };
        let result = parse_trace(&trace, &req);
        assert!(result.reverted);
    }

    #[test]
    fn simulation_leaves_the_snapshot_untouched() {
        let pools = PoolSet::new(100, vec![pool("p", 1, 2, 1_000, 1_000, 0)]).unwrap();
        let req = request(&["p"], &[1, 2], 100, 100);
        simulate(&req, &SyntheticAmm::default(), &pools).unwrap();
        assert_eq!(pools.get("p").unwrap().reserve0, U256::from_u64(1_000));
    }

    #[test]
    fn concurrent_simulations_match_serial() {
        let pools = PoolSet::new(
            7,
            vec![
                pool("a", 1, 2, 5_000_000, 3_000_000, 3_000),
                pool("b", 2, 3, 9_000_000, 4_000_000, 500),
            ],
        )
        .unwrap();
        let reqs: Vec<TradeRequest> =
            (1..=16).map(|i| request(&["a", "b"], &[1, 2, 3], i * 1_000, 7)).collect();
        let serial: Vec<SimulationTrace> = reqs
            .iter()
            .map(|r| simulate(r, &SyntheticAmm::default(), &pools).unwrap())
            .collect();
        let concurrent: Vec<SimulationTrace> = std::thread::scope(|scope| {
            let handles: Vec<_> = reqs
                .iter()
                .map(|r| {
                    let pools = &pools;
                    scope.spawn(move || simulate(r, &SyntheticAmm::default(), pools).unwrap())
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        assert_eq!(serial, concurrent);
    }

    #[test]
    fn canned_backend_replays_and_exhausts() {
        let trace = SimulationTrace {
            steps: vec![TraceStep {
                pool_id: "p".into(),
                token_in: tok(1),
                amount_in: U256::from_u64(100),
                amount_out: U256::from_u64(90),
                gas: 60_000,
            }],
            gas_used: 81_000,
            reverted: false,
            revert_reason: None,
        };
        let backend = CannedTraceBackend::new(vec![trace.clone()]);
        let pools = PoolSet::new(100, vec![]).unwrap();
        let req = request(&["p"], &[1, 2], 100, 100);
        assert_eq!(simulate(&req, &backend, &pools).unwrap(), trace);
        assert!(matches!(simulate(&req, &backend, &pools), Err(SimError::Backend(_))));
    }

    #[test]
    fn trace_call_envelope_roundtrips() {
        let req = request(&["p"], &[1, 2], 100, 123);
        let envelope = build_trace_call(&req, 123);
        assert_eq!(envelope["method"], "debug_traceCall");
        assert_eq!(envelope["params"][1], "0x7b");

        let trace = SimulationTrace {
            steps: vec![],
            gas_used: 21_000,
            reverted: true,
            revert_reason: Some("out of ticks".into()),
        };
        let response = serde_json::json!({"jsonrpc": "2.0", "id": 1, "result": trace});
        assert_eq!(parse_trace_response(&response).unwrap(), trace);
        assert!(parse_trace_response(&serde_json::json!({"error": {}})).is_err());
    }
}
