//! Independent route search with its own pool arithmetic.
//!
//! The production router and simulator share nothing with this module beyond
//! the `Pool` data type: swap outputs are recomputed here from the raw
//! constant-product formula over `BigUint`, and the search enumerates simple
//! token paths recursively. Agreement between the two is evidence, not
//! tautology.

use decs::primitives::Address;
use decs::simulator::Pool;
use num_bigint::BigUint;
use num_traits::Zero;

/// Floor output of one constant-product swap with a parts-per-million fee on
/// the input side, written directly from the invariant.
pub fn ref_swap_out(
    reserve_in: &BigUint,
    reserve_out: &BigUint,
    fee_ppm: u32,
    amount_in: &BigUint,
) -> BigUint {
    let million = BigUint::from(1_000_000u32);
    let in_eff = amount_in * BigUint::from(1_000_000 - fee_ppm) / &million;
    if in_eff.is_zero() {
        return BigUint::zero();
    }
    reserve_out * &in_eff / (reserve_in + &in_eff)
}

fn pool_out(pool: &Pool, token_in: &Address, amount_in: &BigUint) -> Option<(Address, BigUint)> {
    if *token_in == pool.token0 {
        Some((
            pool.token1,
            ref_swap_out(pool.reserve0.biguint(), pool.reserve1.biguint(), pool.fee_ppm, amount_in),
        ))
    } else if *token_in == pool.token1 {
        Some((
            pool.token0,
            ref_swap_out(pool.reserve1.biguint(), pool.reserve0.biguint(), pool.fee_ppm, amount_in),
        ))
    } else {
        None
    }
}

/// A fully evaluated route candidate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefRoute {
    pub pool_ids: Vec<String>,
    pub output: BigUint,
    /// Sum of per-pool swap gas, excluding any base transaction overhead.
    pub hop_gas: u64,
}

/// Strictly-better ordering: more output, then fewer hops, then
/// lexicographically smaller pool-id sequence.
fn better(a: &RefRoute, b: &RefRoute) -> bool {
    if a.output != b.output {
        return a.output > b.output;
    }
    if a.pool_ids.len() != b.pool_ids.len() {
        return a.pool_ids.len() < b.pool_ids.len();
    }
    a.pool_ids < b.pool_ids
}

/// Exhaustive best route over simple token paths of at most `max_hops`
/// pools. Zero-output routes are not routes.
pub fn best_route(
    pools: &[Pool],
    src: &Address,
    dst: &Address,
    amount_in: &BigUint,
    max_hops: usize,
) -> Option<RefRoute> {
    if src == dst || amount_in.is_zero() {
        return None;
    }
    let mut best: Option<RefRoute> = None;
    let mut visited = vec![*src];
    let mut stack: Vec<String> = Vec::new();
    search(pools, src, dst, amount_in, max_hops, &mut visited, &mut stack, 0, &mut best);
    best
}

#[allow(clippy::too_many_arguments)]
fn search(
    pools: &[Pool],
    here: &Address,
    dst: &Address,
    amount: &BigUint,
    max_hops: usize,
    visited: &mut Vec<Address>,
    stack: &mut Vec<String>,
    gas: u64,
    best: &mut Option<RefRoute>,
) {
    if stack.len() >= max_hops {
        return;
    }
    for pool in pools {
        let Some((next, out)) = pool_out(pool, here, amount) else { continue };
        if visited.contains(&next) || out.is_zero() {
            continue;
        }
        stack.push(pool.id.clone());
        if next == *dst {
            let candidate = RefRoute {
                pool_ids: stack.clone(),
                output: out.clone(),
                hop_gas: gas + pool.gas_per_swap,
            };
            if best.as_ref().map_or(true, |b| better(&candidate, b)) {
                *best = Some(candidate);
            }
        } else {
            visited.push(next);
            search(pools, &next, dst, &out, max_hops, visited, stack, gas + pool.gas_per_swap, best);
            visited.pop();
        }
        stack.pop();
    }
}

/// Fixture geometry for analytic uplift predictions: prices, decimals, gas
/// terms, and the two venues' pools.
#[derive(Debug, Clone)]
pub struct OracleEnv {
    pub baseline: Vec<Pool>,
    pub competitor: Vec<Pool>,
    pub src: Address,
    pub dst: Address,
    pub src_decimals: u32,
    pub dst_decimals: u32,
    pub src_price: f64,
    pub dst_price: f64,
    pub native_price: f64,
    pub gas_price_wei: u64,
    pub base_gas: u64,
    pub max_hops: usize,
    pub wei_per_native: f64,
}

impl OracleEnv {
    fn effective_usd(&self, route: &RefRoute) -> f64 {
        let out_tokens = biguint_to_f64(&route.output) / 10f64.powi(self.dst_decimals as i32);
        let gas_native =
            (self.base_gas + route.hop_gas) as f64 * self.gas_price_wei as f64 / self.wei_per_native;
        out_tokens * self.dst_price - gas_native * self.native_price
    }

    /// Predicted (uplift_usd, uplift_pct) for one input amount: route the
    /// trade over each venue independently and difference the effective USD
    /// amounts. `None` when either venue cannot route the trade.
    pub fn predict_uplift(&self, amount_in: &BigUint) -> Option<(f64, f64)> {
        let incoming = best_route(&self.competitor, &self.src, &self.dst, amount_in, self.max_hops)?;
        let outgoing = best_route(&self.baseline, &self.src, &self.dst, amount_in, self.max_hops)?;
        let a_in = self.effective_usd(&incoming);
        let a_out = self.effective_usd(&outgoing);
        let v_in =
            biguint_to_f64(amount_in) / 10f64.powi(self.src_decimals as i32) * self.src_price;
        if v_in <= 0.0 {
            return None;
        }
        let usd = a_out - a_in;
        Some((usd, 100.0 * usd / v_in))
    }
}

fn biguint_to_f64(v: &BigUint) -> f64 {
    v.to_string().parse().expect("decimal digits parse as f64")
}
