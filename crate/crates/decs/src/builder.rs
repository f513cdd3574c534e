//! Equivalent-trade construction.
//!
//! Given a decoded swap, build the trade the baseline router would have sent:
//! same wallet-visible input, same gas envelope as the observed transaction,
//! simulated at the block the original was observed at. Route selection is an
//! exhaustive search over simple paths, which is exact for the pool-universe
//! sizes this service works with.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::decoder::SwapIntent;
use crate::ingest::RawTransaction;
use crate::primitives::{Address, U256};
use crate::simulator::{swap_cpmm, PoolSet};

pub const DEFAULT_MAX_HOPS: usize = 3;

/// An ordered walk through pools. `token_path` always has one more entry than
/// `hops`; entry `i` is the input token of hop `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    pub hops: Vec<String>,
    pub token_path: Vec<Address>,
}

/// A fully specified outgoing trade, ready for simulation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TradeRequest {
    pub wallet: Address,
    /// Baseline router identifier; also the venue whose pools the route uses.
    pub target: String,
    pub src_token: Address,
    pub dst_token: Address,
    pub amount_in: U256,
    pub route: Route,
    /// Copied verbatim from the incoming transaction.
    pub gas_price: U256,
    /// Copied verbatim from the incoming transaction.
    pub gas_limit: u64,
    /// Block to simulate at: the block the incoming transaction was observed.
    pub sim_block: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RouteError {
    #[error("no route from {src} to {dst}")]
    NoRoute { src: Address, dst: Address },
    #[error("exact-output intents cannot be rebuilt as equivalent trades")]
    ExactOutputUnsupported,
}

pub trait RouteFinder {
    /// Best route for swapping `amount_in` of `src` into `dst` over `pools`.
    /// Returns the route and its simulated output.
    fn find_route(
        &self,
        pools: &PoolSet,
        src: &Address,
        dst: &Address,
        amount_in: &U256,
    ) -> Result<(Route, U256), RouteError>;
}

/// Enumerates every simple path up to `max_hops` and keeps the best by
/// output, then by hop count, then by lexicographic pool-id order, so the
/// result never depends on iteration accidents.
#[derive(Debug, Clone)]
pub struct ExhaustiveRouter {
    pub max_hops: usize,
}

impl Default for ExhaustiveRouter {
    fn default() -> Self {
        ExhaustiveRouter { max_hops: DEFAULT_MAX_HOPS }
    }
}

struct Candidate {
    route: Route,
    output: U256,
}

/// True when `a` should replace `b` as the running best.
fn better(a: &Candidate, b: &Candidate) -> bool {
    match a.output.cmp(&b.output) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => match a.route.hops.len().cmp(&b.route.hops.len()) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => a.route.hops < b.route.hops,
        },
    }
}

impl ExhaustiveRouter {
    fn search(
        &self,
        pools: &PoolSet,
        dst: &Address,
        current: Address,
        amount: U256,
        visited: &mut BTreeSet<Address>,
        hops: &mut Vec<String>,
        path: &mut Vec<Address>,
        best: &mut Option<Candidate>,
    ) {
        if hops.len() >= self.max_hops {
            return;
        }
        for pool in pools.pools() {
            let next = match pool.other_token(&current) {
                Some(t) => t,
                None => continue,
            };
            if visited.contains(&next) {
                continue;
            }
            let (out, _) = match swap_cpmm(pool, &current, &amount) {
                Ok(result) => result,
                // A hop that cannot produce output kills this branch only.
                Err(_) => continue,
            };
            hops.push(pool.id.clone());
            path.push(next);
            if next == *dst {
                let candidate = Candidate {
                    route: Route { hops: hops.clone(), token_path: path.clone() },
                    output: out,
                };
                if best.as_ref().map_or(true, |b| better(&candidate, b)) {
                    *best = Some(candidate);
                }
            } else {
                visited.insert(next);
                self.search(pools, dst, next, out, visited, hops, path, best);
                visited.remove(&next);
            }
            hops.pop();
            path.pop();
        }
    }
}

impl RouteFinder for ExhaustiveRouter {
    fn find_route(
        &self,
        pools: &PoolSet,
        src: &Address,
        dst: &Address,
        amount_in: &U256,
    ) -> Result<(Route, U256), RouteError> {
        if src == dst {
            // Degenerate pair; can appear after native-token substitution.
            return Err(RouteError::NoRoute { src: *src, dst: *dst });
        }
        let mut best = None;
        let mut visited = BTreeSet::from([*src]);
        let mut hops = Vec::new();
        let mut path = vec![*src];
        self.search(pools, dst, *src, amount_in.clone(), &mut visited, &mut hops, &mut path, &mut best);
        best.map(|c| (c.route, c.output)).ok_or(RouteError::NoRoute { src: *src, dst: *dst })
    }
}

/// Rebuilds the intent as a baseline trade from `wallet`. Gas fields are taken
/// from the incoming transaction unchanged, and the trade simulates at the
/// block the incoming transaction was observed at.
pub fn build_equivalent(
    intent: &SwapIntent,
    wallet: Address,
    incoming: &RawTransaction,
    router: &dyn RouteFinder,
    pools: &PoolSet,
    target: &str,
) -> Result<TradeRequest, RouteError> {
    if intent.exact_output {
        return Err(RouteError::ExactOutputUnsupported);
    }
    let (route, _expected_out) =
        router.find_route(pools, &intent.src_token, &intent.dst_token, &intent.amount_in)?;
    Ok(TradeRequest {
        wallet,
        target: target.to_string(),
        src_token: intent.src_token,
        dst_token: intent.dst_token,
        amount_in: intent.amount_in.clone(),
        route,
        gas_price: incoming.gas_price.clone(),
        gas_limit: incoming.gas_limit,
        sim_block: incoming.observed_block,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::TxKind;
    use crate::primitives::TxHash;
    use crate::simulator::Pool;

    fn tok(byte: u8) -> Address {
        Address([byte; 20])
    }

    fn pool(id: &str, t0: u8, t1: u8, r0: u64, r1: u64, fee_ppm: u32) -> Pool {
        Pool {
            id: id.into(),
            venue: "base".into(),
            token0: tok(t0),
            token1: tok(t1),
            reserve0: U256::from_u64(r0),
            reserve1: U256::from_u64(r1),
            fee_ppm,
            gas_per_swap: 60_000,
        }
    }

    #[test]
    fn picks_the_cheaper_of_two_direct_pools() {
        let pools = PoolSet::new(
            1,
            vec![pool("expensive", 1, 2, 1_000_000, 1_000_000, 10_000),
                 pool("cheap", 1, 2, 1_000_000, 1_000_000, 100)],
        )
        .unwrap();
        let router = ExhaustiveRouter::default();
        let (route, out) =
            router.find_route(&pools, &tok(1), &tok(2), &U256::from_u64(10_000)).unwrap();
        assert_eq!(route.hops, vec!["cheap".to_string()]);
        assert_eq!(route.token_path, vec![tok(1), tok(2)]);
        // 10000 * 0.9999 -> 9999 effective, 1000000*9999/1009999 = 9900.99 -> 9900
        assert_eq!(out, U256::from_u64(9_900));
    }

    #[test]
    fn multi_hop_wins_when_direct_liquidity_is_thin() {
        let pools = PoolSet::new(
            1,
            vec![
                pool("direct", 1, 3, 2_000, 2_000, 0),
                pool("leg1", 1, 2, 10_000_000, 10_000_000, 0),
                pool("leg2", 2, 3, 10_000_000, 10_000_000, 0),
            ],
        )
        .unwrap();
        let router = ExhaustiveRouter::default();
        let (route, _) =
            router.find_route(&pools, &tok(1), &tok(3), &U256::from_u64(1_000)).unwrap();
        assert_eq!(route.hops, vec!["leg1".to_string(), "leg2".to_string()]);
    }

    #[test]
    fn equal_output_breaks_ties_by_pool_id() {
        let pools = PoolSet::new(
            1,
            vec![pool("zz", 1, 2, 1_000_000, 1_000_000, 0),
                 pool("aa", 1, 2, 1_000_000, 1_000_000, 0)],
        )
        .unwrap();
        let router = ExhaustiveRouter::default();
        let (route, _) =
            router.find_route(&pools, &tok(1), &tok(2), &U256::from_u64(5_000)).unwrap();
        assert_eq!(route.hops, vec!["aa".to_string()]);
    }

    #[test]
    fn tie_breaking_prefers_fewer_hops_before_ids() {
        let mk = |hops: &[&str], out: u64| Candidate {
            route: Route {
                hops: hops.iter().map(|s| s.to_string()).collect(),
                token_path: vec![],
            },
            output: U256::from_u64(out),
        };
        assert!(better(&mk(&["b"], 100), &mk(&["a", "a"], 100)));
        assert!(!better(&mk(&["a", "a"], 100), &mk(&["b"], 100)));
        assert!(better(&mk(&["a"], 100), &mk(&["b"], 100)));
        assert!(better(&mk(&["z", "z"], 101), &mk(&["a"], 100)));
    }

    #[test]
    fn hop_budget_is_respected() {
        // Chain 1-2-3-4-5 requires four hops.
        let pools = PoolSet::new(
            1,
            vec![
                pool("a", 1, 2, 1_000_000, 1_000_000, 0),
                pool("b", 2, 3, 1_000_000, 1_000_000, 0),
                pool("c", 3, 4, 1_000_000, 1_000_000, 0),
                pool("d", 4, 5, 1_000_000, 1_000_000, 0),
            ],
        )
        .unwrap();
        let three = ExhaustiveRouter::default();
        assert!(matches!(
            three.find_route(&pools, &tok(1), &tok(5), &U256::from_u64(1_000)),
            Err(RouteError::NoRoute { .. })
        ));
        let four = ExhaustiveRouter { max_hops: 4 };
        assert!(four.find_route(&pools, &tok(1), &tok(5), &U256::from_u64(1_000)).is_ok());
    }

    #[test]
    fn same_token_pair_is_degenerate() {
        let pools = PoolSet::new(1, vec![pool("p", 1, 2, 1_000, 1_000, 0)]).unwrap();
        let router = ExhaustiveRouter::default();
        assert!(matches!(
            router.find_route(&pools, &tok(1), &tok(1), &U256::from_u64(10)),
            Err(RouteError::NoRoute { .. })
        ));
    }

    fn incoming() -> RawTransaction {
        RawTransaction {
            chain_id: 1,
            tx_hash: TxHash([0x42; 32]),
            sender: tok(0x01),
            recipient: tok(0x02),
            value: U256::zero(),
            gas_price: U256::from_u64(31_000_000_000),
            gas_limit: 417_000,
            calldata: vec![],
            observed_block: 19_123_456,
            mined_block: Some(19_123_458),
            kind: TxKind::Mined,
            intent_fill: None,
        }
    }

    fn intent(exact_output: bool) -> SwapIntent {
        SwapIntent {
            src_token: tok(1),
            dst_token: tok(2),
            amount_in: U256::from_u64(10_000),
            min_out: None,
            deadline: None,
            recipient: None,
            exact_output,
            protocol: "uniswap".into(),
            origin: TxHash([0x42; 32]),
        }
    }

    #[test]
    fn equivalent_trade_copies_gas_envelope_and_block() {
        let pools = PoolSet::new(19_123_456, vec![pool("p", 1, 2, 1_000_000, 1_000_000, 0)]).unwrap();
        let req = build_equivalent(
            &intent(false),
            tok(0xbb),
            &incoming(),
            &ExhaustiveRouter::default(),
            &pools,
            "oneinch",
        )
        .unwrap();
        assert_eq!(req.gas_price, U256::from_u64(31_000_000_000));
        assert_eq!(req.gas_limit, 417_000);
        assert_eq!(req.sim_block, 19_123_456);
        assert_eq!(req.target, "oneinch");
        assert_eq!(req.wallet, tok(0xbb));
        assert_eq!(req.route.token_path.len(), req.route.hops.len() + 1);
    }

    #[test]
    fn exact_output_intents_are_refused() {
        let pools = PoolSet::new(19_123_456, vec![pool("p", 1, 2, 1_000, 1_000, 0)]).unwrap();
        assert_eq!(
            build_equivalent(
                &intent(true),
                tok(0xbb),
                &incoming(),
                &ExhaustiveRouter::default(),
                &pools,
                "oneinch",
            ),
            Err(RouteError::ExactOutputUnsupported)
        );
    }
}
