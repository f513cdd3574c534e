//! Deterministic comparison engine for decentralized-exchange routing.
//!
//! The library replays a feed of observed swap transactions and intent
//! orders, decodes their calldata against a selector registry, rebuilds each
//! trade as an equivalent order on a baseline router, simulates both sides
//! against a synthetic constant-product backend, and scores the results:
//! effective USD amounts net of gas, volume-tiered draw bands, winner
//! attribution, and uplift. Records land in an append-only checksummed store
//! from which benchmark tables, histograms, and hypothesis tests are built.
//!
//! Modules follow the data path:
//!
//! * [`primitives`]: hex strings, 256-bit integers, addresses, hashes.
//! * [`ingest`]: feed transport, line parsing, reject accounting.
//! * [`decoder`]: strict ABI decoding plus swap-role normalization.
//! * [`wallets`]: eligibility and rotation of funded sender wallets.
//! * [`builder`]: route search and equivalent-trade construction.
//! * [`simulator`]: constant-product pool math and trade execution traces.
//! * [`metrics`]: prices, freshness, effective amounts, winners, buckets.
//! * [`stats`]: hypothesis tests, effect sizes, percentiles.
//! * [`reporting`]: the record store, marts, histograms, CSV/JSON writers.
//! * [`pipeline`]: the end-to-end run with conservation accounting.
//!
//! Everything is deterministic by construction: ordered maps in every output
//! path, no clocks, no global RNG. Two runs over the same inputs produce
//! byte-identical artifacts.

pub mod builder;
pub mod decoder;
pub mod ingest;
pub mod metrics;
pub mod pipeline;
pub mod primitives;
pub mod reporting;
pub mod simulator;
pub mod stats;
pub mod wallets;
