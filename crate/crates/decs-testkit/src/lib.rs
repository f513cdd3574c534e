//! Test supporting cast for the comparison engine: reference
//! implementations written independently of the production code paths, plus
//! deterministic fixture generators.
//!
//! Nothing here is clever on purpose. The encoders, statistics, and route
//! searches below favor the most literal formulation available (explicit
//! loops, term-by-term series, exhaustive enumeration) so that agreement with
//! the production implementations means two genuinely different derivations
//! reached the same numbers.

pub mod abi_ref;
pub mod comparators;
pub mod fixtures;
pub mod naive_stats;
pub mod route_oracle;
