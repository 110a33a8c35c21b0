//! Cyclic arbitrage across constant-product market maker pools.
//!
//! The crate is layered bottom-up:
//!
//! * [`amm`]: single-pool swap algebra and closed-form composition of hops.
//! * [`graph`]: token graph filtering, loop enumeration and the log-price test.
//! * [`strategies`]: single-entry optimum, MaxMax and MaxPrice.
//! * [`convex`]: the joint flow program over a loop, solved by a barrier
//!   interior-point method and certified through its KKT system.
//! * [`data`]: snapshot and price file formats.
//! * [`pipeline`] and [`oracle`]: batch comparison tables and brute-force
//!   grid checks used by the command line tool.

pub mod amm;
pub mod convex;
pub mod data;
pub mod error;
pub mod graph;
mod nnls;
pub mod oracle;
pub mod pipeline;
pub mod strategies;

pub use amm::{compose_path, relative_price, swap_out, ComposedSwap, Hop, Pool, TokenId, DEFAULT_FEE_RATE};
pub use convex::{check_kkt, solve_convex, solve_equality_variant, ConvexSolution, FlowVector, DEFAULT_TOLERANCE};
pub use error::{Error, RecordError, Result};
pub use graph::{build_graph, enumerate_loops, is_arbitrage_loop, Loop, MarketSnapshot};
pub use strategies::{
    maxmax, maxprice, optimize_single_entry, PriceTable, SingleEntryResult, Strategy, StrategyReport,
};
