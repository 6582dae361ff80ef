//! Mechanisms for combinatorial auctions among single-minded bidders.
//!
//! The centerpiece is a greedy allocation that ranks bids by the norm
//! `amount / |bundle|^l`, paired with critical-value payments, which makes
//! truth-telling a dominant strategy. An exact generalized Vickrey auction
//! serves as the efficient baseline. The [`axioms`] module checks the
//! properties that together imply truthfulness, and [`experiments`] replays
//! worked examples and approximation bounds.
//!
//! All money is exact: declared amounts are rationals and payments under
//! fractional exponents are sums of rational multiples of radicals.

pub mod axioms;
pub mod cli;
pub mod document;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod generate;
pub mod greedy;
pub mod mechanism;
pub mod model;
pub mod money;
pub mod norm;

pub use error::{Error, Result};
pub use exact::{clarke_with_greedy, optimal_allocation, run_gva, SolverKind};
pub use greedy::{greedy_allocate, run_greedy};
pub use mechanism::{ClarkeGreedy, Greedy, Gva, Mechanism};
pub use model::{Allocation, AuctionInstance, Bundle, Outcome, SingleMindedBid};
pub use money::Money;
pub use norm::{Exponent, NormConfig, TieRule};
