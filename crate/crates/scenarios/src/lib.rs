//! Canned desk-scale scenarios, brute-force oracles and golden regression
//! traces for the `sdwsn` simulator.

pub mod catalog;
pub mod golden;
pub mod oracles;

pub use catalog::{Scenario, CATALOG};
pub use golden::GoldenTrace;
pub use oracles::{oracle_ledger_recheck, oracle_max_distance, oracle_shortest_path, Recheck};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/testing.md")]
mod book_testing {}
