//! FlashGuard laboratory: real-time detection of non-price flash-loan attacks
//! on a pending-transaction stream, and atomicity-breaking dusting
//! counterattacks delivered through a private relay, all verified against a
//! deterministic miniature EVM-like chain simulator.
//!
//! The crate is organized around the pipeline stages:
//!
//! - [`chainsim`] — the simulated chain: token ledgers, scripted contracts,
//!   flash-loan providers, atomic execution with rollback, block building.
//! - [`calldata`] — function-selector derivation, call encoding, embedded
//!   selector scanning, and the signature database.
//! - [`mempool`] — the pending pool with publish/subscribe streaming.
//! - [`detector`] — signature-class matching and the attack-qualification
//!   predicate over pending transactions.
//! - [`disruptor`] — synthesis of the dusting counter-transaction.
//! - [`relay`] — the private lane that orders counter-transactions ahead of
//!   their targets without mempool visibility.
//! - [`scenarios`] — the declarative attack/benign scenario corpus.
//! - [`harness`] — end-to-end orchestration, metrics, and reporting.

pub mod calldata;
pub mod chainsim;
pub mod detector;
pub mod disruptor;
pub mod harness;
pub mod mempool;
pub mod relay;
pub mod scenarios;
