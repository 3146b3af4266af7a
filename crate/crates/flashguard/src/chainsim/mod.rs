//! Deterministic miniature EVM-like chain: token ledgers, scripted
//! contracts, flash-loan providers, gas metering, atomic execution with full
//! rollback, and priority block building.
//!
//! Only the block builder mutates an authoritative [`WorldState`]; readers
//! work from snapshots, which are plain clones and safe to move across
//! threads.

mod address;
mod amount;
mod block;
mod exec;
mod program;
mod token;
mod tx;
mod world;

pub use address::{Address, AddressKind, TxHash};
pub use amount::Amount;
pub use block::{build_block, Block, BuildOutcome, PoolCandidate};
pub use exec::{
    apply_transaction, apply_transaction_with, run_flash_loan, token_selectors, ChainError,
    ExecOptions, TokenSelectors,
};
pub use program::{
    AddrExpr, AmountExpr, ContractProgram, GuardExpr, GuardFailure, GuardedStep, StepEffect,
};
pub use token::TokenLedger;
pub use tx::{ApprovalEvent, ExecutionTrace, InternalCall, MoneyFlow, Transaction, TxStatus};
pub use world::{FlashLoanProvider, GasSchedule, WorldState};
