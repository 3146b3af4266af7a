//! Scripted contracts: deterministic guarded-step programs.
//!
//! Contracts are interpreted scripts rather than bytecode. Each handler is an
//! ordered list of guarded steps; a step's guard is evaluated against the
//! current world and call arguments, and on failure the step either reverts
//! the enclosing transaction or falls back to an alternate (typically
//! costlier) effect list. The same world and call always produce the same
//! trace.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::calldata::{CallData, Selector};

use super::{Address, Amount};

/// Address-valued expression resolved at step execution time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AddrExpr {
    /// A fixed address.
    Const(Address),
    /// The contract whose handler is executing.
    SelfAddr,
    /// The caller of the current handler.
    Caller,
    /// An address decoded from the call's argument word at this index.
    Arg(usize),
}

/// Amount-valued expression resolved at step execution time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AmountExpr {
    Const(Amount),
    /// An amount decoded from the call's argument word at this index.
    Arg(usize),
    /// Current token balance of a holder.
    BalanceOf { token: Address, holder: AddrExpr },
    /// Current allowance from owner to spender.
    AllowanceOf {
        token: Address,
        owner: AddrExpr,
        spender: AddrExpr,
    },
    /// A value from the executing contract's own storage (0 when unset).
    StorageOf { key: String },
}

/// Guard predicate over world state and call arguments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GuardExpr {
    Always,
    /// Caller equals the given address.
    CallerIs(Address),
    BalanceEq {
        token: Address,
        holder: AddrExpr,
        amount: AmountExpr,
    },
    BalanceGe {
        token: Address,
        holder: AddrExpr,
        amount: AmountExpr,
    },
    AllowanceGe {
        token: Address,
        owner: AddrExpr,
        spender: AddrExpr,
        amount: AmountExpr,
    },
    /// The executing contract's storage slot equals the value (0 when unset).
    StorageEq { key: String, value: Amount },
    Not(Box<GuardExpr>),
    All(Vec<GuardExpr>),
    Any(Vec<GuardExpr>),
}

/// One state mutation or nested call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepEffect {
    /// Direct ledger move; reverts the transaction on insufficient balance.
    Transfer {
        token: Address,
        from: AddrExpr,
        to: AddrExpr,
        amount: AmountExpr,
    },
    /// Clamped ledger move: silently transfers `min(amount, balance)`.
    /// Models tokens that report failure without reverting.
    TransferUpTo {
        token: Address,
        from: AddrExpr,
        to: AddrExpr,
        amount: AmountExpr,
    },
    /// Allowance-consuming move where the executing contract is the spender.
    SpendAllowance {
        token: Address,
        owner: AddrExpr,
        to: AddrExpr,
        amount: AmountExpr,
    },
    /// Sets an allowance on behalf of `owner` (scripted contracts normally
    /// approve from themselves).
    Approve {
        token: Address,
        owner: AddrExpr,
        spender: AddrExpr,
        amount: AmountExpr,
    },
    Mint {
        token: Address,
        to: AddrExpr,
        amount: AmountExpr,
    },
    Burn {
        token: Address,
        from: AddrExpr,
        amount: AmountExpr,
    },
    /// Writes the executing contract's own storage.
    SetStorage { key: String, value: AmountExpr },
    /// Nested call with concrete calldata.
    Call { target: Address, data: CallData },
}

/// What happens when a step's guard fails.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GuardFailure {
    /// Revert the enclosing transaction with this reason.
    Revert(String),
    /// Skip the step's effects and continue.
    Skip,
    /// Run an alternate effect list at an alternate gas cost.
    Fallback {
        effects: Vec<StepEffect>,
        gas_cost: u64,
    },
}

/// A guarded step: predicate, effects, and a declared gas cost.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardedStep {
    pub guard: GuardExpr,
    pub effects: Vec<StepEffect>,
    pub gas_cost: u64,
    pub on_guard_fail: GuardFailure,
}

impl GuardedStep {
    /// An unconditional step.
    pub fn run(effects: Vec<StepEffect>, gas_cost: u64) -> GuardedStep {
        GuardedStep {
            guard: GuardExpr::Always,
            effects,
            gas_cost,
            on_guard_fail: GuardFailure::Revert("unreachable".to_string()),
        }
    }

    /// A step that reverts the transaction when its guard fails.
    pub fn require(
        guard: GuardExpr,
        reason: &str,
        effects: Vec<StepEffect>,
        gas_cost: u64,
    ) -> GuardedStep {
        GuardedStep {
            guard,
            effects,
            gas_cost,
            on_guard_fail: GuardFailure::Revert(reason.to_string()),
        }
    }
}

/// A scripted contract: handlers keyed by selector, plus private storage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ContractProgram {
    pub address: Address,
    pub handlers: BTreeMap<Selector, Vec<GuardedStep>>,
    #[serde(default)]
    pub storage: BTreeMap<String, Amount>,
}

impl ContractProgram {
    pub fn new(address: Address) -> ContractProgram {
        ContractProgram {
            address,
            handlers: BTreeMap::new(),
            storage: BTreeMap::new(),
        }
    }

    pub fn with_handler(mut self, selector: Selector, steps: Vec<GuardedStep>) -> ContractProgram {
        self.handlers.insert(selector, steps);
        self
    }
}
