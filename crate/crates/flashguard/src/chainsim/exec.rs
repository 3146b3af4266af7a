//! Atomic transaction execution.
//!
//! A transaction either succeeds with all effects applied or leaves the world
//! bit-identical to its pre-state. The interpreter dispatches calls to
//! built-in token ledgers, flash-loan providers, and scripted contracts,
//! recording every call, token movement, and approval it attempts — including
//! those later undone by a revert.
//!
//! Gas accounting here is purely computational: the sender's native balance
//! is debited at block inclusion time (see `build_block`), never here, so
//! rollback stays exact.

use std::sync::OnceLock;

use thiserror::Error;

use crate::calldata::{compute_selector, CallData, Selector};

use super::{
    AddrExpr, Address, Amount, AmountExpr, ApprovalEvent, ExecutionTrace, GuardExpr, GuardFailure,
    InternalCall, MoneyFlow, StepEffect, Transaction, TxStatus, WorldState,
};

const MAX_CALL_DEPTH: u16 = 64;

/// Errors that signal malformed scenario input, as opposed to reverts, which
/// are ordinary trace outcomes.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChainError {
    #[error("unknown recipient {0}")]
    UnknownRecipient(Address),
    #[error("bad nonce from {sender}: expected {expected}, got {got}")]
    BadNonce {
        sender: Address,
        expected: u64,
        got: u64,
    },
}

/// Execution knobs used by invariant sweeps; defaults are plain execution.
#[derive(Debug, Clone, Default)]
pub struct ExecOptions {
    /// Force a revert at the Nth fault point (scripted step or built-in op).
    pub force_fail_at: Option<u64>,
    /// Record cumulative gas after every charge into `trace.charge_log`.
    pub record_charges: bool,
}

/// The canonical built-in token selectors, derived once.
pub struct TokenSelectors {
    pub transfer: Selector,
    pub approve: Selector,
    pub transfer_from: Selector,
    pub withdraw: Selector,
}

pub fn token_selectors() -> &'static TokenSelectors {
    static SELECTORS: OnceLock<TokenSelectors> = OnceLock::new();
    SELECTORS.get_or_init(|| TokenSelectors {
        transfer: compute_selector("transfer(address,uint256)").unwrap(),
        approve: compute_selector("approve(address,uint256)").unwrap(),
        transfer_from: compute_selector("transferFrom(address,address,uint256)").unwrap(),
        withdraw: compute_selector("withdraw(uint256)").unwrap(),
    })
}

/// Applies a transaction to a copy of the world, returning the new world and
/// the trace. The input world is untouched.
pub fn apply_transaction(
    world: &WorldState,
    tx: &Transaction,
) -> Result<(WorldState, ExecutionTrace), ChainError> {
    let mut next = world.clone();
    let trace = apply_transaction_with(&mut next, tx, &ExecOptions::default())?;
    Ok((next, trace))
}

/// In-place variant used by the block builder and invariant sweeps. On a
/// non-Success outcome the world is restored to its exact pre-state.
pub fn apply_transaction_with(
    world: &mut WorldState,
    tx: &Transaction,
    opts: &ExecOptions,
) -> Result<ExecutionTrace, ChainError> {
    if !world.knows(&tx.to) {
        return Err(ChainError::UnknownRecipient(tx.to));
    }
    let expected = world.next_nonce(&tx.from);
    if tx.nonce != expected {
        return Err(ChainError::BadNonce {
            sender: tx.from,
            expected,
            got: tx.nonce,
        });
    }

    let snapshot = world.clone();
    let mut interp = Interpreter {
        world,
        opts,
        gas_limit: tx.gas_limit,
        trace: ExecutionTrace {
            tx_hash: tx.hash,
            internal_calls: Vec::new(),
            status: TxStatus::Success,
            gas_used: 0,
            money_flows: Vec::new(),
            approvals: Vec::new(),
            fault_points: 0,
            charge_log: Vec::new(),
        },
    };
    let outcome = interp.execute_root(tx);
    let mut trace = interp.trace;
    match outcome {
        Ok(()) => trace.status = TxStatus::Success,
        Err(Halt::Reverted(reason)) => {
            trace.status = TxStatus::Reverted(reason);
            *world = snapshot;
        }
        Err(Halt::OutOfGas) => {
            trace.status = TxStatus::OutOfGas;
            trace.gas_used = tx.gas_limit;
            *world = snapshot;
        }
    }
    Ok(trace)
}

/// Executes a flash loan as if initiated by the borrower: synthesizes the
/// provider call with the callback attached and applies it atomically. An
/// unrepaid loan reverts the whole thing.
pub fn run_flash_loan(
    world: &WorldState,
    provider: Address,
    borrower: Address,
    token: Address,
    amount: Amount,
    callback: Option<CallData>,
) -> Result<(WorldState, ExecutionTrace), ChainError> {
    let loan_selector = world
        .providers
        .get(&provider)
        .map(|p| p.loan_selector)
        .ok_or(ChainError::UnknownRecipient(provider))?;
    let nested = callback
        .map(|call| {
            vec![crate::calldata::NestedCall {
                target: borrower,
                call,
            }]
        })
        .unwrap_or_default();
    let data = CallData::with_nested(
        loan_selector,
        vec![token.to_word(), amount.to_word()],
        nested,
    );
    let tx = Transaction::new(
        world.next_nonce(&borrower),
        borrower,
        provider,
        1,
        u64::MAX / 2,
        Amount::zero(),
        Some(data),
    );
    apply_transaction(world, &tx)
}

enum Halt {
    Reverted(String),
    OutOfGas,
}

type StepResult = Result<(), Halt>;

fn reverted(reason: impl Into<String>) -> Halt {
    Halt::Reverted(reason.into())
}

struct Interpreter<'w, 'o> {
    world: &'w mut WorldState,
    opts: &'o ExecOptions,
    gas_limit: u64,
    trace: ExecutionTrace,
}

impl Interpreter<'_, '_> {
    fn execute_root(&mut self, tx: &Transaction) -> StepResult {
        let base = self.world.gas.tx_base;
        self.charge(base)?;
        if !tx.value.is_zero() {
            let balance = self.world.native_balance(&tx.from);
            if balance < tx.value {
                return Err(reverted("insufficient native balance for value"));
            }
            self.world.debit_native_saturating(&tx.from, &tx.value);
            self.world.credit_native(tx.to, &tx.value);
        }
        if let Some(input) = &tx.input {
            self.perform_call(tx.from, tx.to, input, 0)?;
        }
        Ok(())
    }

    fn charge(&mut self, cost: u64) -> StepResult {
        self.trace.gas_used = self.trace.gas_used.saturating_add(cost);
        if self.opts.record_charges {
            self.trace.charge_log.push(self.trace.gas_used);
        }
        if self.trace.gas_used > self.gas_limit {
            Err(Halt::OutOfGas)
        } else {
            Ok(())
        }
    }

    /// Marks an injectable fault point and trips if this one was selected.
    fn fault_point(&mut self) -> StepResult {
        let index = self.trace.fault_points;
        self.trace.fault_points += 1;
        if self.opts.force_fail_at == Some(index) {
            Err(reverted("injected fault"))
        } else {
            Ok(())
        }
    }

    fn perform_call(
        &mut self,
        caller: Address,
        callee: Address,
        data: &CallData,
        depth: u16,
    ) -> StepResult {
        if depth > MAX_CALL_DEPTH {
            return Err(reverted("call depth exceeded"));
        }
        if self.world.tokens.contains_key(&callee) {
            self.record_call(caller, callee, data, depth);
            self.charge(self.world.gas.call_base)?;
            self.token_op(callee, caller, data)
        } else if self.world.providers.contains_key(&callee) {
            self.record_call(caller, callee, data, depth);
            self.charge(self.world.gas.call_base)?;
            self.flash_loan(callee, caller, data, depth)
        } else if self.world.contracts.contains_key(&callee) {
            self.record_call(caller, callee, data, depth);
            self.charge(self.world.gas.call_base)?;
            self.run_handler(callee, caller, data, depth)
        } else {
            // No code at the callee: the call is a no-op and records nothing.
            Ok(())
        }
    }

    fn record_call(&mut self, caller: Address, callee: Address, data: &CallData, depth: u16) {
        self.trace.internal_calls.push(InternalCall {
            caller,
            callee,
            selector: data.selector,
            args: data.args.clone(),
            depth,
        });
    }

    fn token_op(&mut self, token_id: Address, caller: Address, data: &CallData) -> StepResult {
        self.fault_point()?;
        self.charge(self.world.gas.token_op)?;
        let sels = token_selectors();
        let sel = data.selector;
        if sel == sels.transfer {
            let to = data.arg_address(0).ok_or_else(|| reverted("transfer: missing to"))?;
            let amount = data
                .arg_amount(1)
                .ok_or_else(|| reverted("transfer: missing amount"))?;
            self.move_token(&token_id, caller, to, &amount)
        } else if sel == sels.approve {
            let spender = data
                .arg_address(0)
                .ok_or_else(|| reverted("approve: missing spender"))?;
            let amount = data
                .arg_amount(1)
                .ok_or_else(|| reverted("approve: missing amount"))?;
            self.set_allowance(&token_id, caller, spender, amount)
        } else if sel == sels.transfer_from {
            let owner = data
                .arg_address(0)
                .ok_or_else(|| reverted("transferFrom: missing from"))?;
            let to = data
                .arg_address(1)
                .ok_or_else(|| reverted("transferFrom: missing to"))?;
            let amount = data
                .arg_amount(2)
                .ok_or_else(|| reverted("transferFrom: missing amount"))?;
            self.spend_allowance(&token_id, caller, owner, to, &amount)
        } else if sel == sels.withdraw {
            // Moves units from the token contract's internal vault (its own
            // balance entry) to the caller.
            let amount = data
                .arg_amount(0)
                .ok_or_else(|| reverted("withdraw: missing amount"))?;
            self.move_token(&token_id, token_id, caller, &amount)
        } else {
            Err(reverted(format!("unknown token function {sel}")))
        }
    }

    fn flash_loan(
        &mut self,
        provider_addr: Address,
        caller: Address,
        data: &CallData,
        depth: u16,
    ) -> StepResult {
        let provider = self
            .world
            .providers
            .get(&provider_addr)
            .cloned()
            .expect("provider presence checked by dispatch");
        if data.selector != provider.loan_selector {
            return Err(reverted(format!(
                "unknown provider function {}",
                data.selector
            )));
        }
        self.fault_point()?;
        self.charge(self.world.gas.flash_loan_overhead)?;
        let token = data
            .arg_address(0)
            .ok_or_else(|| reverted("flashLoan: missing token"))?;
        let amount = data
            .arg_amount(1)
            .ok_or_else(|| reverted("flashLoan: missing amount"))?;

        let pre_liquidity = self.world.token_balance(&token, &provider_addr);
        if pre_liquidity < amount {
            return Err(reverted("insufficient liquidity"));
        }
        self.move_token(&token, provider_addr, caller, &amount)?;
        if let Some(callback) = data.nested.first() {
            self.perform_call(provider_addr, callback.target, &callback.call, depth + 1)?;
        }
        let required = &pre_liquidity + &provider.fee_for(&amount);
        if self.world.token_balance(&token, &provider_addr) < required {
            return Err(reverted("flash loan not repaid"));
        }
        Ok(())
    }

    fn run_handler(
        &mut self,
        self_addr: Address,
        caller: Address,
        data: &CallData,
        depth: u16,
    ) -> StepResult {
        let steps = match self
            .world
            .contracts
            .get(&self_addr)
            .and_then(|p| p.handlers.get(&data.selector))
        {
            Some(steps) => steps.clone(),
            None => {
                return Err(reverted(format!(
                    "no handler for {} on {self_addr}",
                    data.selector
                )))
            }
        };
        for step in &steps {
            self.fault_point()?;
            if self.eval_guard(&step.guard, &self_addr, &caller, data)? {
                self.charge(step.gas_cost)?;
                for effect in &step.effects {
                    self.apply_effect(self_addr, caller, data, effect, depth)?;
                }
            } else {
                match &step.on_guard_fail {
                    GuardFailure::Revert(reason) => return Err(reverted(reason.clone())),
                    GuardFailure::Skip => {}
                    GuardFailure::Fallback { effects, gas_cost } => {
                        self.charge(*gas_cost)?;
                        for effect in effects {
                            self.apply_effect(self_addr, caller, data, effect, depth)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn apply_effect(
        &mut self,
        self_addr: Address,
        caller: Address,
        data: &CallData,
        effect: &StepEffect,
        depth: u16,
    ) -> StepResult {
        match effect {
            StepEffect::Transfer {
                token,
                from,
                to,
                amount,
            } => {
                let from = self.eval_addr(from, &self_addr, &caller, data)?;
                let to = self.eval_addr(to, &self_addr, &caller, data)?;
                let amount = self.eval_amount(amount, &self_addr, &caller, data)?;
                self.move_token(token, from, to, &amount)
            }
            StepEffect::TransferUpTo {
                token,
                from,
                to,
                amount,
            } => {
                let from = self.eval_addr(from, &self_addr, &caller, data)?;
                let to = self.eval_addr(to, &self_addr, &caller, data)?;
                let requested = self.eval_amount(amount, &self_addr, &caller, data)?;
                let available = self.world.token_balance(token, &from);
                let amount = requested.min(available);
                self.move_token(token, from, to, &amount)
            }
            StepEffect::SpendAllowance {
                token,
                owner,
                to,
                amount,
            } => {
                let owner = self.eval_addr(owner, &self_addr, &caller, data)?;
                let to = self.eval_addr(to, &self_addr, &caller, data)?;
                let amount = self.eval_amount(amount, &self_addr, &caller, data)?;
                self.spend_allowance(token, self_addr, owner, to, &amount)
            }
            StepEffect::Approve {
                token,
                owner,
                spender,
                amount,
            } => {
                let owner = self.eval_addr(owner, &self_addr, &caller, data)?;
                let spender = self.eval_addr(spender, &self_addr, &caller, data)?;
                let amount = self.eval_amount(amount, &self_addr, &caller, data)?;
                self.set_allowance(token, owner, spender, amount)
            }
            StepEffect::Mint { token, to, amount } => {
                let to = self.eval_addr(to, &self_addr, &caller, data)?;
                let amount = self.eval_amount(amount, &self_addr, &caller, data)?;
                let ledger = self
                    .world
                    .tokens
                    .get_mut(token)
                    .ok_or_else(|| reverted(format!("unknown token {token}")))?;
                ledger.mint(to, &amount);
                if !amount.is_zero() {
                    self.trace.money_flows.push(MoneyFlow {
                        token: *token,
                        from: Address::ZERO,
                        to,
                        amount,
                    });
                }
                Ok(())
            }
            StepEffect::Burn {
                token,
                from,
                amount,
            } => {
                let from = self.eval_addr(from, &self_addr, &caller, data)?;
                let amount = self.eval_amount(amount, &self_addr, &caller, data)?;
                let ledger = self
                    .world
                    .tokens
                    .get_mut(token)
                    .ok_or_else(|| reverted(format!("unknown token {token}")))?;
                ledger.burn(&from, &amount).map_err(reverted)?;
                if !amount.is_zero() {
                    self.trace.money_flows.push(MoneyFlow {
                        token: *token,
                        from,
                        to: Address::ZERO,
                        amount,
                    });
                }
                Ok(())
            }
            StepEffect::SetStorage { key, value } => {
                let value = self.eval_amount(value, &self_addr, &caller, data)?;
                let program = self
                    .world
                    .contracts
                    .get_mut(&self_addr)
                    .expect("executing contract exists");
                program.storage.insert(key.clone(), value);
                Ok(())
            }
            StepEffect::Call { target, data: call } => {
                self.perform_call(self_addr, *target, call, depth + 1)
            }
        }
    }

    fn move_token(
        &mut self,
        token: &Address,
        from: Address,
        to: Address,
        amount: &Amount,
    ) -> StepResult {
        if amount.is_zero() {
            return Ok(());
        }
        let ledger = self
            .world
            .tokens
            .get_mut(token)
            .ok_or_else(|| reverted(format!("unknown token {token}")))?;
        ledger.transfer(&from, &to, amount).map_err(reverted)?;
        self.trace.money_flows.push(MoneyFlow {
            token: *token,
            from,
            to,
            amount: amount.clone(),
        });
        Ok(())
    }

    fn spend_allowance(
        &mut self,
        token: &Address,
        spender: Address,
        owner: Address,
        to: Address,
        amount: &Amount,
    ) -> StepResult {
        let ledger = self
            .world
            .tokens
            .get_mut(token)
            .ok_or_else(|| reverted(format!("unknown token {token}")))?;
        ledger
            .transfer_from(&spender, &owner, &to, amount)
            .map_err(reverted)?;
        if !amount.is_zero() {
            self.trace.money_flows.push(MoneyFlow {
                token: *token,
                from: owner,
                to,
                amount: amount.clone(),
            });
        }
        Ok(())
    }

    fn set_allowance(
        &mut self,
        token: &Address,
        owner: Address,
        spender: Address,
        amount: Amount,
    ) -> StepResult {
        let ledger = self
            .world
            .tokens
            .get_mut(token)
            .ok_or_else(|| reverted(format!("unknown token {token}")))?;
        ledger.set_allowance(owner, spender, amount.clone());
        self.trace.approvals.push(ApprovalEvent {
            token: *token,
            owner,
            spender,
            amount,
        });
        Ok(())
    }

    fn eval_addr(
        &self,
        expr: &AddrExpr,
        self_addr: &Address,
        caller: &Address,
        data: &CallData,
    ) -> Result<Address, Halt> {
        match expr {
            AddrExpr::Const(addr) => Ok(*addr),
            AddrExpr::SelfAddr => Ok(*self_addr),
            AddrExpr::Caller => Ok(*caller),
            AddrExpr::Arg(i) => data
                .arg_address(*i)
                .ok_or_else(|| reverted(format!("missing address arg {i}"))),
        }
    }

    fn eval_amount(
        &self,
        expr: &AmountExpr,
        self_addr: &Address,
        caller: &Address,
        data: &CallData,
    ) -> Result<Amount, Halt> {
        match expr {
            AmountExpr::Const(amount) => Ok(amount.clone()),
            AmountExpr::Arg(i) => data
                .arg_amount(*i)
                .ok_or_else(|| reverted(format!("missing amount arg {i}"))),
            AmountExpr::BalanceOf { token, holder } => {
                let holder = self.eval_addr(holder, self_addr, caller, data)?;
                Ok(self.world.token_balance(token, &holder))
            }
            AmountExpr::AllowanceOf {
                token,
                owner,
                spender,
            } => {
                let owner = self.eval_addr(owner, self_addr, caller, data)?;
                let spender = self.eval_addr(spender, self_addr, caller, data)?;
                Ok(self.world.token_allowance(token, &owner, &spender))
            }
            AmountExpr::StorageOf { key } => Ok(self
                .world
                .contracts
                .get(self_addr)
                .and_then(|p| p.storage.get(key))
                .cloned()
                .unwrap_or_default()),
        }
    }

    fn eval_guard(
        &self,
        guard: &GuardExpr,
        self_addr: &Address,
        caller: &Address,
        data: &CallData,
    ) -> Result<bool, Halt> {
        match guard {
            GuardExpr::Always => Ok(true),
            GuardExpr::CallerIs(addr) => Ok(caller == addr),
            GuardExpr::BalanceEq {
                token,
                holder,
                amount,
            } => {
                let holder = self.eval_addr(holder, self_addr, caller, data)?;
                let amount = self.eval_amount(amount, self_addr, caller, data)?;
                Ok(self.world.token_balance(token, &holder) == amount)
            }
            GuardExpr::BalanceGe {
                token,
                holder,
                amount,
            } => {
                let holder = self.eval_addr(holder, self_addr, caller, data)?;
                let amount = self.eval_amount(amount, self_addr, caller, data)?;
                Ok(self.world.token_balance(token, &holder) >= amount)
            }
            GuardExpr::AllowanceGe {
                token,
                owner,
                spender,
                amount,
            } => {
                let owner = self.eval_addr(owner, self_addr, caller, data)?;
                let spender = self.eval_addr(spender, self_addr, caller, data)?;
                let amount = self.eval_amount(amount, self_addr, caller, data)?;
                Ok(self.world.token_allowance(token, &owner, &spender) >= amount)
            }
            GuardExpr::StorageEq { key, value } => {
                let stored = self
                    .world
                    .contracts
                    .get(self_addr)
                    .and_then(|p| p.storage.get(key))
                    .cloned()
                    .unwrap_or_default();
                Ok(&stored == value)
            }
            GuardExpr::Not(inner) => Ok(!self.eval_guard(inner, self_addr, caller, data)?),
            GuardExpr::All(guards) => {
                for g in guards {
                    if !self.eval_guard(g, self_addr, caller, data)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            GuardExpr::Any(guards) => {
                for g in guards {
                    if self.eval_guard(g, self_addr, caller, data)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
        }
    }
}
