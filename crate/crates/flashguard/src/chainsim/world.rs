//! The authoritative simulated chain state.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::calldata::Selector;

use super::{Address, AddressKind, Amount, ContractProgram, TokenLedger};

/// Per-operation gas costs charged by the interpreter for built-in actions.
/// Scripted steps carry their own declared costs on top of these.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasSchedule {
    /// Flat cost charged once per transaction.
    pub tx_base: u64,
    /// Cost of dispatching any internal call.
    pub call_base: u64,
    /// Cost of a built-in token operation.
    pub token_op: u64,
    /// Provider bookkeeping cost of a flash-loan call (disbursal plus
    /// repayment check), excluding the callback's own costs.
    pub flash_loan_overhead: u64,
}

impl Default for GasSchedule {
    fn default() -> Self {
        GasSchedule {
            tx_base: 21_000,
            call_base: 700,
            token_op: 5_000,
            flash_loan_overhead: 3_000,
        }
    }
}

/// A flash-loan provider. Its liquidity is its token balances in the
/// ledgers; loans are disbursed from and repaid to those balances, and the
/// atomic repayment check keeps per-token liquidity from ever shrinking
/// across a confirmed block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlashLoanProvider {
    pub address: Address,
    /// Fee as a rational: fee = ceil(amount * fee_num / fee_den).
    pub fee_num: u64,
    pub fee_den: u64,
    pub loan_selector: Selector,
}

impl FlashLoanProvider {
    pub fn fee_for(&self, amount: &Amount) -> Amount {
        if self.fee_num == 0 {
            Amount::zero()
        } else {
            amount.mul_ratio_ceil(self.fee_num, self.fee_den)
        }
    }
}

/// The simulated chain: native accounts, token ledgers, scripted contracts,
/// flash-loan providers, and the block height. Cloning produces a snapshot
/// that restores to bit-exact equality.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct WorldState {
    /// Native-asset balances.
    pub accounts: BTreeMap<Address, Amount>,
    /// Next expected nonce per sender (0 when absent).
    pub nonces: BTreeMap<Address, u64>,
    pub tokens: BTreeMap<Address, TokenLedger>,
    pub contracts: BTreeMap<Address, ContractProgram>,
    pub providers: BTreeMap<Address, FlashLoanProvider>,
    pub block_height: u64,
    #[serde(default)]
    pub gas: GasSchedule,
}

impl WorldState {
    pub fn new() -> WorldState {
        WorldState::default()
    }

    /// Resolves whether an address carries code.
    pub fn kind_of(&self, addr: &Address) -> AddressKind {
        if self.contracts.contains_key(addr)
            || self.tokens.contains_key(addr)
            || self.providers.contains_key(addr)
        {
            AddressKind::Contract
        } else {
            AddressKind::Eoa
        }
    }

    /// Whether the address is known to the world at all: it carries code or
    /// has a native account entry.
    pub fn knows(&self, addr: &Address) -> bool {
        self.kind_of(addr) == AddressKind::Contract || self.accounts.contains_key(addr)
    }

    /// A token contract address (tokens are addresses too, but they are
    /// counted separately from entities in trace shape metrics).
    pub fn is_token(&self, addr: &Address) -> bool {
        self.tokens.contains_key(addr)
    }

    pub fn native_balance(&self, addr: &Address) -> Amount {
        self.accounts.get(addr).cloned().unwrap_or_default()
    }

    pub fn credit_native(&mut self, addr: Address, amount: &Amount) {
        *self.accounts.entry(addr).or_default() += amount;
    }

    /// Debits native balance, saturating at zero. Scenario genesis funds
    /// every sender, so saturation only cushions malformed inputs.
    pub fn debit_native_saturating(&mut self, addr: &Address, amount: &Amount) {
        let balance = self.native_balance(addr);
        let remaining = balance.checked_sub(amount).unwrap_or_default();
        self.accounts.insert(*addr, remaining);
    }

    pub fn next_nonce(&self, addr: &Address) -> u64 {
        self.nonces.get(addr).copied().unwrap_or(0)
    }

    pub fn bump_nonce(&mut self, addr: Address) {
        *self.nonces.entry(addr).or_insert(0) += 1;
    }

    pub fn token_balance(&self, token: &Address, holder: &Address) -> Amount {
        self.tokens
            .get(token)
            .map(|t| t.balance_of(holder))
            .unwrap_or_default()
    }

    pub fn token_allowance(&self, token: &Address, owner: &Address, spender: &Address) -> Amount {
        self.tokens
            .get(token)
            .map(|t| t.allowance(owner, spender))
            .unwrap_or_default()
    }

    /// An immutable snapshot, safe to hand to concurrent readers.
    pub fn snapshot(&self) -> WorldState {
        self.clone()
    }

    /// Ledger soundness: every token's balances sum to its total supply.
    pub fn check_token_conservation(&self) -> Result<(), String> {
        for (addr, ledger) in &self.tokens {
            if ledger.balance_sum() != ledger.total_supply {
                return Err(format!(
                    "token {addr} balances sum to {} but total_supply is {}",
                    ledger.balance_sum(),
                    ledger.total_supply
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_restores_bit_exact() {
        let mut world = WorldState::new();
        let holder = Address::derived(1, 1);
        world.credit_native(holder, &Amount::from(500u64));
        let mut ledger = TokenLedger::new(Address::derived(2, 1), "USDC");
        ledger.mint(holder, &Amount::from(1_000u64));
        world.tokens.insert(ledger.token_id, ledger);

        let snapshot = world.snapshot();
        world.debit_native_saturating(&holder, &Amount::from(100u64));
        world
            .tokens
            .get_mut(&Address::derived(2, 1))
            .unwrap()
            .transfer(&holder, &Address::BURN, &Amount::from(5u64))
            .unwrap();
        assert_ne!(world, snapshot);

        world = snapshot.clone();
        assert_eq!(world, snapshot);
    }

    #[test]
    fn fee_zero_rate() {
        let provider = FlashLoanProvider {
            address: Address::derived(3, 1),
            fee_num: 0,
            fee_den: 1,
            loan_selector: "1b8b5af1".parse().unwrap(),
        };
        assert_eq!(provider.fee_for(&Amount::from(1_300_000u64)), Amount::zero());
    }

    #[test]
    fn fee_rounds_up() {
        let provider = FlashLoanProvider {
            address: Address::derived(3, 1),
            fee_num: 9,
            fee_den: 10_000,
            loan_selector: "1b8b5af1".parse().unwrap(),
        };
        // 1111 * 9 / 10000 = 0.9999 -> 1
        assert_eq!(provider.fee_for(&Amount::from(1_111u64)), Amount::from(1u64));
    }
}
