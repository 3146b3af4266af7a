//! Fungible token ledgers with balances and allowances.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Address, Amount};

/// One token's ledger. The sum of balances equals `total_supply` at all
/// times; transfers conserve it and only explicit mint/burn effects change it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLedger {
    pub token_id: Address,
    #[serde(default)]
    pub symbol: String,
    #[serde(default)]
    pub balances: BTreeMap<Address, Amount>,
    /// owner -> spender -> remaining allowance
    #[serde(default)]
    pub allowances: BTreeMap<Address, BTreeMap<Address, Amount>>,
    pub total_supply: Amount,
}

impl TokenLedger {
    pub fn new(token_id: Address, symbol: &str) -> TokenLedger {
        TokenLedger {
            token_id,
            symbol: symbol.to_string(),
            balances: BTreeMap::new(),
            allowances: BTreeMap::new(),
            total_supply: Amount::zero(),
        }
    }

    pub fn balance_of(&self, holder: &Address) -> Amount {
        self.balances.get(holder).cloned().unwrap_or_default()
    }

    pub fn allowance(&self, owner: &Address, spender: &Address) -> Amount {
        self.allowances
            .get(owner)
            .and_then(|m| m.get(spender))
            .cloned()
            .unwrap_or_default()
    }

    pub fn set_allowance(&mut self, owner: Address, spender: Address, amount: Amount) {
        self.allowances
            .entry(owner)
            .or_default()
            .insert(spender, amount);
    }

    /// Mints into an account, growing total supply.
    pub fn mint(&mut self, to: Address, amount: &Amount) {
        *self.balances.entry(to).or_default() += amount;
        self.total_supply += amount;
    }

    /// Burns from an account, shrinking total supply. Fails on insufficient
    /// balance.
    pub fn burn(&mut self, from: &Address, amount: &Amount) -> Result<(), String> {
        let balance = self.balance_of(from);
        let remaining = balance
            .checked_sub(amount)
            .ok_or_else(|| format!("burn exceeds balance of {from}"))?;
        self.balances.insert(*from, remaining);
        self.total_supply = (&self.total_supply) - amount;
        Ok(())
    }

    /// Moves `amount` between accounts. Fails on insufficient balance.
    pub fn transfer(&mut self, from: &Address, to: &Address, amount: &Amount) -> Result<(), String> {
        let from_balance = self.balance_of(from);
        let remaining = from_balance
            .checked_sub(amount)
            .ok_or_else(|| format!("insufficient balance: {from} holds {from_balance}, needs {amount}"))?;
        self.balances.insert(*from, remaining);
        *self.balances.entry(*to).or_default() += amount;
        Ok(())
    }

    /// Spends an allowance and moves the funds. Fails on insufficient
    /// allowance or balance; on success the allowance is decremented.
    pub fn transfer_from(
        &mut self,
        spender: &Address,
        owner: &Address,
        to: &Address,
        amount: &Amount,
    ) -> Result<(), String> {
        let allowed = self.allowance(owner, spender);
        let remaining_allowance = allowed.checked_sub(amount).ok_or_else(|| {
            format!("insufficient allowance: {spender} may spend {allowed} of {owner}, needs {amount}")
        })?;
        self.transfer(owner, to, amount)?;
        self.set_allowance(*owner, *spender, remaining_allowance);
        Ok(())
    }

    /// Sum of all balances; equals `total_supply` when the ledger is sound.
    pub fn balance_sum(&self) -> Amount {
        self.balances.values().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ledger_with(holder: Address, amount: u64) -> TokenLedger {
        let mut ledger = TokenLedger::new(Address::derived(0xaa, 1), "TOK");
        ledger.mint(holder, &Amount::from(amount));
        ledger
    }

    #[test]
    fn transfer_moves_and_conserves() {
        let from = Address::derived(1, 1);
        let to = Address::derived(1, 2);
        let mut ledger = ledger_with(from, 100);
        ledger.transfer(&from, &to, &Amount::from(10u64)).unwrap();
        assert_eq!(ledger.balance_of(&from), Amount::from(90u64));
        assert_eq!(ledger.balance_of(&to), Amount::from(10u64));
        assert_eq!(ledger.balance_sum(), ledger.total_supply);
    }

    #[test]
    fn exact_allowance_is_consumed() {
        let owner = Address::derived(1, 1);
        let spender = Address::derived(1, 2);
        let sink = Address::derived(1, 3);
        let mut ledger = ledger_with(owner, 100);
        ledger.set_allowance(owner, spender, Amount::from(50u64));
        ledger
            .transfer_from(&spender, &owner, &sink, &Amount::from(50u64))
            .unwrap();
        assert_eq!(ledger.allowance(&owner, &spender), Amount::zero());
        assert_eq!(ledger.balance_of(&sink), Amount::from(50u64));
    }

    #[test]
    fn allowance_boundary_rejects() {
        let owner = Address::derived(1, 1);
        let spender = Address::derived(1, 2);
        let sink = Address::derived(1, 3);
        let mut ledger = ledger_with(owner, 100);
        ledger.set_allowance(owner, spender, Amount::from(49u64));
        let err = ledger.transfer_from(&spender, &owner, &sink, &Amount::from(50u64));
        assert!(err.unwrap_err().contains("insufficient allowance"));
    }

    #[test]
    fn burn_shrinks_supply() {
        let holder = Address::derived(1, 1);
        let mut ledger = ledger_with(holder, 100);
        ledger.burn(&holder, &Amount::from(40u64)).unwrap();
        assert_eq!(ledger.total_supply, Amount::from(60u64));
        assert_eq!(ledger.balance_sum(), ledger.total_supply);
    }
}
