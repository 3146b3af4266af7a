//! The declarative scenario corpus: replayable world setups with traffic
//! schedules and expected outcomes.
//!
//! A scenario file is one JSON document with top-level keys `name`,
//! `chain_profile`, `genesis`, `traffic`, `exclusions`, `subscriptions`, and
//! `expected`; amounts are decimal strings, addresses 0x-prefixed lowercase
//! hex. Historical attacks are replicated at shape level — call structure,
//! entity counts, token counts, and loss magnitudes — with loss figures in
//! token base units at 1 unit = 1 USD.

mod benign;
mod hedgey;
mod shapes;
mod unseen;

pub use benign::{
    build_corpus, default_corpus_spec, generate_benign_traffic, BuiltCorpus, CorpusItem,
    CorpusSpec, TrafficProfile,
};
pub use hedgey::build_hedgey_scenario;
pub use shapes::{build_shape_scenario, presets_total_loss, table_presets, ShapeOptions, ShapeSpec};
pub use unseen::{build_unseen_scenarios, UnseenVulnerability};

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chainsim::{
    Address, Amount, ExecutionTrace, GasSchedule, Transaction, WorldState,
};

/// The guardian's well-known address, funded by every scenario's genesis.
pub const GUARDIAN: Address = Address([
    0xf0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0x01,
]);

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("infeasible shape: {0}")]
    InfeasibleShape(String),
    #[error("scenario parse error at {path}: {detail}")]
    Parse { path: String, detail: String },
    #[error("invalid scenario {name}: {detail}")]
    Invalid { name: String, detail: String },
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainProfile {
    pub name: String,
    pub block_interval_ms: u64,
    pub gas: GasSchedule,
    /// Per-transaction propagation jitter added to arrival times.
    pub propagation_jitter_ms: u64,
}

impl Default for ChainProfile {
    fn default() -> Self {
        ChainProfile {
            name: "Ethereum".to_string(),
            block_interval_ms: 12_000,
            gas: GasSchedule::default(),
            propagation_jitter_ms: 0,
        }
    }
}

/// Generator ground truth for a traffic item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrafficKind {
    Attack,
    Benign,
    /// Benign but structurally qualifying (e.g. a flash-loan arbitrage bot).
    BenignQualifying,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrafficItem {
    pub at_ms: u64,
    pub kind: TrafficKind,
    pub tx: Transaction,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExclusionEntry {
    pub address: Address,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubscriptionEntry {
    pub victim: Address,
    pub token: Address,
    pub allowance: Amount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct DisruptedBy {
    pub absd: bool,
    pub sfsd: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpectedOutcome {
    pub detected: bool,
    pub disrupted_by: DisruptedBy,
    pub loss_without_guard: Amount,
}

/// Which addresses count as the protected (victim) side and which as the
/// attacker side for loss and gain accounting.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct ProtectionScope {
    pub victim_addresses: Vec<Address>,
    pub attacker_addresses: Vec<Address>,
}

/// How the victim script is wired to break under dusting: a hard-coded
/// exact-state precondition, or a conditional that falls onto a gas-heavy
/// path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DisruptionMechanism {
    ExactState,
    GasPath,
}

/// Attack-shape metrics, declared by the generator and recomputed from
/// traces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioShape {
    /// Calls at depth >= 1 in the attack transaction.
    pub internal_tx_count: u64,
    /// Unique non-token participants: callers, callees, flow endpoints, and
    /// approval parties.
    pub entity_count: u64,
    /// Approval events the attack depends on.
    pub data_dependencies: u64,
    /// Token movements.
    pub money_flow_events: u64,
    /// Tokens touched by calls, flows, or approvals.
    pub token_count: u64,
    pub expected_loss: Amount,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub chain_profile: ChainProfile,
    pub genesis: WorldState,
    pub traffic: Vec<TrafficItem>,
    pub exclusions: Vec<ExclusionEntry>,
    pub subscriptions: Vec<SubscriptionEntry>,
    pub expected: ExpectedOutcome,
    pub protect: ProtectionScope,
    pub guardian: Address,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_shape: Option<ScenarioShape>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mechanism: Option<DisruptionMechanism>,
}

impl ScenarioSpec {
    pub fn attack_items(&self) -> impl Iterator<Item = &TrafficItem> {
        self.traffic
            .iter()
            .filter(|item| item.kind == TrafficKind::Attack)
    }

    /// Registers a subscription and backs it with the on-ledger allowance the
    /// victim would have granted.
    pub fn with_subscription(mut self, victim: Address, token: Address, allowance: Amount) -> Self {
        if let Some(ledger) = self.genesis.tokens.get_mut(&token) {
            ledger.set_allowance(victim, self.guardian, allowance.clone());
        }
        self.subscriptions.push(SubscriptionEntry {
            victim,
            token,
            allowance,
        });
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.genesis
            .check_token_conservation()
            .map_err(|detail| ScenarioError::Invalid {
                name: self.name.clone(),
                detail,
            })?;
        let mut seen = BTreeSet::new();
        for item in &self.traffic {
            if !seen.insert(item.tx.hash) {
                return Err(ScenarioError::Invalid {
                    name: self.name.clone(),
                    detail: format!("duplicate traffic hash {:?}", item.tx.hash),
                });
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), ScenarioError> {
        let json =
            serde_json::to_string_pretty(self).map_err(|e| ScenarioError::Io(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| ScenarioError::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<ScenarioSpec, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Parse {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        let spec: ScenarioSpec =
            serde_json::from_str(&text).map_err(|e| ScenarioError::Parse {
                path: path.display().to_string(),
                detail: format!("line {}: {}", e.line(), e),
            })?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Recomputes shape metrics from an execution trace. `expected_loss` is not
/// derivable from the trace alone and is set to zero here.
pub fn shape_of(trace: &ExecutionTrace, world: &WorldState) -> ScenarioShape {
    let is_token = |a: &Address| world.is_token(a);
    let mut entities: BTreeSet<Address> = BTreeSet::new();
    let mut tokens: BTreeSet<Address> = BTreeSet::new();

    let mut internal = 0u64;
    for call in &trace.internal_calls {
        if call.depth == 0 {
            continue;
        }
        internal += 1;
        for addr in [call.caller, call.callee] {
            if is_token(&addr) {
                tokens.insert(addr);
            } else {
                entities.insert(addr);
            }
        }
    }
    for flow in &trace.money_flows {
        tokens.insert(flow.token);
        for addr in [flow.from, flow.to] {
            if !is_token(&addr) {
                entities.insert(addr);
            }
        }
    }
    for approval in &trace.approvals {
        tokens.insert(approval.token);
        for addr in [approval.owner, approval.spender] {
            if !is_token(&addr) {
                entities.insert(addr);
            }
        }
    }

    ScenarioShape {
        internal_tx_count: internal,
        entity_count: entities.len() as u64,
        data_dependencies: trace.approvals.len() as u64,
        money_flow_events: trace.money_flows.len() as u64,
        token_count: tokens.len() as u64,
        expected_loss: Amount::zero(),
    }
}

/// Net token outflow from the victim side, summed across tokens in base
/// units.
pub fn measure_loss(pre: &WorldState, post: &WorldState, scope: &ProtectionScope) -> Amount {
    side_outflow(pre, post, &scope.victim_addresses)
}

/// Net token inflow to the attacker side.
pub fn measure_gain(pre: &WorldState, post: &WorldState, scope: &ProtectionScope) -> Amount {
    side_outflow(post, pre, &scope.attacker_addresses)
}

fn side_outflow(pre: &WorldState, post: &WorldState, addresses: &[Address]) -> Amount {
    let mut total = Amount::zero();
    for token in pre.tokens.keys() {
        for addr in addresses {
            let before = pre.token_balance(token, addr);
            let after = post.token_balance(token, addr);
            if let Some(delta) = before.checked_sub(&after) {
                total += &delta;
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_counts_only_outflow_per_address() {
        use crate::chainsim::TokenLedger;
        let victim = Address::derived(0xc0, 1);
        let other = Address::derived(0xc0, 2);
        let token = Address::derived(0xa0, 1);

        let mut pre = WorldState::new();
        let mut ledger = TokenLedger::new(token, "USDC");
        ledger.mint(victim, &Amount::from(100u64));
        ledger.mint(other, &Amount::from(50u64));
        pre.tokens.insert(token, ledger);

        let mut post = pre.clone();
        post.tokens
            .get_mut(&token)
            .unwrap()
            .transfer(&victim, &other, &Amount::from(30u64))
            .unwrap();

        let scope = ProtectionScope {
            victim_addresses: vec![victim],
            attacker_addresses: vec![other],
        };
        assert_eq!(measure_loss(&pre, &post, &scope), Amount::from(30u64));
        assert_eq!(measure_gain(&pre, &post, &scope), Amount::from(30u64));
        // Inflow does not offset outflow for a different address.
        let scope_both = ProtectionScope {
            victim_addresses: vec![victim, other],
            attacker_addresses: vec![],
        };
        assert_eq!(measure_loss(&pre, &post, &scope_both), Amount::from(30u64));
    }
}
