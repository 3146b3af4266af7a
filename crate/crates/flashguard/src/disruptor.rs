//! Synthesis of the dusting counter-transaction.
//!
//! Once the detector flags a pending attack, the disruptor resolves the
//! victim contract and the token being exploited, then builds a minimal
//! ("dust") transfer that perturbs the victim's state before the attack
//! confirms:
//!
//! - ABSD: the victim pre-subscribed with a standing dust allowance to the
//!   guardian; the counter-transaction burns one dust unit *from* the victim.
//! - SFSD: no subscription; the guardian spends its own funds, sending one
//!   dust unit *to* the victim.
//!
//! Every disruptor error fails open: the attack proceeds and a miss is
//! logged. A protection system must never corrupt healthy state to act.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::calldata::{CallData, NestedCall, SignatureClass, SignatureDatabase};
use crate::chainsim::{token_selectors, Address, AddressKind, Amount, Transaction, TxHash, WorldState};
use crate::detector::DetectionVerdict;
use crate::relay::{RelayQueue, RelayReceipt};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DisruptError {
    #[error("could not resolve a unique victim/token for the flagged transaction")]
    AmbiguousTarget,
    #[error("guardian holds no dust funds in token {0}")]
    InsufficientGuardianFunds(Address),
    #[error("private relay unavailable")]
    RelayUnavailable,
}

/// Victims that pre-subscribed, with the dust token and the standing
/// allowance they granted the guardian.
#[derive(Debug, Clone, Default)]
pub struct SubscriptionRegistry {
    subscribed: BTreeMap<Address, (Address, Amount)>,
}

impl SubscriptionRegistry {
    pub fn new() -> SubscriptionRegistry {
        SubscriptionRegistry::default()
    }

    pub fn register(&mut self, victim: Address, token: Address, allowance: Amount) {
        self.subscribed.insert(victim, (token, allowance));
    }

    pub fn lookup(&self, victim: &Address) -> Option<&(Address, Amount)> {
        self.subscribed.get(victim)
    }

    pub fn len(&self) -> usize {
        self.subscribed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subscribed.is_empty()
    }

    /// Line format: `victim_address,token_address,allowance`.
    pub fn load(path: &Path) -> Result<SubscriptionRegistry, String> {
        let file = std::fs::File::open(path).map_err(|e| e.to_string())?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<SubscriptionRegistry, String> {
        let mut registry = SubscriptionRegistry::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| e.to_string())?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(format!(
                    "registry line {}: expected victim,token,allowance",
                    lineno + 1
                ));
            }
            let victim: Address = fields[0]
                .parse()
                .map_err(|e| format!("registry line {}: {e}", lineno + 1))?;
            let token: Address = fields[1]
                .parse()
                .map_err(|e| format!("registry line {}: {e}", lineno + 1))?;
            let allowance: Amount = fields[2]
                .parse()
                .map_err(|e| format!("registry line {}: {e}", lineno + 1))?;
            registry.register(victim, token, allowance);
        }
        Ok(registry)
    }

    pub fn save(&self, path: &Path) -> Result<(), String> {
        let mut file = std::fs::File::create(path).map_err(|e| e.to_string())?;
        for (victim, (token, allowance)) in &self.subscribed {
            writeln!(file, "{},{},{}", victim.to_hex(), token.to_hex(), allowance)
                .map_err(|e| e.to_string())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DisruptionMode {
    Absd,
    Sfsd,
}

#[derive(Debug, Clone, Serialize)]
pub struct DisruptionPlan {
    pub mode: DisruptionMode,
    pub victim: Address,
    pub token: Address,
    pub dust: Amount,
    pub counter_tx: Transaction,
    pub target_attack_hash: TxHash,
}

#[derive(Debug, Clone)]
pub struct DisruptorConfig {
    pub guardian: Address,
    /// The minimal state-changing amount, in base units.
    pub dust: Amount,
    /// Relay gas premium over the target's gas price, in basis points
    /// (10_000 = no premium). The relay lane ignores price for ordering;
    /// this only affects the counterattack's cost accounting.
    pub premium_bps: u32,
}

impl DisruptorConfig {
    pub fn new(guardian: Address) -> DisruptorConfig {
        DisruptorConfig {
            guardian,
            dust: Amount::one(),
            premium_bps: 10_000,
        }
    }
}

/// Resolves the victim contract and exploited token from a flagged pending
/// transaction's embedded call tree: the victim is the non-provider contract
/// the qualifying token operations act on, and the token is the one whose
/// selectors matched; ties break toward the largest argument amount.
pub fn determine_target(
    verdict: &DetectionVerdict,
    tx: &Transaction,
    world: &WorldState,
    db: &SignatureDatabase,
) -> Result<(Address, Address), DisruptError> {
    debug_assert!(verdict.flagged);
    let input = tx.input.as_ref().ok_or(DisruptError::AmbiguousTarget)?;
    let mut candidates: Vec<(Amount, Address, Address)> = Vec::new();
    collect_candidates(input, tx.to, None, world, db, &mut candidates);
    // Largest amount wins; remaining ties break on the smaller (victim,
    // token) pair so the choice is deterministic.
    candidates.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    candidates
        .first()
        .map(|(_, victim, token)| (*victim, *token))
        .ok_or(DisruptError::AmbiguousTarget)
}

fn collect_candidates(
    call: &CallData,
    attacker: Address,
    enclosing: Option<Address>,
    world: &WorldState,
    db: &SignatureDatabase,
    out: &mut Vec<(Amount, Address, Address)>,
) {
    for NestedCall { target, call } in &call.nested {
        if world.is_token(target) {
            let token = *target;
            let sels = token_selectors();
            if call.selector == sels.transfer_from {
                // The drained owner is named right in the arguments.
                if let (Some(owner), Some(amount)) = (call.arg_address(0), call.arg_amount(2)) {
                    if is_victim_candidate(&owner, attacker, world) {
                        out.push((amount, owner, token));
                    }
                }
            } else if db.class_of(&call.selector) == Some(SignatureClass::Transfer)
                || db.class_of(&call.selector) == Some(SignatureClass::Approval)
            {
                if let Some(victim) = enclosing {
                    let amount = call.arg_amount(1).unwrap_or_default();
                    out.push((amount, victim, token));
                }
            } else if db.class_of(&call.selector) == Some(SignatureClass::Withdrawal) {
                let amount = call.arg_amount(0).unwrap_or_default();
                // A withdrawal drains the token's own vault unless it sits
                // inside a victim contract's call.
                let victim = enclosing.unwrap_or(token);
                out.push((amount, victim, token));
            }
            collect_candidates(call, attacker, enclosing, world, db, out);
        } else {
            let next_enclosing = if is_victim_candidate(target, attacker, world) {
                Some(*target)
            } else if *target == attacker || world.providers.contains_key(target) {
                None
            } else {
                enclosing
            };
            collect_candidates(call, attacker, next_enclosing, world, db, out);
        }
    }
}

fn is_victim_candidate(addr: &Address, attacker: Address, world: &WorldState) -> bool {
    *addr != attacker
        && !world.providers.contains_key(addr)
        && !world.is_token(addr)
        && world.kind_of(addr) == AddressKind::Contract
}

/// Chooses ABSD when the subscription's standing allowance covers the dust
/// (checked against the ledger, not just the registry) and falls back to
/// SFSD otherwise.
pub fn plan_dusting(
    victim: Address,
    token: Address,
    registry: &SubscriptionRegistry,
    config: &DisruptorConfig,
    world: &WorldState,
    target: &Transaction,
    guardian_nonce: u64,
) -> Result<DisruptionPlan, DisruptError> {
    let sels = token_selectors();
    let gas_limit = world.gas.tx_base + world.gas.call_base + world.gas.token_op + 1_000;
    let gas_price = ((target.gas_price as u128 * config.premium_bps as u128) / 10_000).max(1) as u64;

    let absd = registry.lookup(&victim).and_then(|(reg_token, declared)| {
        let live = world.token_allowance(reg_token, &victim, &config.guardian);
        (declared >= &config.dust && live >= config.dust).then_some(*reg_token)
    });

    let (mode, dust_token, input) = match absd {
        Some(reg_token) => (
            DisruptionMode::Absd,
            reg_token,
            CallData::flat(
                sels.transfer_from,
                vec![
                    victim.to_word(),
                    Address::BURN.to_word(),
                    config.dust.to_word(),
                ],
            ),
        ),
        None => {
            if world.token_balance(&token, &config.guardian) < config.dust {
                return Err(DisruptError::InsufficientGuardianFunds(token));
            }
            (
                DisruptionMode::Sfsd,
                token,
                CallData::flat(
                    sels.transfer,
                    vec![victim.to_word(), config.dust.to_word()],
                ),
            )
        }
    };

    let counter_tx = Transaction::new(
        guardian_nonce,
        config.guardian,
        dust_token,
        gas_price,
        gas_limit,
        Amount::zero(),
        Some(input),
    );
    Ok(DisruptionPlan {
        mode,
        victim,
        token: dust_token,
        dust: config.dust.clone(),
        counter_tx,
        target_attack_hash: target.hash,
    })
}

/// What happened to one flagged verdict.
#[derive(Debug, Clone, Serialize)]
pub struct DisruptionOutcome {
    pub target_hash: TxHash,
    pub result: DisruptionResult,
    /// Wall-clock time from verdict receipt to relay receipt, in ms.
    pub disruption_latency_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub enum DisruptionResult {
    Submitted {
        plan: DisruptionPlan,
        receipt: RelayReceipt,
    },
    /// Fail-open: the attack proceeds and the miss is recorded.
    Aborted { reason: String },
}

impl DisruptionOutcome {
    pub fn accepted_plan(&self) -> Option<&DisruptionPlan> {
        match &self.result {
            DisruptionResult::Submitted {
                plan,
                receipt: RelayReceipt::Accepted,
            } => Some(plan),
            _ => None,
        }
    }
}

/// Consumes flagged verdicts and feeds the relay. Submission is serialized
/// per target attack hash; a target is only ever dusted once.
pub struct Disruptor {
    config: DisruptorConfig,
    registry: SubscriptionRegistry,
    guardian_nonce: u64,
    handled_targets: BTreeSet<TxHash>,
}

impl Disruptor {
    pub fn new(
        config: DisruptorConfig,
        registry: SubscriptionRegistry,
        initial_guardian_nonce: u64,
    ) -> Disruptor {
        Disruptor {
            config,
            registry,
            guardian_nonce: initial_guardian_nonce,
            handled_targets: BTreeSet::new(),
        }
    }

    pub fn config(&self) -> &DisruptorConfig {
        &self.config
    }

    pub fn registry(&self) -> &SubscriptionRegistry {
        &self.registry
    }

    /// Handles one flagged verdict end to end: resolve target, build the
    /// plan, submit to the relay.
    pub fn handle_flagged(
        &mut self,
        verdict: &DetectionVerdict,
        tx: &Transaction,
        world: &WorldState,
        db: &SignatureDatabase,
        relay: Option<&mut RelayQueue>,
        target_confirmed: bool,
        now_ms: u64,
    ) -> DisruptionOutcome {
        let started = Instant::now();
        let result = self.try_handle(verdict, tx, world, db, relay, target_confirmed, now_ms);
        DisruptionOutcome {
            target_hash: tx.hash,
            result,
            disruption_latency_ms: started.elapsed().as_secs_f64() * 1_000.0,
        }
    }

    fn try_handle(
        &mut self,
        verdict: &DetectionVerdict,
        tx: &Transaction,
        world: &WorldState,
        db: &SignatureDatabase,
        relay: Option<&mut RelayQueue>,
        target_confirmed: bool,
        now_ms: u64,
    ) -> DisruptionResult {
        if self.handled_targets.contains(&tx.hash) {
            // Deduplicated without burning a guardian nonce.
            return DisruptionResult::Aborted {
                reason: "duplicate plan for already-handled target".to_string(),
            };
        }
        let Some(relay) = relay else {
            log::warn!(
                "disruption miss for {:?}: relay unavailable",
                tx.hash
            );
            return DisruptionResult::Aborted {
                reason: DisruptError::RelayUnavailable.to_string(),
            };
        };
        let (victim, token) = match determine_target(verdict, tx, world, db) {
            Ok(pair) => pair,
            Err(err) => {
                log::warn!("disruption miss for {:?}: {err}", tx.hash);
                return DisruptionResult::Aborted {
                    reason: err.to_string(),
                };
            }
        };
        let plan = match plan_dusting(
            victim,
            token,
            &self.registry,
            &self.config,
            world,
            tx,
            self.guardian_nonce,
        ) {
            Ok(plan) => plan,
            Err(err) => {
                log::warn!("disruption miss for {:?}: {err}", tx.hash);
                return DisruptionResult::Aborted {
                    reason: err.to_string(),
                };
            }
        };
        let receipt = relay.submit_private(
            plan.counter_tx.clone(),
            plan.target_attack_hash,
            target_confirmed,
            now_ms,
        );
        if receipt == RelayReceipt::Accepted {
            self.guardian_nonce += 1;
            self.handled_targets.insert(tx.hash);
        }
        DisruptionResult::Submitted { plan, receipt }
    }
}
