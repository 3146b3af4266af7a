//! The unseen-vulnerability suite: three vulnerability classes not present
//! in the historical presets, each run once with the victim subscribed
//! (ABSD) and once without (SFSD), with 50,000 stablecoin units at stake.
//!
//! Expected disruption pattern:
//!
//! | vulnerability          | ABSD | SFSD |
//! |------------------------|------|------|
//! | improper access control| yes  | yes  |
//! | unchecked return value | yes  | no   |
//! | uninitialized storage  | yes  | no   |
//!
//! The access-control victim enforces an exact solvency equality, so dust in
//! either direction breaks it. The other two victims only watch for balance
//! *shortfalls* via a gas-heavy reconciliation path: burning dust from the
//! vault (ABSD) trips it and exhausts the attack's gas budget, while guardian
//! dust arriving on top (SFSD) leaves the check satisfied and the attack
//! intact.

use crate::calldata::{compute_selector, CallData, NestedCall};
use crate::chainsim::{
    apply_transaction, token_selectors, AddrExpr, Address, Amount, AmountExpr, ContractProgram,
    FlashLoanProvider, GuardExpr, GuardFailure, GuardedStep, StepEffect, TokenLedger, Transaction,
    WorldState,
};

use super::{
    ChainProfile, DisruptedBy, DisruptionMechanism, ExpectedOutcome, ProtectionScope,
    ScenarioSpec, TrafficItem, TrafficKind, GUARDIAN,
};

pub const VULNERABLE_FUNDS: u64 = 50_000;
const GAS_BOMB: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnseenVulnerability {
    /// A restricted function that grants spend rights without checking the
    /// caller.
    ImproperAccessControl,
    /// Payouts through a token that reports failure by returning false
    /// instead of reverting, so the victim never validates them.
    UncheckedReturnValue,
    /// An owner slot that was never initialized and reads as zero.
    UninitializedStorage,
}

impl UnseenVulnerability {
    pub const ALL: [UnseenVulnerability; 3] = [
        UnseenVulnerability::ImproperAccessControl,
        UnseenVulnerability::UncheckedReturnValue,
        UnseenVulnerability::UninitializedStorage,
    ];

    fn slug(&self) -> &'static str {
        match self {
            UnseenVulnerability::ImproperAccessControl => "access-control",
            UnseenVulnerability::UncheckedReturnValue => "unchecked-return",
            UnseenVulnerability::UninitializedStorage => "uninitialized-storage",
        }
    }

    pub fn disrupted_by(&self) -> DisruptedBy {
        match self {
            UnseenVulnerability::ImproperAccessControl => DisruptedBy {
                absd: true,
                sfsd: true,
            },
            _ => DisruptedBy {
                absd: true,
                sfsd: false,
            },
        }
    }
}

/// Six scenarios: the three vulnerability classes, each subscribed (ABSD)
/// and unsubscribed (SFSD).
pub fn build_unseen_scenarios() -> Vec<ScenarioSpec> {
    let mut out = Vec::with_capacity(6);
    for vuln in UnseenVulnerability::ALL {
        for subscribed in [true, false] {
            out.push(build_unseen(vuln, subscribed));
        }
    }
    out
}

fn build_unseen(vuln: UnseenVulnerability, subscribed: bool) -> ScenarioSpec {
    let stable = Address::derived(0xa0, 1);
    let provider = Address::derived(0xb0, 1);
    let victim = Address::derived(0xc0, 1);
    let exploit = Address::derived(0xd0, 1);
    let operator = Address::derived(0xe0, 1);
    let funds = Amount::from(VULNERABLE_FUNDS);

    let mut genesis = WorldState::new();
    let mut ledger = TokenLedger::new(stable, "MUSDC");
    ledger.mint(provider, &funds);
    ledger.mint(victim, &funds);
    ledger.mint(GUARDIAN, &Amount::from(1_000u64));
    genesis.tokens.insert(stable, ledger);
    genesis.providers.insert(
        provider,
        FlashLoanProvider {
            address: provider,
            fee_num: 0,
            fee_den: 1,
            loan_selector: "1b8b5af1".parse().unwrap(),
        },
    );
    genesis.credit_native(operator, &Amount::from(1_000_000_000_000u64));
    genesis.credit_native(GUARDIAN, &Amount::from(1_000_000_000_000u64));

    let sels = token_selectors();
    let attack_sel = compute_selector("runUnseenExploit()").unwrap();
    let on_loan_sel = compute_selector("onFlashLoan()").unwrap();
    let vuln_sel = compute_selector("settlePosition(uint256)").unwrap();

    // The sentinel that decides whether dusting works, per vulnerability
    // class.
    let sentinel = match vuln {
        // Exact solvency accounting: any dust in either direction breaks it.
        UnseenVulnerability::ImproperAccessControl => GuardedStep::require(
            GuardExpr::BalanceEq {
                token: stable,
                holder: AddrExpr::SelfAddr,
                amount: AmountExpr::Const(funds.clone()),
            },
            "accounting mismatch",
            vec![],
            400,
        ),
        // Shortfall watchdog: only a balance decrease flips it onto the
        // gas-heavy reconciliation path.
        _ => GuardedStep {
            guard: GuardExpr::BalanceGe {
                token: stable,
                holder: AddrExpr::SelfAddr,
                amount: AmountExpr::Const(funds.clone()),
            },
            effects: vec![],
            gas_cost: 400,
            on_guard_fail: GuardFailure::Fallback {
                effects: vec![],
                gas_cost: GAS_BOMB,
            },
        },
    };

    let grant_call = CallData::flat(sels.approve, vec![exploit.to_word(), funds.to_word()]);

    // Victim script and the attacker's callback call list (execution) with
    // its calldata mirror (scanning).
    let victim_steps;
    let callback_calls: Vec<(Address, CallData)>;
    match vuln {
        UnseenVulnerability::ImproperAccessControl => {
            // No caller check before granting vault spend rights.
            victim_steps = vec![
                sentinel,
                GuardedStep::run(
                    vec![StepEffect::Call {
                        target: stable,
                        data: grant_call.clone(),
                    }],
                    600,
                ),
            ];
            callback_calls = vec![
                (
                    victim,
                    CallData::with_nested(
                        vuln_sel,
                        vec![funds.to_word()],
                        vec![NestedCall {
                            target: stable,
                            call: grant_call,
                        }],
                    ),
                ),
                (
                    stable,
                    CallData::flat(
                        sels.transfer_from,
                        vec![victim.to_word(), exploit.to_word(), funds.to_word()],
                    ),
                ),
                (
                    stable,
                    CallData::flat(sels.transfer, vec![provider.to_word(), funds.to_word()]),
                ),
            ];
        }
        UnseenVulnerability::UncheckedReturnValue => {
            // The payout goes through a clamping token: a failed transfer
            // returns false instead of reverting, so the victim pays the
            // requested amount without any validation holding it back.
            victim_steps = vec![
                sentinel,
                GuardedStep::run(
                    vec![StepEffect::TransferUpTo {
                        token: stable,
                        from: AddrExpr::SelfAddr,
                        to: AddrExpr::Caller,
                        amount: AmountExpr::Arg(0),
                    }],
                    600,
                ),
            ];
            callback_calls = vec![
                // Repayment allowance for the provider — the approval leg.
                (
                    stable,
                    CallData::flat(sels.approve, vec![provider.to_word(), funds.to_word()]),
                ),
                (
                    victim,
                    CallData::with_nested(
                        vuln_sel,
                        vec![funds.to_word()],
                        // Mirror of the silent payout the victim will make.
                        vec![NestedCall {
                            target: stable,
                            call: CallData::flat(
                                sels.transfer,
                                vec![exploit.to_word(), funds.to_word()],
                            ),
                        }],
                    ),
                ),
                (
                    stable,
                    CallData::flat(sels.transfer, vec![provider.to_word(), funds.to_word()]),
                ),
            ];
        }
        UnseenVulnerability::UninitializedStorage => {
            // The owner slot was never written; zero reads as "anyone".
            victim_steps = vec![
                GuardedStep::require(
                    GuardExpr::StorageEq {
                        key: "owner_initialized".to_string(),
                        value: Amount::zero(),
                    },
                    "owner check",
                    vec![],
                    300,
                ),
                sentinel,
                GuardedStep::run(
                    vec![StepEffect::Call {
                        target: stable,
                        data: grant_call.clone(),
                    }],
                    600,
                ),
            ];
            callback_calls = vec![
                (
                    victim,
                    CallData::with_nested(
                        vuln_sel,
                        vec![funds.to_word()],
                        vec![NestedCall {
                            target: stable,
                            call: grant_call,
                        }],
                    ),
                ),
                (
                    stable,
                    CallData::flat(
                        sels.transfer_from,
                        vec![victim.to_word(), exploit.to_word(), funds.to_word()],
                    ),
                ),
                (
                    stable,
                    CallData::flat(sels.transfer, vec![provider.to_word(), funds.to_word()]),
                ),
            ];
        }
    }
    genesis.contracts.insert(
        victim,
        ContractProgram::new(victim).with_handler(vuln_sel, victim_steps),
    );

    let callback_effects: Vec<StepEffect> = callback_calls
        .iter()
        .map(|(target, data)| StepEffect::Call {
            target: *target,
            data: data.clone(),
        })
        .collect();
    let callback_blobs: Vec<NestedCall> = callback_calls
        .iter()
        .map(|(target, data)| NestedCall {
            target: *target,
            call: data.clone(),
        })
        .collect();

    genesis.contracts.insert(
        exploit,
        ContractProgram::new(exploit)
            .with_handler(
                attack_sel,
                vec![GuardedStep::run(
                    vec![StepEffect::Call {
                        target: provider,
                        data: CallData::with_nested(
                            "1b8b5af1".parse().unwrap(),
                            vec![stable.to_word(), funds.to_word()],
                            vec![NestedCall {
                                target: exploit,
                                call: CallData::flat(on_loan_sel, vec![]),
                            }],
                        ),
                    }],
                    500,
                )],
            )
            .with_handler(on_loan_sel, vec![GuardedStep::run(callback_effects, 2_000)]),
    );

    let attack_input = CallData::with_nested(
        attack_sel,
        vec![],
        vec![NestedCall {
            target: provider,
            call: CallData::with_nested(
                "1b8b5af1".parse().unwrap(),
                vec![stable.to_word(), funds.to_word()],
                vec![NestedCall {
                    target: exploit,
                    call: CallData::with_nested(on_loan_sel, vec![], callback_blobs),
                }],
            ),
        }],
    );

    let probe = Transaction::new(
        0,
        operator,
        exploit,
        500,
        u64::MAX / 2,
        Amount::zero(),
        Some(attack_input.clone()),
    );
    let (_, dry) = apply_transaction(&genesis, &probe).expect("dry run executes");
    assert!(dry.status.is_success(), "unseen dry run: {:?}", dry.status);
    let attack_tx = Transaction::new(
        0,
        operator,
        exploit,
        500,
        dry.gas_used + 20_000,
        Amount::zero(),
        Some(attack_input),
    );

    let mode = if subscribed { "absd" } else { "sfsd" };
    let mut spec = ScenarioSpec {
        name: format!("unseen-{}-{}", vuln.slug(), mode),
        chain_profile: ChainProfile::default(),
        genesis,
        traffic: vec![TrafficItem {
            at_ms: 2_000,
            kind: TrafficKind::Attack,
            tx: attack_tx,
        }],
        exclusions: Vec::new(),
        subscriptions: Vec::new(),
        expected: ExpectedOutcome {
            detected: true,
            disrupted_by: vuln.disrupted_by(),
            loss_without_guard: funds,
        },
        protect: ProtectionScope {
            victim_addresses: vec![victim],
            attacker_addresses: vec![exploit, operator],
        },
        guardian: GUARDIAN,
        declared_shape: None,
        mechanism: Some(match vuln {
            UnseenVulnerability::ImproperAccessControl => DisruptionMechanism::ExactState,
            _ => DisruptionMechanism::GasPath,
        }),
    };
    if subscribed {
        spec = spec.with_subscription(victim, stable, Amount::from(10u64));
    }
    spec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chainsim::TxStatus;
    use crate::scenarios::{measure_gain, measure_loss};

    fn run_with_dust(spec: &ScenarioSpec, absd: bool) -> (TxStatus, Amount, Amount) {
        let stable = Address::derived(0xa0, 1);
        let victim = Address::derived(0xc0, 1);
        let mut world = spec.genesis.clone();
        let ledger = world.tokens.get_mut(&stable).unwrap();
        if absd {
            ledger
                .transfer(&victim, &Address::BURN, &Amount::one())
                .unwrap();
        } else {
            ledger
                .transfer(&GUARDIAN, &victim, &Amount::one())
                .unwrap();
        }
        let tx = spec.attack_items().next().unwrap().tx.clone();
        let (post, trace) = apply_transaction(&world, &tx).unwrap();
        (
            trace.status,
            measure_loss(&world, &post, &spec.protect),
            measure_gain(&world, &post, &spec.protect),
        )
    }

    #[test]
    fn all_six_run_clean_without_dust() {
        let specs = build_unseen_scenarios();
        assert_eq!(specs.len(), 6);
        for spec in &specs {
            let tx = spec.attack_items().next().unwrap().tx.clone();
            let (post, trace) = apply_transaction(&spec.genesis, &tx).unwrap();
            assert!(trace.status.is_success(), "{}: {:?}", spec.name, trace.status);
            assert_eq!(
                measure_loss(&spec.genesis, &post, &spec.protect),
                Amount::from(VULNERABLE_FUNDS),
                "{}",
                spec.name
            );
        }
    }

    #[test]
    fn disruption_matrix_matches_expected_pattern() {
        for spec in build_unseen_scenarios() {
            let expected = spec.expected.disrupted_by;
            let absd_mode = !spec.subscriptions.is_empty();

            let (status, loss, gain) = run_with_dust(&spec, absd_mode);
            let disrupted = !status.is_success();
            let should_disrupt = if absd_mode {
                expected.absd
            } else {
                expected.sfsd
            };
            assert_eq!(
                disrupted, should_disrupt,
                "{}: status {status:?}",
                spec.name
            );
            if disrupted {
                assert_eq!(gain, Amount::zero(), "{}", spec.name);
                assert!(loss.is_zero(), "{}: loss {loss} after rollback", spec.name);
            } else {
                assert_eq!(loss, Amount::from(VULNERABLE_FUNDS), "{}", spec.name);
            }
        }
    }

    #[test]
    fn absd_gas_path_ends_out_of_gas() {
        let specs = build_unseen_scenarios();
        let uninit_absd = specs
            .iter()
            .find(|s| s.name == "unseen-uninitialized-storage-absd")
            .unwrap();
        let (status, _, _) = run_with_dust(uninit_absd, true);
        assert_eq!(status, TxStatus::OutOfGas);
    }
}
