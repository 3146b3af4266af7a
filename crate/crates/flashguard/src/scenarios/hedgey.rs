//! Faithful replication of the token-locker campaign exploit: a campaign
//! contract that approves its locker argument for the deposited amount and
//! refunds a canceled campaign without revoking that approval, drained by a
//! flash-loan-funded create/cancel/transferFrom sequence in one atomic
//! transaction.

use crate::calldata::{compute_selector, CallData, NestedCall};
use crate::chainsim::{
    apply_transaction, AddrExpr, Address, Amount, AmountExpr, ContractProgram, FlashLoanProvider,
    GuardExpr, GuardedStep, StepEffect, TokenLedger, Transaction, WorldState,
};

use super::{
    ChainProfile, DisruptedBy, DisruptionMechanism, ExpectedOutcome, ProtectionScope,
    ScenarioSpec, TrafficItem, TrafficKind, GUARDIAN,
};

const LOAN: u64 = 1_300_000;
const VAULT: u64 = 1_300_000;

pub fn build_hedgey_scenario() -> ScenarioSpec {
    let usdc = Address::derived(0xa0, 1);
    let provider = Address::derived(0xb0, 1);
    let campaign = Address::derived(0xc0, 1); // the victim contract
    let exploit = Address::derived(0xd0, 1); // the attacker's contract
    let operator = Address::derived(0xe0, 1); // the attacker's EOA

    let mut genesis = WorldState::new();

    let mut ledger = TokenLedger::new(usdc, "USDC");
    ledger.mint(provider, &Amount::from(2_000_000u64));
    // Other projects' locked campaign funds — what the exploit drains.
    ledger.mint(campaign, &Amount::from(VAULT));
    ledger.mint(GUARDIAN, &Amount::from(1_000u64));
    genesis.tokens.insert(usdc, ledger);

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

    let create_sel = compute_selector("createLockedCampaign(uint256,address,uint256)").unwrap();
    let cancel_sel = compute_selector("cancelCampaign(uint256)").unwrap();
    let attack_sel = compute_selector("executeCampaignDrain()").unwrap();
    let on_loan_sel = compute_selector("onFlashLoan()").unwrap();
    let approve_sel = crate::chainsim::token_selectors().approve;
    let transfer_sel = crate::chainsim::token_selectors().transfer;
    let transfer_from_sel = crate::chainsim::token_selectors().transfer_from;

    // Victim: create pulls the deposit and approves the locker argument for
    // the campaign amount; cancel refunds the deposit but never revokes that
    // approval.
    let victim_program = ContractProgram::new(campaign)
        .with_handler(
            create_sel,
            vec![GuardedStep::require(
                GuardExpr::StorageEq {
                    key: "campaign_active".to_string(),
                    value: Amount::zero(),
                },
                "Campaign in use",
                vec![
                    StepEffect::SpendAllowance {
                        token: usdc,
                        owner: AddrExpr::Caller,
                        to: AddrExpr::SelfAddr,
                        amount: AmountExpr::Arg(2),
                    },
                    StepEffect::SetStorage {
                        key: "campaign_active".to_string(),
                        value: AmountExpr::Const(Amount::one()),
                    },
                    StepEffect::SetStorage {
                        key: "campaign_amount".to_string(),
                        value: AmountExpr::Arg(2),
                    },
                    // The flaw: the locker argument is approved for the
                    // campaign amount.
                    StepEffect::Call {
                        target: usdc,
                        data: CallData::flat(
                            approve_sel,
                            vec![exploit.to_word(), Amount::from(LOAN).to_word()],
                        ),
                    },
                ],
                40_000,
            )],
        )
        .with_handler(
            cancel_sel,
            vec![GuardedStep::require(
                GuardExpr::All(vec![
                    GuardExpr::CallerIs(exploit),
                    GuardExpr::StorageEq {
                        key: "campaign_active".to_string(),
                        value: Amount::one(),
                    },
                ]),
                "Not manager",
                vec![
                    StepEffect::Transfer {
                        token: usdc,
                        from: AddrExpr::SelfAddr,
                        to: AddrExpr::Caller,
                        amount: AmountExpr::StorageOf {
                            key: "campaign_amount".to_string(),
                        },
                    },
                    StepEffect::SetStorage {
                        key: "campaign_active".to_string(),
                        value: AmountExpr::Const(Amount::zero()),
                    },
                    // No approval revocation here — the vulnerability.
                ],
                30_000,
            )],
        );
    genesis.contracts.insert(campaign, victim_program);

    // Attacker contract: borrow, assert the simulated pre-state, create,
    // cancel, drain through the stale allowance, repay.
    let exploit_program = ContractProgram::new(exploit)
        .with_handler(
            attack_sel,
            vec![GuardedStep::run(
                vec![StepEffect::Call {
                    target: provider,
                    data: CallData::with_nested(
                        "1b8b5af1".parse().unwrap(),
                        vec![usdc.to_word(), Amount::from(LOAN).to_word()],
                        vec![NestedCall {
                            target: exploit,
                            call: CallData::flat(on_loan_sel, vec![]),
                        }],
                    ),
                }],
                500,
            )],
        )
        .with_handler(
            on_loan_sel,
            vec![
                // Exploit bots assert the state they simulated against; any
                // drift (such as one unit of dust) aborts the attempt.
                GuardedStep::require(
                    GuardExpr::BalanceEq {
                        token: usdc,
                        holder: AddrExpr::Const(campaign),
                        amount: AmountExpr::Const(Amount::from(VAULT)),
                    },
                    "pre-state drift detected",
                    vec![],
                    400,
                ),
                GuardedStep::run(
                    vec![
                        StepEffect::Call {
                            target: usdc,
                            data: CallData::flat(
                                approve_sel,
                                vec![campaign.to_word(), Amount::from(LOAN).to_word()],
                            ),
                        },
                        StepEffect::Call {
                            target: campaign,
                            data: CallData::flat(
                                create_sel,
                                vec![
                                    Amount::one().to_word(),
                                    exploit.to_word(),
                                    Amount::from(LOAN).to_word(),
                                ],
                            ),
                        },
                        StepEffect::Call {
                            target: campaign,
                            data: CallData::flat(cancel_sel, vec![Amount::one().to_word()]),
                        },
                        StepEffect::Call {
                            target: usdc,
                            data: CallData::flat(
                                transfer_from_sel,
                                vec![
                                    campaign.to_word(),
                                    exploit.to_word(),
                                    Amount::from(LOAN).to_word(),
                                ],
                            ),
                        },
                        StepEffect::Call {
                            target: usdc,
                            data: CallData::flat(
                                transfer_sel,
                                vec![provider.to_word(), Amount::from(LOAN).to_word()],
                            ),
                        },
                    ],
                    2_000,
                ),
            ],
        );
    genesis.contracts.insert(exploit, exploit_program);

    // The pending transaction's input mirrors the call tree the exploit
    // contract will execute, so static scanning sees what tracing sees.
    let attack_input = CallData::with_nested(
        attack_sel,
        vec![],
        vec![NestedCall {
            target: provider,
            call: CallData::with_nested(
                "1b8b5af1".parse().unwrap(),
                vec![usdc.to_word(), Amount::from(LOAN).to_word()],
                vec![NestedCall {
                    target: exploit,
                    call: CallData::with_nested(
                        on_loan_sel,
                        vec![],
                        vec![
                            NestedCall {
                                target: usdc,
                                call: CallData::flat(
                                    approve_sel,
                                    vec![campaign.to_word(), Amount::from(LOAN).to_word()],
                                ),
                            },
                            NestedCall {
                                target: campaign,
                                call: CallData::with_nested(
                                    create_sel,
                                    vec![
                                        Amount::one().to_word(),
                                        exploit.to_word(),
                                        Amount::from(LOAN).to_word(),
                                    ],
                                    vec![NestedCall {
                                        target: usdc,
                                        call: CallData::flat(
                                            approve_sel,
                                            vec![
                                                exploit.to_word(),
                                                Amount::from(LOAN).to_word(),
                                            ],
                                        ),
                                    }],
                                ),
                            },
                            NestedCall {
                                target: campaign,
                                call: CallData::flat(cancel_sel, vec![Amount::one().to_word()]),
                            },
                            NestedCall {
                                target: usdc,
                                call: CallData::flat(
                                    transfer_from_sel,
                                    vec![
                                        campaign.to_word(),
                                        exploit.to_word(),
                                        Amount::from(LOAN).to_word(),
                                    ],
                                ),
                            },
                            NestedCall {
                                target: usdc,
                                call: CallData::flat(
                                    transfer_sel,
                                    vec![provider.to_word(), Amount::from(LOAN).to_word()],
                                ),
                            },
                        ],
                    ),
                }],
            ),
        }],
    );

    // Size the gas limit from an undisrupted dry run.
    let probe = Transaction::new(
        0,
        operator,
        exploit,
        500,
        u64::MAX / 2,
        Amount::zero(),
        Some(attack_input.clone()),
    );
    let (_, dry_trace) = apply_transaction(&genesis, &probe).expect("dry run executes");
    assert!(dry_trace.status.is_success(), "dry run must succeed: {:?}", dry_trace.status);
    let attack_tx = Transaction::new(
        0,
        operator,
        exploit,
        500,
        dry_trace.gas_used + 20_000,
        Amount::zero(),
        Some(attack_input),
    );

    let mut traffic = vec![TrafficItem {
        at_ms: 2_000,
        kind: TrafficKind::Attack,
        tx: attack_tx,
    }];
    // Light benign background: plain native transfers from fresh senders.
    for i in 0..6u64 {
        let from = Address::derived(0xe1, i);
        let to = Address::derived(0xe2, i);
        genesis.credit_native(from, &Amount::from(1_000_000_000u64));
        genesis.accounts.entry(to).or_default();
        traffic.push(TrafficItem {
            at_ms: 500 + i * 1_500,
            kind: TrafficKind::Benign,
            tx: Transaction::new(0, from, to, 1 + i, 30_000, Amount::from(10u64), None),
        });
    }
    traffic.sort_by_key(|item| item.at_ms);

    ScenarioSpec {
        name: "Hedgey Finance".to_string(),
        chain_profile: ChainProfile::default(),
        genesis,
        traffic,
        exclusions: Vec::new(),
        subscriptions: Vec::new(),
        expected: ExpectedOutcome {
            detected: true,
            disrupted_by: DisruptedBy {
                absd: true,
                sfsd: true,
            },
            loss_without_guard: Amount::from(LOAN),
        },
        protect: ProtectionScope {
            victim_addresses: vec![campaign],
            attacker_addresses: vec![exploit, operator],
        },
        guardian: GUARDIAN,
        declared_shape: None,
        mechanism: Some(DisruptionMechanism::ExactState),
    }
}
