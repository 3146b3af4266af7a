//! Synthesis of attack scenarios from declared shape metrics.
//!
//! Given target counts for internal calls, entities, data dependencies,
//! money flows, and tokens, the generator assembles a victim/attacker script
//! pair whose undisrupted trace realizes the counts exactly:
//!
//! ```text
//! calls  = flashLoan + callback + (DD-1) attacker approvals + victim call
//!        + victim's allowance grant + drain + queries/hops + repay
//! flows  = borrow + side flows + drain + repay
//! ```
//!
//! Entities beyond the attacker/provider/victim triad come from fresh flow
//! endpoints, approval spenders, and helper-contract hops; tokens beyond the
//! drain token are touched through side flows, approvals, and zero-amount
//! probe calls. The 20 table presets configure this generator with the
//! published per-attack metrics and losses.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::calldata::{compute_selector, CallData, NestedCall};
use crate::chainsim::{
    apply_transaction, token_selectors, AddrExpr, Address, Amount, AmountExpr, ContractProgram,
    FlashLoanProvider, GuardExpr, GuardFailure, GuardedStep, StepEffect, TokenLedger, Transaction,
    WorldState,
};

use super::{
    ChainProfile, DisruptedBy, DisruptionMechanism, ExpectedOutcome, ProtectionScope,
    ScenarioError, ScenarioShape, ScenarioSpec, TrafficItem, TrafficKind, GUARDIAN,
};

/// Declared attack-shape metrics for the generator.
#[derive(Debug, Clone)]
pub struct ShapeSpec {
    pub internal_tx_count: u64,
    pub entity_count: u64,
    pub data_dependencies: u64,
    pub money_flow_events: u64,
    pub token_count: u64,
    pub loss: Amount,
}

impl ShapeSpec {
    /// The smallest valid shape: the attacker/provider/victim triad, one
    /// token, and the skeletal borrow/drain/repay flows.
    pub fn minimal() -> ShapeSpec {
        ShapeSpec {
            internal_tx_count: 6,
            entity_count: 3,
            data_dependencies: 1,
            money_flow_events: 3,
            token_count: 1,
            loss: Amount::from(1_000u64),
        }
    }

    pub fn to_shape(&self) -> ScenarioShape {
        ScenarioShape {
            internal_tx_count: self.internal_tx_count,
            entity_count: self.entity_count,
            data_dependencies: self.data_dependencies,
            money_flow_events: self.money_flow_events,
            token_count: self.token_count,
            expected_loss: self.loss.clone(),
        }
    }
}

/// Extra knobs the presets use.
#[derive(Debug, Clone)]
pub struct ShapeOptions {
    pub chain: String,
    pub mechanism: DisruptionMechanism,
    /// Subscribe the victim (enables ABSD at run time).
    pub subscribed: bool,
    /// Emit probe padding as zero-amount withdrawals instead of transfers,
    /// exercising the withdrawal qualification path.
    pub withdraw_probes: bool,
    pub benign_background: u64,
}

impl Default for ShapeOptions {
    fn default() -> Self {
        ShapeOptions {
            chain: "Ethereum".to_string(),
            mechanism: DisruptionMechanism::ExactState,
            subscribed: false,
            withdraw_probes: false,
            benign_background: 8,
        }
    }
}

const GAS_BOMB: u64 = 100_000_000;

struct Roles {
    attacker_contract: Address,
    operator: Address,
    provider: Address,
    victim: Address,
    profit_wallet: Address,
}

pub fn build_shape_scenario(
    name: &str,
    shape: &ShapeSpec,
    options: &ShapeOptions,
    seed: u64,
) -> Result<ScenarioSpec, ScenarioError> {
    let infeasible = |detail: &str| ScenarioError::InfeasibleShape(format!("{name}: {detail}"));

    if shape.token_count < 1 {
        return Err(infeasible("at least one token required"));
    }
    if shape.entity_count < 3 {
        return Err(infeasible("attacker, provider, and victim are mandatory"));
    }
    if shape.data_dependencies < 1 {
        return Err(infeasible(
            "the victim's allowance grant is one mandatory data dependency",
        ));
    }
    if shape.money_flow_events < 3 {
        return Err(infeasible("borrow, drain, and repay flows are mandatory"));
    }
    let side_flows = shape.money_flow_events - 3;
    let budget = shape
        .internal_tx_count
        .checked_sub(5 + shape.data_dependencies)
        .ok_or_else(|| infeasible("call count too small for skeleton plus approvals"))?;

    let one = Amount::one();
    let side_total = Amount::from(side_flows);
    let drain_amount = shape
        .loss
        .checked_sub(&side_total)
        .filter(|d| !d.is_zero())
        .ok_or_else(|| infeasible("loss must exceed one unit per side flow"))?;

    // ---- entity allocation ----------------------------------------------
    let roles = Roles {
        attacker_contract: Address::derived(0xd0, 1),
        operator: Address::derived(0xe0, 1),
        provider: Address::derived(0xb0, 1),
        victim: Address::derived(0xc0, 1),
        profit_wallet: Address::derived(0xe0, 2),
    };
    let mut need = shape.entity_count - 3;

    let drain_sink = if need > 0 {
        need -= 1;
        roles.profit_wallet
    } else {
        roles.attacker_contract
    };

    // Each side flow can fan out to a fresh source vault and a fresh sink.
    let mut side_endpoints: Vec<(Address, Address)> = Vec::with_capacity(side_flows as usize);
    for i in 0..side_flows {
        let source = if need > 0 {
            need -= 1;
            Address::derived(0xc1, i) // victim-side vault
        } else {
            roles.victim
        };
        let dest = if need > 0 {
            need -= 1;
            Address::derived(0xe3, i) // attacker-side sink
        } else {
            drain_sink
        };
        side_endpoints.push((source, dest));
    }

    let attacker_approvals = shape.data_dependencies - 1;
    let mut spenders: Vec<Address> = Vec::with_capacity(attacker_approvals as usize);
    for i in 0..attacker_approvals {
        spenders.push(if need > 0 {
            need -= 1;
            Address::derived(0xd1, i)
        } else {
            roles.victim
        });
    }

    let hops = need;
    if hops > budget {
        return Err(infeasible(&format!(
            "entity count needs {hops} helper hops but only {budget} spare calls exist"
        )));
    }
    let queries = budget - hops;

    // ---- token allocation -------------------------------------------------
    let tokens: Vec<Address> = (0..shape.token_count)
        .map(|i| Address::derived(0xa0, i + 1))
        .collect();
    let drain_token = tokens[0];
    let mut next_uncovered = 1usize;

    let side_tokens: Vec<Address> = (0..side_flows)
        .map(|_| {
            if next_uncovered < tokens.len() {
                next_uncovered += 1;
                tokens[next_uncovered - 1]
            } else {
                drain_token
            }
        })
        .collect();
    let approval_tokens: Vec<Address> = (0..attacker_approvals)
        .map(|_| {
            if next_uncovered < tokens.len() {
                next_uncovered += 1;
                tokens[next_uncovered - 1]
            } else {
                drain_token
            }
        })
        .collect();
    let query_tokens: Vec<Address> = (0..queries)
        .map(|_| {
            if next_uncovered < tokens.len() {
                next_uncovered += 1;
                tokens[next_uncovered - 1]
            } else {
                drain_token
            }
        })
        .collect();
    if next_uncovered < tokens.len() {
        return Err(infeasible(&format!(
            "token count {} exceeds what flows, approvals, and probes can touch ({})",
            shape.token_count, next_uncovered
        )));
    }

    // ---- genesis ----------------------------------------------------------
    let mut genesis = WorldState::new();
    for token in &tokens {
        genesis
            .tokens
            .insert(*token, TokenLedger::new(*token, &format!("TOK{token}")));
    }
    let mint = |genesis: &mut WorldState, token: &Address, to: Address, amount: &Amount| {
        genesis.tokens.get_mut(token).unwrap().mint(to, amount);
    };

    let loan_amount = shape.loss.clone();
    mint(&mut genesis, &drain_token, roles.provider, &loan_amount);
    mint(&mut genesis, &drain_token, roles.victim, &drain_amount);
    for ((source, _), token) in side_endpoints.iter().zip(&side_tokens) {
        mint(&mut genesis, token, *source, &one);
    }
    mint(&mut genesis, &drain_token, GUARDIAN, &Amount::from(1_000u64));

    genesis.providers.insert(
        roles.provider,
        FlashLoanProvider {
            address: roles.provider,
            fee_num: 0,
            fee_den: 1,
            loan_selector: "1b8b5af1".parse().unwrap(),
        },
    );
    genesis.credit_native(roles.operator, &Amount::from(1_000_000_000_000u64));
    genesis.credit_native(GUARDIAN, &Amount::from(1_000_000_000_000u64));

    let hop_selector = compute_selector("ping()").unwrap();
    let hop_addresses: Vec<Address> = (0..hops).map(|i| Address::derived(0xd2, i)).collect();
    for hop in &hop_addresses {
        genesis.contracts.insert(
            *hop,
            ContractProgram::new(*hop)
                .with_handler(hop_selector, vec![GuardedStep::run(vec![], 100)]),
        );
    }

    // ---- scripts ----------------------------------------------------------
    let sels = token_selectors();
    let attack_sel = compute_selector("executePosition()").unwrap();
    let on_loan_sel = compute_selector("onFlashLoan()").unwrap();
    let vuln_sel = compute_selector("processPosition()").unwrap();
    let pre_victim_balance = genesis.token_balance(&drain_token, &roles.victim);

    // Victim: a state check, the allowance grant the attacker exploits, and
    // the side disbursements.
    let state_check = match options.mechanism {
        DisruptionMechanism::ExactState => GuardedStep::run(vec![], 400),
        DisruptionMechanism::GasPath => GuardedStep {
            guard: GuardExpr::BalanceEq {
                token: drain_token,
                holder: AddrExpr::SelfAddr,
                amount: AmountExpr::Const(pre_victim_balance.clone()),
            },
            effects: vec![],
            gas_cost: 400,
            on_guard_fail: GuardFailure::Fallback {
                effects: vec![],
                gas_cost: GAS_BOMB,
            },
        },
    };
    let side_effects: Vec<StepEffect> = side_endpoints
        .iter()
        .zip(&side_tokens)
        .map(|((source, dest), token)| StepEffect::Transfer {
            token: *token,
            from: AddrExpr::Const(*source),
            to: AddrExpr::Const(*dest),
            amount: AmountExpr::Const(one.clone()),
        })
        .collect();
    let grant_call = CallData::flat(
        sels.approve,
        vec![
            roles.attacker_contract.to_word(),
            drain_amount.to_word(),
        ],
    );
    let victim_program = ContractProgram::new(roles.victim).with_handler(
        vuln_sel,
        vec![
            state_check,
            GuardedStep::run(
                vec![StepEffect::Call {
                    target: drain_token,
                    data: grant_call.clone(),
                }],
                600,
            ),
            GuardedStep::run(side_effects, 800),
        ],
    );
    genesis.contracts.insert(roles.victim, victim_program);

    // Attacker callback: optional pre-state assertion, approvals, the victim
    // call, the drain, padding, and the repayment.
    let precondition = match options.mechanism {
        DisruptionMechanism::ExactState => GuardedStep::require(
            GuardExpr::BalanceEq {
                token: drain_token,
                holder: AddrExpr::Const(roles.victim),
                amount: AmountExpr::Const(pre_victim_balance.clone()),
            },
            "position assertion failed",
            vec![],
            400,
        ),
        DisruptionMechanism::GasPath => GuardedStep::run(vec![], 400),
    };

    let mut callback_effects: Vec<StepEffect> = Vec::new();
    let mut callback_blobs: Vec<NestedCall> = Vec::new();
    let push_call = |effects: &mut Vec<StepEffect>,
                         blobs: &mut Vec<NestedCall>,
                         target: Address,
                         data: CallData| {
        effects.push(StepEffect::Call {
            target,
            data: data.clone(),
        });
        blobs.push(NestedCall { target, call: data });
    };

    for (spender, token) in spenders.iter().zip(&approval_tokens) {
        push_call(
            &mut callback_effects,
            &mut callback_blobs,
            *token,
            CallData::flat(sels.approve, vec![spender.to_word(), one.to_word()]),
        );
    }
    push_call(
        &mut callback_effects,
        &mut callback_blobs,
        roles.victim,
        CallData::with_nested(
            vuln_sel,
            vec![],
            vec![NestedCall {
                target: drain_token,
                call: grant_call,
            }],
        ),
    );
    push_call(
        &mut callback_effects,
        &mut callback_blobs,
        drain_token,
        CallData::flat(
            sels.transfer_from,
            vec![
                roles.victim.to_word(),
                drain_sink.to_word(),
                drain_amount.to_word(),
            ],
        ),
    );
    for token in &query_tokens {
        let data = if options.withdraw_probes {
            CallData::flat(sels.withdraw, vec![Amount::zero().to_word()])
        } else {
            CallData::flat(
                sels.transfer,
                vec![roles.provider.to_word(), Amount::zero().to_word()],
            )
        };
        push_call(&mut callback_effects, &mut callback_blobs, *token, data);
    }
    for hop in &hop_addresses {
        push_call(
            &mut callback_effects,
            &mut callback_blobs,
            *hop,
            CallData::flat(hop_selector, vec![]),
        );
    }
    push_call(
        &mut callback_effects,
        &mut callback_blobs,
        drain_token,
        CallData::flat(
            sels.transfer,
            vec![roles.provider.to_word(), loan_amount.to_word()],
        ),
    );

    let attacker_program = ContractProgram::new(roles.attacker_contract)
        .with_handler(
            attack_sel,
            vec![GuardedStep::run(
                vec![StepEffect::Call {
                    target: roles.provider,
                    data: CallData::with_nested(
                        "1b8b5af1".parse().unwrap(),
                        vec![drain_token.to_word(), loan_amount.to_word()],
                        vec![NestedCall {
                            target: roles.attacker_contract,
                            call: CallData::flat(on_loan_sel, vec![]),
                        }],
                    ),
                }],
                500,
            )],
        )
        .with_handler(
            on_loan_sel,
            vec![precondition, GuardedStep::run(callback_effects, 2_000)],
        );
    genesis
        .contracts
        .insert(roles.attacker_contract, attacker_program);

    // ---- the pending attack transaction -----------------------------------
    let attack_input = CallData::with_nested(
        attack_sel,
        vec![],
        vec![NestedCall {
            target: roles.provider,
            call: CallData::with_nested(
                "1b8b5af1".parse().unwrap(),
                vec![drain_token.to_word(), loan_amount.to_word()],
                vec![NestedCall {
                    target: roles.attacker_contract,
                    call: CallData::with_nested(on_loan_sel, vec![], callback_blobs),
                }],
            ),
        }],
    );

    let probe = Transaction::new(
        0,
        roles.operator,
        roles.attacker_contract,
        500,
        u64::MAX / 2,
        Amount::zero(),
        Some(attack_input.clone()),
    );
    let (_, dry_trace) =
        apply_transaction(&genesis, &probe).map_err(|e| ScenarioError::Invalid {
            name: name.to_string(),
            detail: e.to_string(),
        })?;
    if !dry_trace.status.is_success() {
        return Err(ScenarioError::Invalid {
            name: name.to_string(),
            detail: format!("undisrupted dry run failed: {:?}", dry_trace.status),
        });
    }
    let attack_tx = Transaction::new(
        0,
        roles.operator,
        roles.attacker_contract,
        500,
        dry_trace.gas_used + 20_000,
        Amount::zero(),
        Some(attack_input),
    );
    let attack_hash = attack_tx.hash;

    // ---- traffic -----------------------------------------------------------
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut traffic = vec![TrafficItem {
        at_ms: 2_000,
        kind: TrafficKind::Attack,
        tx: attack_tx,
    }];
    for i in 0..options.benign_background {
        let from = Address::derived(0xe5, i);
        let to = Address::derived(0xe6, i);
        genesis.credit_native(from, &Amount::from(1_000_000_000u64));
        genesis.accounts.entry(to).or_default();
        traffic.push(TrafficItem {
            at_ms: rng.gen_range(100..10_000),
            kind: TrafficKind::Benign,
            tx: Transaction::new(
                0,
                from,
                to,
                rng.gen_range(1..50),
                30_000,
                Amount::from(rng.gen_range(1..100u64)),
                None,
            ),
        });
    }
    traffic.sort_by_key(|item| (item.at_ms, item.tx.hash));

    let mut victim_addresses = vec![roles.victim];
    victim_addresses.extend(
        side_endpoints
            .iter()
            .map(|(source, _)| *source)
            .filter(|s| *s != roles.victim),
    );
    victim_addresses.dedup();
    let mut attacker_addresses = vec![roles.attacker_contract, roles.operator, drain_sink];
    attacker_addresses.extend(side_endpoints.iter().map(|(_, dest)| *dest));
    attacker_addresses.sort();
    attacker_addresses.dedup();

    let mut spec = ScenarioSpec {
        name: name.to_string(),
        chain_profile: ChainProfile {
            name: options.chain.clone(),
            ..ChainProfile::default()
        },
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
            loss_without_guard: shape.loss.clone(),
        },
        protect: ProtectionScope {
            victim_addresses,
            attacker_addresses,
        },
        guardian: GUARDIAN,
        declared_shape: Some(shape.to_shape()),
        mechanism: Some(options.mechanism),
    };
    if options.subscribed {
        spec = spec.with_subscription(roles.victim, drain_token, Amount::from(10u64));
    }
    debug_assert_eq!(spec.attack_items().next().unwrap().tx.hash, attack_hash);
    Ok(spec)
}

/// The 20 historical-shape presets: per-attack metrics and losses, with the
/// disruption mechanism and subscription status alternating across rows.
pub fn table_presets() -> Vec<ScenarioSpec> {
    struct Row(&'static str, &'static str, u64, u64, u64, u64, u64, u64);
    let rows = [
        Row("Hedgey Finance", "ETH", 10, 3, 3, 4, 1, 2_000_000),
        Row("Sumer Money", "Base", 65, 8, 1, 19, 5, 350_000),
        Row("LavaLending", "ARBI", 187, 24, 16, 80, 9, 340_000),
        Row("PRISMAFI", "ETH", 75, 22, 4, 29, 9, 11_600_000),
        Row("Rosa Finance", "ARBI", 51, 23, 3, 16, 15, 44_670),
        Row("Themis Protocol", "ARBI", 129, 24, 15, 46, 21, 367_750),
        Row("JIMBO", "ARBI", 373, 12, 16, 117, 3, 7_500_000),
        Row("EON", "POLY", 23, 31, 9, 10, 20, 29_200),
        Row("Ovix", "POLY", 736, 40, 66, 278, 21, 2_000_000),
        Row("Euler Finance", "ETH", 56, 4, 2, 20, 4, 196_000_000),
        Row("Platypus Finance", "AVAX", 72, 17, 2, 22, 19, 8_500_000),
        Row("Midas Capital", "POLY", 207, 33, 27, 87, 3, 650_000),
        Row("Cauldron", "AVAX", 70, 15, 10, 29, 8, 370_000),
        Row("Cream Finance", "ETH", 164, 39, 5, 69, 29, 130_000_000),
        Row("XTOKEN", "ETH", 248, 18, 23, 40, 3, 24_500_000),
        Row("Warp Finance", "ETH", 57, 3, 3, 12, 3, 7_800_000),
        Row("Akropolis", "ETH", 123, 10, 8, 69, 4, 2_000_000),
        Row("Origin Protocol", "ETH", 156, 3, 4, 12, 2, 8_000_000),
        Row("Cheese Bank", "ETH", 64, 11, 21, 5, 6, 3_300_000),
        Row("bZx", "ETH", 43, 14, 1, 17, 6, 355_880),
    ];
    rows.iter()
        .enumerate()
        .map(|(i, Row(name, chain, txs, entities, dd, mf, tk, loss))| {
            let shape = ShapeSpec {
                internal_tx_count: *txs,
                entity_count: *entities,
                data_dependencies: *dd,
                money_flow_events: *mf,
                token_count: *tk,
                loss: Amount::from(*loss),
            };
            let options = ShapeOptions {
                chain: chain.to_string(),
                mechanism: if i % 2 == 0 {
                    DisruptionMechanism::ExactState
                } else {
                    DisruptionMechanism::GasPath
                },
                subscribed: i % 2 == 1,
                withdraw_probes: i % 3 == 0,
                benign_background: 8,
            };
            build_shape_scenario(name, &shape, &options, 1_000 + i as u64)
                .expect("preset shapes are feasible")
        })
        .collect()
}

/// Total of the preset losses, in base units.
pub fn presets_total_loss() -> Amount {
    table_presets()
        .iter()
        .map(|s| s.expected.loss_without_guard.clone())
        .sum::<Amount>()
}
