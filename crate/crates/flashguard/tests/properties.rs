//! Property tests: encoding identity, selector derivation against an
//! independent digest, ledger conservation, atomic rollback under injected
//! faults, detector monotonicity and exclusion dominance, and shape-generator
//! fidelity.

use proptest::prelude::*;
use std::sync::Arc;

use flashguard::calldata::{
    compute_selector, decode, encode, scan_call, CallData, NestedCall, Selector,
    SignatureClass, SignatureDatabase, SignatureEntry,
};
use flashguard::chainsim::{
    apply_transaction, apply_transaction_with, Address, Amount, ExecOptions, TokenLedger,
    Transaction, WorldState,
};
use flashguard::detector::{ClassFlags, Detector, DetectorConfig, ExclusionList};
use flashguard::scenarios::{
    build_shape_scenario, shape_of, ShapeOptions, ShapeSpec,
};

fn arb_word() -> impl Strategy<Value = [u8; 32]> {
    prop_oneof![
        // Address-like: 12 zero bytes then 20 payload bytes.
        any::<(u8, u64)>().prop_map(|(tag, i)| Address::derived(tag, i).to_word()),
        // Amount-like: big-endian integer comfortably below 2^128.
        any::<u128>().prop_map(|v| Amount::from(v).to_word()),
    ]
}

fn arb_selector() -> impl Strategy<Value = Selector> {
    any::<[u8; 4]>().prop_map(Selector)
}

fn arb_calldata(depth: u32) -> BoxedStrategy<CallData> {
    let leaf = (arb_selector(), prop::collection::vec(arb_word(), 0..5))
        .prop_map(|(selector, args)| CallData::flat(selector, args));
    leaf.prop_recursive(depth, 24, 3, |inner| {
        (
            arb_selector(),
            prop::collection::vec(arb_word(), 0..5),
            prop::collection::vec(
                (any::<(u8, u64)>(), inner).prop_map(|((tag, i), call)| NestedCall {
                    target: Address::derived(tag, i),
                    call,
                }),
                0..4,
            ),
        )
            .prop_map(|(selector, args, nested)| CallData::with_nested(selector, args, nested))
    })
    .boxed()
}

proptest! {
    #[test]
    fn decode_encode_is_identity(call in arb_calldata(3)) {
        let encoded = encode(&call);
        prop_assert_eq!(encoded.len(), call.encoded_len());
        prop_assert_eq!(decode(&encoded).unwrap(), call);
    }

    #[test]
    fn selector_matches_independent_keccak(
        name in "[a-zA-Z_][a-zA-Z0-9_]{0,18}",
        arg_picks in prop::collection::vec(0usize..6, 0..4),
    ) {
        use sha3::{Digest, Keccak256};
        const TYPES: [&str; 6] = ["address", "uint256", "bool", "bytes32", "uint8", "address[]"];
        let args: Vec<&str> = arg_picks.iter().map(|i| TYPES[*i]).collect();
        let signature = format!("{name}({})", args.join(","));
        let ours = compute_selector(&signature).unwrap();
        let reference = Keccak256::digest(signature.as_bytes());
        prop_assert_eq!(ours.0, [reference[0], reference[1], reference[2], reference[3]]);
    }

    #[test]
    fn ledger_operations_conserve_supply(
        ops in prop::collection::vec((0u8..5, 0u64..4, 0u64..4, 0u64..500), 1..40)
    ) {
        let token = Address::derived(0xaa, 0);
        let mut ledger = TokenLedger::new(token, "TOK");
        let holders: Vec<Address> = (0..4).map(|i| Address::derived(1, i)).collect();
        for h in &holders {
            ledger.mint(*h, &Amount::from(1_000u64));
        }
        let mut minted = Amount::from(4_000u64);
        let mut burned = Amount::zero();
        for (op, a, b, amt) in ops {
            let amount = Amount::from(amt);
            let (a, b) = (holders[a as usize], holders[b as usize]);
            match op {
                0 => { let _ = ledger.transfer(&a, &b, &amount); }
                1 => { ledger.set_allowance(a, b, amount); }
                2 => { let _ = ledger.transfer_from(&b, &a, &b, &amount); }
                3 => { ledger.mint(a, &amount); minted += &amount; }
                _ => { if ledger.burn(&a, &amount).is_ok() { burned += &amount; } }
            }
            prop_assert_eq!(ledger.balance_sum(), ledger.total_supply.clone());
        }
        prop_assert_eq!(ledger.total_supply, (&minted) - &burned);
    }

    #[test]
    fn random_shapes_realize_their_declared_counts(
        dd in 1u64..5,
        side in 0u64..6,
        spare in 0u64..8,
        entity_pick in 0u64..14,
        token_pick in 0u64..8,
        loss_extra in 1u64..10_000,
        seed in 0u64..1_000,
        gas_path in any::<bool>(),
        withdraw_probes in any::<bool>(),
    ) {
        // Derive a feasible shape from free choices.
        let budget = spare;
        let free_entities = 1 + 2 * side + (dd - 1);
        let need = entity_pick.min(free_entities + budget);
        let hops = need.saturating_sub(free_entities).min(budget);
        let queries = budget - hops;
        let tk = 1 + token_pick.min(side + (dd - 1) + queries);
        let shape = ShapeSpec {
            internal_tx_count: 5 + dd + budget,
            entity_count: 3 + need,
            data_dependencies: dd,
            money_flow_events: side + 3,
            token_count: tk,
            loss: Amount::from(side + loss_extra),
        };
        let options = ShapeOptions {
            mechanism: if gas_path {
                flashguard::scenarios::DisruptionMechanism::GasPath
            } else {
                flashguard::scenarios::DisruptionMechanism::ExactState
            },
            withdraw_probes,
            benign_background: 0,
            ..ShapeOptions::default()
        };
        let spec = build_shape_scenario("prop", &shape, &options, seed).unwrap();
        let tx = spec.traffic.iter().next().unwrap().tx.clone();
        let (_, trace) = apply_transaction(&spec.genesis, &tx).unwrap();
        prop_assert!(trace.status.is_success());
        let mut measured = shape_of(&trace, &spec.genesis);
        measured.expected_loss = shape.loss.clone();
        prop_assert_eq!(measured, shape.to_shape());
    }

    #[test]
    fn injected_faults_roll_back_exactly(
        fault_at in 0u64..64,
        balance in 1u64..1_000,
        amount in 1u64..1_000,
    ) {
        use flashguard::chainsim::token_selectors;
        let token = Address::derived(0xaa, 0);
        let from = Address::derived(1, 1);
        let to = Address::derived(1, 2);
        let mut world = WorldState::new();
        let mut ledger = TokenLedger::new(token, "TOK");
        ledger.mint(from, &Amount::from(balance));
        world.tokens.insert(token, ledger);
        world.credit_native(from, &Amount::from(1_000_000u64));
        world.accounts.entry(to).or_default();

        let tx = Transaction::new(
            0,
            from,
            token,
            1,
            1_000_000,
            Amount::zero(),
            Some(CallData::flat(
                token_selectors().transfer,
                vec![to.to_word(), Amount::from(amount).to_word()],
            )),
        );
        let pre = world.clone();
        let opts = ExecOptions {
            force_fail_at: Some(fault_at),
            ..ExecOptions::default()
        };
        let trace = apply_transaction_with(&mut world, &tx, &opts).unwrap();
        if !trace.status.is_success() {
            prop_assert_eq!(&world, &pre);
        } else {
            // The fault index was beyond the step count and the transfer was
            // affordable.
            prop_assert!(amount <= balance);
        }
    }

    #[test]
    fn adding_selectors_never_unflags(call in arb_calldata(2)) {
        let base = SignatureDatabase::builtin();
        let mut extended = SignatureDatabase::builtin();
        for (i, class) in SignatureClass::ALL.iter().enumerate() {
            let _ = extended.register(SignatureEntry {
                class: *class,
                selector: Selector([0xEE, 0xEE, 0xEE, i as u8]),
                signature: format!("extra{i}(uint256)..."),
                provider: None,
                event_signature: None,
            });
        }
        let flags_base = ClassFlags::from_selectors(&scan_call(&call, &base), &base);
        let flags_ext = ClassFlags::from_selectors(&scan_call(&call, &extended), &extended);
        if flashguard::detector::qualify(flags_base) {
            prop_assert!(flashguard::detector::qualify(flags_ext));
        }
    }

    #[test]
    fn excluded_parties_are_never_flagged(
        call in arb_calldata(2),
        exclude_sender in any::<bool>(),
    ) {
        let from = Address::derived(0x11, 1);
        let to = Address::derived(0x22, 2);
        let mut exclusions = ExclusionList::new();
        exclusions.insert(if exclude_sender { from } else { to }, "prop");
        let detector = Detector::new(
            Arc::new(SignatureDatabase::builtin()),
            Arc::new(exclusions),
            DetectorConfig::default(),
        );
        let tx = Transaction::new(0, from, to, 1, 100_000, Amount::zero(), Some(call));
        let verdict = detector.classify(&tx, &WorldState::new());
        prop_assert!(!verdict.flagged);
        prop_assert!(verdict.skipped);
    }
}
