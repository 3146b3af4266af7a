//! End-to-end orchestration: schedules traffic into the mempool, runs the
//! detector and disruptor against a virtual clock, produces blocks, and
//! emits metric reports.
//!
//! Four logical tasks — the traffic scheduler, the detector, the disruptor,
//! and the block builder — advance on a discrete-event timeline. The block
//! interval runs on the virtual clock, so timing-sensitive races replay
//! deterministically, while per-transaction latencies are measured on the
//! monotonic wall clock and are the one nondeterministic part of a report.

mod metrics;

pub use metrics::{
    percentile, Aggregates, BenchReport, ConfigEcho, FprReport, MetricsReport, ProfileFpr,
    ScenarioRecord, VirtualTimes,
};

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::calldata::SignatureDatabase;
use crate::chainsim::{
    apply_transaction, build_block, Amount, Block, Transaction, TxHash, TxStatus,
};
use crate::detector::{DetectionVerdict, Detector, DetectorConfig, DetectorMode, ExclusionList};
use crate::disruptor::{
    DisruptionMode, DisruptionResult, Disruptor, DisruptorConfig, SubscriptionRegistry,
};
use crate::mempool::PendingPool;
use crate::relay::RelayQueue;
use crate::scenarios::{
    build_corpus, measure_loss, shape_of, BuiltCorpus, CorpusSpec, ScenarioError, ScenarioSpec,
    TrafficKind,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    DetectOnly,
    DetectAndDisrupt,
    Baseline,
}

impl RunMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunMode::DetectOnly => "detect",
            RunMode::DetectAndDisrupt => "disrupt",
            RunMode::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: RunMode,
    pub detector_mode: DetectorMode,
    /// Overrides every scenario's own block interval when set.
    pub block_interval_ms: Option<u64>,
    /// Detection budget before sealing; verdicts at least this early always
    /// make the relay lane.
    pub sealing_grace_ms: u64,
    pub seed: u64,
    pub block_capacity: usize,
    /// Virtual delay injected between verdict and relay submission; sweeps
    /// of this knob probe the sealing boundary.
    pub inject_verdict_delay_ms: u64,
    pub use_prefilter: bool,
    pub max_blocks: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: RunMode::DetectAndDisrupt,
            detector_mode: DetectorMode::Scan,
            block_interval_ms: None,
            sealing_grace_ms: 2_000,
            seed: 0,
            block_capacity: 2_048,
            inject_verdict_delay_ms: 0,
            use_prefilter: true,
            max_blocks: 10_000,
        }
    }
}

impl RunConfig {
    fn interval_for(&self, spec: &ScenarioSpec) -> Result<u64, HarnessError> {
        let interval = self
            .block_interval_ms
            .unwrap_or(spec.chain_profile.block_interval_ms);
        if interval == 0 {
            return Err(HarnessError::Config("block interval must be > 0".into()));
        }
        if self.sealing_grace_ms >= interval {
            return Err(HarnessError::Config(format!(
                "sealing_grace_ms {} must be below the block interval {}",
                self.sealing_grace_ms, interval
            )));
        }
        Ok(interval)
    }
}

enum Payload {
    Traffic(usize),
    Disrupt(Box<(DetectionVerdict, Transaction)>),
    Seal,
}

struct Event {
    time: u64,
    /// Tie order at equal times: traffic, then disruptions, then the seal.
    class: u8,
    seq: u64,
    payload: Payload,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.class, self.seq) == (other.time, other.class, other.seq)
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert for earliest-first.
        (other.time, other.class, other.seq).cmp(&(self.time, self.class, self.seq))
    }
}

/// Runs one scenario to completion and produces its record.
pub fn run_scenario(
    spec: &ScenarioSpec,
    config: &RunConfig,
) -> Result<ScenarioRecord, HarnessError> {
    run_scenario_with_world(spec, config).map(|(record, _)| record)
}

/// [`run_scenario`] plus the final world state, for invariant checks that
/// need to inspect balances directly.
pub fn run_scenario_with_world(
    spec: &ScenarioSpec,
    config: &RunConfig,
) -> Result<(ScenarioRecord, crate::chainsim::WorldState), HarnessError> {
    spec.validate()?;
    let interval = config.interval_for(spec)?;
    let jitter = spec.chain_profile.propagation_jitter_ms;

    let mut world = spec.genesis.clone();
    let mut pool = PendingPool::default();
    let audit = pool.subscribe();

    let db = Arc::new(SignatureDatabase::builtin());
    let mut exclusions = ExclusionList::new();
    for entry in &spec.exclusions {
        exclusions.insert(entry.address, &entry.reason);
    }
    let mut detector = Detector::new(
        db.clone(),
        Arc::new(exclusions),
        DetectorConfig {
            mode: config.detector_mode,
            ..DetectorConfig::default()
        },
    );
    let mut registry = SubscriptionRegistry::new();
    for sub in &spec.subscriptions {
        registry.register(sub.victim, sub.token, sub.allowance.clone());
    }
    let mut disruptor = Disruptor::new(
        DisruptorConfig::new(spec.guardian),
        registry,
        world.next_nonce(&spec.guardian),
    );
    let mut relay = RelayQueue::new();

    let mut queue: BinaryHeap<Event> = BinaryHeap::new();
    let mut seq = 0u64;
    for (i, item) in spec.traffic.iter().enumerate() {
        queue.push(Event {
            time: item.at_ms + jitter,
            class: 0,
            seq,
            payload: Payload::Traffic(i),
        });
        seq += 1;
    }
    queue.push(Event {
        time: interval,
        class: 2,
        seq,
        payload: Payload::Seal,
    });
    seq += 1;

    let mut remaining_traffic = spec.traffic.len();
    let mut pending_disrupts = 0usize;
    let mut blocks: Vec<Block> = Vec::new();
    let mut confirmed: BTreeSet<TxHash> = BTreeSet::new();
    let mut relay_lane_hashes: BTreeSet<TxHash> = BTreeSet::new();
    let mut snapshot = Arc::new(world.clone());

    // Per-run observations.
    let mut verdicts: BTreeMap<TxHash, DetectionVerdict> = BTreeMap::new();
    let mut benign_total = 0u64;
    let mut benign_flagged = 0u64;
    let mut attack_verdict_ms: Option<u64> = None;
    let mut relay_submit_ms: Option<u64> = None;
    let mut attack_sealed_ms: Option<u64> = None;
    let mut disruption_outcome: Option<crate::disruptor::DisruptionOutcome> = None;

    let attack_hash = spec.attack_items().next().map(|item| item.tx.hash);

    while let Some(event) = queue.pop() {
        let now = event.time;
        match event.payload {
            Payload::Traffic(index) => {
                let item = &spec.traffic[index];
                remaining_traffic -= 1;
                pool.submit(item.tx.clone(), now)
                    .map_err(|e| HarnessError::Config(format!("traffic rejected: {e}")))?;

                if config.mode != RunMode::Baseline {
                    let verdict = if !config.use_prefilter {
                        detector.classify(&item.tx, &snapshot)
                    } else if detector.prefilter(&item.tx) {
                        detector.classify_post_prefilter(&item.tx, &snapshot)
                    } else {
                        Detector::prefiltered_verdict(item.tx.hash)
                    };
                    detector.retain(verdict.clone());
                    if item.kind != TrafficKind::Attack {
                        benign_total += 1;
                        if verdict.flagged {
                            benign_flagged += 1;
                        }
                    } else if Some(item.tx.hash) == attack_hash {
                        attack_verdict_ms = Some(now);
                    }
                    if verdict.flagged && config.mode == RunMode::DetectAndDisrupt {
                        queue.push(Event {
                            time: now + config.inject_verdict_delay_ms,
                            class: 1,
                            seq,
                            payload: Payload::Disrupt(Box::new((
                                verdict.clone(),
                                item.tx.clone(),
                            ))),
                        });
                        seq += 1;
                        pending_disrupts += 1;
                    }
                    verdicts.insert(item.tx.hash, verdict);
                } else if item.kind != TrafficKind::Attack {
                    benign_total += 1;
                }
            }
            Payload::Disrupt(boxed) => {
                let (verdict, tx) = *boxed;
                pending_disrupts -= 1;
                let target_confirmed = confirmed.contains(&tx.hash);
                let outcome = disruptor.handle_flagged(
                    &verdict,
                    &tx,
                    &snapshot,
                    &db,
                    Some(&mut relay),
                    target_confirmed,
                    now,
                );
                if Some(tx.hash) == attack_hash {
                    if outcome.accepted_plan().is_some() {
                        relay_submit_ms = Some(now);
                    }
                    disruption_outcome = Some(outcome);
                }
            }
            Payload::Seal => {
                let drained = relay.drain_for_block(|hash| pool.contains(hash));
                for entry in &drained.discarded {
                    log::warn!(
                        "relay entry for target {:?} discarded: target gone before sealing",
                        entry.target_hash
                    );
                }
                relay_lane_hashes.extend(drained.lane.iter().map(|tx| tx.hash));
                let outcome = build_block(
                    &mut world,
                    drained.lane,
                    pool.candidates(),
                    config.block_capacity,
                );
                for event in pool.on_block(&outcome.block, now) {
                    detector.evict(&event.tx_hash);
                }
                for tx in &outcome.block.transactions {
                    confirmed.insert(tx.hash);
                    if Some(tx.hash) == attack_hash {
                        attack_sealed_ms = Some(now);
                    }
                }
                for (hash, err) in &outcome.skipped {
                    log::warn!("builder dropped malformed candidate {hash:?}: {err}");
                    pool.drop_tx(hash, now);
                    detector.evict(hash);
                }
                blocks.push(outcome.block);
                snapshot = Arc::new(world.clone());

                let done = remaining_traffic == 0
                    && pending_disrupts == 0
                    && pool.is_empty()
                    && relay.is_empty();
                if !done && (blocks.len() as u64) < config.max_blocks {
                    queue.push(Event {
                        time: now + interval,
                        class: 2,
                        seq,
                        payload: Payload::Seal,
                    });
                    seq += 1;
                }
            }
        }
    }

    // Relay invisibility: no relay-lane hash ever reached a subscriber.
    let observed: BTreeSet<TxHash> = audit.drain().into_iter().map(|e| e.tx_hash).collect();
    let relay_invisible = observed.is_disjoint(&relay_lane_hashes);

    let record = assemble_record(
        spec,
        config,
        &world,
        &blocks,
        RecordInputs {
            verdicts,
            benign_total,
            benign_flagged,
            attack_verdict_ms,
            relay_submit_ms,
            attack_sealed_ms,
            disruption_outcome,
            relay_invisible,
        },
    );
    Ok((record, world))
}

struct RecordInputs {
    verdicts: BTreeMap<TxHash, DetectionVerdict>,
    benign_total: u64,
    benign_flagged: u64,
    attack_verdict_ms: Option<u64>,
    relay_submit_ms: Option<u64>,
    attack_sealed_ms: Option<u64>,
    disruption_outcome: Option<crate::disruptor::DisruptionOutcome>,
    relay_invisible: bool,
}

fn assemble_record(
    spec: &ScenarioSpec,
    config: &RunConfig,
    final_world: &crate::chainsim::WorldState,
    blocks: &[Block],
    inputs: RecordInputs,
) -> ScenarioRecord {
    let attack_item = spec.attack_items().next();
    let attack_hash = attack_item.map(|item| item.tx.hash);

    let find_position = |hash: &TxHash| -> Option<(u64, usize)> {
        blocks
            .iter()
            .find_map(|block| block.position_of(hash).map(|index| (block.height, index)))
    };
    let find_trace = |hash: &TxHash| {
        blocks.iter().find_map(|block| {
            block
                .position_of(hash)
                .map(|index| block.traces[index].clone())
        })
    };

    let attack_trace = attack_hash.as_ref().and_then(find_trace);
    let attack_status = attack_trace
        .as_ref()
        .map(|t| match &t.status {
            TxStatus::Success => "Success".to_string(),
            TxStatus::Reverted(reason) => format!("Reverted({reason})"),
            TxStatus::OutOfGas => "OutOfGas".to_string(),
        })
        .unwrap_or_else(|| "NotIncluded".to_string());
    let attack_failed = matches!(
        attack_trace.as_ref().map(|t| &t.status),
        Some(TxStatus::Reverted(_)) | Some(TxStatus::OutOfGas)
    );

    let detection = attack_hash.as_ref().and_then(|h| inputs.verdicts.get(h));
    let detected = detection.map(|v| v.flagged).unwrap_or(false);

    let accepted_plan = inputs
        .disruption_outcome
        .as_ref()
        .and_then(|o| o.accepted_plan());
    let counter_hash = accepted_plan.map(|p| p.counter_tx.hash);
    let counter_trace = counter_hash.as_ref().and_then(find_trace);
    let counter_landed = matches!(
        counter_trace.as_ref().map(|t| &t.status),
        Some(TxStatus::Success)
    );
    let disrupted = attack_failed && counter_landed;
    let disruption_mode = accepted_plan.map(|p| p.mode);

    let loss = measure_loss(&spec.genesis, final_world, &spec.protect);
    let baseline = spec.expected.loss_without_guard.clone();
    let rescued = baseline.checked_sub(&loss).unwrap_or_default();
    let dust_spent = match disruption_mode {
        Some(DisruptionMode::Absd) if counter_landed => {
            accepted_plan.map(|p| p.dust.clone()).unwrap_or_default()
        }
        _ => Amount::zero(),
    };

    // The attack's reference shape, measured from an undisrupted dry run on
    // genesis.
    let shape = attack_item.and_then(|item| {
        apply_transaction(&spec.genesis, &item.tx)
            .ok()
            .map(|(_, trace)| {
                let mut s = shape_of(&trace, &spec.genesis);
                s.expected_loss = baseline.clone();
                s
            })
    });

    let relay_receipt = inputs.disruption_outcome.as_ref().map(|o| match &o.result {
        DisruptionResult::Submitted { receipt, .. } => format!("{receipt:?}"),
        DisruptionResult::Aborted { reason } => format!("Aborted: {reason}"),
    });

    // Expectation check, per run mode.
    let mut mismatches = Vec::new();
    match config.mode {
        RunMode::Baseline => {
            if loss != baseline {
                mismatches.push(format!("baseline loss {loss} != expected {baseline}"));
            }
        }
        RunMode::DetectOnly => {
            if attack_item.is_some() && detected != spec.expected.detected {
                mismatches.push(format!(
                    "detected {detected} != expected {}",
                    spec.expected.detected
                ));
            }
        }
        RunMode::DetectAndDisrupt => {
            if attack_item.is_some() && detected != spec.expected.detected {
                mismatches.push(format!(
                    "detected {detected} != expected {}",
                    spec.expected.detected
                ));
            }
            let expected_mode_disrupts = if spec.subscriptions.is_empty() {
                spec.expected.disrupted_by.sfsd
            } else {
                spec.expected.disrupted_by.absd
            };
            if attack_item.is_some() && disrupted != expected_mode_disrupts {
                mismatches.push(format!(
                    "disrupted {disrupted} != expected {expected_mode_disrupts}"
                ));
            }
        }
    }

    ScenarioRecord {
        name: spec.name.clone(),
        chain: spec.chain_profile.name.clone(),
        detected,
        detection_latency_ms: detection.map(|v| v.detection_latency_ms),
        disruption_latency_ms: inputs
            .disruption_outcome
            .as_ref()
            .map(|o| o.disruption_latency_ms),
        disrupted,
        disruption_mode,
        relay_receipt,
        attack_status,
        loss,
        rescued,
        counter_gas_used: counter_trace.map(|t| t.gas_used).unwrap_or(0),
        attack_gas_limit: attack_item.map(|item| item.tx.gas_limit).unwrap_or(0),
        dust_spent,
        shape,
        attack_position: attack_hash.as_ref().and_then(find_position),
        counter_position: counter_hash.as_ref().and_then(find_position),
        relay_invisible: inputs.relay_invisible,
        virtual_times: VirtualTimes {
            attack_arrival_ms: attack_item.map(|item| item.at_ms).unwrap_or(0),
            verdict_ms: inputs.attack_verdict_ms,
            relay_submit_ms: inputs.relay_submit_ms,
            attack_sealed_ms: inputs.attack_sealed_ms,
        },
        benign_total: inputs.benign_total,
        benign_flagged: inputs.benign_flagged,
        expected_match: mismatches.is_empty(),
        mismatches,
    }
}

/// Runs a batch of scenarios and aggregates the report.
pub fn run(specs: &[ScenarioSpec], config: &RunConfig) -> Result<MetricsReport, HarnessError> {
    let mut records = Vec::with_capacity(specs.len());
    for spec in specs {
        records.push(run_scenario(spec, config)?);
    }

    let mut detection_latencies: Vec<f64> = records
        .iter()
        .filter_map(|r| r.detection_latency_ms)
        .collect();
    detection_latencies.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let disruption_latencies: Vec<f64> = records
        .iter()
        .filter_map(|r| r.disruption_latency_ms)
        .collect();

    let benign_total: u64 = records.iter().map(|r| r.benign_total).sum();
    let benign_flagged: u64 = records.iter().map(|r| r.benign_flagged).sum();

    let aggregates = Aggregates {
        scenarios: records.len(),
        detected: records.iter().filter(|r| r.detected).count(),
        disrupted: records.iter().filter(|r| r.disrupted).count(),
        total_loss: records.iter().map(|r| r.loss.clone()).sum(),
        total_rescued: records.iter().map(|r| r.rescued.clone()).sum(),
        total_dust_spent: records.iter().map(|r| r.dust_spent.clone()).sum(),
        fpr_percent: if benign_total == 0 {
            0.0
        } else {
            100.0 * benign_flagged as f64 / benign_total as f64
        },
        mean_detection_latency_ms: mean(&detection_latencies),
        p99_detection_latency_ms: percentile(&detection_latencies, 99.0),
        mean_disruption_latency_ms: mean(&disruption_latencies),
        all_matched: records.iter().all(|r| r.expected_match),
    };

    Ok(MetricsReport {
        config: ConfigEcho {
            mode: config.mode.as_str().to_string(),
            detector_mode: format!("{:?}", config.detector_mode),
            seed: config.seed,
            block_interval_ms: config.block_interval_ms,
            sealing_grace_ms: config.sealing_grace_ms,
            prefilter: config.use_prefilter,
        },
        scenarios: records,
        aggregates,
    })
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Classifies a synthetic corpus and reports the false-positive rate and
/// accuracy against generator ground truth, with a per-profile breakdown.
pub fn evaluate_fpr(spec: &CorpusSpec) -> FprReport {
    let corpus = build_corpus(spec);
    let detector = corpus_detector(&corpus);

    let mut latencies: Vec<f64> = Vec::with_capacity(corpus.items.len());
    let mut flagged_benign = 0u64;
    let mut per_profile: BTreeMap<String, (u64, u64)> = BTreeMap::new();

    for item in &corpus.items {
        let started = Instant::now();
        let flagged = detector.prefilter(&item.tx)
            && detector.classify_post_prefilter(&item.tx, &corpus.world).flagged;
        latencies.push(started.elapsed().as_secs_f64() * 1_000.0);

        let entry = per_profile.entry(item.profile.clone()).or_insert((0, 0));
        entry.0 += 1;
        if flagged && item.kind != TrafficKind::Attack {
            flagged_benign += 1;
            entry.1 += 1;
        }
    }

    let total = corpus.items.len() as u64;
    let benign_total = corpus
        .items
        .iter()
        .filter(|i| i.kind != TrafficKind::Attack)
        .count() as u64;
    latencies.sort_by(|a, b| a.partial_cmp(b).unwrap());

    FprReport {
        corpus: spec.name.clone(),
        total,
        benign_total,
        flagged_benign,
        fpr_percent: if benign_total == 0 {
            0.0
        } else {
            100.0 * flagged_benign as f64 / benign_total as f64
        },
        accuracy_percent: if total == 0 {
            100.0
        } else {
            100.0 * (total - flagged_benign) as f64 / total as f64
        },
        mean_latency_ms: mean(&latencies),
        p99_latency_ms: percentile(&latencies, 99.0),
        per_profile: per_profile
            .into_iter()
            .map(|(name, (count, fp))| ProfileFpr {
                name,
                total: count,
                flagged_benign: fp,
                fpr_percent: if count == 0 {
                    0.0
                } else {
                    100.0 * fp as f64 / count as f64
                },
            })
            .collect(),
    }
}

/// Times the classification pipeline with and without the prefilter and
/// verifies the two produce identical flagged sets.
pub fn bench_prefilter(spec: &CorpusSpec) -> BenchReport {
    let corpus = build_corpus(spec);
    let detector = corpus_detector(&corpus);

    let start = Instant::now();
    let mut unfiltered_flagged: BTreeSet<TxHash> = BTreeSet::new();
    for item in &corpus.items {
        if detector.classify(&item.tx, &corpus.world).flagged {
            unfiltered_flagged.insert(item.tx.hash);
        }
    }
    let unfiltered_elapsed = start.elapsed();

    let start = Instant::now();
    let mut prefiltered_flagged: BTreeSet<TxHash> = BTreeSet::new();
    for item in &corpus.items {
        if detector.prefilter(&item.tx)
            && detector
                .classify_post_prefilter(&item.tx, &corpus.world)
                .flagged
        {
            prefiltered_flagged.insert(item.tx.hash);
        }
    }
    let prefiltered_elapsed = start.elapsed();

    let count = corpus.items.len().max(1) as f64;
    let mean_us_unfiltered = unfiltered_elapsed.as_secs_f64() * 1e6 / count;
    let mean_us_prefiltered = prefiltered_elapsed.as_secs_f64() * 1e6 / count;
    BenchReport {
        corpus: spec.name.clone(),
        count: corpus.items.len() as u64,
        mean_us_unfiltered,
        mean_us_prefiltered,
        reduction_percent: if mean_us_unfiltered > 0.0 {
            100.0 * (mean_us_unfiltered - mean_us_prefiltered) / mean_us_unfiltered
        } else {
            0.0
        },
        identical_flagged_sets: unfiltered_flagged == prefiltered_flagged,
    }
}

fn corpus_detector(corpus: &BuiltCorpus) -> Detector {
    Detector::new(
        Arc::new(SignatureDatabase::builtin()),
        Arc::new(corpus.exclusions.clone()),
        DetectorConfig::default(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{build_hedgey_scenario, default_corpus_spec};

    #[test]
    fn baseline_run_loses_the_declared_amount() {
        let spec = build_hedgey_scenario();
        let config = RunConfig {
            mode: RunMode::Baseline,
            ..RunConfig::default()
        };
        let record = run_scenario(&spec, &config).unwrap();
        assert_eq!(record.loss, spec.expected.loss_without_guard);
        assert_eq!(record.rescued, Amount::zero());
        assert_eq!(record.attack_status, "Success");
        assert!(!record.disrupted);
        assert!(record.expected_match, "{:?}", record.mismatches);
    }

    #[test]
    fn disrupt_run_reverts_the_attack_and_rescues_funds() {
        let spec = build_hedgey_scenario();
        let config = RunConfig::default();
        let record = run_scenario(&spec, &config).unwrap();
        assert!(record.detected);
        assert!(record.disrupted, "receipt {:?}", record.relay_receipt);
        assert_eq!(record.disruption_mode, Some(DisruptionMode::Sfsd));
        assert!(record.attack_status.starts_with("Reverted"));
        // SFSD dust lands in the victim, so nothing is lost at all.
        assert_eq!(record.loss, Amount::zero());
        assert_eq!(record.rescued, spec.expected.loss_without_guard);
        assert!(record.relay_invisible);
        // The counter-transaction ordered strictly before the attack.
        let (counter_block, counter_idx) = record.counter_position.unwrap();
        let (attack_block, attack_idx) = record.attack_position.unwrap();
        assert!(
            (counter_block, counter_idx) < (attack_block, attack_idx),
            "counter {counter_block}/{counter_idx} vs attack {attack_block}/{attack_idx}"
        );
        assert!(record.counter_gas_used < record.attack_gas_limit);
        assert!(record.expected_match, "{:?}", record.mismatches);
    }

    #[test]
    fn absd_subscription_burns_exactly_one_dust_unit() {
        let usdc = crate::chainsim::Address::derived(0xa0, 1);
        let campaign = crate::chainsim::Address::derived(0xc0, 1);
        let spec = build_hedgey_scenario().with_subscription(campaign, usdc, Amount::from(10u64));
        let record = run_scenario(&spec, &RunConfig::default()).unwrap();
        assert!(record.disrupted);
        assert_eq!(record.disruption_mode, Some(DisruptionMode::Absd));
        assert_eq!(record.loss, Amount::one());
        assert_eq!(record.dust_spent, Amount::one());
        assert_eq!(
            record.rescued,
            (&spec.expected.loss_without_guard) - &Amount::one()
        );
        assert!(record.expected_match, "{:?}", record.mismatches);
    }

    #[test]
    fn late_verdict_is_too_late_and_attack_lands() {
        let spec = build_hedgey_scenario();
        // Attack arrives at 2s; the first seal is at 12s. Delay the verdict
        // past the seal.
        let config = RunConfig {
            inject_verdict_delay_ms: 15_000,
            ..RunConfig::default()
        };
        let record = run_scenario(&spec, &config).unwrap();
        assert!(record.detected);
        assert!(!record.disrupted);
        assert_eq!(record.relay_receipt.as_deref(), Some("TooLate"));
        assert_eq!(record.attack_status, "Success");
        assert_eq!(record.loss, spec.expected.loss_without_guard);
    }

    #[test]
    fn detect_only_mode_does_not_touch_the_attack() {
        let spec = build_hedgey_scenario();
        let config = RunConfig {
            mode: RunMode::DetectOnly,
            ..RunConfig::default()
        };
        let record = run_scenario(&spec, &config).unwrap();
        assert!(record.detected);
        assert!(!record.disrupted);
        assert_eq!(record.attack_status, "Success");
    }

    #[test]
    fn fpr_report_counts_designed_false_positives() {
        let report = evaluate_fpr(&default_corpus_spec(10_000, 11));
        assert_eq!(report.total, 10_000);
        // 2k per profile at 3,5,9,16,4 per 10k: 0+1+1+3+0 designed FPs.
        assert_eq!(report.flagged_benign, 5);
        assert!((report.fpr_percent - 0.05).abs() < 1e-9);
        assert_eq!(report.per_profile.len(), 5);
        for profile in &report.per_profile {
            assert!(profile.fpr_percent <= 0.2, "{profile:?}");
        }
    }

    #[test]
    fn fully_curated_exclusions_mean_zero_fpr() {
        let mut spec = default_corpus_spec(5_000, 11);
        spec.exclude_unknown_bots = true;
        let report = evaluate_fpr(&spec);
        assert_eq!(report.flagged_benign, 0);
        assert_eq!(report.fpr_percent, 0.0);
    }

    #[test]
    fn bench_pipelines_agree_and_prefilter_wins() {
        let report = bench_prefilter(&default_corpus_spec(5_000, 13));
        assert!(report.identical_flagged_sets);
        assert!(
            report.mean_us_prefiltered < report.mean_us_unfiltered,
            "prefiltered {} >= unfiltered {}",
            report.mean_us_prefiltered,
            report.mean_us_unfiltered
        );
    }

    #[test]
    fn grace_must_stay_below_interval() {
        let spec = build_hedgey_scenario();
        let config = RunConfig {
            sealing_grace_ms: 12_000,
            ..RunConfig::default()
        };
        assert!(matches!(
            run_scenario(&spec, &config),
            Err(HarnessError::Config(_))
        ));
    }

    #[test]
    fn reports_are_deterministic_modulo_latency() {
        let spec = build_hedgey_scenario();
        let config = RunConfig::default();
        let a = run(&[spec.clone()], &config).unwrap();
        let b = run(&[spec], &config).unwrap();
        assert_eq!(a.deterministic_view(), b.deterministic_view());
    }
}
