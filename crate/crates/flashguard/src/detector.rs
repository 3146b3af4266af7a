//! Real-time classification of pending transactions: exclusion filtering,
//! signature-class matching, and the attack-qualification predicate.
//!
//! A transaction qualifies when its selectors hit the flash-loan class, the
//! approval class, and at least one of the transfer or withdrawal classes —
//! qualification is purely structural, never profit-based. Known benign
//! addresses (e.g. MEV bots that legitimately borrow flash loans) are skipped
//! outright.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::calldata::{scan_call, trace_selectors, CallData, Selector, SignatureClass, SignatureDatabase};
use crate::chainsim::{Address, Transaction, TxHash, WorldState};
use crate::mempool::{StreamEvent, StreamEventKind, Subscription};

/// Known benign addresses, immutable during a run.
#[derive(Debug, Clone, Default)]
pub struct ExclusionList {
    addresses: BTreeSet<Address>,
    provenance: BTreeMap<Address, String>,
}

impl ExclusionList {
    pub fn new() -> ExclusionList {
        ExclusionList::default()
    }

    pub fn insert(&mut self, address: Address, reason: &str) {
        self.addresses.insert(address);
        self.provenance.insert(address, reason.to_string());
    }

    pub fn contains(&self, address: &Address) -> bool {
        self.addresses.contains(address)
    }

    pub fn reason(&self, address: &Address) -> Option<&str> {
        self.provenance.get(address).map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.addresses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.addresses.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Address, &str)> {
        self.provenance.iter().map(|(a, r)| (a, r.as_str()))
    }

    /// Line format: `address_hex,reason`.
    pub fn load(path: &Path) -> Result<ExclusionList, String> {
        let file = std::fs::File::open(path).map_err(|e| e.to_string())?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<ExclusionList, String> {
        let mut list = ExclusionList::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| e.to_string())?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (addr, reason) = line
                .split_once(',')
                .ok_or_else(|| format!("exclusion line {}: expected address,reason", lineno + 1))?;
            let address: Address = addr
                .trim()
                .parse()
                .map_err(|e| format!("exclusion line {}: {e}", lineno + 1))?;
            list.insert(address, reason.trim());
        }
        Ok(list)
    }

    pub fn save(&self, path: &Path) -> Result<(), String> {
        let mut file = std::fs::File::create(path).map_err(|e| e.to_string())?;
        for (addr, reason) in self.iter() {
            writeln!(file, "{},{}", addr.to_hex(), reason).map_err(|e| e.to_string())?;
        }
        Ok(())
    }
}

/// Per-class hit flags derived from selector-set intersections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ClassFlags {
    pub flash_loan: bool,
    pub transfer: bool,
    pub withdrawal: bool,
    pub approval: bool,
}

impl ClassFlags {
    pub fn from_selectors(selectors: &BTreeSet<Selector>, db: &SignatureDatabase) -> ClassFlags {
        let mut flags = ClassFlags::default();
        for sel in selectors {
            match db.class_of(sel) {
                Some(SignatureClass::FlashLoan) => flags.flash_loan = true,
                Some(SignatureClass::Transfer) => flags.transfer = true,
                Some(SignatureClass::Withdrawal) => flags.withdrawal = true,
                Some(SignatureClass::Approval) => flags.approval = true,
                None => {}
            }
        }
        flags
    }

    pub fn none_set(&self) -> bool {
        !(self.flash_loan || self.transfer || self.withdrawal || self.approval)
    }
}

/// The attack-qualification predicate:
/// flash loan AND (transfer OR withdrawal) AND approval.
pub fn qualify(flags: ClassFlags) -> bool {
    qualify_with(flags, &QualifyRule::default())
}

/// The predicate with the approval requirement exposed as configuration.
pub fn qualify_with(flags: ClassFlags, rule: &QualifyRule) -> bool {
    flags.flash_loan
        && (flags.transfer || flags.withdrawal)
        && (flags.approval || !rule.approval_required)
}

#[derive(Debug, Clone, Serialize)]
pub struct QualifyRule {
    pub approval_required: bool,
}

impl Default for QualifyRule {
    fn default() -> Self {
        QualifyRule {
            approval_required: true,
        }
    }
}

/// How selectors are obtained for a pending transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DetectorMode {
    /// Static extraction from the input's embedded call tree (default).
    Scan,
    /// Speculative execution on a world snapshot; the ground-truth oracle.
    Trace,
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectionVerdict {
    pub tx_hash: TxHash,
    pub flags: ClassFlags,
    pub flagged: bool,
    /// True when the sender or recipient was on the exclusion list and the
    /// transaction was skipped without analysis.
    pub skipped: bool,
    pub matched_selectors: BTreeSet<Selector>,
    /// Wall-clock time spent classifying, in milliseconds.
    pub detection_latency_ms: f64,
}

#[derive(Debug, Clone)]
pub struct DetectorConfig {
    pub mode: DetectorMode,
    pub rule: QualifyRule,
    /// Bound on the transient per-transaction map.
    pub transient_capacity: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            mode: DetectorMode::Scan,
            rule: QualifyRule::default(),
            transient_capacity: 100_000,
        }
    }
}

/// The mempool-facing classifier. Classification of distinct transactions is
/// pure; the transient verdict map is the only mutable state and is evicted
/// as transactions leave the pool.
pub struct Detector {
    db: Arc<SignatureDatabase>,
    exclusions: Arc<ExclusionList>,
    config: DetectorConfig,
    transient: BTreeMap<TxHash, DetectionVerdict>,
    transient_order: VecDeque<TxHash>,
}

impl Detector {
    pub fn new(
        db: Arc<SignatureDatabase>,
        exclusions: Arc<ExclusionList>,
        config: DetectorConfig,
    ) -> Detector {
        Detector {
            db,
            exclusions,
            config,
            transient: BTreeMap::new(),
            transient_order: VecDeque::new(),
        }
    }

    pub fn db(&self) -> &SignatureDatabase {
        &self.db
    }

    pub fn mode(&self) -> DetectorMode {
        self.config.mode
    }

    /// Classifies one pending transaction against a world snapshot.
    pub fn classify(&self, tx: &Transaction, world: &WorldState) -> DetectionVerdict {
        let started = Instant::now();
        let verdict = self.classify_inner(tx, world, self.config.mode);
        finish(verdict, started)
    }

    /// Classification in an explicit mode, for oracle comparisons.
    pub fn classify_in_mode(
        &self,
        tx: &Transaction,
        world: &WorldState,
        mode: DetectorMode,
    ) -> DetectionVerdict {
        let started = Instant::now();
        let verdict = self.classify_inner(tx, world, mode);
        finish(verdict, started)
    }

    fn classify_inner(
        &self,
        tx: &Transaction,
        world: &WorldState,
        mode: DetectorMode,
    ) -> DetectionVerdict {
        if self.exclusions.contains(&tx.from) || self.exclusions.contains(&tx.to) {
            return DetectionVerdict {
                tx_hash: tx.hash,
                flags: ClassFlags::default(),
                flagged: false,
                skipped: true,
                matched_selectors: BTreeSet::new(),
                detection_latency_ms: 0.0,
            };
        }
        let selectors: BTreeSet<Selector> = match mode {
            DetectorMode::Scan => tx
                .input
                .as_ref()
                .map(|call| scan_call(call, &self.db))
                .unwrap_or_default(),
            DetectorMode::Trace => trace_selectors(world, tx)
                .map(|sels| {
                    sels.into_iter()
                        .filter(|s| self.db.contains(s))
                        .collect()
                })
                .unwrap_or_default(),
        };
        let flags = ClassFlags::from_selectors(&selectors, &self.db);
        DetectionVerdict {
            tx_hash: tx.hash,
            flags,
            flagged: qualify_with(flags, &self.config.rule),
            skipped: false,
            matched_selectors: selectors,
            detection_latency_ms: 0.0,
        }
    }

    /// Cheap screen deciding whether a transaction deserves full analysis:
    /// empty inputs, excluded parties, and inputs with no flash-loan
    /// selector at the head of the input or of any embedded call are
    /// screened out. Sound with respect to flagging: qualification requires
    /// a flash-loan selector, which this check always spots, so the
    /// prefiltered pipeline flags exactly what the unfiltered one does.
    pub fn prefilter(&self, tx: &Transaction) -> bool {
        let Some(input) = &tx.input else {
            return false;
        };
        if self.exclusions.contains(&tx.from) || self.exclusions.contains(&tx.to) {
            return false;
        }
        self.contains_flash_loan(input)
    }

    fn contains_flash_loan(&self, call: &CallData) -> bool {
        if self.db.class_of(&call.selector) == Some(SignatureClass::FlashLoan) {
            return true;
        }
        call.nested
            .iter()
            .any(|n| self.contains_flash_loan(&n.call))
    }

    /// The analysis stage behind a passing [`Detector::prefilter`]: the
    /// screen already established the parties are not excluded, so this goes
    /// straight to selector matching.
    pub fn classify_post_prefilter(&self, tx: &Transaction, world: &WorldState) -> DetectionVerdict {
        let started = Instant::now();
        let selectors: BTreeSet<Selector> = match self.config.mode {
            DetectorMode::Scan => tx
                .input
                .as_ref()
                .map(|call| scan_call(call, &self.db))
                .unwrap_or_default(),
            DetectorMode::Trace => trace_selectors(world, tx)
                .map(|sels| sels.into_iter().filter(|s| self.db.contains(s)).collect())
                .unwrap_or_default(),
        };
        let flags = ClassFlags::from_selectors(&selectors, &self.db);
        finish(
            DetectionVerdict {
                tx_hash: tx.hash,
                flags,
                flagged: qualify_with(flags, &self.config.rule),
                skipped: false,
                matched_selectors: selectors,
                detection_latency_ms: 0.0,
            },
            started,
        )
    }

    /// The skip verdict emitted for transactions the prefilter screens out.
    pub fn prefiltered_verdict(tx_hash: TxHash) -> DetectionVerdict {
        DetectionVerdict {
            tx_hash,
            flags: ClassFlags::default(),
            flagged: false,
            skipped: true,
            matched_selectors: BTreeSet::new(),
            detection_latency_ms: 0.0,
        }
    }

    /// Processes one pool event: `Added` yields a verdict (retained in the
    /// transient map), `Confirmed`/`Dropped` evict.
    pub fn on_event(
        &mut self,
        event: &StreamEvent,
        lookup: impl Fn(&TxHash) -> Option<Transaction>,
        world: &WorldState,
    ) -> Option<DetectionVerdict> {
        match event.kind {
            StreamEventKind::Added => {
                let tx = lookup(&event.tx_hash)?;
                let verdict = self.classify(&tx, world);
                self.retain(verdict.clone());
                Some(verdict)
            }
            StreamEventKind::Confirmed | StreamEventKind::Dropped => {
                self.evict(&event.tx_hash);
                None
            }
        }
    }

    /// Stores a verdict in the bounded transient map.
    pub fn retain(&mut self, verdict: DetectionVerdict) {
        self.retain_verdict(verdict);
    }

    /// Drops transient state for a transaction that left the pool.
    pub fn evict(&mut self, hash: &TxHash) {
        self.transient.remove(hash);
    }

    fn retain_verdict(&mut self, verdict: DetectionVerdict) {
        if self.transient.len() >= self.config.transient_capacity {
            if let Some(oldest) = self.transient_order.pop_front() {
                self.transient.remove(&oldest);
            }
        }
        self.transient_order.push_back(verdict.tx_hash);
        self.transient.insert(verdict.tx_hash, verdict);
    }

    pub fn transient_verdict(&self, hash: &TxHash) -> Option<&DetectionVerdict> {
        self.transient.get(hash)
    }

    pub fn transient_len(&self) -> usize {
        self.transient.len()
    }
}

fn finish(mut verdict: DetectionVerdict, started: Instant) -> DetectionVerdict {
    verdict.detection_latency_ms = started.elapsed().as_secs_f64() * 1_000.0;
    verdict
}

/// Drains a subscription, emitting one verdict per `Added` event in arrival
/// order; flagged verdicts are forwarded to `sink` immediately.
pub fn run_detector(
    detector: &mut Detector,
    subscription: &Subscription,
    lookup: impl Fn(&TxHash) -> Option<Transaction>,
    world: &WorldState,
    mut sink: impl FnMut(&DetectionVerdict),
) -> Vec<DetectionVerdict> {
    let mut verdicts = Vec::new();
    for event in subscription.drain() {
        if let Some(verdict) = detector.on_event(&event, &lookup, world) {
            if verdict.flagged {
                sink(&verdict);
            }
            verdicts.push(verdict);
        }
    }
    verdicts
}
