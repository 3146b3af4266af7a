//! The private relay lane: direct-to-builder submission that bypasses the
//! public mempool and guarantees ordering ahead of a targeted pending
//! transaction.
//!
//! The relay is modeled as honest and loss-free. Submissions and drains are
//! serialized by the owner (the harness), which makes them linearizable.

use std::collections::{BTreeSet, VecDeque};

use serde::Serialize;

use crate::chainsim::{Transaction, TxHash};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RelayReceipt {
    Accepted,
    /// The target was already confirmed when the submission arrived.
    TooLate,
    /// A counter-transaction for this target was already accepted.
    Duplicate,
}

#[derive(Debug, Clone)]
pub struct RelayEntry {
    pub counter_tx: Transaction,
    pub target_hash: TxHash,
    pub submitted_at_ms: u64,
}

/// What `drain_for_block` hands the builder.
#[derive(Debug)]
pub struct DrainOutcome {
    /// FIFO relay lane: entries whose targets are still pending.
    pub lane: Vec<Transaction>,
    /// Entries whose targets disappeared before sealing.
    pub discarded: Vec<RelayEntry>,
}

#[derive(Debug, Default)]
pub struct RelayQueue {
    entries: VecDeque<RelayEntry>,
    seen_targets: BTreeSet<TxHash>,
}

impl RelayQueue {
    pub fn new() -> RelayQueue {
        RelayQueue::default()
    }

    /// Submits a counter-transaction aimed ahead of `target_hash`.
    /// `target_confirmed` is the relay's view of the chain at submission
    /// time.
    pub fn submit_private(
        &mut self,
        counter_tx: Transaction,
        target_hash: TxHash,
        target_confirmed: bool,
        now_ms: u64,
    ) -> RelayReceipt {
        if target_confirmed {
            return RelayReceipt::TooLate;
        }
        if !self.seen_targets.insert(target_hash) {
            return RelayReceipt::Duplicate;
        }
        self.entries.push_back(RelayEntry {
            counter_tx,
            target_hash,
            submitted_at_ms: now_ms,
        });
        RelayReceipt::Accepted
    }

    /// Atomically removes all accepted entries; those whose targets remain
    /// pending form the relay lane, the rest are returned for logging.
    pub fn drain_for_block(&mut self, still_pending: impl Fn(&TxHash) -> bool) -> DrainOutcome {
        let mut lane = Vec::new();
        let mut discarded = Vec::new();
        while let Some(entry) = self.entries.pop_front() {
            if still_pending(&entry.target_hash) {
                lane.push(entry.counter_tx);
            } else {
                discarded.push(entry);
            }
        }
        DrainOutcome { lane, discarded }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
