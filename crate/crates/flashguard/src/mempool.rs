//! The pending-transaction pool with publish/subscribe streaming.
//!
//! One producer submits; any number of subscribers observe an identical
//! event sequence through bounded channels. A full subscriber buffer blocks
//! the producer rather than dropping events. Relay-lane transactions never
//! pass through here, so they are invisible to every subscriber.

use std::collections::BTreeMap;

use crossbeam_channel::{bounded, Receiver, Sender};
use serde::Serialize;
use thiserror::Error;

use crate::chainsim::{Block, PoolCandidate, Transaction, TxHash};

pub const DEFAULT_SUBSCRIBER_BUFFER: usize = 65_536;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MempoolError {
    #[error("duplicate transaction hash {0:?}")]
    DuplicateHash(TxHash),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StreamEventKind {
    Added,
    Dropped,
    Confirmed,
}

/// One pool lifecycle event. Timestamps come from the harness clock and are
/// monotone non-decreasing per subscriber.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StreamEvent {
    pub kind: StreamEventKind,
    pub tx_hash: TxHash,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone)]
pub struct PoolEntry {
    pub tx: Transaction,
    pub arrival_ms: u64,
    pub arrival_seq: u64,
}

/// A subscriber's end of the event stream.
pub struct Subscription {
    receiver: Receiver<StreamEvent>,
}

impl Subscription {
    /// Non-blocking drain of everything currently buffered.
    pub fn drain(&self) -> Vec<StreamEvent> {
        self.receiver.try_iter().collect()
    }

    /// Blocking receive; `None` once the pool is gone and the buffer empty.
    pub fn recv(&self) -> Option<StreamEvent> {
        self.receiver.recv().ok()
    }

    pub fn try_recv(&self) -> Option<StreamEvent> {
        self.receiver.try_recv().ok()
    }
}

pub struct PendingPool {
    by_hash: BTreeMap<TxHash, PoolEntry>,
    subscribers: Vec<Sender<StreamEvent>>,
    arrival_counter: u64,
    buffer_capacity: usize,
    last_event_ms: u64,
}

impl Default for PendingPool {
    fn default() -> Self {
        PendingPool::new(DEFAULT_SUBSCRIBER_BUFFER)
    }
}

impl PendingPool {
    pub fn new(buffer_capacity: usize) -> PendingPool {
        PendingPool {
            by_hash: BTreeMap::new(),
            subscribers: Vec::new(),
            arrival_counter: 0,
            buffer_capacity,
            last_event_ms: 0,
        }
    }

    /// Attaches a subscriber; it observes events from this point onward.
    pub fn subscribe(&mut self) -> Subscription {
        let (tx, rx) = bounded(self.buffer_capacity);
        self.subscribers.push(tx);
        Subscription { receiver: rx }
    }

    /// Stores a pending transaction and broadcasts `Added` to all
    /// subscribers in arrival order.
    pub fn submit(&mut self, tx: Transaction, now_ms: u64) -> Result<StreamEvent, MempoolError> {
        if self.by_hash.contains_key(&tx.hash) {
            return Err(MempoolError::DuplicateHash(tx.hash));
        }
        let event = StreamEvent {
            kind: StreamEventKind::Added,
            tx_hash: tx.hash,
            timestamp_ms: now_ms,
        };
        self.by_hash.insert(
            tx.hash,
            PoolEntry {
                tx,
                arrival_ms: now_ms,
                arrival_seq: self.arrival_counter,
            },
        );
        self.arrival_counter += 1;
        self.broadcast(event.clone());
        Ok(event)
    }

    /// Removes confirmed transactions and emits `Confirmed` for each one
    /// that was actually pending. Relay-lane transactions were never in the
    /// pool, so they produce no events; unknown hashes are ignored.
    pub fn on_block(&mut self, block: &Block, now_ms: u64) -> Vec<StreamEvent> {
        let mut events = Vec::new();
        for tx in &block.transactions {
            if self.by_hash.remove(&tx.hash).is_some() {
                let event = StreamEvent {
                    kind: StreamEventKind::Confirmed,
                    tx_hash: tx.hash,
                    timestamp_ms: now_ms,
                };
                self.broadcast(event.clone());
                events.push(event);
            }
        }
        events
    }

    /// Evicts a pending transaction (e.g. one the builder rejected as
    /// malformed), emitting `Dropped`.
    pub fn drop_tx(&mut self, hash: &TxHash, now_ms: u64) -> Option<StreamEvent> {
        self.by_hash.remove(hash).map(|_| {
            let event = StreamEvent {
                kind: StreamEventKind::Dropped,
                tx_hash: *hash,
                timestamp_ms: now_ms,
            };
            self.broadcast(event.clone());
            event
        })
    }

    pub fn contains(&self, hash: &TxHash) -> bool {
        self.by_hash.contains_key(hash)
    }

    pub fn get(&self, hash: &TxHash) -> Option<&PoolEntry> {
        self.by_hash.get(hash)
    }

    pub fn len(&self) -> usize {
        self.by_hash.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_hash.is_empty()
    }

    /// The builder's view: every pending transaction with its arrival
    /// sequence for deterministic tie-breaking.
    pub fn candidates(&self) -> Vec<PoolCandidate> {
        self.by_hash
            .values()
            .map(|entry| PoolCandidate {
                tx: entry.tx.clone(),
                arrival_seq: entry.arrival_seq,
            })
            .collect()
    }

    fn broadcast(&mut self, event: StreamEvent) {
        debug_assert!(event.timestamp_ms >= self.last_event_ms);
        self.last_event_ms = event.timestamp_ms;
        // A blocking send applies backpressure when a subscriber lags; a
        // disconnected subscriber is pruned.
        self.subscribers
            .retain(|sender| sender.send(event.clone()).is_ok());
    }
}
