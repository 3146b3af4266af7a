//! Priority block building.
//!
//! Relay-lane transactions are placed first in FIFO order; the mempool
//! segment follows, ordered by non-increasing gas price (arrival order breaks
//! ties). Gas is charged to the sender's native balance and the nonce is
//! consumed for every included transaction, reverted or not — those are
//! inclusion effects, so atomic rollback inside `apply_transaction` stays
//! exact.

use serde::Serialize;

use super::{
    apply_transaction_with, ChainError, ExecOptions, ExecutionTrace, Transaction, TxHash,
    WorldState,
};

#[derive(Debug, Clone, Serialize)]
pub struct Block {
    pub height: u64,
    pub transactions: Vec<Transaction>,
    pub traces: Vec<ExecutionTrace>,
    /// Length of the relay-lane prefix of `transactions`.
    pub relay_count: usize,
}

impl Block {
    pub fn position_of(&self, hash: &TxHash) -> Option<usize> {
        self.transactions.iter().position(|tx| tx.hash == *hash)
    }
}

/// A block plus the candidates the builder had to drop as malformed.
#[derive(Debug)]
pub struct BuildOutcome {
    pub block: Block,
    pub skipped: Vec<(TxHash, ChainError)>,
}

/// Candidate drawn from the pending pool: the transaction plus its arrival
/// sequence number for deterministic tie-breaking.
#[derive(Debug, Clone)]
pub struct PoolCandidate {
    pub tx: Transaction,
    pub arrival_seq: u64,
}

/// Builds and applies the next block. `capacity` bounds the total
/// transaction count; the relay lane is consumed first.
pub fn build_block(
    world: &mut WorldState,
    relay_lane: Vec<Transaction>,
    pool_candidates: Vec<PoolCandidate>,
    capacity: usize,
) -> BuildOutcome {
    assert!(capacity >= 1, "block capacity must be at least 1");

    let mut ordered = Vec::with_capacity(capacity);
    let relay_count = relay_lane.len().min(capacity);
    ordered.extend(relay_lane.into_iter().take(capacity));

    let mut pool = pool_candidates;
    pool.sort_by(|a, b| {
        b.tx.gas_price
            .cmp(&a.tx.gas_price)
            .then(a.arrival_seq.cmp(&b.arrival_seq))
    });
    ordered.extend(
        pool.into_iter()
            .take(capacity.saturating_sub(ordered.len()))
            .map(|c| c.tx),
    );

    let mut block = Block {
        height: world.block_height + 1,
        transactions: Vec::with_capacity(ordered.len()),
        traces: Vec::with_capacity(ordered.len()),
        relay_count,
    };
    let mut skipped = Vec::new();

    for tx in ordered {
        match apply_transaction_with(world, &tx, &ExecOptions::default()) {
            Ok(trace) => {
                let fee = crate::chainsim::Amount::from(
                    (trace.gas_used as u128) * (tx.gas_price as u128),
                );
                world.debit_native_saturating(&tx.from, &fee);
                world.bump_nonce(tx.from);
                block.transactions.push(tx);
                block.traces.push(trace);
            }
            Err(err) => {
                // Malformed candidates never make the block; adjust the
                // relay prefix length if one of those was dropped.
                if block.transactions.len() < block.relay_count {
                    block.relay_count -= 1;
                }
                skipped.push((tx.hash, err));
            }
        }
    }

    world.block_height += 1;
    BuildOutcome { block, skipped }
}
