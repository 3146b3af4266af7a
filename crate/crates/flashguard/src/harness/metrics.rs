//! Run reports: per-scenario records, aggregates, JSON serialization with a
//! determinism-safe redacted view, and a CSV flattening whose columns follow
//! the published metric vocabulary (DeT, #txs, DD, MF, TK).

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::chainsim::Amount;
use crate::disruptor::DisruptionMode;
use crate::scenarios::ScenarioShape;

#[derive(Debug, Clone, Serialize)]
pub struct VirtualTimes {
    pub attack_arrival_ms: u64,
    pub verdict_ms: Option<u64>,
    pub relay_submit_ms: Option<u64>,
    /// The seal at which the attack transaction confirmed.
    pub attack_sealed_ms: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioRecord {
    pub name: String,
    pub chain: String,
    pub detected: bool,
    /// Wall-clock classification time for the attack transaction.
    pub detection_latency_ms: Option<f64>,
    /// Wall-clock verdict-to-relay-receipt time.
    pub disruption_latency_ms: Option<f64>,
    pub disrupted: bool,
    pub disruption_mode: Option<DisruptionMode>,
    pub relay_receipt: Option<String>,
    pub attack_status: String,
    pub loss: Amount,
    pub rescued: Amount,
    pub counter_gas_used: u64,
    pub attack_gas_limit: u64,
    /// Dust units the victim side lost to the counterattack itself.
    pub dust_spent: Amount,
    pub shape: Option<ScenarioShape>,
    /// (block height, index) positions for the ordering guarantee.
    pub attack_position: Option<(u64, usize)>,
    pub counter_position: Option<(u64, usize)>,
    /// No relay-lane hash ever reached a mempool subscriber.
    pub relay_invisible: bool,
    pub virtual_times: VirtualTimes,
    pub benign_total: u64,
    pub benign_flagged: u64,
    pub expected_match: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub mismatches: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Aggregates {
    pub scenarios: usize,
    pub detected: usize,
    pub disrupted: usize,
    pub total_loss: Amount,
    pub total_rescued: Amount,
    pub total_dust_spent: Amount,
    pub fpr_percent: f64,
    pub mean_detection_latency_ms: f64,
    pub p99_detection_latency_ms: f64,
    pub mean_disruption_latency_ms: f64,
    pub all_matched: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub config: ConfigEcho,
    pub scenarios: Vec<ScenarioRecord>,
    pub aggregates: Aggregates,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub mode: String,
    pub detector_mode: String,
    pub seed: u64,
    pub block_interval_ms: Option<u64>,
    pub sealing_grace_ms: u64,
    pub prefilter: bool,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_json(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    /// The report with every wall-clock latency field nulled, for
    /// byte-identical comparison across runs of the same seed.
    pub fn deterministic_view(&self) -> String {
        let mut value: Value = serde_json::from_str(&self.to_json()).expect("report parses");
        redact(&mut value);
        serde_json::to_string_pretty(&value).expect("redacted report serializes")
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut file = std::fs::File::create(path)?;
        writeln!(
            file,
            "name,chain,detected,DeT_ms,Time_ms,disrupted,mode,status,#txs,#Entities,DD,MF,TK,loss,rescued,counter_gas,dust"
        )?;
        for record in &self.scenarios {
            let shape = record.shape.as_ref();
            writeln!(
                file,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                record.name.replace(',', ";"),
                record.chain,
                record.detected,
                record
                    .detection_latency_ms
                    .map(|v| format!("{v:.3}"))
                    .unwrap_or_default(),
                record
                    .disruption_latency_ms
                    .map(|v| format!("{v:.3}"))
                    .unwrap_or_default(),
                record.disrupted,
                record
                    .disruption_mode
                    .map(|m| format!("{m:?}"))
                    .unwrap_or_default(),
                record.attack_status,
                shape.map(|s| s.internal_tx_count.to_string()).unwrap_or_default(),
                shape.map(|s| s.entity_count.to_string()).unwrap_or_default(),
                shape
                    .map(|s| s.data_dependencies.to_string())
                    .unwrap_or_default(),
                shape
                    .map(|s| s.money_flow_events.to_string())
                    .unwrap_or_default(),
                shape.map(|s| s.token_count.to_string()).unwrap_or_default(),
                record.loss,
                record.rescued,
                record.counter_gas_used,
                record.dust_spent,
            )?;
        }
        Ok(())
    }
}

/// Latency fields are wall-clock measurements and the one permitted source
/// of nondeterminism; everything else must reproduce bit-for-bit per seed.
fn redact(value: &mut Value) {
    match value {
        Value::Object(map) => {
            for (key, v) in map.iter_mut() {
                if key.contains("latency_ms") {
                    *v = Value::Null;
                } else {
                    redact(v);
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(redact),
        _ => {}
    }
}

pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// False-positive evaluation against generator ground truth.
#[derive(Debug, Clone, Serialize)]
pub struct FprReport {
    pub corpus: String,
    pub total: u64,
    pub benign_total: u64,
    pub flagged_benign: u64,
    pub fpr_percent: f64,
    pub accuracy_percent: f64,
    pub mean_latency_ms: f64,
    pub p99_latency_ms: f64,
    pub per_profile: Vec<ProfileFpr>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileFpr {
    pub name: String,
    pub total: u64,
    pub flagged_benign: u64,
    pub fpr_percent: f64,
}

impl FprReport {
    pub fn write_json(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(
            path,
            serde_json::to_string_pretty(self).expect("fpr report serializes"),
        )
    }
}

/// Prefilter timing comparison. The speedup is hardware-dependent and
/// reported, not asserted.
#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub corpus: String,
    pub count: u64,
    pub mean_us_unfiltered: f64,
    pub mean_us_prefiltered: f64,
    pub reduction_percent: f64,
    pub identical_flagged_sets: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_picks_ceiling_rank() {
        let values = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&values, 50.0), 2.0);
        assert_eq!(percentile(&values, 99.0), 4.0);
        assert_eq!(percentile(&values, 100.0), 4.0);
        assert_eq!(percentile(&[], 99.0), 0.0);
    }

    #[test]
    fn redaction_nulls_latency_fields_only() {
        let mut value: Value = serde_json::json!({
            "detection_latency_ms": 12.5,
            "nested": [{"mean_disruption_latency_ms": 3.0, "loss": "42"}],
            "seed": 7
        });
        redact(&mut value);
        assert_eq!(value["detection_latency_ms"], Value::Null);
        assert_eq!(value["nested"][0]["mean_disruption_latency_ms"], Value::Null);
        assert_eq!(value["nested"][0]["loss"], "42");
        assert_eq!(value["seed"], 7);
    }
}
