use sha2::{Digest, Sha256};

use super::record::{ItemOutcome, RunConfigSnapshot, RunRecord, RUN_SCHEMA_VERSION};
use super::McqItem;
use crate::rag::RagEngine;

/// Deterministic id derived from what was run, not when.
pub fn run_id(model: &str, snapshot: &RunConfigSnapshot, items: &[McqItem]) -> String {
    let mut h = Sha256::new();
    h.update(model.as_bytes());
    h.update([0]);
    h.update(serde_json::to_vec(snapshot).expect("snapshot serializes"));
    for it in items {
        h.update([0]);
        h.update(it.id.as_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

/// Ask every item in order, one at a time, and record the outcomes.
/// Provider failures mark the item errored (and incorrect) without stopping
/// the run.
pub async fn run_benchmark(engine: &RagEngine, items: &[McqItem], snapshot: RunConfigSnapshot) -> RunRecord {
    let monitor = engine.monitor().clone();
    let start = monitor.mark();
    let mut outcomes = Vec::with_capacity(items.len());
    let mut unparsed = 0;
    let mut errored = 0;
    for item in items {
        match engine.ask(&item.question, Some(&item.options)).await {
            Ok(answer) => {
                if answer.parsed_choice.is_none() {
                    unparsed += 1;
                }
                let correct = answer.parsed_choice.as_deref() == Some(item.gold.as_str());
                outcomes.push(ItemOutcome {
                    id: item.id.clone(),
                    gold: item.gold.clone(),
                    predicted: answer.parsed_choice,
                    correct,
                    latency_ms: answer.latency_ms,
                    energy_wh: answer.energy_wh,
                    errored: false,
                    error: None,
                });
            }
            Err(e) => {
                log::warn!("item {} failed: {e}", item.id);
                errored += 1;
                outcomes.push(ItemOutcome {
                    id: item.id.clone(),
                    gold: item.gold.clone(),
                    predicted: None,
                    correct: false,
                    latency_ms: 0.0,
                    energy_wh: 0.0,
                    errored: true,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    let end = monitor.mark();
    let model = engine.generator_model().to_string();
    RunRecord {
        schema_version: RUN_SCHEMA_VERSION,
        run_id: run_id(&model, &snapshot, items),
        model_name: model,
        created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        config: snapshot,
        items: outcomes,
        totals: monitor.energy_between(start, end),
        unparsed_count: unparsed,
        errored_count: errored,
        wall_time_s: (end.t_ms - start.t_ms) / 1000.0,
    }
}
