//! Fixture builders shared by the benches.

use ecorag_core::embed::{normalize, Embedding};
use ecorag_core::energy::{EnergyReport, EnergySource};
use ecorag_core::eval::{ItemOutcome, RunConfigSnapshot, RunRecord, RUN_SCHEMA_VERSION};
use ecorag_core::index::{ChunkRef, IndexBuilder, IndexMetadata, VectorIndex};
use ecorag_core::rag::Attribution;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn random_unit(rng: &mut StdRng, dim: usize) -> ecorag_core::UnitEmbedding {
    let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    normalize(&Embedding(v)).expect("random vector is non-zero")
}

pub fn random_index(n: usize, dim: usize, seed: u64) -> VectorIndex {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut b = IndexBuilder::new(IndexMetadata {
        embedding_model: "bench".into(),
        chunk_size: 1000,
        overlap: 200,
        created_at: "2025-01-01T00:00:00Z".into(),
        corpus_fingerprint: String::new(),
    });
    for i in 0..n {
        let r = ChunkRef {
            doc_id: format!("doc{}", i % 50),
            seq: i,
            start_char: 0,
        };
        b.push(r, String::new(), &random_unit(&mut rng, dim)).expect("dims agree");
    }
    b.seal()
}

/// A run over `n` four-option items with roughly `acc` accuracy.
pub fn random_run(model: &str, n: usize, acc: f64, seed: u64) -> RunRecord {
    const LABELS: [&str; 4] = ["A", "B", "C", "D"];
    let mut rng = StdRng::seed_from_u64(seed);
    let items: Vec<ItemOutcome> = (0..n)
        .map(|i| {
            let gold = LABELS[rng.random_range(0..4)];
            let predicted = if rng.random_bool(acc) { gold } else { LABELS[rng.random_range(0..4)] };
            ItemOutcome {
                id: format!("q{i}"),
                gold: gold.into(),
                predicted: Some(predicted.into()),
                correct: gold == predicted,
                latency_ms: 2000.0,
                energy_wh: 1.0,
                errored: false,
                error: None,
            }
        })
        .collect();
    RunRecord {
        schema_version: RUN_SCHEMA_VERSION,
        run_id: model.into(),
        model_name: model.into(),
        created_at: "2025-01-01T00:00:00Z".into(),
        config: RunConfigSnapshot {
            top_k: 4,
            template: "mcq-default".into(),
            seed,
            region: "GR".into(),
            embedder_url: String::new(),
            embedder_model: String::new(),
            generator_url: String::new(),
            dataset_kind: None,
            dataset_path: None,
            n,
            energy_backend: EnergySource::Synthetic,
            attribution: Attribution::PerQuery,
        },
        items,
        totals: EnergyReport::new(0.1, 1.0, "GR", 430.0, EnergySource::Synthetic),
        unparsed_count: 0,
        errored_count: 0,
        wall_time_s: n as f64 * 2.0,
    }
}
