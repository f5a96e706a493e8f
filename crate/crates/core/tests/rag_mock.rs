use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use ecorag_core::corpus::{chunk_documents, ChunkConfig, Document};
use ecorag_core::embed::{embed_batch, normalize, EmbedError, Embedder, HttpEmbedder};
use ecorag_core::energy::{Clock, EnergyMonitor, MonitorBackend, PowerTrace, VirtualClock};
use ecorag_core::index::{build_index, IndexMetadata, VectorIndex};
use ecorag_core::provider::{ProviderConfig, ProviderError};
use ecorag_core::rag::{parse_choice, AnswerOption, Generator, HttpGenerator, PromptTemplate, RagEngine, RagError};
use ecorag_mock::{embed_text, MockConfig, MockServer};

const DIM: usize = 32;

fn embed_cfg(url: &str) -> ProviderConfig {
    ProviderConfig {
        retry_base_ms: 1,
        ..ProviderConfig::embedder(url)
    }
}

fn gen_cfg(url: &str) -> ProviderConfig {
    ProviderConfig {
        retry_base_ms: 1,
        ..ProviderConfig::generator(url)
    }
}

fn mock(cfg: MockConfig) -> MockServer {
    MockServer::start(MockConfig { dim: DIM, ..cfg })
}

fn texts(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("passage {i} about topic{} and item{}", i % 7, i)).collect()
}

#[tokio::test]
async fn hundred_texts_have_equal_dimension() {
    let server = mock(MockConfig::default());
    let e = HttpEmbedder::new(embed_cfg(&server.url())).unwrap();
    let out = embed_batch(&e, &texts(100), 8).await.unwrap();
    assert_eq!(out.len(), 100);
    assert!(out.iter().all(|v| v.dim() == DIM));
    assert_eq!(server.embedding_calls(), 100);
}

#[tokio::test]
async fn batch_preserves_input_order() {
    let server = mock(MockConfig {
        delay_ms: 5,
        ..MockConfig::default()
    });
    let e = HttpEmbedder::new(embed_cfg(&server.url())).unwrap();
    let t = texts(3);
    let out = embed_batch(&e, &t, 2).await.unwrap();
    for (v, text) in out.iter().zip(&t) {
        assert_eq!(v.values(), embed_text(text, DIM).as_slice());
    }
}

#[tokio::test]
async fn batch_reports_failed_indices() {
    let server = mock(MockConfig {
        fail_embedding_when_contains: vec!["item1".into()],
        ..MockConfig::default()
    });
    let e = HttpEmbedder::new(ProviderConfig {
        max_retries: 1,
        ..embed_cfg(&server.url())
    })
    .unwrap();
    match embed_batch(&e, &texts(3), 2).await {
        Err(EmbedError::Batch { failed, .. }) => assert_eq!(failed, [1]),
        other => panic!("expected batch error, got {other:?}"),
    }
}

#[tokio::test]
async fn transient_failures_are_retried() {
    let server = mock(MockConfig {
        fail_first_generates: 2,
        answers: BTreeMap::from([("capital".to_string(), "The answer is B".to_string())]),
        ..MockConfig::default()
    });
    let g = HttpGenerator::new(gen_cfg(&server.url())).unwrap();
    let out = g.generate("what is the capital?").await.unwrap();
    assert_eq!(out.text, "The answer is B");
    assert_eq!(out.token_count, Some(900));
    assert_eq!(server.generate_calls(), 3);
}

#[tokio::test]
async fn unreachable_provider_is_a_transport_error() {
    let port = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let g = HttpGenerator::new(ProviderConfig {
        max_retries: 2,
        ..gen_cfg(&format!("http://127.0.0.1:{port}"))
    })
    .unwrap();
    match g.generate("hello").await {
        Err(ProviderError::Transport { attempts, .. }) => assert_eq!(attempts, 3),
        other => panic!("expected transport error, got {other:?}"),
    }
}

#[tokio::test]
async fn zero_vectors_are_rejected() {
    let server = mock(MockConfig {
        zero_vector_marker: Some("NULL".into()),
        ..MockConfig::default()
    });
    let e = HttpEmbedder::new(embed_cfg(&server.url())).unwrap();
    let v = e.embed("NULL text").await.unwrap();
    assert!(matches!(normalize(&v), Err(EmbedError::Degenerate)));
}

fn corpus() -> Vec<Document> {
    let topics = [
        "aspirin inhibits cyclooxygenase and reduces platelet aggregation",
        "metformin lowers hepatic glucose production in type two diabetes",
        "warfarin antagonizes vitamin k dependent clotting factors",
        "insulin promotes glucose uptake into muscle and fat",
        "statins inhibit hmg coa reductase lowering cholesterol",
    ];
    topics
        .iter()
        .enumerate()
        .map(|(i, t)| Document {
            id: format!("doc{i}.txt"),
            text: format!("{t}. ").repeat(8),
            source_path: format!("doc{i}.txt"),
        })
        .collect()
}

async fn fixture_index(url: &str) -> VectorIndex {
    let chunks = chunk_documents(&corpus(), ChunkConfig::new(120, 20).unwrap()).unwrap();
    assert!(chunks.len() >= 20);
    let e = HttpEmbedder::new(embed_cfg(url)).unwrap();
    let meta = IndexMetadata {
        embedding_model: "mock".into(),
        chunk_size: 120,
        overlap: 20,
        created_at: "2024-01-01T00:00:00Z".into(),
        corpus_fingerprint: String::new(),
    };
    build_index(&chunks, &e, 4, meta).await.unwrap()
}

/// Cosine of raw mock vectors over every chunk, sorted.
fn oracle(index: &VectorIndex, question: &str, k: usize) -> Vec<(String, usize)> {
    let q = embed_text(question, DIM);
    let cos = |a: &[f32], b: &[f32]| {
        let d: f64 = a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum();
        let n = |v: &[f32]| v.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
        d / (n(a) * n(b))
    };
    let mut all: Vec<(f64, String, usize)> = index
        .entries()
        .iter()
        .map(|e| (cos(&q, &embed_text(&e.text, DIM)), e.chunk_ref.doc_id.clone(), e.chunk_ref.seq))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    all.into_iter().take(k).map(|(_, d, s)| (d, s)).collect()
}

fn options() -> Vec<AnswerOption> {
    ["A", "B", "C", "D"]
        .iter()
        .enumerate()
        .map(|(i, l)| AnswerOption::new(*l, format!("choice {i}")))
        .collect()
}

#[tokio::test]
async fn engine_answers_from_the_index() {
    let questions = [
        "What does aspirin inhibit?",
        "How does metformin act in diabetes?",
        "Which factors does warfarin antagonize?",
        "Where does insulin promote glucose uptake?",
        "What do statins inhibit?",
    ];
    let answers: BTreeMap<String, String> = questions
        .iter()
        .enumerate()
        .map(|(i, q)| (q.to_string(), format!("The answer is ({}).", ["A", "B", "C", "D"][i % 4])))
        .collect();
    let server = mock(MockConfig {
        answers: answers.clone(),
        ..MockConfig::default()
    });
    let index = Arc::new(fixture_index(&server.url()).await);
    let clock = Arc::new(VirtualClock::new(10.0));
    let dyn_clock: Arc<dyn Clock> = clock;
    let monitor = Arc::new(EnergyMonitor::start(
        MonitorBackend::Synthetic(PowerTrace::constant(20.0, 100.0)),
        dyn_clock,
        "GR",
        430.0,
        Duration::from_millis(100),
    ));
    let engine = RagEngine::new(
        index.clone(),
        Arc::new(HttpEmbedder::new(embed_cfg(&server.url())).unwrap()),
        Arc::new(HttpGenerator::new(gen_cfg(&server.url())).unwrap()),
        PromptTemplate::mcq_default(),
        4,
        monitor.clone(),
    );
    let labels: Vec<String> = options().iter().map(|o| o.label.clone()).collect();
    let mut per_query = 0.0;
    for q in questions {
        let a = engine.ask(q, Some(&options())).await.unwrap();
        let got: Vec<(String, usize)> = a.sources.iter().map(|h| (h.chunk_ref.doc_id.clone(), h.chunk_ref.seq)).collect();
        assert_eq!(got, oracle(&index, q, 4), "{q}");
        assert_eq!(a.parsed_choice, parse_choice(&answers[q], &labels));
        assert_eq!(a.token_count, Some(900));
        assert!(a.energy_wh > 0.0);
        assert!((a.co2_g - a.energy_wh / 1000.0 * 430.0).abs() < 1e-12);
        per_query += a.energy_wh;
    }
    assert!(monitor.session_report().total_wh() >= per_query);

    assert!(matches!(engine.ask("  ", None).await, Err(RagError::EmptyQuestion)));
}
