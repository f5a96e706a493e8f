#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ecorag_cli::config::{BackendKind, ClockKind};
use ecorag_cli::{cmd_index, AppConfig, IndexArgs};
use ecorag_core::energy::{EnergyReport, EnergySource};
use ecorag_core::eval::{ItemOutcome, RunConfigSnapshot, RunRecord, RUN_SCHEMA_VERSION};
use ecorag_core::provider::ProviderConfig;
use ecorag_core::rag::Attribution;
use ecorag_mock::{MockConfig, MockServer};
use tempfile::TempDir;

pub const LABELS: [&str; 4] = ["A", "B", "C", "D"];

pub const CORPUS: [(&str, &str); 3] = [
    (
        "cardiology.txt",
        "Atrial fibrillation is an irregular heart rhythm. Anticoagulation with warfarin or apixaban lowers stroke risk. ",
    ),
    (
        "nephrology.md",
        "Chronic kidney disease is staged by glomerular filtration rate. ACE inhibitors slow proteinuric progression. ",
    ),
    (
        "oncology.txt",
        "Tamoxifen blocks estrogen receptors in breast tissue. Aromatase inhibitors are preferred after menopause. ",
    ),
];

/// Repeat each seed sentence until the file spans several chunks.
pub fn corpus_text(seed: &str, i: usize) -> String {
    seed.repeat(20 + 7 * i)
}

pub fn write_corpus(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    for (i, (name, seed)) in CORPUS.iter().enumerate() {
        std::fs::write(dir.join(name), corpus_text(seed, i)).unwrap();
    }
}

pub fn provider(url: &str, embed: bool) -> ProviderConfig {
    let base = if embed {
        ProviderConfig::embedder(url)
    } else {
        ProviderConfig::generator(url)
    };
    ProviderConfig {
        retry_base_ms: 1,
        max_retries: 2,
        timeout_ms: 5_000,
        ..base
    }
}

pub struct Fixture {
    pub dir: TempDir,
    pub mock: MockServer,
    pub cfg: AppConfig,
}

impl Fixture {
    /// Mock providers, synthetic energy on a virtual clock, index path in a
    /// fresh temp dir. Nothing is built yet.
    pub fn new(mock: MockConfig) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mock = MockServer::start(mock);
        let mut cfg = AppConfig {
            embedder: provider(&mock.url(), true),
            generator: provider(&mock.url(), false),
            index_path: dir.path().join("corpus.index"),
            ..AppConfig::default()
        };
        cfg.energy.backend = BackendKind::Synthetic;
        cfg.energy.clock = ClockKind::Virtual;
        Self { dir, mock, cfg }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.path("corpus")
    }

    pub async fn build_index(&self) {
        write_corpus(&self.corpus_dir());
        let args = IndexArgs {
            corpus: self.corpus_dir(),
            out: None,
        };
        cmd_index(&self.cfg, &args, &mut Vec::new()).await.unwrap();
    }

    /// Write the config as TOML and return its path.
    pub fn config_file(&self) -> PathBuf {
        let p = self.path("ecorag.toml");
        std::fs::write(&p, toml::to_string(&self.cfg).unwrap()).unwrap();
        p
    }

    pub fn run(&self, args: &[&str]) -> Output {
        ecorag(&self.config_file(), args)
    }
}

pub fn ecorag(config: &Path, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ecorag"));
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("ECORAG_")) {
        cmd.env_remove(k);
    }
    cmd.arg("--config").arg(config).args(args).output().unwrap()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn question(i: usize) -> String {
    format!("Question {i:03}: which therapy fits patient case {i}?")
}

pub fn gold(i: usize) -> &'static str {
    LABELS[i % 4]
}

/// MedQA lines for `n` items, gold label cycling A..D.
pub fn medqa_lines(n: usize) -> String {
    let mut s = String::new();
    for i in 0..n {
        let line = serde_json::json!({
            "id": format!("q{i:03}"),
            "question": question(i),
            "options": {"A": "warfarin", "B": "tamoxifen", "C": "lisinopril", "D": "metformin"},
            "answer_idx": gold(i),
        });
        s.push_str(&line.to_string());
        s.push('\n');
    }
    s
}

/// Answer key: the first `correct` items get their gold label, the rest
/// the next label over.
pub fn answer_key(n: usize, correct: usize) -> BTreeMap<String, String> {
    (0..n)
        .map(|i| {
            let label = if i < correct { gold(i) } else { LABELS[(i + 1) % 4] };
            (format!("Question {i:03}:"), format!("The answer is {label}."))
        })
        .collect()
}

/// A hand-built record: `correct[i]` decides item i; energy all on one
/// component.
pub fn synthetic_record(model: &str, ids: &[String], correct: &[bool], kwh: f64, region: &str, intensity: f64) -> RunRecord {
    let items: Vec<ItemOutcome> = ids
        .iter()
        .zip(correct)
        .enumerate()
        .map(|(i, (id, &ok))| {
            let gold = LABELS[i % 4].to_string();
            let predicted = if ok { gold.clone() } else { LABELS[(i + 1) % 4].to_string() };
            ItemOutcome {
                id: id.clone(),
                gold,
                predicted: Some(predicted),
                correct: ok,
                latency_ms: 1000.0,
                energy_wh: 0.0,
                errored: false,
                error: None,
            }
        })
        .collect();
    let n = items.len();
    RunRecord {
        schema_version: RUN_SCHEMA_VERSION,
        run_id: format!("run-{model}"),
        model_name: model.into(),
        created_at: "2025-01-01T00:00:00Z".into(),
        config: RunConfigSnapshot {
            top_k: 4,
            template: "mcq".into(),
            seed: 42,
            region: region.into(),
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
        totals: EnergyReport::new(0.0, kwh, region, intensity, EnergySource::Synthetic),
        unparsed_count: 0,
        errored_count: 0,
        wall_time_s: n as f64,
    }
}

pub fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("q{i:03}")).collect()
}
