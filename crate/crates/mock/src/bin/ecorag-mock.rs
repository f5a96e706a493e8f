use std::path::PathBuf;

use clap::Parser;
use ecorag_mock::{router, MockConfig};

/// Serve deterministic embeddings and answers on an Ollama-style API.
#[derive(Parser)]
struct Args {
    #[arg(long, default_value = "127.0.0.1:11434")]
    bind: String,
    /// JSON file with MockConfig fields (dim, answers, default_answer, ...).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args = Args::parse();
    let cfg: MockConfig = match &args.config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => MockConfig::default(),
    };
    let (app, _) = router(cfg);
    let listener = tokio::net::TcpListener::bind(&args.bind).await?;
    eprintln!("mock provider listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app).await?;
    Ok(())
}
