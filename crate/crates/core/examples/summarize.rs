// Summarize the top-ranked reviews for a user.
//
// The offline extractive backend is used here. Setting the summarizer
// backend to `Remote` with an endpoint sends the printed prompt to a chat
// completion service instead, falling back to extractive on failure.

use revrank::corpus;
use revrank::pipeline::ReviewAnalyzer;
use revrank::ranking::{self, RankOptions};
use revrank::resources;
use revrank::summarizer::{self, RemoteChatSpec, SummarizerConfig, Summarizer, SummaryBackend, SummaryRequest};

pub fn run_example() -> anyhow::Result<()> {
    let analyzer = ReviewAnalyzer::bundled();
    let corpus = corpus::ingest_tsv(resources::DEMO_CORPUS.as_bytes(), true)?.corpus;
    let product = resources::SCREEN_PROTECTOR_PRODUCT;
    let profile = analyzer.historical_profile(&corpus, resources::SCREEN_PROTECTOR_USER, None)?;
    let ranked = ranking::rank_reviews(&profile, product, &corpus, &analyzer, &RankOptions::default())?;

    let title = corpus.product(product).map(|p| p.product_title).unwrap_or_default();
    let request = SummaryRequest::from_ranking(&title, &profile, &ranked, &corpus, summarizer::DEFAULT_K);
    println!("--- prompt ---\n{}\n", summarizer::build_prompt(&request)?);

    let engine = Summarizer::new(SummarizerConfig::default(), analyzer.catalog().clone()).with_tau(analyzer.tau());
    let result = engine.summarize(&request)?;
    println!("--- {:?} summary ---\n{}", result.backend, result.text);

    // An unreachable chat service degrades to the extractive text.
    let offline = SummarizerConfig {
        backend: SummaryBackend::Remote,
        remote: Some(RemoteChatSpec {
            endpoint: "http://127.0.0.1:9/v1/chat/completions".into(),
            model: "any-chat-model".into(),
            token_env: None,
            timeout_ms: 300,
        }),
        ..SummarizerConfig::default()
    };
    let engine = Summarizer::new(offline, analyzer.catalog().clone()).with_tau(analyzer.tau());
    let fallback = engine.summarize_or_fallback(&request)?;
    assert_eq!(fallback.text, result.text);
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
