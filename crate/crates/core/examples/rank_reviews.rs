// Rank a product's reviews for one user.
//
// Each review gets `w1 * match_ratio + w2 * sentiment_alignment`, where the
// match ratio is the share of the user's preferred aspects the review
// mentions and the alignment is `1 - |bias - review score|`.

use revrank::corpus;
use revrank::pipeline::ReviewAnalyzer;
use revrank::ranking::{self, RankOptions, RankWeights};
use revrank::resources;

pub fn run_example() -> anyhow::Result<()> {
    let analyzer = ReviewAnalyzer::bundled();
    let corpus = corpus::ingest_tsv(resources::DEMO_CORPUS.as_bytes(), true)?.corpus;
    let profile = analyzer.historical_profile(&corpus, resources::SCREEN_PROTECTOR_USER, None)?;

    let ranked = ranking::rank_reviews(&profile, resources::SCREEN_PROTECTOR_PRODUCT, &corpus, &analyzer, &RankOptions::default())?;
    println!("{:<4} {:<8} {:>6} {:>6} {:>6}  matched", "#", "review", "match", "align", "final");
    for (i, s) in ranked.iter().enumerate() {
        println!(
            "{:<4} {:<8} {:>6.3} {:>6.3} {:>6.4}  {}",
            i + 1,
            s.review_id,
            s.match_ratio,
            s.sentiment_alignment,
            s.final_score,
            s.matched_aspects.join(", ")
        );
    }

    // Shifting all weight onto aspect matching changes the order.
    let opts = RankOptions { weights: RankWeights::new(1.0, 0.0)?, ..RankOptions::default() };
    let by_match = ranking::rank_reviews(&profile, resources::SCREEN_PROTECTOR_PRODUCT, &corpus, &analyzer, &opts)?;
    let ids: Vec<String> = ranking::top_k(&by_match, 3).into_iter().map(|s| s.review_id).collect();
    println!("\ntop 3 by aspect match only: {}", ids.join(", "));

    println!("final_score(0.6, 0.8) = {}", ranking::final_score(0.6, 0.8, &RankWeights::default())?);
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
