// Build user preference profiles from review history, from an explicit
// selection, and from both.

use revrank::corpus;
use revrank::pipeline::ReviewAnalyzer;
use revrank::profile::{merge_profiles, profile_from_selection};
use revrank::resources;

pub fn run_example() -> anyhow::Result<()> {
    let analyzer = ReviewAnalyzer::bundled();
    let corpus = corpus::ingest_tsv(resources::DEMO_CORPUS.as_bytes(), true)?.corpus;

    let user = resources::SCREEN_PROTECTOR_USER;
    let historical = analyzer.historical_profile(&corpus, user, None)?;
    println!("historical profile of {user} ({} reviews):", historical.review_count);
    for (aspect, weight) in &historical.preferred_aspects {
        println!("  {aspect:<22} {weight:.3}");
    }
    println!("  sentiment bias {:.4}", historical.sentiment_bias);

    let chosen = ["clarity".to_string(), "price".to_string()];
    let explicit = profile_from_selection(user, &chosen, &[], analyzer.catalog(), Some("Screen_Protectors"))?;
    let merged = merge_profiles(&historical, &explicit)?;
    println!("\nmerged preferences: {}", merged.ordered_preferences().join(", "));
    println!("{}", serde_json::to_string_pretty(&merged)?);
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
