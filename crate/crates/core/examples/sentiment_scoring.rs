// Fuse star ratings with lexicon polarity into one sentiment score.

use revrank::corpus;
use revrank::resources;
use revrank::sentiment::{self, FusionConfig, SentimentLexicon};
use revrank::textprep::LexiconSet;

pub fn run_example() -> anyhow::Result<()> {
    let lexicons = LexiconSet::bundled();
    let lexicon = SentimentLexicon::bundled().normalized(&lexicons);
    let fusion = FusionConfig::default();

    // Negators flip the polarity of the next few tokens.
    for text in ["the charger works great", "the charger does not work great"] {
        let tokens = sentiment::sentiment_tokens(text, &lexicons, &lexicon, false);
        println!("{text:<34} polarity {:+.3}", sentiment::text_polarity(&tokens, &lexicon));
    }

    let fixture = corpus::ingest_tsv(resources::SAMPLE_REVIEWS.as_bytes(), true)?.corpus;
    println!("\n{:<16} {:>4} {:>8} {:>7}  label", "review", "star", "polarity", "score");
    for r in fixture.records() {
        let tokens = sentiment::sentiment_tokens(&r.review_body, &lexicons, &lexicon, true);
        let polarity = sentiment::text_polarity(&tokens, &lexicon);
        let s = sentiment::fuse(&r.review_id, r.star_rating as i64, polarity, &fusion)?;
        println!(
            "{:<16} {:>4} {:>+8.3} {:>7.4}  {}",
            s.review_id, r.star_rating, s.text_polarity, s.sentiment_score, s.sentiment_label
        );
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
