// Turn raw review text into cleaned, lemmatized tokens.
//
// Cleaning lowercases, strips punctuation and digits, drops stopwords and
// very short tokens, lemmatizes and optionally keeps only dictionary words.
// Applying it twice gives the same tokens as applying it once.

use revrank::corpus;
use revrank::resources;
use revrank::textprep::{self, CleanedReview, LexiconSet};

pub fn run_example() -> anyhow::Result<()> {
    let lexicons = LexiconSet::bundled();
    let counts = lexicons.counts();
    println!("lexicons: {counts:?}");

    let raw = "The batteries were DEAD after 2 days!!! Wouldn't buy again... :(";
    let tokens = textprep::clean(raw, &lexicons, true);
    println!("{raw}\n  -> {}", tokens.join(" "));
    assert_eq!(textprep::clean(&tokens.join(" "), &lexicons, true), tokens);

    let fixture = corpus::ingest_tsv(resources::SAMPLE_REVIEWS.as_bytes(), true)?.corpus;
    for record in fixture.records() {
        let cleaned = CleanedReview::from_record(record, &lexicons, true);
        println!("{:<16} {}", cleaned.review_id, cleaned.tokens.join(" "));
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
