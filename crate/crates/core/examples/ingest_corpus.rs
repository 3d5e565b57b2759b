// Ingest a review dump and inspect what survived validation.
//
// Run with `cargo run --example ingest_corpus`.

use revrank::corpus::{self, IngestOptions, SourceFormat};
use revrank::resources;

pub fn run_example() -> anyhow::Result<()> {
    let ingested = corpus::ingest(resources::DEMO_CORPUS.as_bytes(), IngestOptions { format: SourceFormat::Tsv, strict: false })?;
    let c = &ingested.corpus;
    println!("{} reviews, {} users, {} products", c.len(), c.user_count(), c.product_count());
    for category in c.categories() {
        let products = c.products(Some(&category));
        println!("  {category}: {} products", products.len());
    }

    // Broken rows are reported, not fatal, unless strict mode is on.
    let first: Vec<&str> = resources::DEMO_CORPUS.lines().nth(1).unwrap().split('\t').collect();
    let mut out_of_range = first.clone();
    out_of_range[2] = "RX0000001";
    out_of_range[7] = "9";
    let mut dump = resources::DEMO_CORPUS.to_string();
    dump.push_str(&out_of_range.join("\t"));
    dump.push('\n');
    dump.push_str(&first.join("\t"));
    dump.push('\n');
    let lenient = corpus::ingest_tsv(dump.as_bytes(), false)?;
    for row in &lenient.rejected {
        println!("rejected line {}: {}", row.row, row.reason);
    }
    let strict = corpus::ingest_tsv(dump.as_bytes(), true);
    println!("strict ingest: {}", if strict.is_err() { "refused" } else { "accepted" });
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
