// Tag reviews with the catalog aspects they talk about.

use revrank::aspects::{AspectCatalog, DEFAULT_TAU};
use revrank::embedding::{build_embedder, EmbedderSpec};
use revrank::textprep::{self, LexiconSet};

pub fn run_example() -> anyhow::Result<()> {
    let lexicons = LexiconSet::bundled();
    let catalog = AspectCatalog::bundled(&lexicons, build_embedder(&EmbedderSpec::default())?)?;
    for category in catalog.categories() {
        println!("{category}: {}", catalog.phrases(category)?.join(", "));
    }

    let review = "The glass has great clarity and touch sensitivity is unaffected. \
                  Installation took a minute and it fits my phone perfectly.";
    let tokens = textprep::clean(review, &lexicons, true);
    println!("\ntokens: {}", tokens.join(" "));
    for mention in catalog.extract(&tokens, "Screen_Protectors", DEFAULT_TAU)? {
        println!("  {:<22} {:.3}", mention.aspect, mention.score);
    }

    // Unknown categories are an error rather than an empty result.
    let err = catalog.extract(&tokens, "Garden_Tools", DEFAULT_TAU).unwrap_err();
    println!("\nGarden_Tools -> {}", err.code());
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
