// Hashed text embeddings and cosine similarity.
//
// The default embedder needs no network: unigram and bigram features are
// hashed into a fixed number of signed buckets and L2-normalized, so the
// same text always maps to the same vector.

use revrank::embedding::{self, build_embedder, cosine, EmbedderSpec};

pub fn run_example() -> anyhow::Result<()> {
    let spec = EmbedderSpec::default();
    let embedder = build_embedder(&spec)?;
    println!("dimension {}", embedder.dimension());

    let anchor = embedder.embed("battery life")?;
    println!("|battery life| = {:.6}", anchor.norm());
    for text in ["battery life", "great battery life overall", "long lasting battery", "sound quality"] {
        let v = embedder.embed(text)?;
        println!("cos(battery life, {text:<27}) = {:.4}", cosine(&anchor, &v)?);
    }

    let again = embedding::embed("battery life", &spec)?;
    assert_eq!(again, anchor);

    // An empty text embeds to the zero vector, which has no direction.
    let empty = embedder.embed("")?;
    println!("empty text is zero: {}, cosine -> {:?}", empty.is_zero(), cosine(&anchor, &empty).map_err(|e| e.code()));
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
