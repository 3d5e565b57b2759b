//! Per-category aspect catalog and similarity-based aspect extraction.
//!
//! Each catalog phrase is cleaned with the same lexicons as review text
//! ("ease of installation" becomes "ease installation") and that match key
//! is embedded once at load. Extraction slides 1-4 token windows over a
//! cleaned review and scores every aspect by its best clamped cosine.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{cosine, Embedder, EmbeddingError, EmbeddingVector};
use crate::resources;
use crate::textprep::{self, LexiconSet};

pub const DEFAULT_TAU: f64 = 0.25;
pub const MAX_WINDOW: usize = 4;

#[derive(Debug, Error)]
pub enum AspectError {
    #[error("catalog line {line}: expected `category<TAB>aspect phrase`, got {text:?}")]
    MalformedCatalogLine { line: usize, text: String },
    #[error("aspect `{phrase}` listed twice in category `{category}`")]
    DuplicateAspect { category: String, phrase: String },
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("tau {0} is outside [0, 1]")]
    InvalidTau(f64),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl AspectError {
    pub fn code(&self) -> &'static str {
        match self {
            AspectError::MalformedCatalogLine { .. } => "MalformedCatalogLine",
            AspectError::DuplicateAspect { .. } => "DuplicateAspect",
            AspectError::UnknownCategory(_) => "UnknownCategory",
            AspectError::InvalidTau(_) => "InvalidTau",
            AspectError::Embedding(e) => e.code(),
            AspectError::Io(_) => "Io",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AspectEntry {
    pub phrase: String,
    /// Cleaned form of the phrase, the text actually embedded.
    pub key: String,
    pub vector: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectMention {
    pub aspect: String,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct AspectCatalog {
    categories: Vec<(String, Vec<AspectEntry>)>,
    lexicons: LexiconSet,
    embedder: Arc<dyn Embedder>,
}

fn normalize_phrase(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

impl AspectCatalog {
    /// Builds a catalog from `(category, phrase)` pairs in listing order.
    pub fn from_pairs<I, C, P>(pairs: I, lexicons: &LexiconSet, embedder: Arc<dyn Embedder>) -> Result<Self, AspectError>
    where
        I: IntoIterator<Item = (C, P)>,
        C: AsRef<str>,
        P: AsRef<str>,
    {
        let mut order: Vec<String> = Vec::new();
        let mut phrases: HashMap<String, Vec<String>> = HashMap::new();
        for (category, phrase) in pairs {
            let category = category.as_ref().trim().to_string();
            let phrase = normalize_phrase(phrase.as_ref());
            let list = phrases.entry(category.clone()).or_insert_with(|| {
                order.push(category.clone());
                Vec::new()
            });
            if list.contains(&phrase) {
                return Err(AspectError::DuplicateAspect { category, phrase });
            }
            list.push(phrase);
        }

        let mut categories = Vec::with_capacity(order.len());
        for category in order {
            let list = phrases.remove(&category).expect("category recorded");
            let keys: Vec<String> = list.iter().map(|p| match_key(p, lexicons)).collect();
            let vectors = embedder.embed_batch(&keys)?;
            let entries = list
                .into_iter()
                .zip(keys)
                .zip(vectors)
                .map(|((phrase, key), vector)| AspectEntry { phrase, key, vector })
                .collect();
            categories.push((category, entries));
        }
        Ok(AspectCatalog { categories, lexicons: lexicons.clone(), embedder })
    }

    /// Parses `category<TAB>aspect phrase` lines; `#` starts a comment line.
    pub fn parse(text: &str, lexicons: &LexiconSet, embedder: Arc<dyn Embedder>) -> Result<Self, AspectError> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let malformed = || AspectError::MalformedCatalogLine { line: i + 1, text: line.to_string() };
            let (category, phrase) = line.split_once('\t').ok_or_else(malformed)?;
            if category.trim().is_empty() || phrase.trim().is_empty() || phrase.contains('\t') {
                return Err(malformed());
            }
            pairs.push((category.to_string(), phrase.to_string()));
        }
        Self::from_pairs(pairs, lexicons, embedder)
    }

    pub fn load(path: &Path, lexicons: &LexiconSet, embedder: Arc<dyn Embedder>) -> Result<Self, AspectError> {
        Self::parse(&fs::read_to_string(path)?, lexicons, embedder)
    }

    pub fn bundled(lexicons: &LexiconSet, embedder: Arc<dyn Embedder>) -> Result<Self, AspectError> {
        Self::parse(resources::ASPECT_CATALOG, lexicons, embedder)
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    pub fn lexicons(&self) -> &LexiconSet {
        &self.lexicons
    }

    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(|(c, _)| c.as_str())
    }

    pub fn aspects(&self, category: &str) -> Result<&[AspectEntry], AspectError> {
        self.categories
            .iter()
            .find(|(c, _)| c == category)
            .map(|(_, e)| e.as_slice())
            .ok_or_else(|| AspectError::UnknownCategory(category.to_string()))
    }

    pub fn phrases(&self, category: &str) -> Result<Vec<&str>, AspectError> {
        Ok(self.aspects(category)?.iter().map(|e| e.phrase.as_str()).collect())
    }

    /// Distinct phrases across every category.
    pub fn all_phrases(&self) -> HashSet<&str> {
        self.categories
            .iter()
            .flat_map(|(_, entries)| entries.iter().map(|e| e.phrase.as_str()))
            .collect()
    }

    /// Looks a phrase up in `category`, or anywhere when no category is given.
    pub fn find(&self, phrase: &str, category: Option<&str>) -> Option<&AspectEntry> {
        let phrase = normalize_phrase(phrase);
        self.categories
            .iter()
            .filter(|(c, _)| category.is_none_or(|want| c == want))
            .flat_map(|(_, entries)| entries.iter())
            .find(|e| e.phrase == phrase)
    }

    /// The catalog entry for `phrase` in any category, or a freshly embedded
    /// one for phrases outside the catalog.
    pub fn entry_for(&self, phrase: &str) -> Result<AspectEntry, AspectError> {
        if let Some(entry) = self.find(phrase, None) {
            return Ok(entry.clone());
        }
        let phrase = normalize_phrase(phrase);
        let key = match_key(&phrase, &self.lexicons);
        let vector = self.embedder.embed(&key)?;
        Ok(AspectEntry { phrase, key, vector })
    }

    /// Best clamped cosine of every window against each given aspect, in the
    /// order of `entries`.
    pub fn window_scores(&self, tokens: &[String], entries: &[&AspectEntry]) -> Result<Vec<f64>, AspectError> {
        let mut best = vec![0.0f64; entries.len()];
        if tokens.is_empty() || entries.is_empty() {
            return Ok(best);
        }
        let windows = windows(tokens);
        let vectors = self.embedder.embed_batch(&windows)?;
        for vector in &vectors {
            for (slot, entry) in best.iter_mut().zip(entries) {
                let score = cosine(vector, &entry.vector)?.clamp(0.0, 1.0);
                if score > *slot {
                    *slot = score;
                }
            }
        }
        Ok(best)
    }

    /// Mentions scoring at least `tau`, highest first, ties by aspect name.
    pub fn extract(&self, tokens: &[String], category: &str, tau: f64) -> Result<Vec<AspectMention>, AspectError> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(AspectError::InvalidTau(tau));
        }
        let entries: Vec<&AspectEntry> = self.aspects(category)?.iter().collect();
        if tokens.is_empty() {
            return Ok(Vec::new());
        }
        let scores = self.window_scores(tokens, &entries)?;
        let mut mentions: Vec<AspectMention> = entries
            .iter()
            .zip(scores)
            .filter(|&(_, score)| score >= tau)
            .map(|(e, score)| AspectMention { aspect: e.phrase.clone(), score })
            .collect();
        mentions.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.aspect.cmp(&b.aspect)));
        Ok(mentions)
    }
}

/// Cleaned match key of a phrase; falls back to the raw tokens when cleaning
/// removes every word.
fn match_key(phrase: &str, lexicons: &LexiconSet) -> String {
    let cleaned = textprep::clean(phrase, lexicons, false);
    if cleaned.is_empty() {
        textprep::tokenize(phrase).join(" ")
    } else {
        cleaned.join(" ")
    }
}

/// Every contiguous run of 1 to [`MAX_WINDOW`] tokens, deduplicated.
fn windows(tokens: &[String]) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for len in 1..=MAX_WINDOW.min(tokens.len()) {
        for w in tokens.windows(len) {
            let text = w.join(" ");
            if seen.insert(text.clone()) {
                out.push(text);
            }
        }
    }
    out
}

/// Free-function form of [`AspectCatalog::extract`].
pub fn extract_aspects(
    cleaned_tokens: &[String],
    category: &str,
    catalog: &AspectCatalog,
    tau: f64,
) -> Result<Vec<AspectMention>, AspectError> {
    catalog.extract(cleaned_tokens, category, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{EmbedderSpec, build_embedder};

    fn catalog(text: &str) -> Result<AspectCatalog, AspectError> {
        AspectCatalog::parse(text, &LexiconSet::bundled(), build_embedder(&EmbedderSpec::default()).unwrap())
    }

    fn bundled() -> AspectCatalog {
        AspectCatalog::bundled(&LexiconSet::bundled(), build_embedder(&EmbedderSpec::default()).unwrap()).unwrap()
    }

    fn clean(text: &str) -> Vec<String> {
        textprep::clean(text, &LexiconSet::bundled(), false)
    }

    #[test]
    fn three_line_file() {
        let c = catalog("Cat\tfit\nCat\tclarity\nCat\tTouch  Sensitivity\n").unwrap();
        assert_eq!(c.phrases("Cat").unwrap(), ["fit", "clarity", "touch sensitivity"]);
        for e in c.aspects("Cat").unwrap() {
            assert_eq!(e.vector, c.embedder().embed(&e.key).unwrap());
        }
    }

    #[test]
    fn duplicate_and_malformed() {
        assert_eq!(catalog("Cat\tfit\nCat\tfit\n").unwrap_err().code(), "DuplicateAspect");
        assert!(catalog("Cat\tfit\nOther\tfit\n").is_ok());
        assert_eq!(catalog("Cat fit\n").unwrap_err().code(), "MalformedCatalogLine");
        assert_eq!(catalog("\tfit\n").unwrap_err().code(), "MalformedCatalogLine");
    }

    #[test]
    fn bundled_catalog_has_all_named_aspects() {
        let c = bundled();
        let named = [
            "plug fit", "power delivery", "charging reliability", "charging speed", "compatibility", "cable length",
            "quality", "design", "durability", "usability", "performance", "price", "fit", "material", "style",
            "port quality", "fingerprint resistance", "thickness", "touch sensitivity", "ease of installation",
            "clarity",
        ];
        assert_eq!(named.len(), 21);
        let all = c.all_phrases();
        for n in named {
            assert!(all.contains(n), "{n}");
        }
        let general: HashSet<&str> = c.phrases("Mobile_Electronics").unwrap().into_iter().collect();
        assert_eq!(general, named.into_iter().collect());
        for category in ["Chargers_Cables", "Screen_Protectors", "Phone_Cases"] {
            assert!(c.phrases(category).unwrap().len() >= 5);
        }
    }

    #[test]
    fn empty_review_has_no_mentions() {
        assert!(bundled().extract(&[], "Screen_Protectors", DEFAULT_TAU).unwrap().is_empty());
    }

    #[test]
    fn exact_phrase_scores_one() {
        let c = bundled();
        for phrase in ["touch sensitivity", "ease of installation", "clarity"] {
            let tokens = clean(phrase);
            let mentions = c.extract(&tokens, "Screen_Protectors", DEFAULT_TAU).unwrap();
            let hit = mentions.iter().find(|m| m.aspect == phrase).unwrap();
            assert!((hit.score - 1.0).abs() < 1e-12, "{phrase}: {mentions:?}");
        }
    }

    #[test]
    fn unknown_category_and_tau() {
        let c = bundled();
        assert_eq!(c.extract(&clean("fit"), "Nope", 0.25).unwrap_err().code(), "UnknownCategory");
        assert_eq!(c.extract(&clean("fit"), "Phone_Cases", 1.5).unwrap_err().code(), "InvalidTau");
    }

    #[test]
    fn plug_charging_review_shape() {
        let c = bundled();
        let tokens = clean("Plug fits snugly without interruption in power. Lightning-fast charge without heating up. Quality construction adds long-term reliability.");
        let mentions = c.extract(&tokens, "Chargers_Cables", DEFAULT_TAU).unwrap();
        assert!(!mentions.is_empty());
        assert!(mentions.iter().any(|m| m.aspect == "plug fit"), "{mentions:?}");
        for m in &mentions {
            assert!(m.score >= DEFAULT_TAU && m.score <= 1.0);
        }
        for pair in mentions.windows(2) {
            assert!(pair[0].score > pair[1].score || (pair[0].score == pair[1].score && pair[0].aspect < pair[1].aspect));
        }
    }

    #[test]
    fn unrelated_aspect_does_not_change_scores() {
        let base = catalog("Cat\tfit\nCat\tclarity\n").unwrap();
        let more = catalog("Cat\tfit\nCat\tclarity\nCat\tzebra stripes\n").unwrap();
        let tokens = clean("the clarity is great and it fits well");
        let a = base.extract(&tokens, "Cat", 0.0).unwrap();
        let b: Vec<AspectMention> = more
            .extract(&tokens, "Cat", 0.0)
            .unwrap()
            .into_iter()
            .filter(|m| m.aspect != "zebra stripes")
            .collect();
        assert_eq!(a, b);
    }
}
