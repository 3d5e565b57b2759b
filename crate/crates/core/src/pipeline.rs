//! Glue that runs one review through cleaning, sentiment and aspect
//! extraction with a single set of loaded resources.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aspects::{AspectCatalog, AspectError, AspectMention, DEFAULT_TAU};
use crate::config::AppConfig;
use crate::corpus::{self, Corpus, CorpusError, IngestOptions, ReviewRecord};
use crate::embedding::{build_embedder, EmbedderSpec, EmbeddingError};
use crate::profile::{self, ProfileError, UserProfile};
use crate::resources;
use crate::sentiment::{self, FusionConfig, SentimentError, SentimentLexicon, SentimentResult};
use crate::textprep::{self, CleanedReview, LexiconError, LexiconSet};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Sentiment(#[from] SentimentError),
    #[error(transparent)]
    Aspect(#[from] AspectError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

impl PipelineError {
    pub fn code(&self) -> &'static str {
        match self {
            PipelineError::Lexicon(e) => e.code(),
            PipelineError::Sentiment(e) => e.code(),
            PipelineError::Aspect(e) => e.code(),
            PipelineError::Embedding(e) => e.code(),
            PipelineError::Profile(e) => e.code(),
            PipelineError::Corpus(e) => e.code(),
        }
    }

    pub fn is_io(&self) -> bool {
        match self {
            PipelineError::Lexicon(e) => matches!(e, LexiconError::Io { .. } | LexiconError::MissingFile(_)),
            PipelineError::Sentiment(e) => matches!(e, SentimentError::Io(_)),
            PipelineError::Aspect(e) => matches!(e, AspectError::Io(_)),
            PipelineError::Corpus(e) => matches!(e, CorpusError::Io(_)),
            PipelineError::Embedding(e) => matches!(e, EmbeddingError::RemoteUnavailable(_)),
            PipelineError::Profile(_) => false,
        }
    }
}

/// Everything the pipeline derives from one review.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzedReview {
    pub cleaned: CleanedReview,
    pub sentiment: SentimentResult,
    pub mentions: Vec<AspectMention>,
}

#[derive(Debug, Clone)]
pub struct ReviewAnalyzer {
    lexicons: LexiconSet,
    sentiment: SentimentLexicon,
    catalog: AspectCatalog,
    fusion: FusionConfig,
    tau: f64,
    filter_english: bool,
}

impl ReviewAnalyzer {
    pub fn new(
        lexicons: LexiconSet,
        sentiment: SentimentLexicon,
        catalog: AspectCatalog,
        fusion: FusionConfig,
        tau: f64,
    ) -> Result<Self, PipelineError> {
        fusion.validate()?;
        if !(0.0..=1.0).contains(&tau) {
            return Err(AspectError::InvalidTau(tau).into());
        }
        let sentiment = sentiment.normalized(&lexicons);
        Ok(ReviewAnalyzer { lexicons, sentiment, catalog, fusion, tau, filter_english: true })
    }

    /// Bundled resources, hashed embedder, default fusion and threshold.
    pub fn bundled() -> Self {
        let lexicons = LexiconSet::bundled();
        let embedder = build_embedder(&EmbedderSpec::default()).expect("default spec is valid");
        let catalog = AspectCatalog::bundled(&lexicons, embedder).expect("bundled catalog parses");
        Self::new(lexicons, SentimentLexicon::bundled(), catalog, FusionConfig::default(), DEFAULT_TAU)
            .expect("defaults are valid")
    }

    /// Builds the analyzer described by `cfg`, loading any overridden
    /// resource files.
    pub fn from_config(cfg: &AppConfig) -> Result<Self, PipelineError> {
        let paths = &cfg.resources;
        let lexicons = LexiconSet::with_overrides(
            paths.stopwords.as_deref(),
            paths.wordlist.as_deref(),
            paths.lemmas.as_deref(),
        )?;
        let sentiment = match (&paths.sentiment_lexicon, &paths.negations) {
            (None, None) => SentimentLexicon::bundled(),
            (lex, neg) => {
                let lex_text = match lex {
                    Some(p) => std::fs::read_to_string(p).map_err(SentimentError::Io)?,
                    None => resources::SENTIMENT_LEXICON.to_string(),
                };
                let neg_text = match neg {
                    Some(p) => std::fs::read_to_string(p).map_err(SentimentError::Io)?,
                    None => resources::NEGATIONS.to_string(),
                };
                SentimentLexicon::parse(&lex_text, &neg_text)?
            }
        };
        let embedder = build_embedder(&cfg.embedder)?;
        let catalog = match &paths.aspect_catalog {
            Some(p) => AspectCatalog::load(p, &lexicons, embedder)?,
            None => AspectCatalog::bundled(&lexicons, embedder)?,
        };
        Ok(Self::new(lexicons, sentiment, catalog, cfg.fusion, cfg.tau)?.with_filter_english(cfg.filter_english))
    }

    pub fn with_filter_english(mut self, filter: bool) -> Self {
        self.filter_english = filter;
        self
    }

    pub fn lexicons(&self) -> &LexiconSet {
        &self.lexicons
    }

    pub fn sentiment_lexicon(&self) -> &SentimentLexicon {
        &self.sentiment
    }

    pub fn catalog(&self) -> &AspectCatalog {
        &self.catalog
    }

    pub fn fusion(&self) -> &FusionConfig {
        &self.fusion
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn filter_english(&self) -> bool {
        self.filter_english
    }

    pub fn clean(&self, text: &str) -> Vec<String> {
        textprep::clean(text, &self.lexicons, self.filter_english)
    }

    pub fn clean_review(&self, record: &ReviewRecord) -> CleanedReview {
        CleanedReview::from_record(record, &self.lexicons, self.filter_english)
    }

    pub fn score(&self, review_id: &str, star_rating: i64, body: &str) -> Result<SentimentResult, SentimentError> {
        let tokens = sentiment::sentiment_tokens(body, &self.lexicons, &self.sentiment, self.filter_english);
        sentiment::fuse(review_id, star_rating, sentiment::text_polarity(&tokens, &self.sentiment), &self.fusion)
    }

    pub fn mentions(&self, tokens: &[String], category: &str) -> Result<Vec<AspectMention>, AspectError> {
        self.catalog.extract(tokens, category, self.tau)
    }

    /// Cleans, scores and aspect-tags a review against its own category.
    pub fn analyze(&self, record: &ReviewRecord) -> Result<AnalyzedReview, PipelineError> {
        let cleaned = self.clean_review(record);
        let sentiment = self.score(&record.review_id, record.star_rating as i64, &record.review_body)?;
        let mentions = self.mentions(&cleaned.tokens, &record.product_category)?;
        Ok(AnalyzedReview { cleaned, sentiment, mentions })
    }

    /// Parallel [`analyze`](Self::analyze), results in input order.
    pub fn analyze_all(&self, records: &[&ReviewRecord]) -> Result<Vec<AnalyzedReview>, PipelineError> {
        records.par_iter().map(|r| self.analyze(r)).collect()
    }

    /// Profile from a user's review history, optionally restricted to one
    /// category. Each review is tagged against its own product category;
    /// the bias is the mean score over every review used.
    pub fn historical_profile(
        &self,
        corpus: &Corpus,
        customer_id: &str,
        category: Option<&str>,
    ) -> Result<UserProfile, PipelineError> {
        let history: Vec<&ReviewRecord> = corpus
            .reviews_of_user(customer_id)
            .into_iter()
            .filter(|r| category.is_none_or(|c| r.product_category == c))
            .collect();
        if history.is_empty() {
            return Err(ProfileError::NoReviews.into());
        }
        let mut by_category: BTreeMap<&str, Vec<(CleanedReview, SentimentResult)>> = BTreeMap::new();
        for record in &history {
            let cleaned = self.clean_review(record);
            let scored = self.score(&record.review_id, record.star_rating as i64, &record.review_body)?;
            by_category.entry(record.product_category.as_str()).or_default().push((cleaned, scored));
        }
        let scores: Vec<SentimentResult> = by_category.values().flatten().map(|(_, s)| s.clone()).collect();
        let mut merged = UserProfile::sentiment_only(customer_id, &scores)?;
        for (cat, reviews) in &by_category {
            if self.catalog.aspects(cat).is_err() {
                continue;
            }
            match profile::build_profile(reviews, cat, &self.catalog, self.tau) {
                Ok(p) => {
                    for (aspect, w) in p.preferred_aspects {
                        let slot = merged.preferred_aspects.entry(aspect).or_insert(w);
                        *slot = slot.max(w);
                    }
                }
                Err(ProfileError::NoAspectsFound) => {}
                Err(e) => return Err(e.into()),
            }
        }
        if merged.preferred_aspects.is_empty() {
            return Err(ProfileError::NoAspectsFound.into());
        }
        Ok(merged)
    }
}

/// The configured corpus, or the bundled demo corpus when none is set.
pub fn load_corpus(cfg: &AppConfig) -> Result<corpus::Ingested, PipelineError> {
    let opts = IngestOptions { format: cfg.corpus_format, strict: false };
    Ok(match &cfg.corpus_path {
        Some(path) => corpus::ingest(BufReader::new(File::open(path).map_err(CorpusError::Io)?), opts)?,
        None => corpus::ingest(resources::DEMO_CORPUS.as_bytes(), opts)?,
    })
}
