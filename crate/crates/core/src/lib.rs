//! Personalized review ranking and summarization.
//!
//! The pipeline ingests Amazon-style review dumps, cleans the text, fuses star
//! ratings with lexicon polarity into a composite sentiment score, extracts
//! catalog aspects with embedding similarity, builds per-user preference
//! profiles and ranks unseen reviews with a weighted match/alignment score.
//! The top-ranked reviews feed a summarizer (remote chat model or an offline
//! extractive fallback). The [`study`], [`store`] and [`service`] modules host
//! the three-screen user-study instrument on top of the pipeline.

pub mod aspects;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod pipeline;
pub mod profile;
pub mod ranking;
mod remote;
pub mod resources;
pub mod sentiment;
pub mod service;
pub mod store;
pub mod study;
pub mod summarizer;
pub mod textprep;

pub use aspects::{AspectCatalog, AspectMention};
pub use config::AppConfig;
pub use corpus::{Corpus, RejectedRow, ReviewRecord};
pub use embedding::{cosine, EmbedderSpec, EmbeddingVector};
pub use pipeline::{AnalyzedReview, ReviewAnalyzer};
pub use profile::{UserProfile, ProfileSource};
pub use ranking::{RankWeights, ScoredReview};
pub use sentiment::{FusionConfig, SentimentLabel, SentimentResult};
pub use study::{Study, StudyReport, ViewKind};
pub use summarizer::{SummaryRequest, SummaryResult};
pub use textprep::{CleanedReview, LexiconSet};
