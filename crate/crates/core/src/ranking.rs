//! Personalized ranking: match ratio against the preferred aspects,
//! sentiment alignment with the user's bias, and their weighted sum.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::pipeline::{PipelineError, ReviewAnalyzer};
use crate::profile::UserProfile;

const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum RankError {
    #[error("user `{customer_id}` has already reviewed product `{product_id}`")]
    UserAlreadyReviewedProduct { customer_id: String, product_id: String },
    #[error("product `{0}` has no reviews")]
    NoReviewsForProduct(String),
    #[error("the profile has no preferred aspects")]
    EmptyPreferenceSet,
    #[error("{name} = {value} is outside [0, 1]")]
    OutOfRangeInput { name: &'static str, value: f64 },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

impl RankError {
    pub fn code(&self) -> &'static str {
        match self {
            RankError::UserAlreadyReviewedProduct { .. } => "UserAlreadyReviewedProduct",
            RankError::NoReviewsForProduct(_) => "NoReviewsForProduct",
            RankError::EmptyPreferenceSet => "EmptyPreferenceSet",
            RankError::OutOfRangeInput { .. } => "OutOfRangeInput",
            RankError::InvalidWeights(_) => "InvalidWeights",
            RankError::Pipeline(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankWeights {
    /// Weight of the match ratio.
    pub w1: f64,
    /// Weight of the sentiment alignment.
    pub w2: f64,
}

impl Default for RankWeights {
    fn default() -> Self {
        RankWeights { w1: 0.6, w2: 0.4 }
    }
}

impl RankWeights {
    pub fn new(w1: f64, w2: f64) -> Result<Self, RankError> {
        let w = RankWeights { w1, w2 };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), RankError> {
        if !(self.w1 >= 0.0 && self.w2 >= 0.0) {
            return Err(RankError::InvalidWeights(format!("negative weight in ({}, {})", self.w1, self.w2)));
        }
        if ((self.w1 + self.w2) - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(RankError::InvalidWeights(format!("{} + {} != 1", self.w1, self.w2)));
        }
        Ok(())
    }
}

/// Inputs the scorer needs from one review.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewFeatures {
    pub review_id: String,
    pub aspects: BTreeSet<String>,
    pub sentiment_score: f64,
}

/// A scored review with its full equation breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredReview {
    pub review_id: String,
    pub matched_aspects: Vec<String>,
    pub match_ratio: f64,
    pub sentiment_alignment: f64,
    pub final_score: f64,
    pub review_sentiment_score: f64,
}

fn check_unit(name: &'static str, value: f64) -> Result<(), RankError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(RankError::OutOfRangeInput { name, value })
    }
}

fn lowered(set: &BTreeSet<String>) -> BTreeSet<String> {
    set.iter().map(|s| s.to_lowercase()).collect()
}

/// Fraction of the preferred aspects present among the review's aspects,
/// compared as lowercased phrases.
pub fn match_ratio(review_aspects: &BTreeSet<String>, preferred: &BTreeSet<String>) -> Result<f64, RankError> {
    let preferred = lowered(preferred);
    if preferred.is_empty() {
        return Err(RankError::EmptyPreferenceSet);
    }
    let matched = lowered(review_aspects).intersection(&preferred).count();
    Ok(matched as f64 / preferred.len() as f64)
}

/// `1 - |bias - review_score|`.
pub fn sentiment_alignment(bias: f64, review_score: f64) -> Result<f64, RankError> {
    check_unit("bias", bias)?;
    check_unit("review_score", review_score)?;
    Ok(1.0 - (bias - review_score).abs())
}

/// `w1 * match_ratio + w2 * sentiment_alignment`.
pub fn final_score(match_ratio: f64, sentiment_alignment: f64, weights: &RankWeights) -> Result<f64, RankError> {
    check_unit("match_ratio", match_ratio)?;
    check_unit("sentiment_alignment", sentiment_alignment)?;
    Ok(weights.w1 * match_ratio + weights.w2 * sentiment_alignment)
}

fn preferred_set(profile: &UserProfile) -> BTreeSet<String> {
    profile.preferred_aspects.keys().map(|a| a.to_lowercase()).collect()
}

pub fn score_review(profile: &UserProfile, review: &ReviewFeatures, weights: &RankWeights) -> Result<ScoredReview, RankError> {
    let preferred = preferred_set(profile);
    let matched: Vec<String> = lowered(&review.aspects).intersection(&preferred).cloned().collect();
    let mr = match_ratio(&review.aspects, &preferred)?;
    let sa = sentiment_alignment(profile.sentiment_bias, review.sentiment_score)?;
    Ok(ScoredReview {
        review_id: review.review_id.clone(),
        matched_aspects: matched,
        match_ratio: mr,
        sentiment_alignment: sa,
        final_score: final_score(mr, sa, weights)?,
        review_sentiment_score: review.sentiment_score,
    })
}

/// Descending final score, then ascending review id.
pub fn rank_order(a: &ScoredReview, b: &ScoredReview) -> Ordering {
    b.final_score.total_cmp(&a.final_score).then_with(|| a.review_id.cmp(&b.review_id))
}

/// Scores every review in parallel and sorts with [`rank_order`]. The
/// result does not depend on the input order.
pub fn rank_features(
    profile: &UserProfile,
    reviews: &[ReviewFeatures],
    weights: &RankWeights,
) -> Result<Vec<ScoredReview>, RankError> {
    weights.validate()?;
    if profile.preferred_aspects.is_empty() {
        return Err(RankError::EmptyPreferenceSet);
    }
    let mut scored: Vec<ScoredReview> =
        reviews.par_iter().map(|r| score_review(profile, r, weights)).collect::<Result<_, _>>()?;
    scored.sort_by(rank_order);
    Ok(scored)
}

/// The first `min(k, len)` entries. `k = 0` is treated as 1.
pub fn top_k(ranked: &[ScoredReview], k: usize) -> Vec<ScoredReview> {
    ranked.iter().take(k.max(1)).cloned().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RankOptions {
    pub weights: RankWeights,
    /// Rank even when the user already reviewed the product.
    pub allow_reviewed: bool,
}

/// Ranks the reviews of `product_id` for `profile`.
pub fn rank_reviews(
    profile: &UserProfile,
    product_id: &str,
    corpus: &Corpus,
    analyzer: &ReviewAnalyzer,
    opts: &RankOptions,
) -> Result<Vec<ScoredReview>, RankError> {
    opts.weights.validate()?;
    if profile.preferred_aspects.is_empty() {
        return Err(RankError::EmptyPreferenceSet);
    }
    if corpus.has_reviewed(&profile.customer_id, product_id) && !opts.allow_reviewed {
        return Err(RankError::UserAlreadyReviewedProduct {
            customer_id: profile.customer_id.clone(),
            product_id: product_id.to_string(),
        });
    }
    let records = corpus.reviews_of_product(product_id);
    if records.is_empty() {
        return Err(RankError::NoReviewsForProduct(product_id.to_string()));
    }
    let features: Vec<ReviewFeatures> = analyzer
        .analyze_all(&records)?
        .into_iter()
        .map(|a| ReviewFeatures {
            review_id: a.cleaned.review_id,
            aspects: a.mentions.into_iter().map(|m| m.aspect).collect(),
            sentiment_score: a.sentiment.sentiment_score,
        })
        .collect();
    rank_features(profile, &features, &opts.weights)
}
