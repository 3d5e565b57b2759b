//! User preference profiles: preferred aspects with weights plus a scalar
//! sentiment bias, built from history, from explicit selections, or merged.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aspects::{AspectCatalog, AspectError};
use crate::sentiment::SentimentResult;
use crate::textprep::CleanedReview;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("no reviews to build a profile from")]
    NoReviews,
    #[error("no aspect cleared the extraction threshold")]
    NoAspectsFound,
    #[error("unknown aspect `{0}`")]
    UnknownAspect(String),
    #[error("cannot merge profiles of `{0}` and `{1}`")]
    IdMismatch(String, String),
    #[error(transparent)]
    Aspect(#[from] AspectError),
}

impl ProfileError {
    pub fn code(&self) -> &'static str {
        match self {
            ProfileError::NoReviews => "NoReviews",
            ProfileError::NoAspectsFound => "NoAspectsFound",
            ProfileError::UnknownAspect(_) => "UnknownAspect",
            ProfileError::IdMismatch(..) => "IdMismatch",
            ProfileError::Aspect(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileSource {
    Historical,
    Explicit,
    Merged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub customer_id: String,
    /// Aspect phrase to weight in (0, 1].
    pub preferred_aspects: BTreeMap<String, f64>,
    /// Mean composite sentiment of the user's reviews, in [0, 1].
    pub sentiment_bias: f64,
    pub review_count: usize,
    pub source: ProfileSource,
}

fn mean(scores: impl ExactSizeIterator<Item = f64>) -> Option<f64> {
    let n = scores.len();
    (n > 0).then(|| scores.sum::<f64>() / n as f64)
}

impl UserProfile {
    /// Aspects ordered by weight descending, then name.
    pub fn ordered_preferences(&self) -> Vec<String> {
        let mut items: Vec<(&String, &f64)> = self.preferred_aspects.iter().collect();
        items.sort_by(|a, b| b.1.total_cmp(a.1).then_with(|| a.0.cmp(b.0)));
        items.into_iter().map(|(a, _)| a.clone()).collect()
    }

    /// A profile carrying only the sentiment bias of `reviews`, for users
    /// whose history mentions no catalog aspect.
    pub fn sentiment_only(customer_id: &str, reviews: &[SentimentResult]) -> Result<Self, ProfileError> {
        let bias = mean(reviews.iter().map(|r| r.sentiment_score)).ok_or(ProfileError::NoReviews)?;
        Ok(UserProfile {
            customer_id: customer_id.to_string(),
            preferred_aspects: BTreeMap::new(),
            sentiment_bias: bias,
            review_count: reviews.len(),
            source: ProfileSource::Historical,
        })
    }
}

/// Union of the aspects extracted from every review (weight = best score)
/// and the mean sentiment score as bias.
pub fn build_profile(
    reviews: &[(CleanedReview, SentimentResult)],
    category: &str,
    catalog: &AspectCatalog,
    tau: f64,
) -> Result<UserProfile, ProfileError> {
    let first = reviews.first().ok_or(ProfileError::NoReviews)?;
    let mut preferred: BTreeMap<String, f64> = BTreeMap::new();
    for (cleaned, _) in reviews {
        for mention in catalog.extract(&cleaned.tokens, category, tau)? {
            let slot = preferred.entry(mention.aspect).or_insert(mention.score);
            *slot = slot.max(mention.score);
        }
    }
    // zero-weight mentions (tau = 0) do not count as preferences
    preferred.retain(|_, w| *w > 0.0);
    if preferred.is_empty() {
        return Err(ProfileError::NoAspectsFound);
    }
    let bias = mean(reviews.iter().map(|(_, s)| s.sentiment_score)).expect("non-empty");
    Ok(UserProfile {
        customer_id: first.0.customer_id.clone(),
        preferred_aspects: preferred,
        sentiment_bias: bias,
        review_count: reviews.len(),
        source: ProfileSource::Historical,
    })
}

/// Explicitly selected aspects, each with weight 1.0. The bias is the mean
/// of the declared reviews' scores, or 0.5 without any.
pub fn profile_from_selection(
    customer_id: &str,
    selected: &[String],
    declared: &[SentimentResult],
    catalog: &AspectCatalog,
    category: Option<&str>,
) -> Result<UserProfile, ProfileError> {
    if let Some(c) = category {
        catalog.aspects(c)?;
    }
    let mut preferred = BTreeMap::new();
    for aspect in selected {
        let entry = catalog
            .find(aspect, category)
            .ok_or_else(|| ProfileError::UnknownAspect(aspect.clone()))?;
        preferred.insert(entry.phrase.clone(), 1.0);
    }
    Ok(UserProfile {
        customer_id: customer_id.to_string(),
        preferred_aspects: preferred,
        sentiment_bias: mean(declared.iter().map(|r| r.sentiment_score)).unwrap_or(0.5),
        review_count: declared.len(),
        source: ProfileSource::Explicit,
    })
}

/// Aspect union keeping the larger weight; bias weighted by review counts.
/// When neither side has reviews the biases are averaged.
pub fn merge_profiles(a: &UserProfile, b: &UserProfile) -> Result<UserProfile, ProfileError> {
    if a.customer_id != b.customer_id {
        return Err(ProfileError::IdMismatch(a.customer_id.clone(), b.customer_id.clone()));
    }
    let mut preferred = a.preferred_aspects.clone();
    for (aspect, &w) in &b.preferred_aspects {
        let slot = preferred.entry(aspect.clone()).or_insert(w);
        *slot = slot.max(w);
    }
    let total = a.review_count + b.review_count;
    let bias = if total == 0 {
        (a.sentiment_bias + b.sentiment_bias) / 2.0
    } else {
        (a.sentiment_bias * a.review_count as f64 + b.sentiment_bias * b.review_count as f64) / total as f64
    };
    Ok(UserProfile {
        customer_id: a.customer_id.clone(),
        preferred_aspects: preferred,
        sentiment_bias: bias.clamp(0.0, 1.0),
        review_count: total,
        source: ProfileSource::Merged,
    })
}
