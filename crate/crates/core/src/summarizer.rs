//! Personalized summaries of the top-ranked reviews, either from a remote
//! chat-completion model or from an offline extractive selector.

use std::fmt::Write as _;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::{Condvar, Mutex};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aspects::{AspectCatalog, AspectEntry, AspectError, DEFAULT_TAU};
use crate::corpus::Corpus;
use crate::profile::UserProfile;
use crate::ranking::{top_k, ScoredReview};
use crate::remote::{self, CallError};
use crate::textprep;

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_CHAR_BUDGET: usize = 6000;
pub const MAX_SUMMARY_WORDS: usize = 120;

pub const SYSTEM_PROMPT: &str =
    "You write short, faithful summaries of product reviews for online shoppers. You never add facts that are not in the reviews.";

#[derive(Debug, Error)]
pub enum SummaryError {
    #[error("the request has no reviews to summarize")]
    EmptyReviewList,
    #[error("invalid summary request: {0}")]
    InvalidRequest(String),
    #[error("remote summarizer unavailable: {0}")]
    RemoteUnavailable(String),
    #[error("remote summarizer returned no text")]
    EmptyRemoteResponse,
    #[error("remote backend selected but no endpoint is configured")]
    RemoteNotConfigured,
    #[error(transparent)]
    Aspect(#[from] AspectError),
}

impl SummaryError {
    pub fn code(&self) -> &'static str {
        match self {
            SummaryError::EmptyReviewList => "EmptyReviewList",
            SummaryError::InvalidRequest(_) => "InvalidRequest",
            SummaryError::RemoteUnavailable(_) => "RemoteUnavailable",
            SummaryError::EmptyRemoteResponse => "EmptyRemoteResponse",
            SummaryError::RemoteNotConfigured => "RemoteNotConfigured",
            SummaryError::Aspect(e) => e.code(),
        }
    }

    /// Failures after which the caller may fall back to the extractive
    /// backend.
    pub fn is_remote_failure(&self) -> bool {
        matches!(
            self,
            SummaryError::RemoteUnavailable(_) | SummaryError::EmptyRemoteResponse | SummaryError::RemoteNotConfigured
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SummaryBackend {
    Remote,
    #[default]
    Extractive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteChatSpec {
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub token_env: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_timeout_ms() -> u64 {
    30_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SummarizerConfig {
    pub backend: SummaryBackend,
    pub k: usize,
    /// Total characters of review text allowed into a prompt.
    pub char_budget: usize,
    pub remote: Option<RemoteChatSpec>,
    /// Concurrent remote calls allowed per summarizer.
    pub max_inflight: usize,
}

impl Default for SummarizerConfig {
    fn default() -> Self {
        SummarizerConfig {
            backend: SummaryBackend::Extractive,
            k: DEFAULT_K,
            char_budget: DEFAULT_CHAR_BUDGET,
            remote: None,
            max_inflight: 4,
        }
    }
}

impl SummarizerConfig {
    pub fn validate(&self) -> Result<(), SummaryError> {
        if self.k == 0 {
            return Err(SummaryError::InvalidRequest("k must be at least 1".into()));
        }
        if self.max_inflight == 0 {
            return Err(SummaryError::InvalidRequest("max_inflight must be at least 1".into()));
        }
        if self.backend == SummaryBackend::Remote && self.remote.is_none() {
            return Err(SummaryError::RemoteNotConfigured);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReview {
    /// 1-based rank.
    pub rank: usize,
    pub review_body: String,
    pub final_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRequest {
    pub product_title: String,
    /// Preferred aspects, most important first.
    pub preferences: Vec<String>,
    pub sentiment_bias: f64,
    pub reviews: Vec<SummaryReview>,
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_k() -> usize {
    DEFAULT_K
}

impl SummaryRequest {
    /// Request over the top `k` entries of a ranking.
    pub fn from_ranking(
        product_title: &str,
        profile: &UserProfile,
        ranked: &[ScoredReview],
        corpus: &Corpus,
        k: usize,
    ) -> Self {
        let reviews = top_k(ranked, k)
            .iter()
            .enumerate()
            .filter_map(|(i, s)| {
                corpus.get(&s.review_id).map(|r| SummaryReview {
                    rank: i + 1,
                    review_body: r.review_body.clone(),
                    final_score: s.final_score,
                })
            })
            .collect();
        SummaryRequest {
            product_title: product_title.to_string(),
            preferences: profile.ordered_preferences(),
            sentiment_bias: profile.sentiment_bias,
            reviews,
            k,
        }
    }

    pub fn validate(&self) -> Result<(), SummaryError> {
        if self.reviews.is_empty() {
            return Err(SummaryError::EmptyReviewList);
        }
        if self.k == 0 {
            return Err(SummaryError::InvalidRequest("k must be at least 1".into()));
        }
        if !self.reviews.windows(2).all(|w| w[0].rank < w[1].rank) {
            return Err(SummaryError::InvalidRequest("reviews must be sorted by rank".into()));
        }
        if !(0.0..=1.0).contains(&self.sentiment_bias) {
            return Err(SummaryError::InvalidRequest(format!("sentiment_bias {} outside [0, 1]", self.sentiment_bias)));
        }
        Ok(())
    }

    /// The reviews actually summarized: the first `k`.
    pub fn selected(&self) -> &[SummaryReview] {
        &self.reviews[..self.k.min(self.reviews.len())]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryResult {
    pub text: String,
    pub backend: SummaryBackend,
    /// Model name, for remote summaries.
    pub model: Option<String>,
    pub created_at: DateTime<Utc>,
}

fn bias_phrase(bias: f64) -> &'static str {
    if bias > 0.7 {
        "tend to rate products favourably"
    } else if bias < 0.35 {
        "tend to be critical"
    } else {
        "have mixed opinions"
    }
}

/// User prompt with the default character budget.
pub fn build_prompt(req: &SummaryRequest) -> Result<String, SummaryError> {
    build_prompt_with_budget(req, DEFAULT_CHAR_BUDGET)
}

/// Shopper aspects, bias statement, numbered reviews and output rules, in
/// that order. Review text beyond `char_budget` characters is cut from the
/// lowest-ranked end.
pub fn build_prompt_with_budget(req: &SummaryRequest, char_budget: usize) -> Result<String, SummaryError> {
    req.validate()?;
    let mut prompt = String::new();
    let _ = writeln!(
        prompt,
        "Summarize the reviews of \"{}\" for a shopper who cares about: {}.",
        req.product_title,
        req.preferences.join(", ")
    );
    let _ = writeln!(
        prompt,
        "The shopper's sentiment bias is {:.2} on a 0 to 1 scale, meaning they {}.",
        req.sentiment_bias,
        bias_phrase(req.sentiment_bias)
    );
    prompt.push_str("\nReviews, highest ranked first:\n");
    let mut remaining = char_budget;
    for (i, review) in req.selected().iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let body: String = review.review_body.chars().take(remaining).collect();
        remaining -= body.chars().count();
        let _ = writeln!(prompt, "{}. {}", i + 1, body.trim());
    }
    let _ = write!(
        prompt,
        "\nWrite a single paragraph of at most {MAX_SUMMARY_WORDS} words. Address each listed aspect. \
         Use only facts stated in the reviews above and do not invent any."
    );
    Ok(prompt)
}

/// Sentences of `text` as verbatim, trimmed slices. A sentence ends at `.`,
/// `!` or `?` followed by whitespace, at a line break, or at the end.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        let end = match c {
            '\n' => Some(i),
            '.' | '!' | '?' => match chars.peek() {
                None => Some(i + c.len_utf8()),
                Some(&(_, next)) if next.is_whitespace() => Some(i + c.len_utf8()),
                _ => None,
            },
            _ => None,
        };
        if let Some(end) = end {
            let s = text[start..end].trim();
            if !s.is_empty() {
                out.push(s);
            }
            start = end;
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

/// For each preference in order, the sentence with the highest aspect score
/// (earliest on ties) if it reaches `tau`; duplicates dropped. Falls back to
/// the first sentence of the top review when no sentence qualifies.
pub fn extractive_summary(req: &SummaryRequest, catalog: &AspectCatalog, tau: f64) -> Result<String, SummaryError> {
    req.validate()?;
    let sentences: Vec<&str> = req.selected().iter().flat_map(|r| split_sentences(&r.review_body)).collect();
    let tokens: Vec<Vec<String>> =
        sentences.iter().map(|s| textprep::clean(s, catalog.lexicons(), false)).collect();
    let entries: Vec<AspectEntry> =
        req.preferences.iter().map(|p| catalog.entry_for(p)).collect::<Result<_, _>>()?;
    let refs: Vec<&AspectEntry> = entries.iter().collect();
    let scores: Vec<Vec<f64>> =
        tokens.iter().map(|t| catalog.window_scores(t, &refs)).collect::<Result<_, _>>()?;

    let mut chosen: Vec<usize> = Vec::new();
    for a in 0..entries.len() {
        let mut best: Option<(usize, f64)> = None;
        for (s, row) in scores.iter().enumerate() {
            if best.is_none_or(|(_, b)| row[a] > b) {
                best = Some((s, row[a]));
            }
        }
        if let Some((s, score)) = best {
            if score >= tau && score > 0.0 && !chosen.contains(&s) {
                chosen.push(s);
            }
        }
    }
    if chosen.is_empty() {
        let first = split_sentences(&req.selected()[0].review_body)
            .first()
            .copied()
            .unwrap_or_else(|| req.selected()[0].review_body.trim());
        return Ok(first.to_string());
    }
    Ok(chosen.iter().map(|&i| sentences[i]).collect::<Vec<_>>().join(" "))
}

/// Counting semaphore bounding concurrent remote calls.
#[derive(Debug)]
struct InflightLimiter {
    limit: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a InflightLimiter);

impl InflightLimiter {
    fn new(limit: usize) -> Self {
        InflightLimiter { limit: limit.max(1), active: Mutex::new(0), freed: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut active = self.active.lock();
        while *active >= self.limit {
            self.freed.wait(&mut active);
        }
        *active += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.active.lock() -= 1;
        self.0.freed.notify_one();
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: u8,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    content: Option<String>,
}

/// Summarizer bound to a config and the aspect catalog used by the
/// extractive backend. Cheap to clone and safe to share across threads.
#[derive(Debug, Clone)]
pub struct Summarizer {
    cfg: SummarizerConfig,
    catalog: AspectCatalog,
    tau: f64,
    limiter: Arc<InflightLimiter>,
}

impl Summarizer {
    pub fn new(cfg: SummarizerConfig, catalog: AspectCatalog) -> Self {
        let limiter = Arc::new(InflightLimiter::new(cfg.max_inflight));
        Summarizer { cfg, catalog, tau: DEFAULT_TAU, limiter }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn config(&self) -> &SummarizerConfig {
        &self.cfg
    }

    /// Summarizes with the configured backend.
    pub fn summarize(&self, req: &SummaryRequest) -> Result<SummaryResult, SummaryError> {
        self.summarize_with(req, self.cfg.backend)
    }

    pub fn summarize_with(&self, req: &SummaryRequest, backend: SummaryBackend) -> Result<SummaryResult, SummaryError> {
        match backend {
            SummaryBackend::Extractive => Ok(SummaryResult {
                text: extractive_summary(req, &self.catalog, self.tau)?,
                backend,
                model: None,
                created_at: Utc::now(),
            }),
            SummaryBackend::Remote => self.remote(req),
        }
    }

    /// The configured backend, degrading to extractive when the remote
    /// service fails.
    pub fn summarize_or_fallback(&self, req: &SummaryRequest) -> Result<SummaryResult, SummaryError> {
        match self.summarize(req) {
            Err(e) if e.is_remote_failure() => {
                tracing::warn!(error = %e, "remote summary failed, using extractive fallback");
                self.summarize_with(req, SummaryBackend::Extractive)
            }
            other => other,
        }
    }

    fn remote(&self, req: &SummaryRequest) -> Result<SummaryResult, SummaryError> {
        let spec = self.cfg.remote.as_ref().ok_or(SummaryError::RemoteNotConfigured)?;
        let prompt = build_prompt_with_budget(req, self.cfg.char_budget)?;
        let body = ChatRequest {
            model: &spec.model,
            messages: vec![
                ChatMessage { role: "system", content: SYSTEM_PROMPT },
                ChatMessage { role: "user", content: &prompt },
            ],
            temperature: 0,
        };
        let agent = remote::agent(spec.timeout_ms);
        let response: ChatResponse = {
            let _permit = self.limiter.acquire();
            remote::post_json(&agent, &spec.endpoint, spec.token_env.as_deref(), &body).map_err(|e| match e {
                CallError::Unavailable(m) | CallError::BadBody(m) => SummaryError::RemoteUnavailable(m),
            })?
        };
        let text = response
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .map(|t| t.trim().to_string())
            .filter(|t| !t.is_empty())
            .ok_or(SummaryError::EmptyRemoteResponse)?;
        Ok(SummaryResult { text, backend: SummaryBackend::Remote, model: Some(spec.model.clone()), created_at: Utc::now() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{build_embedder, EmbedderSpec};
    use crate::resources::SCREEN_PROTECTOR_PREFERENCES;
    use crate::textprep::LexiconSet;

    fn catalog() -> AspectCatalog {
        AspectCatalog::bundled(&LexiconSet::bundled(), build_embedder(&EmbedderSpec::default()).unwrap()).unwrap()
    }

    fn request(bodies: &[&str], prefs: &[&str]) -> SummaryRequest {
        SummaryRequest {
            product_title: "Tempered Glass Screen Protector".into(),
            preferences: prefs.iter().map(|s| s.to_string()).collect(),
            sentiment_bias: 0.9,
            reviews: bodies
                .iter()
                .enumerate()
                .map(|(i, b)| SummaryReview { rank: i + 1, review_body: b.to_string(), final_score: 0.9 - i as f64 / 10.0 })
                .collect(),
            k: DEFAULT_K,
        }
    }

    #[test]
    fn sentence_split_keeps_verbatim_slices() {
        let text = "Great fit. Clarity is superb!  Would buy again?\nYes v1.5 works";
        let s = split_sentences(text);
        assert_eq!(s, ["Great fit.", "Clarity is superb!", "Would buy again?", "Yes v1.5 works"]);
        assert!(s.iter().all(|x| text.contains(x)));
        assert!(split_sentences("   ").is_empty());
    }

    #[test]
    fn prompt_shape() {
        let req = request(&["Clear and tough."], &SCREEN_PROTECTOR_PREFERENCES);
        let p = build_prompt(&req).unwrap();
        assert_eq!(p, build_prompt(&req).unwrap());
        for pref in SCREEN_PROTECTOR_PREFERENCES {
            assert!(p.contains(pref));
        }
        assert!(p.contains("1. Clear and tough."));
        assert!(!p.contains("2. "));
        let aspects = p.find("cares about").unwrap();
        let bias = p.find("sentiment bias").unwrap();
        let reviews = p.find("1. Clear").unwrap();
        let rules = p.find("at most 120 words").unwrap();
        assert!(aspects < bias && bias < reviews && reviews < rules);
    }

    #[test]
    fn prompt_budget_cuts_low_ranks_first() {
        let req = request(&["aaaa aaaa", "bbbb bbbb", "cccc"], &["fit"]);
        let p = build_prompt_with_budget(&req, 12).unwrap();
        assert!(p.contains("1. aaaa aaaa"));
        assert!(p.contains("2. bbb"));
        assert!(!p.contains("bbbb bbbb"));
        assert!(!p.contains("3. "));
    }

    #[test]
    fn empty_request_rejected() {
        let req = request(&[], &["fit"]);
        assert_eq!(build_prompt(&req).unwrap_err().code(), "EmptyReviewList");
        assert_eq!(extractive_summary(&req, &catalog(), 0.25).unwrap_err().code(), "EmptyReviewList");
    }

    #[test]
    fn single_sentence_single_aspect() {
        let req = request(&["The fit is perfect."], &["fit"]);
        assert_eq!(extractive_summary(&req, &catalog(), 0.25).unwrap(), "The fit is perfect.");
    }

    #[test]
    fn extractive_is_deterministic_and_verbatim() {
        let bodies = [
            "Installation was easy. The clarity is excellent and touch sensitivity is unaffected.",
            "Very durable, survived a drop. Fits my phone perfectly.",
            "Bubbles everywhere. Would not buy again.",
        ];
        let req = request(&bodies, &SCREEN_PROTECTOR_PREFERENCES);
        let c = catalog();
        let a = extractive_summary(&req, &c, 0.25).unwrap();
        assert_eq!(a, extractive_summary(&req, &c, 0.25).unwrap());
        for sentence in split_sentences(&a) {
            assert!(bodies.iter().any(|b| b.contains(sentence)), "{sentence}");
        }
    }

    #[test]
    fn fallback_is_first_sentence_of_top_review() {
        let req = request(&["Arrived quickly. Box was fine."], &["battery life"]);
        assert_eq!(extractive_summary(&req, &catalog(), 0.99).unwrap(), "Arrived quickly.");
    }

    #[test]
    fn remote_failure_falls_back() {
        let cfg = SummarizerConfig {
            backend: SummaryBackend::Remote,
            remote: Some(RemoteChatSpec {
                endpoint: "http://127.0.0.1:9/v1/chat/completions".into(),
                model: "m".into(),
                token_env: None,
                timeout_ms: 500,
            }),
            ..Default::default()
        };
        let s = Summarizer::new(cfg, catalog());
        let req = request(&["The fit is perfect."], &["fit"]);
        assert_eq!(s.summarize(&req).unwrap_err().code(), "RemoteUnavailable");
        let r = s.summarize_or_fallback(&req).unwrap();
        assert_eq!(r.backend, SummaryBackend::Extractive);
        assert_eq!(r.model, None);
    }
}
