//! Hybrid sentiment: lexicon text polarity with negation handling, fused with
//! the normalized star rating into a composite score and a three-way label.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::resources;
use crate::textprep::{self, LexiconSet};

pub const DEFAULT_NEGATION_WINDOW: usize = 3;

#[derive(Debug, Error)]
pub enum SentimentError {
    #[error("star rating {0} is outside 1..=5")]
    InvalidStar(i64),
    #[error("text polarity {0} is outside [0, 1]")]
    InvalidPolarity(f64),
    #[error("invalid fusion config: {0}")]
    InvalidConfig(String),
    #[error("sentiment lexicon line {line}: {reason}")]
    MalformedLexiconLine { line: usize, reason: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl SentimentError {
    pub fn code(&self) -> &'static str {
        match self {
            SentimentError::InvalidStar(_) => "InvalidStar",
            SentimentError::InvalidPolarity(_) => "InvalidPolarity",
            SentimentError::InvalidConfig(_) => "InvalidConfig",
            SentimentError::MalformedLexiconLine { .. } => "MalformedLexiconLine",
            SentimentError::Io(_) => "Io",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentLabel {
    Negative,
    Neutral,
    Positive,
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SentimentLabel::Negative => "negative",
            SentimentLabel::Neutral => "neutral",
            SentimentLabel::Positive => "positive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelThresholds {
    pub neg_below: f64,
    pub pos_above: f64,
}

impl Default for LabelThresholds {
    fn default() -> Self {
        LabelThresholds { neg_below: 0.35, pos_above: 0.70 }
    }
}

impl LabelThresholds {
    /// `score < neg_below` is negative, `score > pos_above` positive,
    /// anything in between neutral.
    pub fn label(&self, score: f64) -> SentimentLabel {
        if score < self.neg_below {
            SentimentLabel::Negative
        } else if score > self.pos_above {
            SentimentLabel::Positive
        } else {
            SentimentLabel::Neutral
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    /// Weight of the normalized star rating.
    pub alpha: f64,
    pub thresholds: LabelThresholds,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig { alpha: 0.5, thresholds: LabelThresholds::default() }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), SentimentError> {
        let t = self.thresholds;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(SentimentError::InvalidConfig(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(0.0 <= t.neg_below && t.neg_below < t.pos_above && t.pos_above <= 1.0) {
            return Err(SentimentError::InvalidConfig(format!(
                "thresholds must satisfy 0 <= neg_below < pos_above <= 1, got {} / {}",
                t.neg_below, t.pos_above
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentResult {
    pub review_id: String,
    pub star_norm: f64,
    pub text_polarity: f64,
    pub sentiment_score: f64,
    pub sentiment_label: SentimentLabel,
}

/// Word polarities in [-1, 1] plus the negators that flip the following
/// `window` tokens.
#[derive(Debug, Clone)]
pub struct SentimentLexicon {
    polarity: HashMap<String, f64>,
    negations: HashSet<String>,
    window: usize,
}

impl SentimentLexicon {
    pub fn new(polarity: HashMap<String, f64>, negations: HashSet<String>, window: usize) -> Result<Self, SentimentError> {
        if let Some((w, p)) = polarity.iter().find(|(_, p)| !(-1.0..=1.0).contains(*p)) {
            return Err(SentimentError::MalformedLexiconLine {
                line: 0,
                reason: format!("polarity of `{w}` is {p}, outside [-1, 1]"),
            });
        }
        Ok(SentimentLexicon { polarity, negations, window })
    }

    /// Parses `word<TAB>polarity` lines and a newline-delimited negator list.
    pub fn parse(lexicon: &str, negations: &str) -> Result<Self, SentimentError> {
        let mut polarity = HashMap::new();
        for (i, line) in lexicon.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: String| SentimentError::MalformedLexiconLine { line: i + 1, reason };
            let (word, value) = line.split_once('\t').ok_or_else(|| bad(format!("missing tab in {line:?}")))?;
            let value: f64 = value.trim().parse().map_err(|_| bad(format!("bad polarity {value:?}")))?;
            if !(-1.0..=1.0).contains(&value) {
                return Err(bad(format!("polarity {value} outside [-1, 1]")));
            }
            polarity.insert(word.trim().to_lowercase(), value);
        }
        let negations = negations
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Self::new(polarity, negations, DEFAULT_NEGATION_WINDOW)
    }

    pub fn load(lexicon_file: &Path, negation_file: &Path) -> Result<Self, SentimentError> {
        Self::parse(&fs::read_to_string(lexicon_file)?, &fs::read_to_string(negation_file)?)
    }

    pub fn bundled() -> Self {
        Self::parse(resources::SENTIMENT_LEXICON, resources::NEGATIONS).expect("bundled sentiment lexicon parses")
    }

    /// Rewrites entries to their lemma so lookups match cleaned tokens. When
    /// several surface forms share a lemma, the entry spelled as the lemma
    /// wins, otherwise the alphabetically first surface form.
    pub fn normalized(&self, lexicons: &LexiconSet) -> Self {
        let mut words: Vec<(&String, &f64)> = self.polarity.iter().collect();
        words.sort_by(|a, b| a.0.cmp(b.0));
        let mut polarity: HashMap<String, f64> = HashMap::new();
        let mut exact: HashSet<String> = HashSet::new();
        for (word, &value) in words {
            let lemma = lexicons.lemma(word);
            if lemma == *word {
                exact.insert(lemma.clone());
                polarity.insert(lemma, value);
            } else if !exact.contains(&lemma) {
                polarity.entry(lemma).or_insert(value);
            }
        }
        SentimentLexicon { polarity, negations: self.negations.clone(), window: self.window }
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = window;
        self
    }

    pub fn polarity(&self, word: &str) -> Option<f64> {
        self.polarity.get(word).copied()
    }

    pub fn negations(&self) -> &HashSet<String> {
        &self.negations
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn len(&self) -> usize {
        self.polarity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polarity.is_empty()
    }
}

/// Mean lexicon polarity of the tokens, with the `window` tokens after a
/// negator sign-flipped, mapped from [-1, 1] onto [0, 1]. No lexicon hit
/// gives the neutral midpoint 0.5.
pub fn text_polarity(tokens: &[String], lexicon: &SentimentLexicon) -> f64 {
    let mut sum = 0.0;
    let mut hits = 0usize;
    let mut negated_for = 0usize;
    for token in tokens {
        if lexicon.negations.contains(token) {
            negated_for = lexicon.window;
            continue;
        }
        if let Some(p) = lexicon.polarity(token) {
            sum += if negated_for > 0 { -p } else { p };
            hits += 1;
        }
        negated_for = negated_for.saturating_sub(1);
    }
    if hits == 0 {
        return 0.5;
    }
    let mean = sum / hits as f64;
    ((mean + 1.0) / 2.0).clamp(0.0, 1.0)
}

/// Convex combination `alpha * (star - 1) / 4 + (1 - alpha) * polarity`.
pub fn fuse(review_id: &str, star_rating: i64, text_polarity: f64, cfg: &FusionConfig) -> Result<SentimentResult, SentimentError> {
    if !(1..=5).contains(&star_rating) {
        return Err(SentimentError::InvalidStar(star_rating));
    }
    if !(0.0..=1.0).contains(&text_polarity) {
        return Err(SentimentError::InvalidPolarity(text_polarity));
    }
    let star_norm = (star_rating - 1) as f64 / 4.0;
    let score = (cfg.alpha * star_norm + (1.0 - cfg.alpha) * text_polarity).clamp(0.0, 1.0);
    Ok(SentimentResult {
        review_id: review_id.to_string(),
        star_norm,
        text_polarity,
        sentiment_score: score,
        sentiment_label: cfg.thresholds.label(score),
    })
}

/// Token stream used for polarity: the cleaned text with negators retained.
pub fn sentiment_tokens(text: &str, lexicons: &LexiconSet, lexicon: &SentimentLexicon, filter_english: bool) -> Vec<String> {
    textprep::clean_keeping(text, lexicons, filter_english, &lexicon.negations)
}

/// One result per record, in corpus order.
pub fn score_corpus(
    corpus: &Corpus,
    lexicons: &LexiconSet,
    lexicon: &SentimentLexicon,
    cfg: &FusionConfig,
    filter_english: bool,
) -> Result<Vec<SentimentResult>, SentimentError> {
    corpus
        .records()
        .iter()
        .map(|r| {
            let tokens = sentiment_tokens(&r.review_body, lexicons, lexicon, filter_english);
            fuse(&r.review_id, r.star_rating as i64, text_polarity(&tokens, lexicon), cfg)
        })
        .collect()
}
