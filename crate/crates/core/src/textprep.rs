//! Text cleaning: NFC normalization, lowercasing, letter tokenization,
//! stopword removal, lemmatization and optional English-word filtering.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::corpus::ReviewRecord;
use crate::resources;

/// Tokens shorter than this many letters are dropped.
pub const MIN_TOKEN_LEN: usize = 2;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon file not found: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("lemma file line {line}: expected `surface<TAB>lemma`, got {text:?}")]
    MalformedLemmaLine { line: usize, text: String },
    #[error("lemma map is not idempotent at `{0}`")]
    NonIdempotentLemmaMap(String),
}

impl LexiconError {
    pub fn code(&self) -> &'static str {
        match self {
            LexiconError::MissingFile(_) => "MissingFile",
            LexiconError::Io { .. } => "Io",
            LexiconError::MalformedLemmaLine { .. } => "MalformedLemmaLine",
            LexiconError::NonIdempotentLemmaMap(_) => "NonIdempotentLemmaMap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LexiconCounts {
    pub stopwords: usize,
    pub english_words: usize,
    pub lemmas: usize,
}

/// Word lists driving the cleaner. All entries are lowercase.
#[derive(Debug, Clone)]
pub struct LexiconSet {
    stopwords: HashSet<String>,
    english_words: Option<Arc<HashSet<String>>>,
    lemmas: HashMap<String, String>,
}

fn entries(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

fn word_set(text: &str) -> HashSet<String> {
    entries(text).map(|w| w.to_lowercase()).collect()
}

fn read(path: &Path) -> Result<String, LexiconError> {
    if !path.exists() {
        return Err(LexiconError::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|source| LexiconError::Io { path: path.to_path_buf(), source })
}

fn parse_lemmas(text: &str) -> Result<HashMap<String, String>, LexiconError> {
    let mut map = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let malformed = || LexiconError::MalformedLemmaLine { line: i + 1, text: line.to_string() };
        let (surface, lemma) = line.split_once('\t').ok_or_else(malformed)?;
        let (surface, lemma) = (surface.trim().to_lowercase(), lemma.trim().to_lowercase());
        let is_word = |w: &str| !w.is_empty() && w.chars().all(char::is_alphabetic);
        if !is_word(&surface) || !is_word(&lemma) {
            return Err(malformed());
        }
        map.insert(surface, lemma);
    }
    Ok(map)
}

fn bundled_english() -> Arc<HashSet<String>> {
    static WORDS: OnceLock<Arc<HashSet<String>>> = OnceLock::new();
    WORDS.get_or_init(|| Arc::new(word_set(resources::ENGLISH_WORDS))).clone()
}

impl LexiconSet {
    /// Loads newline-delimited stopword and word lists plus a tab-separated
    /// lemma file. Blank lines and lines starting with `#` are ignored.
    pub fn load(stopword_file: &Path, wordlist_file: Option<&Path>, lemma_file: &Path) -> Result<Self, LexiconError> {
        let stopwords = word_set(&read(stopword_file)?);
        let english_words = match wordlist_file {
            Some(p) => Some(Arc::new(word_set(&read(p)?))),
            None => None,
        };
        let lemmas = parse_lemmas(&read(lemma_file)?)?;
        Self::from_parts(stopwords, english_words, lemmas)
    }

    pub fn from_parts(
        stopwords: HashSet<String>,
        english_words: Option<Arc<HashSet<String>>>,
        lemmas: HashMap<String, String>,
    ) -> Result<Self, LexiconError> {
        let set = LexiconSet {
            stopwords: stopwords.into_iter().map(|w| w.to_lowercase()).collect(),
            english_words,
            lemmas,
        };
        set.check_lemma_idempotence()?;
        Ok(set)
    }

    /// The lexicons shipped with the crate.
    pub fn bundled() -> Self {
        static BASE: OnceLock<LexiconSet> = OnceLock::new();
        BASE.get_or_init(|| {
            LexiconSet::from_parts(
                word_set(resources::STOPWORDS),
                Some(bundled_english()),
                parse_lemmas(resources::LEMMAS).expect("bundled lemma file parses"),
            )
            .expect("bundled lemma map is idempotent")
        })
        .clone()
    }

    /// The bundled lexicons with any of the three files replaced.
    pub fn with_overrides(
        stopword_file: Option<&Path>,
        wordlist_file: Option<&Path>,
        lemma_file: Option<&Path>,
    ) -> Result<Self, LexiconError> {
        if stopword_file.is_none() && wordlist_file.is_none() && lemma_file.is_none() {
            return Ok(Self::bundled());
        }
        let base = Self::bundled();
        let stopwords = match stopword_file {
            Some(p) => word_set(&read(p)?),
            None => base.stopwords,
        };
        let english_words = match wordlist_file {
            Some(p) => Some(Arc::new(word_set(&read(p)?))),
            None => base.english_words,
        };
        let lemmas = match lemma_file {
            Some(p) => parse_lemmas(&read(p)?)?,
            None => base.lemmas,
        };
        Self::from_parts(stopwords, english_words, lemmas)
    }

    fn check_lemma_idempotence(&self) -> Result<(), LexiconError> {
        let mut keys: Vec<&String> = self.lemmas.keys().collect();
        keys.sort();
        for key in keys {
            let once = self.lemma(key);
            if self.lemma(&once) != once {
                return Err(LexiconError::NonIdempotentLemmaMap(key.clone()));
            }
        }
        Ok(())
    }

    pub fn counts(&self) -> LexiconCounts {
        LexiconCounts {
            stopwords: self.stopwords.len(),
            english_words: self.english_words.as_ref().map_or(0, |w| w.len()),
            lemmas: self.lemmas.len(),
        }
    }

    pub fn is_stopword(&self, word: &str) -> bool {
        self.stopwords.contains(word)
    }

    pub fn stopwords(&self) -> &HashSet<String> {
        &self.stopwords
    }

    pub fn has_english_words(&self) -> bool {
        self.english_words.is_some()
    }

    /// True when no word list is loaded or the list contains `word`.
    pub fn is_english(&self, word: &str) -> bool {
        self.english_words.as_ref().is_none_or(|w| w.contains(word))
    }

    /// Dictionary lookup, falling back to suffix rules applied until a
    /// dictionary entry or a fixed point is reached.
    pub fn lemma(&self, word: &str) -> String {
        let mut current = word.to_string();
        // each rule shortens the word, so this terminates
        loop {
            if let Some(lemma) = self.lemmas.get(&current) {
                return lemma.clone();
            }
            match strip_suffix(&current) {
                Some(shorter) => current = shorter,
                None => return current,
            }
        }
    }
}

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u' | b'y')
}

fn has_vowel(s: &[u8]) -> bool {
    s.iter().copied().any(is_vowel)
}

/// One step of the s/es/ed/ing suffix rules. ASCII words only.
fn strip_suffix(word: &str) -> Option<String> {
    if !word.is_ascii() {
        return None;
    }
    let w = word.as_bytes();
    let n = w.len();
    let stem = |k: usize| String::from_utf8(w[..n - k].to_vec()).expect("ascii");

    if word.ends_with("sses") {
        return Some(stem(2));
    }
    if word.ends_with("ies") && n > 4 {
        return Some(stem(3) + "y");
    }
    if (word.ends_with("ches") || word.ends_with("shes") || word.ends_with("xes") || word.ends_with("zzes")) && n > 4 {
        return Some(stem(2));
    }
    if word.ends_with('s') {
        let protected = ["ss", "us", "is", "ous"].iter().any(|s| word.ends_with(s));
        return (n > 3 && !protected).then(|| stem(1));
    }
    if word.ends_with("ied") && n > 4 {
        return Some(stem(3) + "y");
    }
    if word.ends_with("eed") {
        return None;
    }
    for suffix in ["ed", "ing"] {
        if word.ends_with(suffix) {
            let base = &w[..n - suffix.len()];
            if base.len() >= 2 && has_vowel(base) {
                return Some(restore_stem(base));
            }
            return None;
        }
    }
    None
}

fn restore_stem(base: &[u8]) -> String {
    let n = base.len();
    let mut out = base.to_vec();
    let ends = |s: &[u8]| base.ends_with(s);
    if ends(b"at") || ends(b"bl") || ends(b"iz") {
        out.push(b'e');
    } else if n >= 4 && base[n - 1] == base[n - 2] && !is_vowel(base[n - 1]) && !matches!(base[n - 1], b'l' | b's' | b'z') {
        out.pop();
    } else if is_short_cvc(base) {
        out.push(b'e');
    }
    String::from_utf8(out).expect("ascii")
}

/// A single vowel group ending consonant-vowel-consonant (or a bare
/// vowel-consonant pair), the last consonant not w/x/y: `hop`, `us`, `wir`.
fn is_short_cvc(s: &[u8]) -> bool {
    let n = s.len();
    let groups = s
        .iter()
        .enumerate()
        .filter(|&(i, &c)| is_vowel(c) && (i == 0 || !is_vowel(s[i - 1])))
        .count();
    if groups != 1 || n < 2 {
        return false;
    }
    let last = s[n - 1];
    if is_vowel(last) || matches!(last, b'w' | b'x' | b'y') || !is_vowel(s[n - 2]) {
        return false;
    }
    n == 2 || !is_vowel(s[n - 3])
}

/// NFC-normalizes, lowercases and splits on every non-letter character.
/// No token is dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    let normalized: String = text.nfc().collect::<String>().to_lowercase();
    normalized
        .split(|c: char| !c.is_alphabetic())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Runs the full cleaning pipeline.
pub fn clean(text: &str, lexicons: &LexiconSet, filter_english: bool) -> Vec<String> {
    clean_keeping(text, lexicons, filter_english, &HashSet::new())
}

/// Like [`clean`], but words in `keep` survive stopword removal and English
/// filtering. The sentiment stage uses this to retain negators.
pub fn clean_keeping(text: &str, lexicons: &LexiconSet, filter_english: bool, keep: &HashSet<String>) -> Vec<String> {
    let droppable = |t: &str| !keep.contains(t) && lexicons.is_stopword(t);
    tokenize(text)
        .into_iter()
        .filter(|t| t.chars().count() >= MIN_TOKEN_LEN)
        .filter(|t| !droppable(t))
        .map(|t| lexicons.lemma(&t))
        // a lemma can land on a stopword or a short form ("done" -> "do")
        .filter(|t| t.chars().count() >= MIN_TOKEN_LEN && !droppable(t))
        .filter(|t| !filter_english || keep.contains(t) || lexicons.is_english(t))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanedReview {
    pub review_id: String,
    pub customer_id: String,
    pub tokens: Vec<String>,
    pub cleaned_text: String,
}

impl CleanedReview {
    pub fn new(review_id: impl Into<String>, customer_id: impl Into<String>, tokens: Vec<String>) -> Self {
        let cleaned_text = tokens.join(" ");
        CleanedReview { review_id: review_id.into(), customer_id: customer_id.into(), tokens, cleaned_text }
    }

    pub fn from_record(record: &ReviewRecord, lexicons: &LexiconSet, filter_english: bool) -> Self {
        Self::new(
            record.review_id.clone(),
            record.customer_id.clone(),
            clean(&record.review_body, lexicons, filter_english),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn bare(stop: &[&str], lemmas: &[(&str, &str)]) -> LexiconSet {
        LexiconSet::from_parts(
            stop.iter().map(|s| s.to_string()).collect(),
            None,
            lemmas.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        )
        .unwrap()
    }

    #[test]
    fn stopword_only_input() {
        assert!(clean("It is the the of", &LexiconSet::bundled(), false).is_empty());
    }

    #[test]
    fn sound_quality_example() {
        let tokens = clean("Sound quality is great, battery life is impressive", &LexiconSet::bundled(), true);
        for w in ["sound", "quality", "great", "battery", "life", "impressive"] {
            assert!(tokens.contains(&w.to_string()), "{w} missing from {tokens:?}");
        }
        assert!(!tokens.contains(&"is".to_string()));
    }

    #[test]
    fn contractions_split_and_drop() {
        let tokens = clean("it's fantastic", &LexiconSet::bundled(), false);
        assert_eq!(tokens, ["fantastic"]);
    }

    #[test]
    fn empty_stopword_list_keeps_everything() {
        let lex = bare(&[], &[]);
        assert_eq!(clean("the cat is here", &lex, false), ["the", "cat", "is", "here"]);
    }

    #[test]
    fn lemma_lookup_and_rules() {
        let lex = bare(&[], &[("running", "run"), ("run", "run")]);
        assert_eq!(lex.lemma("running"), "run");
        assert_eq!(lex.lemma("batteries"), "battery");
        assert_eq!(lex.lemma("needed"), "need");
        assert_eq!(lex.lemma("stopped"), "stop");
        assert_eq!(lex.lemma("hoping"), "hope");
        assert_eq!(lex.lemma("frustrating"), "frustrate");
        assert_eq!(lex.lemma("glasses"), "glass");
        assert_eq!(lex.lemma("watches"), "watch");
        assert_eq!(lex.lemma("feelings"), "feel");
        assert_eq!(lex.lemma("speed"), "speed");
        assert_eq!(lex.lemma("added"), "add");
        assert_eq!(lex.lemma("installing"), "install");
        assert_eq!(lex.lemma("bring"), "bring");
        assert_eq!(lex.lemma("focus"), "focus");
    }

    #[test]
    fn non_idempotent_map_is_rejected() {
        let err = LexiconSet::from_parts(
            HashSet::new(),
            None,
            [("a", "bb"), ("bb", "cc")].iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        )
        .unwrap_err();
        assert_eq!(err.code(), "NonIdempotentLemmaMap");
    }

    #[test]
    fn bundled_lexicons() {
        let lex = LexiconSet::bundled();
        let counts = lex.counts();
        assert!(counts.stopwords >= 100, "{counts:?}");
        assert!(counts.english_words > 100_000);
        assert!(counts.lemmas > 50);
    }

    #[test]
    fn load_from_files() {
        let dir = tempfile::tempdir().unwrap();
        let stop = dir.path().join("stop.txt");
        let lemmas = dir.path().join("lemmas.tsv");
        let words = dir.path().join("words.txt");
        fs::write(&stop, "").unwrap();
        fs::write(&lemmas, "running\trun\nrun\trun\n").unwrap();
        fs::File::create(&words).unwrap().write_all(b"run\ncat\n").unwrap();
        let lex = LexiconSet::load(&stop, Some(&words), &lemmas).unwrap();
        assert_eq!(lex.lemma("running"), "run");
        assert_eq!(clean("the cat was running", &lex, true), ["cat", "run"]);

        fs::write(&lemmas, "running run\n").unwrap();
        let err = LexiconSet::load(&stop, None, &lemmas).unwrap_err();
        assert_eq!(err.code(), "MalformedLemmaLine");
        let err = LexiconSet::load(&dir.path().join("absent"), None, &lemmas).unwrap_err();
        assert_eq!(err.code(), "MissingFile");
    }

    #[test]
    fn keep_set_survives_stopword_removal() {
        let lex = LexiconSet::bundled();
        let keep: HashSet<String> = ["not".to_string()].into();
        assert_eq!(clean_keeping("it is not good", &lex, true, &keep), ["not", "good"]);
        assert_eq!(clean("it is not good", &lex, true), ["good"]);
    }

    #[test]
    fn cleans_first_sample_review() {
        let body = "I LOVE my recorder. Bought it obviously because I needed one, and it's fantastic. Sound quality is great, battery life is impressive, and it's incredibly easy to use. Highly recommend for anyone needing a reliable voice recorder.";
        let lex = LexiconSet::bundled();
        let tokens = clean(body, &lex, true);
        for w in ["love", "recorder", "battery", "sound"] {
            assert!(tokens.contains(&w.to_string()), "{w} missing from {tokens:?}");
        }
        assert!(tokens.iter().all(|t| !lex.is_stopword(t)));
    }
}
