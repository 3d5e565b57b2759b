//! Lexicons, the aspect catalog and demo fixtures compiled into the crate.

pub const STOPWORDS: &str = include_str!("../data/stopwords.txt");
pub const ENGLISH_WORDS: &str = include_str!("../data/english_words.txt");
pub const LEMMAS: &str = include_str!("../data/lemmas.tsv");
pub const SENTIMENT_LEXICON: &str = include_str!("../data/sentiment_lexicon.tsv");
pub const NEGATIONS: &str = include_str!("../data/negations.txt");
pub const ASPECT_CATALOG: &str = include_str!("../data/aspect_catalog.tsv");

/// Five short Mobile_Electronics reviews with known sentiment labels.
pub const SAMPLE_REVIEWS: &str = include_str!("../data/fixtures/sample_reviews.tsv");
/// User 1047's screen-protector history plus a ten-review target product.
pub const SCREEN_PROTECTOR_FIXTURE: &str = include_str!("../data/fixtures/screen_protectors.tsv");
/// Union of the fixtures above and a six-review charger product.
pub const DEMO_CORPUS: &str = include_str!("../data/fixtures/demo_corpus.tsv");

pub const SCREEN_PROTECTOR_PRODUCT: &str = "B07SCRN010";
pub const CHARGER_PRODUCT: &str = "B01CHRG001";
pub const SCREEN_PROTECTOR_USER: &str = "1047";

/// Preference set of the selected screen-protector user.
pub const SCREEN_PROTECTOR_PREFERENCES: [&str; 5] = [
    "touch sensitivity",
    "ease of installation",
    "clarity",
    "durability",
    "fit",
];
