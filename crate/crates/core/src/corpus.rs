//! Review corpus: the fifteen-column Amazon review schema, TSV/CSV ingestion
//! with per-row rejection, and user/product indices.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Column names in schema order. The exporter writes this order.
pub const FIELDS: [&str; 15] = [
    "marketplace",
    "customer_id",
    "review_id",
    "product_id",
    "product_parent",
    "product_title",
    "product_category",
    "star_rating",
    "helpful_votes",
    "total_votes",
    "vine",
    "verified_purchase",
    "review_headline",
    "review_body",
    "review_date",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub marketplace: String,
    pub customer_id: String,
    pub review_id: String,
    pub product_id: String,
    pub product_parent: i64,
    pub product_title: String,
    pub product_category: String,
    pub star_rating: u8,
    pub helpful_votes: u32,
    pub total_votes: u32,
    pub vine: bool,
    pub verified_purchase: bool,
    pub review_headline: String,
    pub review_body: String,
    /// Raw date text as found in the source.
    pub review_date: String,
    /// Whether `review_date` parsed as `YYYY-MM-DD`.
    pub date_valid: bool,
}

impl ReviewRecord {
    pub fn parsed_date(&self) -> Option<NaiveDate> {
        parse_date(&self.review_date)
    }

    /// Checks the record-level invariants, returning the rejection reason.
    pub fn validate(&self) -> Result<(), RejectReason> {
        if !(1..=5).contains(&self.star_rating) {
            return Err(RejectReason::StarOutOfRange);
        }
        if self.helpful_votes > self.total_votes {
            return Err(RejectReason::HelpfulExceedsTotal);
        }
        if self.review_body.trim().is_empty() {
            return Err(RejectReason::EmptyReviewBody);
        }
        if self.review_id.trim().is_empty() {
            return Err(RejectReason::Malformed("empty review_id".into()));
        }
        Ok(())
    }
}

fn parse_date(raw: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d").ok()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    EmptyReviewBody,
    StarOutOfRange,
    HelpfulExceedsTotal,
    DuplicateReviewId,
    Malformed(String),
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::EmptyReviewBody => f.write_str("empty review_body"),
            RejectReason::StarOutOfRange => f.write_str("star_rating out of range"),
            RejectReason::HelpfulExceedsTotal => f.write_str("helpful_votes exceeds total_votes"),
            RejectReason::DuplicateReviewId => f.write_str("duplicate review_id"),
            RejectReason::Malformed(detail) => write!(f, "malformed row: {detail}"),
        }
    }
}

/// A source row that did not make it into the corpus. `row` is the 1-based
/// line number in the source, the header being line 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedRow {
    pub row: usize,
    pub reason: RejectReason,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("header is missing required column `{0}`")]
    MissingHeaderField(String),
    #[error("row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("row {row}: duplicate review_id `{review_id}`")]
    DuplicateReviewId { row: usize, review_id: String },
    #[error("row {row}: {reason}")]
    InvalidRecord { row: usize, reason: RejectReason },
    #[error("input is empty")]
    EmptyInput,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CorpusError {
    pub fn code(&self) -> &'static str {
        match self {
            CorpusError::MissingHeaderField(_) => "MissingHeaderField",
            CorpusError::MalformedRow { .. } => "MalformedRow",
            CorpusError::DuplicateReviewId { .. } => "DuplicateReviewId",
            CorpusError::InvalidRecord { .. } => "InvalidRecord",
            CorpusError::EmptyInput => "EmptyInput",
            CorpusError::Io(_) => "Io",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    #[default]
    Tsv,
    /// Comma separated with RFC 4180 quoting.
    Csv,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IngestOptions {
    pub format: SourceFormat,
    /// Abort on the first rejected row.
    pub strict: bool,
}

/// Product summary used by listings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductInfo {
    pub product_id: String,
    pub product_title: String,
    pub product_category: String,
    pub review_count: usize,
}

/// Immutable, ingestion-ordered set of reviews with user and product indices.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    records: Vec<ReviewRecord>,
    index_by_user: HashMap<String, Vec<usize>>,
    index_by_product: HashMap<String, Vec<usize>>,
    index_by_review: HashMap<String, usize>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records
    }
}

impl Corpus {
    /// Builds a corpus from already-validated records. Invalid or duplicate
    /// records are returned as rejections with their 1-based position.
    pub fn from_records(records: impl IntoIterator<Item = ReviewRecord>) -> (Corpus, Vec<RejectedRow>) {
        let mut corpus = Corpus::default();
        let mut rejected = Vec::new();
        for (i, record) in records.into_iter().enumerate() {
            if let Err(reason) = corpus.push(record) {
                rejected.push(RejectedRow { row: i + 1, reason });
            }
        }
        (corpus, rejected)
    }

    fn push(&mut self, record: ReviewRecord) -> Result<(), RejectReason> {
        record.validate()?;
        if self.index_by_review.contains_key(&record.review_id) {
            return Err(RejectReason::DuplicateReviewId);
        }
        let pos = self.records.len();
        self.index_by_review.insert(record.review_id.clone(), pos);
        self.index_by_user.entry(record.customer_id.clone()).or_default().push(pos);
        self.index_by_product.entry(record.product_id.clone()).or_default().push(pos);
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[ReviewRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, review_id: &str) -> Option<&ReviewRecord> {
        self.index_by_review.get(review_id).map(|&i| &self.records[i])
    }

    /// All reviews written by `customer_id`, in ingestion order.
    pub fn reviews_of_user(&self, customer_id: &str) -> Vec<&ReviewRecord> {
        self.lookup(&self.index_by_user, customer_id)
    }

    /// All reviews of `product_id`, in ingestion order.
    pub fn reviews_of_product(&self, product_id: &str) -> Vec<&ReviewRecord> {
        self.lookup(&self.index_by_product, product_id)
    }

    fn lookup(&self, index: &HashMap<String, Vec<usize>>, key: &str) -> Vec<&ReviewRecord> {
        index
            .get(key)
            .map(|positions| positions.iter().map(|&i| &self.records[i]).collect())
            .unwrap_or_default()
    }

    pub fn users(&self) -> impl Iterator<Item = &str> {
        self.index_by_user.keys().map(String::as_str)
    }

    pub fn user_count(&self) -> usize {
        self.index_by_user.len()
    }

    pub fn product_count(&self) -> usize {
        self.index_by_product.len()
    }

    pub fn has_reviewed(&self, customer_id: &str, product_id: &str) -> bool {
        self.reviews_of_user(customer_id)
            .iter()
            .any(|r| r.product_id == product_id)
    }

    pub fn product(&self, product_id: &str) -> Option<ProductInfo> {
        let positions = self.index_by_product.get(product_id)?;
        let first = &self.records[positions[0]];
        Some(ProductInfo {
            product_id: first.product_id.clone(),
            product_title: first.product_title.clone(),
            product_category: first.product_category.clone(),
            review_count: positions.len(),
        })
    }

    /// Products in order of first appearance, optionally filtered by category.
    pub fn products(&self, category: Option<&str>) -> Vec<ProductInfo> {
        let mut seen = HashSet::new();
        self.records
            .iter()
            .filter(|r| category.is_none_or(|c| r.product_category == c))
            .filter(|r| seen.insert(r.product_id.as_str()))
            .filter_map(|r| self.product(&r.product_id))
            .collect()
    }

    pub fn categories(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.records
            .iter()
            .filter(|r| seen.insert(r.product_category.as_str()))
            .map(|r| r.product_category.clone())
            .collect()
    }

    /// Writes the corpus as TSV in schema column order. Tabs and newlines
    /// inside text fields are replaced by spaces so the output stays one
    /// record per line.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", FIELDS.join("\t"))?;
        for r in &self.records {
            let cols = record_columns(r);
            let line: Vec<String> = cols.iter().map(|c| c.replace(['\t', '\n', '\r'], " ")).collect();
            writeln!(out, "{}", line.join("\t"))?;
        }
        Ok(())
    }

    pub fn to_tsv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("corpus text is UTF-8")
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "Y"
    } else {
        "N"
    }
}

fn record_columns(r: &ReviewRecord) -> [String; 15] {
    [
        r.marketplace.clone(),
        r.customer_id.clone(),
        r.review_id.clone(),
        r.product_id.clone(),
        r.product_parent.to_string(),
        r.product_title.clone(),
        r.product_category.clone(),
        r.star_rating.to_string(),
        r.helpful_votes.to_string(),
        r.total_votes.to_string(),
        yes_no(r.vine).to_string(),
        yes_no(r.verified_purchase).to_string(),
        r.review_headline.clone(),
        r.review_body.clone(),
        r.review_date.clone(),
    ]
}

/// Result of ingesting a source stream.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub corpus: Corpus,
    pub rejected: Vec<RejectedRow>,
}

/// Ingests a TSV stream with a header row naming all fifteen schema columns
/// in any order.
pub fn ingest_tsv<R: Read>(source: R, strict: bool) -> Result<Ingested, CorpusError> {
    ingest(source, IngestOptions { format: SourceFormat::Tsv, strict })
}

pub fn ingest<R: Read>(source: R, opts: IngestOptions) -> Result<Ingested, CorpusError> {
    let mut builder = csv::ReaderBuilder::new();
    builder.has_headers(false).flexible(true);
    match opts.format {
        SourceFormat::Tsv => {
            builder.delimiter(b'\t').quoting(false);
        }
        SourceFormat::Csv => {
            builder.delimiter(b',').quoting(true).double_quote(true);
        }
    }
    let mut reader = builder.from_reader(source);
    let mut rows = reader.records();

    let header = match rows.next() {
        None => return Err(CorpusError::EmptyInput),
        Some(h) => h.map_err(|e| csv_error(e, 1))?,
    };
    let mut column_of = HashMap::new();
    for (i, name) in header.iter().enumerate() {
        column_of.insert(name.trim().trim_start_matches('\u{feff}').to_string(), i);
    }
    let mut columns = [0usize; 15];
    for (slot, field) in columns.iter_mut().zip(FIELDS) {
        *slot = *column_of
            .get(field)
            .ok_or_else(|| CorpusError::MissingHeaderField(field.to_string()))?;
    }

    let mut corpus = Corpus::default();
    let mut rejected = Vec::new();
    for (i, row) in rows.enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| csv_error(e, line))?;
        if row.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let outcome = if row.len() != header.len() {
            Err(RejectReason::Malformed(format!(
                "expected {} fields, found {}",
                header.len(),
                row.len()
            )))
        } else {
            parse_row(&row, &columns).and_then(|record| corpus.push(record))
        };
        if let Err(reason) = outcome {
            if opts.strict {
                return Err(match reason {
                    RejectReason::Malformed(detail) => CorpusError::MalformedRow { row: line, reason: detail },
                    RejectReason::DuplicateReviewId => CorpusError::DuplicateReviewId {
                        row: line,
                        review_id: row.get(columns[2]).unwrap_or_default().to_string(),
                    },
                    other => CorpusError::InvalidRecord { row: line, reason: other },
                });
            }
            rejected.push(RejectedRow { row: line, reason });
        }
    }
    Ok(Ingested { corpus, rejected })
}

fn csv_error(err: csv::Error, line: usize) -> CorpusError {
    if err.is_io_error() {
        match err.into_kind() {
            csv::ErrorKind::Io(io) => CorpusError::Io(io),
            _ => unreachable!(),
        }
    } else {
        CorpusError::MalformedRow { row: line, reason: err.to_string() }
    }
}

fn parse_row(row: &csv::StringRecord, columns: &[usize; 15]) -> Result<ReviewRecord, RejectReason> {
    let field = |i: usize| row.get(columns[i]).unwrap_or_default();
    let text = |i: usize| field(i).trim().to_string();
    let int = |i: usize| -> Result<i64, RejectReason> {
        field(i)
            .trim()
            .parse::<i64>()
            .map_err(|_| RejectReason::Malformed(format!("{} is not an integer: {:?}", FIELDS[i], field(i))))
    };
    let count = |i: usize| -> Result<u32, RejectReason> {
        let v = int(i)?;
        u32::try_from(v).map_err(|_| RejectReason::Malformed(format!("{} must be >= 0", FIELDS[i])))
    };
    let flag = |i: usize| -> Result<bool, RejectReason> {
        match field(i).trim().to_ascii_lowercase().as_str() {
            "y" | "yes" | "true" | "1" => Ok(true),
            "n" | "no" | "false" | "0" => Ok(false),
            other => Err(RejectReason::Malformed(format!("{} is not a Y/N flag: {other:?}", FIELDS[i]))),
        }
    };

    let star = int(7)?;
    if !(1..=5).contains(&star) {
        return Err(RejectReason::StarOutOfRange);
    }
    let review_date = text(14);
    let record = ReviewRecord {
        marketplace: text(0),
        customer_id: text(1),
        review_id: text(2),
        product_id: text(3),
        product_parent: int(4)?,
        product_title: text(5),
        product_category: text(6),
        star_rating: star as u8,
        helpful_votes: count(8)?,
        total_votes: count(9)?,
        vine: flag(10)?,
        verified_purchase: flag(11)?,
        review_headline: text(12),
        review_body: field(13).to_string(),
        date_valid: parse_date(&review_date).is_some(),
        review_date,
    };
    record.validate()?;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resources;

    fn tsv(rows: &[&str]) -> String {
        let mut s = FIELDS.join("\t");
        for r in rows {
            s.push('\n');
            s.push_str(r);
        }
        s.push('\n');
        s
    }

    fn row(review_id: &str, customer: &str, product: &str, star: &str, body: &str) -> String {
        [
            "US", customer, review_id, product, "1", "Title", "Cat", star, "0", "1", "N", "Y", "head", body,
            "2015-08-31",
        ]
        .join("\t")
    }

    #[test]
    fn null_body_is_rejected() {
        let rows = [row("R1", "c1", "p1", "5", "fine"), row("R2", "c1", "p1", "4", "   "), row("R3", "c2", "p1", "3", "ok")];
        let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
        let out = ingest_tsv(tsv(&refs).as_bytes(), false).unwrap();
        assert_eq!(out.corpus.len(), 2);
        assert_eq!(out.rejected, vec![RejectedRow { row: 3, reason: RejectReason::EmptyReviewBody }]);
        assert_eq!(out.rejected[0].reason.to_string(), "empty review_body");
    }

    #[test]
    fn star_out_of_range() {
        let r = row("R1", "c1", "p1", "6", "body");
        let out = ingest_tsv(tsv(&[&r]).as_bytes(), false).unwrap();
        assert!(out.corpus.is_empty());
        assert_eq!(out.rejected[0].reason.to_string(), "star_rating out of range");
    }

    #[test]
    fn strict_mode_aborts() {
        let r = row("R1", "c1", "p1", "0", "body");
        let err = ingest_tsv(tsv(&[&r]).as_bytes(), true).unwrap_err();
        assert_eq!(err.code(), "InvalidRecord");
        let dup = [row("R1", "c1", "p1", "5", "a"), row("R1", "c2", "p1", "5", "b")];
        let refs: Vec<&str> = dup.iter().map(String::as_str).collect();
        let err = ingest_tsv(tsv(&refs).as_bytes(), true).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateReviewId { row: 3, .. }));
    }

    #[test]
    fn duplicate_keeps_first() {
        let dup = [row("R1", "c1", "p1", "5", "first"), row("R1", "c2", "p1", "5", "second")];
        let refs: Vec<&str> = dup.iter().map(String::as_str).collect();
        let out = ingest_tsv(tsv(&refs).as_bytes(), false).unwrap();
        assert_eq!(out.corpus.len(), 1);
        assert_eq!(out.corpus.records()[0].review_body, "first");
        assert_eq!(out.rejected[0].reason, RejectReason::DuplicateReviewId);
    }

    #[test]
    fn missing_header_field() {
        let header = FIELDS[..14].join("\t");
        let err = ingest_tsv(header.as_bytes(), false).unwrap_err();
        assert!(matches!(err, CorpusError::MissingHeaderField(ref f) if f == "review_date"));
    }

    #[test]
    fn header_in_any_order() {
        let mut names = FIELDS.to_vec();
        names.reverse();
        let values: Vec<&str> = [
            "US", "c1", "R1", "p1", "7", "T", "Cat", "4", "1", "2", "N", "Y", "h", "body text", "2015-01-02",
        ]
        .into_iter()
        .rev()
        .collect();
        let src = format!("{}\n{}\n", names.join("\t"), values.join("\t"));
        let out = ingest_tsv(src.as_bytes(), true).unwrap();
        let r = &out.corpus.records()[0];
        assert_eq!(r.product_parent, 7);
        assert_eq!(r.star_rating, 4);
        assert_eq!(r.review_body, "body text");
    }

    #[test]
    fn field_count_mismatch_is_malformed() {
        let src = tsv(&["US\tc1\tR1"]);
        let out = ingest_tsv(src.as_bytes(), false).unwrap();
        assert!(matches!(out.rejected[0].reason, RejectReason::Malformed(_)));
        assert_eq!(ingest_tsv(src.as_bytes(), true).unwrap_err().code(), "MalformedRow");
    }

    #[test]
    fn bad_date_is_kept_with_flag() {
        let r = row("R1", "c1", "p1", "5", "body").replace("2015-08-31", "31/08/2015");
        let out = ingest_tsv(tsv(&[&r]).as_bytes(), true).unwrap();
        let rec = &out.corpus.records()[0];
        assert!(!rec.date_valid);
        assert_eq!(rec.review_date, "31/08/2015");
        assert!(rec.parsed_date().is_none());
    }

    #[test]
    fn helpful_votes_bound() {
        let r = row("R1", "c1", "p1", "5", "body").replace("\t0\t1\t", "\t3\t1\t");
        let out = ingest_tsv(tsv(&[&r]).as_bytes(), false).unwrap();
        assert_eq!(out.rejected[0].reason, RejectReason::HelpfulExceedsTotal);
    }

    #[test]
    fn csv_variant_with_quotes() {
        let header = FIELDS.join(",");
        let line = "US,c1,R1,p1,1,\"Cable, braided\",Cat,5,0,0,N,Y,\"Good\",\"Works, \"\"really\"\" well\",2015-01-01";
        let src = format!("{header}\n{line}\n");
        let out = ingest(src.as_bytes(), IngestOptions { format: SourceFormat::Csv, strict: true }).unwrap();
        let r = &out.corpus.records()[0];
        assert_eq!(r.product_title, "Cable, braided");
        assert_eq!(r.review_body, "Works, \"really\" well");
    }

    #[test]
    fn sample_fixture_indices() {
        let out = ingest_tsv(resources::SAMPLE_REVIEWS.as_bytes(), true).unwrap();
        assert_eq!(out.corpus.len(), 5);
        assert_eq!(out.corpus.user_count(), 5);
        for id in ["48701722", "49109878", "29340349", "53076619", "52894341"] {
            assert_eq!(out.corpus.reviews_of_user(id).len(), 1, "{id}");
        }
        assert!(out.corpus.reviews_of_user("nobody").is_empty());
        assert!(out.corpus.reviews_of_product("nothing").is_empty());
    }

    #[test]
    fn user_reviews_in_order() {
        let rows = [
            row("R1", "u", "p1", "5", "a"),
            row("R2", "v", "p1", "5", "b"),
            row("R3", "u", "p2", "5", "c"),
            row("R4", "u", "p3", "5", "d"),
        ];
        let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
        let corpus = ingest_tsv(tsv(&refs).as_bytes(), true).unwrap().corpus;
        let ids: Vec<&str> = corpus.reviews_of_user("u").iter().map(|r| r.review_id.as_str()).collect();
        assert_eq!(ids, ["R1", "R3", "R4"]);
        assert!(corpus.has_reviewed("u", "p2"));
        assert!(!corpus.has_reviewed("v", "p2"));
    }

    #[test]
    fn screen_protector_product_reviews() {
        let corpus = ingest_tsv(resources::DEMO_CORPUS.as_bytes(), true).unwrap().corpus;
        // hand count on the fixture file: ten reviews of the target product
        let reviews = corpus.reviews_of_product(resources::SCREEN_PROTECTOR_PRODUCT);
        assert_eq!(reviews.len(), 10);
        assert!(reviews.iter().all(|r| r.product_id == resources::SCREEN_PROTECTOR_PRODUCT));
        assert_eq!(corpus.reviews_of_product(resources::CHARGER_PRODUCT).len(), 6);
    }

    #[test]
    fn tsv_round_trip() {
        let corpus = ingest_tsv(resources::DEMO_CORPUS.as_bytes(), true).unwrap().corpus;
        let again = ingest_tsv(corpus.to_tsv_string().as_bytes(), true).unwrap().corpus;
        assert_eq!(corpus, again);
    }
}
