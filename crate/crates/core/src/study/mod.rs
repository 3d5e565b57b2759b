//! The three-screen user study: participants, preference selection, review
//! submission, timed evaluation sessions, questionnaires and aggregation.
//!
//! All state changes are [`StudyEvent`]s. A [`Study`] validates a request,
//! appends the resulting event to its [`EventSink`](crate::store::EventSink)
//! and only then applies it to its in-memory [`StudyState`], so replaying a
//! log rebuilds the same state.

mod platform;
mod report;
mod state;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::PipelineError;
use crate::profile::{ProfileError, UserProfile};
use crate::ranking::{RankError, ScoredReview};
use crate::sentiment::SentimentResult;
use crate::store::StoreError;
use crate::summarizer::{SummaryError, SummaryResult};

pub use platform::{SessionPlan, Study, StudyContext};
pub use report::{aggregate_report, duration_s, LikertDistribution, StudyReport, ViewReport, TABLE_HEADER};
pub use state::StudyState;

/// Longest exposure counted in reports, in milliseconds.
pub const MAX_EXPOSURE_MS: u64 = 3_600_000;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("email address is not valid")]
    InvalidEmail,
    #[error("a participant with this email already exists")]
    DuplicateEmail,
    #[error("unknown age group `{0}`")]
    InvalidAgeGroup(String),
    #[error("display name must not be empty")]
    EmptyName,
    #[error("unknown participant `{0}`")]
    UnknownParticipant(String),
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("at least {min} preferences are required, got {got}")]
    TooFewPreferences { got: usize, min: usize },
    #[error("unknown aspect `{aspect}` for category `{category}`")]
    UnknownAspect { category: String, aspect: String },
    #[error("unknown product `{0}`")]
    UnknownProduct(String),
    #[error("review body must not be empty")]
    EmptyBody,
    #[error("star rating {0} is outside 1..=5")]
    InvalidStar(i64),
    #[error("product `{0}` has no reviews")]
    NoReviewsForProduct(String),
    #[error("participant `{participant_id}` has no preferences for `{category}`")]
    MissingPreferences { participant_id: String, category: String },
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("session has no screen at position {0}")]
    UnknownScreen(u8),
    #[error("this screen already has a recorded response")]
    DuplicateExposure,
    #[error("t_end ({t_end}) must be after t_start ({t_start})")]
    NonMonotonicTimestamps { t_start: u64, t_end: u64 },
    #[error("{item} = {value} is outside 1..=5")]
    LikertOutOfRange { item: &'static str, value: u8 },
    #[error("no completed exposures to report")]
    NoData,
    #[error("event conflicts with the current state: {0}")]
    ReplayConflict(String),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Summary(#[from] SummaryError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl StudyError {
    pub fn code(&self) -> &'static str {
        match self {
            StudyError::InvalidEmail => "InvalidEmail",
            StudyError::DuplicateEmail => "DuplicateEmail",
            StudyError::InvalidAgeGroup(_) => "InvalidAgeGroup",
            StudyError::EmptyName => "EmptyName",
            StudyError::UnknownParticipant(_) => "UnknownParticipant",
            StudyError::UnknownCategory(_) => "UnknownCategory",
            StudyError::TooFewPreferences { .. } => "TooFewPreferences",
            StudyError::UnknownAspect { .. } => "UnknownAspect",
            StudyError::UnknownProduct(_) => "UnknownProduct",
            StudyError::EmptyBody => "EmptyBody",
            StudyError::InvalidStar(_) => "InvalidStar",
            StudyError::NoReviewsForProduct(_) => "NoReviewsForProduct",
            StudyError::MissingPreferences { .. } => "MissingPreferences",
            StudyError::UnknownSession(_) => "UnknownSession",
            StudyError::UnknownScreen(_) => "UnknownScreen",
            StudyError::DuplicateExposure => "DuplicateExposure",
            StudyError::NonMonotonicTimestamps { .. } => "NonMonotonicTimestamps",
            StudyError::LikertOutOfRange { .. } => "LikertOutOfRange",
            StudyError::NoData => "NoData",
            StudyError::ReplayConflict(_) => "ReplayConflict",
            StudyError::Rank(e) => e.code(),
            StudyError::Summary(e) => e.code(),
            StudyError::Pipeline(e) => e.code(),
            StudyError::Profile(e) => e.code(),
            StudyError::Store(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgeGroup {
    #[serde(rename = "18-24")]
    From18To24,
    #[serde(rename = "25-34")]
    From25To34,
    #[serde(rename = "35-44")]
    From35To44,
    #[serde(rename = "45-54")]
    From45To54,
    #[serde(rename = "55-64")]
    From55To64,
    #[serde(rename = "65+")]
    From65,
}

impl AgeGroup {
    pub const ALL: [AgeGroup; 6] = [
        AgeGroup::From18To24,
        AgeGroup::From25To34,
        AgeGroup::From35To44,
        AgeGroup::From45To54,
        AgeGroup::From55To64,
        AgeGroup::From65,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgeGroup::From18To24 => "18-24",
            AgeGroup::From25To34 => "25-34",
            AgeGroup::From35To44 => "35-44",
            AgeGroup::From45To54 => "45-54",
            AgeGroup::From55To64 => "55-64",
            AgeGroup::From65 => "65+",
        }
    }
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgeGroup {
    type Err = StudyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgeGroup::ALL
            .into_iter()
            .find(|g| g.as_str() == s.trim())
            .ok_or_else(|| StudyError::InvalidAgeGroup(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Participant {
    pub participant_id: String,
    pub display_name: String,
    /// Hex SHA-256 of the salted, lowercased email.
    pub email_hash: String,
    pub age_group: AgeGroup,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceSelection {
    pub participant_id: String,
    pub category: String,
    pub aspects: Vec<String>,
}

/// A review written by a participant during the study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmittedReview {
    pub review_id: String,
    pub participant_id: String,
    pub product_id: String,
    pub category: String,
    pub star_rating: u8,
    pub review_body: String,
    pub sentiment: SentimentResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewKind {
    Unranked,
    Ranked,
    Summary,
}

impl ViewKind {
    pub const ALL: [ViewKind; 3] = [ViewKind::Unranked, ViewKind::Ranked, ViewKind::Summary];
}

/// One evaluation screen as stored on the server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Screen {
    /// 1-based display position.
    pub position: u8,
    pub view_kind: ViewKind,
    /// Opaque identifier handed to the client.
    pub screen_token: String,
    /// Text blocks in display order.
    pub blocks: Vec<String>,
    /// Review ids behind the blocks; empty for the summary screen.
    pub review_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub participant_id: String,
    pub product_id: String,
    pub product_title: String,
    pub profile: UserProfile,
    pub ranked: Vec<ScoredReview>,
    pub summary: SummaryResult,
    /// Screens sorted by position.
    pub screens: Vec<Screen>,
}

impl SessionRecord {
    pub fn screen_at(&self, position: u8) -> Option<&Screen> {
        self.screens.iter().find(|s| s.position == position)
    }

    pub fn screen_of(&self, kind: ViewKind) -> Option<&Screen> {
        self.screens.iter().find(|s| s.view_kind == kind)
    }

    pub fn view_order(&self) -> [ViewKind; 3] {
        let mut order = [ViewKind::Unranked; 3];
        for s in &self.screens {
            order[usize::from(s.position) - 1] = s.view_kind;
        }
        order
    }

    /// What the participant's browser receives: no view kinds, no scores.
    pub fn client_view(&self) -> SessionView {
        SessionView {
            session_id: self.session_id.clone(),
            product_id: self.product_id.clone(),
            product_title: self.product_title.clone(),
            screens: self
                .screens
                .iter()
                .map(|s| ClientScreen { position: s.position, screen_token: s.screen_token.clone(), blocks: s.blocks.clone() })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientScreen {
    pub position: u8,
    pub screen_token: String,
    pub blocks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub product_id: String,
    pub product_title: String,
    pub screens: Vec<ClientScreen>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenExposure {
    pub session_id: String,
    pub participant_id: String,
    pub product_id: String,
    pub view_kind: ViewKind,
    pub shown_position: u8,
    pub t_start_ms: u64,
    pub t_end_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionnaireResponse {
    pub satisfaction: u8,
    pub confidence: u8,
    pub relevance: u8,
    pub ease: u8,
    pub purchase: bool,
    #[serde(default)]
    pub justification: String,
}

impl QuestionnaireResponse {
    pub fn validate(&self) -> Result<(), StudyError> {
        for (item, value) in [
            ("satisfaction", self.satisfaction),
            ("confidence", self.confidence),
            ("relevance", self.relevance),
            ("ease", self.ease),
        ] {
            if !(1..=5).contains(&value) {
                return Err(StudyError::LikertOutOfRange { item, value });
            }
        }
        Ok(())
    }
}

/// An exposure together with the questionnaire answered right after it.
/// Both are stored as a single event so neither can exist without the other.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub exposure: ScreenExposure,
    pub response: QuestionnaireResponse,
}

/// Client submission for one screen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenResponse {
    pub position: u8,
    pub t_start_ms: u64,
    pub t_end_ms: u64,
    #[serde(flatten)]
    pub answers: QuestionnaireResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "data", rename_all = "snake_case")]
pub enum StudyEvent {
    ParticipantRegistered(Participant),
    PreferencesRecorded(PreferenceSelection),
    ReviewSubmitted(SubmittedReview),
    SessionOpened(Box<SessionRecord>),
    ResponseRecorded(ResponseRecord),
}

impl StudyEvent {
    /// Log names, one file per kind.
    pub const KINDS: [&'static str; 5] = ["participants", "preferences", "reviews", "sessions", "responses"];

    pub fn kind(&self) -> &'static str {
        match self {
            StudyEvent::ParticipantRegistered(_) => "participants",
            StudyEvent::PreferencesRecorded(_) => "preferences",
            StudyEvent::ReviewSubmitted(_) => "reviews",
            StudyEvent::SessionOpened(_) => "sessions",
            StudyEvent::ResponseRecorded(_) => "responses",
        }
    }
}
