use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{
    aggregate_report, AgeGroup, Participant, PreferenceSelection, ResponseRecord, Screen, ScreenExposure,
    ScreenResponse, SessionRecord, SessionView, StudyError, StudyEvent, StudyReport, StudyState, SubmittedReview,
    ViewKind,
};
use crate::config::AppConfig;
use crate::corpus::{Corpus, ReviewRecord};
use crate::pipeline::ReviewAnalyzer;
use crate::profile::{self, ProfileSource, UserProfile};
use crate::ranking::{self, RankOptions, RankWeights, ScoredReview};
use crate::sentiment::SentimentResult;
use crate::store::EventSink;
use crate::summarizer::{Summarizer, SummaryRequest, SummaryResult};

/// Read-only collaborators shared by every study operation.
#[derive(Debug, Clone)]
pub struct StudyContext {
    /// Analyzer for corpus reviews, as used by batch ranking.
    pub analyzer: Arc<ReviewAnalyzer>,
    /// Analyzer for participant-written reviews (no vocabulary filter).
    pub submission_analyzer: Arc<ReviewAnalyzer>,
    pub corpus: Arc<Corpus>,
    pub summarizer: Summarizer,
    pub weights: RankWeights,
    pub k: usize,
    pub seed: u64,
    pub email_salt: String,
    pub min_preferences: usize,
}

impl StudyContext {
    pub fn new(cfg: &AppConfig, analyzer: Arc<ReviewAnalyzer>, corpus: Arc<Corpus>) -> Self {
        let submission_analyzer = Arc::new((*analyzer).clone().with_filter_english(false));
        let summarizer = Summarizer::new(cfg.summarizer.clone(), analyzer.catalog().clone()).with_tau(analyzer.tau());
        StudyContext {
            analyzer,
            submission_analyzer,
            corpus,
            summarizer,
            weights: cfg.weights,
            k: cfg.summarizer.k,
            seed: cfg.seed,
            email_salt: cfg.study.email_salt.clone(),
            min_preferences: cfg.study.min_preferences,
        }
    }
}

/// Everything an evaluation session needs that is expensive to compute.
/// Built without mutating the study so callers can compute it outside a
/// write lock, then committed with [`Study::commit_session`].
#[derive(Debug, Clone)]
pub struct SessionPlan {
    pub participant_id: String,
    pub product_id: String,
    pub product_title: String,
    pub profile: UserProfile,
    pub ranked: Vec<ScoredReview>,
    pub summary: SummaryResult,
}

/// The study instrument over an event sink.
#[derive(Debug)]
pub struct Study<S: EventSink> {
    ctx: StudyContext,
    state: StudyState,
    sink: S,
}

fn normalize_email(email: &str) -> Result<String, StudyError> {
    let email = email.trim().to_lowercase();
    let (local, domain) = email.split_once('@').ok_or(StudyError::InvalidEmail)?;
    let valid = !local.is_empty()
        && !domain.contains('@')
        && domain.contains('.')
        && !domain.starts_with('.')
        && !domain.ends_with('.')
        && !email.chars().any(char::is_whitespace);
    if valid {
        Ok(email)
    } else {
        Err(StudyError::InvalidEmail)
    }
}

/// Hex SHA-256 of `salt`, a newline and the normalized email.
pub fn email_hash(salt: &str, email: &str) -> Result<String, StudyError> {
    let email = normalize_email(email)?;
    let digest = Sha256::new().chain_update(salt.as_bytes()).chain_update(b"\n").chain_update(email.as_bytes()).finalize();
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn session_rng(seed: u64, session_number: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (session_number as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

impl<S: EventSink> Study<S> {
    pub fn new(ctx: StudyContext, sink: S) -> Self {
        Study { ctx, state: StudyState::default(), sink }
    }

    /// Rebuilds the state from previously stored events.
    pub fn with_events(ctx: StudyContext, sink: S, events: &[StudyEvent]) -> Result<Self, StudyError> {
        Ok(Study { ctx, state: StudyState::replay(events)?, sink })
    }

    pub fn context(&self) -> &StudyContext {
        &self.ctx
    }

    pub fn state(&self) -> &StudyState {
        &self.state
    }

    pub fn sink(&self) -> &S {
        &self.sink
    }

    fn persist(&mut self, event: StudyEvent) -> Result<(), StudyError> {
        self.sink.append(&event)?;
        self.state.apply(&event)
    }

    fn require_participant(&self, id: &str) -> Result<&Participant, StudyError> {
        self.state.participant(id).ok_or_else(|| StudyError::UnknownParticipant(id.to_string()))
    }

    pub fn register_participant(&mut self, name: &str, email: &str, age_group: &str) -> Result<Participant, StudyError> {
        let name = name.trim();
        if name.is_empty() {
            return Err(StudyError::EmptyName);
        }
        let age_group: AgeGroup = age_group.parse()?;
        let email_hash = email_hash(&self.ctx.email_salt, email)?;
        if self.state.participant_by_email_hash(&email_hash).is_some() {
            return Err(StudyError::DuplicateEmail);
        }
        let participant = Participant {
            participant_id: format!("P{:04}", self.state.participant_count() + 1),
            display_name: name.to_string(),
            email_hash,
            age_group,
        };
        self.persist(StudyEvent::ParticipantRegistered(participant.clone()))?;
        Ok(participant)
    }

    /// Stores the participant's aspect choices for a category, replacing any
    /// earlier choice. Nothing is stored unless every aspect is valid.
    pub fn record_preferences(
        &mut self,
        participant_id: &str,
        category: &str,
        aspects: &[String],
    ) -> Result<PreferenceSelection, StudyError> {
        self.require_participant(participant_id)?;
        let catalog = self.ctx.analyzer.catalog();
        if catalog.aspects(category).is_err() {
            return Err(StudyError::UnknownCategory(category.to_string()));
        }
        let mut chosen: Vec<String> = Vec::new();
        let mut unknown = None;
        for aspect in aspects {
            match catalog.find(aspect, Some(category)) {
                Some(entry) if !chosen.contains(&entry.phrase) => chosen.push(entry.phrase.clone()),
                Some(_) => {}
                None => {
                    unknown.get_or_insert_with(|| aspect.clone());
                }
            }
        }
        let distinct = chosen.len() + usize::from(unknown.is_some());
        if distinct < self.ctx.min_preferences {
            return Err(StudyError::TooFewPreferences { got: distinct, min: self.ctx.min_preferences });
        }
        if let Some(aspect) = unknown {
            return Err(StudyError::UnknownAspect { category: category.to_string(), aspect });
        }
        let selection =
            PreferenceSelection { participant_id: participant_id.to_string(), category: category.to_string(), aspects: chosen };
        self.persist(StudyEvent::PreferencesRecorded(selection.clone()))?;
        Ok(selection)
    }

    /// Scores and stores a participant-written review of a corpus product.
    pub fn submit_review(
        &mut self,
        participant_id: &str,
        product_id: &str,
        star_rating: i64,
        body: &str,
    ) -> Result<(ReviewRecord, SentimentResult), StudyError> {
        self.require_participant(participant_id)?;
        if body.trim().is_empty() {
            return Err(StudyError::EmptyBody);
        }
        if !(1..=5).contains(&star_rating) {
            return Err(StudyError::InvalidStar(star_rating));
        }
        let product = self
            .ctx
            .corpus
            .product(product_id)
            .ok_or_else(|| StudyError::UnknownProduct(product_id.to_string()))?;
        let review_id = format!("PR{:05}", self.state.review_count() + 1);
        let sentiment = self
            .ctx
            .submission_analyzer
            .score(&review_id, star_rating, body)
            .map_err(|e| StudyError::Pipeline(e.into()))?;
        let submitted = SubmittedReview {
            review_id: review_id.clone(),
            participant_id: participant_id.to_string(),
            product_id: product_id.to_string(),
            category: product.product_category.clone(),
            star_rating: star_rating as u8,
            review_body: body.to_string(),
            sentiment: sentiment.clone(),
        };
        self.persist(StudyEvent::ReviewSubmitted(submitted))?;
        let record = ReviewRecord {
            marketplace: "STUDY".into(),
            customer_id: participant_id.to_string(),
            review_id,
            product_id: product_id.to_string(),
            product_parent: 0,
            product_title: product.product_title,
            product_category: product.product_category,
            star_rating: star_rating as u8,
            helpful_votes: 0,
            total_votes: 0,
            vine: false,
            verified_purchase: false,
            review_headline: String::new(),
            review_body: body.to_string(),
            review_date: String::new(),
            date_valid: false,
        };
        Ok((record, sentiment))
    }

    /// Explicit selection for the category merged with what the
    /// participant's own reviews reveal: aspects from reviews in the same
    /// category and a bias from all of them.
    pub fn participant_profile(&self, participant_id: &str, category: &str) -> Result<UserProfile, StudyError> {
        self.require_participant(participant_id)?;
        let selection = self.state.preferences(participant_id, category).ok_or_else(|| StudyError::MissingPreferences {
            participant_id: participant_id.to_string(),
            category: category.to_string(),
        })?;
        let catalog = self.ctx.analyzer.catalog();
        let explicit = profile::profile_from_selection(participant_id, &selection.aspects, &[], catalog, Some(category))?;
        let reviews = self.state.reviews_by(participant_id);
        if reviews.is_empty() {
            return Ok(explicit);
        }
        let analyzer = &self.ctx.submission_analyzer;
        let mut aspects: BTreeMap<String, f64> = BTreeMap::new();
        for review in reviews.iter().filter(|r| r.category == category) {
            let tokens = analyzer.clean(&review.review_body);
            for mention in analyzer.mentions(&tokens, category).map_err(|e| StudyError::Pipeline(e.into()))? {
                let slot = aspects.entry(mention.aspect).or_insert(mention.score);
                *slot = slot.max(mention.score);
            }
        }
        aspects.retain(|_, w| *w > 0.0);
        let scores: Vec<f64> = reviews.iter().map(|r| r.sentiment.sentiment_score).collect();
        let historical = UserProfile {
            customer_id: participant_id.to_string(),
            preferred_aspects: aspects,
            sentiment_bias: scores.iter().sum::<f64>() / scores.len() as f64,
            review_count: scores.len(),
            source: ProfileSource::Historical,
        };
        Ok(profile::merge_profiles(&explicit, &historical)?)
    }

    /// Ranks and summarizes the product for the participant. A failing
    /// remote summarizer degrades to the extractive backend.
    pub fn plan_session(&self, participant_id: &str, product_id: &str) -> Result<SessionPlan, StudyError> {
        self.require_participant(participant_id)?;
        let corpus = &self.ctx.corpus;
        let product = corpus
            .product(product_id)
            .ok_or_else(|| StudyError::NoReviewsForProduct(product_id.to_string()))?;
        let profile = self.participant_profile(participant_id, &product.product_category)?;
        let opts = RankOptions { weights: self.ctx.weights, allow_reviewed: true };
        let ranked = ranking::rank_reviews(&profile, product_id, corpus, &self.ctx.analyzer, &opts)?;
        let request = SummaryRequest::from_ranking(&product.product_title, &profile, &ranked, corpus, self.ctx.k);
        let summary = self.ctx.summarizer.summarize_or_fallback(&request)?;
        Ok(SessionPlan {
            participant_id: participant_id.to_string(),
            product_id: product_id.to_string(),
            product_title: product.product_title,
            profile,
            ranked,
            summary,
        })
    }

    /// Assigns the session id, shuffles screen positions and the unranked
    /// order from the seed, and stores the session.
    pub fn commit_session(&mut self, plan: SessionPlan) -> Result<SessionView, StudyError> {
        self.require_participant(&plan.participant_id)?;
        let number = self.state.session_count() + 1;
        let mut rng = session_rng(self.ctx.seed, number);
        let mut order = ViewKind::ALL;
        order.shuffle(&mut rng);
        let mut unranked: Vec<&ReviewRecord> = self.ctx.corpus.reviews_of_product(&plan.product_id);
        unranked.shuffle(&mut rng);

        let corpus = &self.ctx.corpus;
        let body = |id: &str| corpus.get(id).map(|r| r.review_body.clone()).unwrap_or_default();
        let screens = order
            .iter()
            .enumerate()
            .map(|(i, &kind)| {
                let review_ids: Vec<String> = match kind {
                    ViewKind::Unranked => unranked.iter().map(|r| r.review_id.clone()).collect(),
                    ViewKind::Ranked => plan.ranked.iter().map(|s| s.review_id.clone()).collect(),
                    ViewKind::Summary => Vec::new(),
                };
                let blocks = match kind {
                    ViewKind::Summary => vec![plan.summary.text.clone()],
                    _ => review_ids.iter().map(|id| body(id)).collect(),
                };
                Screen { position: i as u8 + 1, view_kind: kind, screen_token: format!("{:016x}", rng.gen::<u64>()), blocks, review_ids }
            })
            .collect();
        let record = SessionRecord {
            session_id: format!("S{number:05}"),
            participant_id: plan.participant_id,
            product_id: plan.product_id,
            product_title: plan.product_title,
            profile: plan.profile,
            ranked: plan.ranked,
            summary: plan.summary,
            screens,
        };
        let view = record.client_view();
        self.persist(StudyEvent::SessionOpened(Box::new(record)))?;
        Ok(view)
    }

    pub fn open_session(&mut self, participant_id: &str, product_id: &str) -> Result<SessionView, StudyError> {
        let plan = self.plan_session(participant_id, product_id)?;
        self.commit_session(plan)
    }

    /// Stores the timed exposure of one screen with its questionnaire.
    pub fn record_response(&mut self, session_id: &str, submission: &ScreenResponse) -> Result<ResponseRecord, StudyError> {
        let session = self.state.session(session_id).ok_or_else(|| StudyError::UnknownSession(session_id.to_string()))?;
        let screen = session.screen_at(submission.position).ok_or(StudyError::UnknownScreen(submission.position))?;
        if self.state.response(session_id, screen.view_kind).is_some() {
            return Err(StudyError::DuplicateExposure);
        }
        if submission.t_end_ms <= submission.t_start_ms {
            return Err(StudyError::NonMonotonicTimestamps { t_start: submission.t_start_ms, t_end: submission.t_end_ms });
        }
        submission.answers.validate()?;
        let record = ResponseRecord {
            exposure: ScreenExposure {
                session_id: session_id.to_string(),
                participant_id: session.participant_id.clone(),
                product_id: session.product_id.clone(),
                view_kind: screen.view_kind,
                shown_position: screen.position,
                t_start_ms: submission.t_start_ms,
                t_end_ms: submission.t_end_ms,
            },
            response: submission.answers.clone(),
        };
        self.persist(StudyEvent::ResponseRecorded(record.clone()))?;
        Ok(record)
    }

    pub fn report(&self) -> Result<StudyReport, StudyError> {
        aggregate_report(self.state.responses())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::load_corpus;
    use crate::resources::{SCREEN_PROTECTOR_PREFERENCES, SCREEN_PROTECTOR_PRODUCT};
    use crate::study::QuestionnaireResponse;
    use std::collections::HashSet;

    fn study_with_seed(seed: u64) -> Study<Vec<StudyEvent>> {
        let cfg = AppConfig { seed, ..AppConfig::default() };
        let corpus = Arc::new(load_corpus(&cfg).unwrap().corpus);
        let ctx = StudyContext::new(&cfg, Arc::new(ReviewAnalyzer::bundled()), corpus);
        Study::new(ctx, Vec::new())
    }

    fn prefs() -> Vec<String> {
        SCREEN_PROTECTOR_PREFERENCES.iter().map(|s| s.to_string()).collect()
    }

    fn answers(purchase: bool) -> QuestionnaireResponse {
        QuestionnaireResponse { satisfaction: 4, confidence: 4, relevance: 4, ease: 4, purchase, justification: "ok".into() }
    }

    fn ready(study: &mut Study<Vec<StudyEvent>>, email: &str) -> String {
        let p = study.register_participant("Ann", email, "25-34").unwrap();
        study.record_preferences(&p.participant_id, "Screen_Protectors", &prefs()).unwrap();
        p.participant_id
    }

    #[test]
    fn registration_rules() {
        let mut s = study_with_seed(1);
        let p = s.register_participant("Ann", "Ann@Example.com", "25-34").unwrap();
        assert_eq!(p.participant_id, "P0001");
        assert_eq!(p.email_hash.len(), 64);
        assert_eq!(s.register_participant("Bo", "ann@example.com ", "18-24").unwrap_err().code(), "DuplicateEmail");
        assert_eq!(s.register_participant("Bo", "not-an-email", "18-24").unwrap_err().code(), "InvalidEmail");
        assert_eq!(s.register_participant("Bo", "bo@example.com", "12-17").unwrap_err().code(), "InvalidAgeGroup");
        let log = serde_json::to_string(s.sink()).unwrap();
        assert!(!log.to_lowercase().contains("ann@example.com"));
    }

    #[test]
    fn preference_rules() {
        let mut s = study_with_seed(1);
        let id = s.register_participant("Ann", "a@b.co", "25-34").unwrap().participant_id;
        let mut four = prefs();
        four.pop();
        assert_eq!(s.record_preferences(&id, "Screen_Protectors", &four).unwrap_err().code(), "TooFewPreferences");
        let mut six = prefs();
        six.push("warp drive".into());
        assert_eq!(s.record_preferences(&id, "Screen_Protectors", &six).unwrap_err().code(), "UnknownAspect");
        assert!(s.state().preferences(&id, "Screen_Protectors").is_none());
        assert_eq!(s.record_preferences(&id, "Screen_Protectors", &prefs()).unwrap().aspects.len(), 5);
        assert_eq!(s.record_preferences(&id, "Garden", &prefs()).unwrap_err().code(), "UnknownCategory");
    }

    #[test]
    fn review_submission_sets_bias() {
        let mut s = study_with_seed(1);
        let id = ready(&mut s, "a@b.co");
        assert_eq!(s.submit_review(&id, SCREEN_PROTECTOR_PRODUCT, 5, "  ").unwrap_err().code(), "EmptyBody");
        assert_eq!(s.submit_review(&id, SCREEN_PROTECTOR_PRODUCT, 6, "ok").unwrap_err().code(), "InvalidStar");
        let (record, sentiment) = s.submit_review(&id, SCREEN_PROTECTOR_PRODUCT, 5, "excellent clarity and fit").unwrap();
        assert_eq!(record.review_id, "PR00001");
        assert_eq!(sentiment.sentiment_label, crate::SentimentLabel::Positive);
        let profile = s.participant_profile(&id, "Screen_Protectors").unwrap();
        assert_eq!(profile.sentiment_bias, sentiment.sentiment_score);
        assert_eq!(profile.source, ProfileSource::Merged);
    }

    #[test]
    fn session_has_no_labels_and_sorted_ranking() {
        let mut s = study_with_seed(7);
        let id = ready(&mut s, "a@b.co");
        let view = s.open_session(&id, SCREEN_PROTECTOR_PRODUCT).unwrap();
        let json = serde_json::to_string(&view).unwrap().to_lowercase();
        for label in ["unranked", "ranked", "summary"] {
            assert!(!json.contains(label), "{label}");
        }
        assert_eq!(view.screens.len(), 3);
        let record = s.state().session(&view.session_id).unwrap();
        assert!(record.ranked.windows(2).all(|w| w[0].final_score >= w[1].final_score));
        let kinds: HashSet<ViewKind> = record.screens.iter().map(|s| s.view_kind).collect();
        assert_eq!(kinds.len(), 3);
    }

    #[test]
    fn same_seed_same_order() {
        let orders = |seed| {
            let mut s = study_with_seed(seed);
            let id = ready(&mut s, "a@b.co");
            let v = s.open_session(&id, SCREEN_PROTECTOR_PRODUCT).unwrap();
            let r = s.state().session(&v.session_id).unwrap();
            (r.view_order(), r.screen_of(ViewKind::Unranked).unwrap().review_ids.clone())
        };
        assert_eq!(orders(3), orders(3));
    }

    #[test]
    fn missing_preferences() {
        let mut s = study_with_seed(1);
        let id = s.register_participant("Ann", "a@b.co", "25-34").unwrap().participant_id;
        assert_eq!(s.open_session(&id, SCREEN_PROTECTOR_PRODUCT).unwrap_err().code(), "MissingPreferences");
        let id2 = ready(&mut s, "c@d.co");
        assert_eq!(s.open_session(&id2, "NOPE").unwrap_err().code(), "NoReviewsForProduct");
    }

    #[test]
    fn response_rules_and_report() {
        let mut s = study_with_seed(1);
        let id = ready(&mut s, "a@b.co");
        let view = s.open_session(&id, SCREEN_PROTECTOR_PRODUCT).unwrap();
        let sub = |position, t_start_ms, t_end_ms, purchase| ScreenResponse { position, t_start_ms, t_end_ms, answers: answers(purchase) };
        let sid = view.session_id.clone();
        assert_eq!(s.record_response(&sid, &sub(1, 100, 100, true)).unwrap_err().code(), "NonMonotonicTimestamps");
        assert_eq!(s.record_response(&sid, &sub(4, 100, 200, true)).unwrap_err().code(), "UnknownScreen");
        let mut bad = sub(1, 0, 10, true);
        bad.answers.ease = 6;
        assert_eq!(s.record_response(&sid, &bad).unwrap_err().code(), "LikertOutOfRange");
        s.record_response(&sid, &sub(1, 0, 30_000, true)).unwrap();
        assert_eq!(s.record_response(&sid, &sub(1, 0, 30_000, true)).unwrap_err().code(), "DuplicateExposure");
        s.record_response(&sid, &sub(2, 0, 20_000, false)).unwrap();
        s.record_response(&sid, &sub(3, 0, 10_000, true)).unwrap();
        assert!(s.state().session_complete(&sid));
        let report = s.report().unwrap();
        assert_eq!(report.total_responses, 3);

        let replayed = StudyState::replay(s.sink()).unwrap();
        assert_eq!(&replayed, s.state());
    }
}
