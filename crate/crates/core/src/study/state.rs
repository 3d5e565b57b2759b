use std::collections::{BTreeMap, HashMap};

use super::{Participant, PreferenceSelection, ResponseRecord, SessionRecord, StudyError, StudyEvent, SubmittedReview, ViewKind};

/// In-memory projection of the event log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StudyState {
    participants: BTreeMap<String, Participant>,
    by_email: HashMap<String, String>,
    preferences: BTreeMap<(String, String), PreferenceSelection>,
    reviews: BTreeMap<String, SubmittedReview>,
    sessions: BTreeMap<String, SessionRecord>,
    responses: BTreeMap<(String, ViewKind), ResponseRecord>,
    events_applied: usize,
}

impl StudyState {
    pub fn replay<'a>(events: impl IntoIterator<Item = &'a StudyEvent>) -> Result<Self, StudyError> {
        let mut state = StudyState::default();
        for event in events {
            state.apply(event)?;
        }
        Ok(state)
    }

    /// Applies one event. Events that contradict the state (a second
    /// participant with the same email, a response for an unknown session)
    /// are rejected so a damaged log is caught at startup.
    pub fn apply(&mut self, event: &StudyEvent) -> Result<(), StudyError> {
        let conflict = |m: String| Err(StudyError::ReplayConflict(m));
        match event {
            StudyEvent::ParticipantRegistered(p) => {
                if self.participants.contains_key(&p.participant_id) {
                    return conflict(format!("participant {} registered twice", p.participant_id));
                }
                if self.by_email.contains_key(&p.email_hash) {
                    return conflict(format!("email hash of {} already registered", p.participant_id));
                }
                self.by_email.insert(p.email_hash.clone(), p.participant_id.clone());
                self.participants.insert(p.participant_id.clone(), p.clone());
            }
            StudyEvent::PreferencesRecorded(sel) => {
                if !self.participants.contains_key(&sel.participant_id) {
                    return conflict(format!("preferences for unknown participant {}", sel.participant_id));
                }
                self.preferences.insert((sel.participant_id.clone(), sel.category.clone()), sel.clone());
            }
            StudyEvent::ReviewSubmitted(r) => {
                if !self.participants.contains_key(&r.participant_id) || self.reviews.contains_key(&r.review_id) {
                    return conflict(format!("review {} does not fit the state", r.review_id));
                }
                self.reviews.insert(r.review_id.clone(), r.clone());
            }
            StudyEvent::SessionOpened(s) => {
                if !self.participants.contains_key(&s.participant_id) || self.sessions.contains_key(&s.session_id) {
                    return conflict(format!("session {} does not fit the state", s.session_id));
                }
                self.sessions.insert(s.session_id.clone(), (**s).clone());
            }
            StudyEvent::ResponseRecorded(r) => {
                let key = (r.exposure.session_id.clone(), r.exposure.view_kind);
                if !self.sessions.contains_key(&key.0) || self.responses.contains_key(&key) {
                    return conflict(format!("response for session {} does not fit the state", key.0));
                }
                self.responses.insert(key, r.clone());
            }
        }
        self.events_applied += 1;
        Ok(())
    }

    pub fn events_applied(&self) -> usize {
        self.events_applied
    }

    pub fn participant(&self, id: &str) -> Option<&Participant> {
        self.participants.get(id)
    }

    pub fn participants(&self) -> impl Iterator<Item = &Participant> {
        self.participants.values()
    }

    pub fn participant_by_email_hash(&self, hash: &str) -> Option<&Participant> {
        self.by_email.get(hash).and_then(|id| self.participants.get(id))
    }

    pub fn preferences(&self, participant_id: &str, category: &str) -> Option<&PreferenceSelection> {
        self.preferences.get(&(participant_id.to_string(), category.to_string()))
    }

    pub fn reviews_by(&self, participant_id: &str) -> Vec<&SubmittedReview> {
        self.reviews.values().filter(|r| r.participant_id == participant_id).collect()
    }

    pub fn review_count(&self) -> usize {
        self.reviews.len()
    }

    pub fn session(&self, id: &str) -> Option<&SessionRecord> {
        self.sessions.get(id)
    }

    pub fn session_count(&self) -> usize {
        self.sessions.len()
    }

    pub fn participant_count(&self) -> usize {
        self.participants.len()
    }

    pub fn response(&self, session_id: &str, kind: ViewKind) -> Option<&ResponseRecord> {
        self.responses.get(&(session_id.to_string(), kind))
    }

    /// All responses, ordered by session id then view kind.
    pub fn responses(&self) -> impl Iterator<Item = &ResponseRecord> {
        self.responses.values()
    }

    /// Whether all three screens of the session have responses.
    pub fn session_complete(&self, session_id: &str) -> bool {
        ViewKind::ALL.iter().all(|k| self.response(session_id, *k).is_some())
    }
}
