// Run one participant through the three-screen study and print the report.
//
// Every state change is an event appended to a JSON-lines log. Reopening
// the log replays the events into the same state.

use std::sync::Arc;

use revrank::config::AppConfig;
use revrank::pipeline::{self, ReviewAnalyzer};
use revrank::resources::{SCREEN_PROTECTOR_PREFERENCES, SCREEN_PROTECTOR_PRODUCT};
use revrank::store::EventStore;
use revrank::study::{QuestionnaireResponse, ScreenResponse, Study, StudyContext};

pub fn run_example() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let cfg = AppConfig::default();
    let analyzer = Arc::new(ReviewAnalyzer::from_config(&cfg)?);
    let corpus = Arc::new(pipeline::load_corpus(&cfg)?.corpus);
    let context = || StudyContext::new(&cfg, analyzer.clone(), corpus.clone());

    let (store, events) = EventStore::open(dir.path())?;
    let mut study = Study::with_events(context(), store, &events)?;

    let participant = study.register_participant("Ada", "ada@example.org", "25-34")?;
    let id = participant.participant_id.clone();
    println!("registered {id} (email stored as {}...)", &participant.email_hash[..12]);

    let aspects: Vec<String> = SCREEN_PROTECTOR_PREFERENCES.iter().map(|s| s.to_string()).collect();
    study.record_preferences(&id, "Screen_Protectors", &aspects)?;

    let view = study.open_session(&id, SCREEN_PROTECTOR_PRODUCT)?;
    println!("session {} for {}", view.session_id, view.product_title);
    let mut clock = 1_000_u64;
    for screen in &view.screens {
        println!("  screen {} [{}]: {} blocks", screen.position, screen.screen_token, screen.blocks.len());
        let dwell = 20_000 + 7_500 * screen.position as u64;
        study.record_response(
            &view.session_id,
            &ScreenResponse {
                position: screen.position,
                t_start_ms: clock,
                t_end_ms: clock + dwell,
                answers: QuestionnaireResponse {
                    satisfaction: 4,
                    confidence: 4,
                    relevance: 3 + screen.position.min(2),
                    ease: 4,
                    purchase: screen.position != 1,
                    justification: String::new(),
                },
            },
        )?;
        clock += dwell + 2_000;
    }
    let report = study.report()?;
    print!("\n{}", report.to_table());
    drop(study);

    let (store, events) = EventStore::open(dir.path())?;
    let reopened = Study::with_events(context(), store, &events)?;
    println!("\nreplayed {} events, report unchanged: {}", events.len(), reopened.report()? == report);
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
