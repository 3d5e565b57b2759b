mod common;

use std::collections::BTreeSet;

use axum::http::StatusCode;
use common::{call, call_raw, ADMIN_TOKEN};
use revrank::config::AppConfig;
use revrank::pipeline::{self, ReviewAnalyzer};
use revrank::ranking::{self, RankOptions};
use revrank::resources::{SCREEN_PROTECTOR_PREFERENCES, SCREEN_PROTECTOR_PRODUCT, SCREEN_PROTECTOR_USER};
use serde_json::{json, Value};

async fn register(app: &axum::Router, name: &str, email: &str) -> String {
    let (status, body) = call(app, "POST", "/api/participants", Some(&json!({"name": name, "email": email, "age_group": "25-34"}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    body["participant_id"].as_str().unwrap().to_string()
}

async fn prefer(app: &axum::Router, pid: &str, aspects: &[&str]) -> (StatusCode, Value) {
    call(app, "POST", &format!("/api/participants/{pid}/preferences"), Some(&json!({"category": "Screen_Protectors", "aspects": aspects}))).await
}

#[tokio::test]
async fn full_participant_flow() {
    let dir = tempfile::tempdir().unwrap();
    let app = common::app(dir.path());

    let pid = register(&app, "Flow", "Flow@Example.org").await;
    assert_eq!(pid, "P0001");
    let (status, body) = prefer(&app, &pid, &SCREEN_PROTECTOR_PREFERENCES).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["aspects"].as_array().unwrap().len(), 5);

    let (status, body) = call(
        &app,
        "POST",
        "/api/reviews",
        Some(&json!({"participant_id": pid, "product_id": "B07SCRN021", "star_rating": 2, "review_body": "Bubbles everywhere and the fit is poor."})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["sentiment"]["sentiment_label"], "negative");

    let (status, session) = call(&app, "POST", "/api/sessions", Some(&json!({"participant_id": pid, "product_id": SCREEN_PROTECTOR_PRODUCT}))).await;
    assert_eq!(status, StatusCode::OK, "{session}");
    let screens = session["screens"].as_array().unwrap();
    assert_eq!(screens.len(), 3);
    for (i, screen) in screens.iter().enumerate() {
        assert_eq!(screen["position"], i + 1);
        let keys: BTreeSet<&str> = screen.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, BTreeSet::from(["position", "screen_token", "blocks"]));
    }
    let text = session.to_string();
    for hidden in ["view_kind", "final_score", "unranked", "summary", "match_ratio"] {
        assert!(!text.contains(hidden), "client view leaks `{hidden}`");
    }

    let sid = session["session_id"].as_str().unwrap();
    for position in 1..=3 {
        let (status, ack) = call(
            &app,
            "POST",
            &format!("/api/sessions/{sid}/responses"),
            Some(&json!({"position": position, "t_start_ms": 100, "t_end_ms": 100 + 1000 * position,
                         "satisfaction": 5, "confidence": 4, "relevance": 4, "ease": 5, "purchase": true, "justification": "ok"})),
        )
        .await;
        assert_eq!(status, StatusCode::OK, "{ack}");
        assert_eq!(ack["session_complete"], position == 3);
    }
    let (status, dup) = call(
        &app,
        "POST",
        &format!("/api/sessions/{sid}/responses"),
        Some(&json!({"position": 1, "t_start_ms": 0, "t_end_ms": 10, "satisfaction": 5, "confidence": 4, "relevance": 4, "ease": 5, "purchase": true})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(dup["error"], "DuplicateExposure");

    let (status, report) = call_raw(&app, "GET", "/api/reports/summary", None, Some(ADMIN_TOKEN)).await;
    assert_eq!(status, StatusCode::OK);
    let report: Value = serde_json::from_slice(&report).unwrap();
    assert_eq!(report["total_responses"], 3);

    let events = std::fs::read_to_string(dir.path().join("events").join("participants.jsonl")).unwrap();
    assert!(!events.to_lowercase().contains("flow@example.org"));
}

#[tokio::test]
async fn four_aspects_are_too_few() {
    let dir = tempfile::tempdir().unwrap();
    let app = common::app(dir.path());
    let pid = register(&app, "Four", "four@example.org").await;
    let (status, body) = prefer(&app, &pid, &SCREEN_PROTECTOR_PREFERENCES[..4]).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "TooFewPreferences");
    assert!(body["message"].as_str().unwrap().contains('5'));

    let (status, body) = prefer(&app, &pid, &["clarity", "fit", "price", "quality", "warp drive"]).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "UnknownAspect");
}

#[tokio::test]
async fn error_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let app = common::app(dir.path());

    let (status, body) = prefer(&app, "P9999", &SCREEN_PROTECTOR_PREFERENCES).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "UnknownParticipant");

    let (status, body) = call(
        &app,
        "POST",
        "/api/sessions/S99999/responses",
        Some(&json!({"position": 1, "t_start_ms": 0, "t_end_ms": 10, "satisfaction": 5, "confidence": 4, "relevance": 4, "ease": 5, "purchase": true})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "UnknownSession");

    let pid = register(&app, "Dup", "dup@example.org").await;
    let (status, body) = call(&app, "POST", "/api/participants", Some(&json!({"name": "Dup", "email": " DUP@example.org", "age_group": "25-34"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
    assert_eq!(body["error"], "DuplicateEmail");

    let (status, body) = call(&app, "POST", "/api/participants", Some(&json!({"name": "Age", "email": "age@example.org", "age_group": "12"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "InvalidAgeGroup");

    let (status, body) = call(
        &app,
        "POST",
        "/api/reviews",
        Some(&json!({"participant_id": pid, "product_id": SCREEN_PROTECTOR_PRODUCT, "star_rating": 6, "review_body": "x"})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].is_string() && body["message"].is_string());

    let (status, body) = call(&app, "POST", "/api/rank", Some(&json!({"product_id": SCREEN_PROTECTOR_PRODUCT}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "InvalidRequest");

    let (status, body) = call(&app, "GET", "/api/products?category=Garden", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "UnknownCategory");

    let (status, _) = call_raw(&app, "GET", "/api/reports/summary", None, None).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let (status, _) = call_raw(&app, "GET", "/api/reports/summary", None, Some("wrong")).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let (status, body) = call_raw(&app, "GET", "/api/reports/summary", None, Some(ADMIN_TOKEN)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{}", String::from_utf8_lossy(&body));

    let (status, body) = call(&app, "POST", "/api/participants", Some(&json!({"name": 3}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "InvalidRequest");
}

#[tokio::test]
async fn rank_endpoint_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let app = common::app(dir.path());
    let cfg = AppConfig::default();
    let analyzer = ReviewAnalyzer::from_config(&cfg).unwrap();
    let corpus = pipeline::load_corpus(&cfg).unwrap().corpus;
    let profile = analyzer.historical_profile(&corpus, SCREEN_PROTECTOR_USER, None).unwrap();
    let local = ranking::rank_reviews(&profile, SCREEN_PROTECTOR_PRODUCT, &corpus, &analyzer, &RankOptions::default()).unwrap();

    let (status, body) =
        call_raw(&app, "POST", "/api/rank", Some(&json!({"customer_id": SCREEN_PROTECTOR_USER, "product_id": SCREEN_PROTECTOR_PRODUCT})), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, serde_json::to_vec(&local).unwrap());

    let (status, body) =
        call_raw(&app, "POST", "/api/rank", Some(&json!({"profile": profile, "product_id": SCREEN_PROTECTOR_PRODUCT})), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, serde_json::to_vec(&local).unwrap());

    let reviewed = corpus.reviews_of_user(SCREEN_PROTECTOR_USER)[0].product_id.clone();
    let (status, body) = call(&app, "POST", "/api/rank", Some(&json!({"customer_id": SCREEN_PROTECTOR_USER, "product_id": reviewed}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "UserAlreadyReviewedProduct");
}

#[tokio::test]
async fn summarize_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let app = common::app(dir.path());
    let request = json!({
        "product_title": "Widget",
        "preferences": ["clarity", "fit"],
        "sentiment_bias": 0.8,
        "reviews": [
            {"rank": 1, "review_body": "Great clarity. Bad box.", "final_score": 0.9},
            {"rank": 2, "review_body": "It fits well.", "final_score": 0.5}
        ],
        "k": 2
    });
    let (status, body) = call(&app, "POST", "/api/summarize", Some(&request)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["backend"], "extractive");
    assert!(body["text"].as_str().unwrap().contains("Great clarity."));

    let mut remote = request.clone();
    remote["backend"] = json!("remote");
    let (status, body) = call(&app, "POST", "/api/summarize", Some(&remote)).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(body["error"], "RemoteNotConfigured");

    let mut empty = request;
    empty["reviews"] = json!([]);
    let (status, body) = call(&app, "POST", "/api/summarize", Some(&empty)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "EmptyReviewList");
}

#[tokio::test]
async fn catalog_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let app = common::app(dir.path());
    let (status, cats) = call(&app, "GET", "/api/categories", None).await;
    assert_eq!(status, StatusCode::OK);
    let screen = cats.as_array().unwrap().iter().find(|c| c["category"] == "Screen_Protectors").unwrap();
    for aspect in SCREEN_PROTECTOR_PREFERENCES {
        assert!(screen["aspects"].as_array().unwrap().iter().any(|a| a == aspect));
    }
    let (status, products) = call(&app, "GET", "/api/products?category=Screen_Protectors", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(products.as_array().unwrap().iter().any(|p| p["product_id"] == SCREEN_PROTECTOR_PRODUCT));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_sessions_get_distinct_ids() {
    let dir = tempfile::tempdir().unwrap();
    let app = common::app(dir.path());
    let mut pids = Vec::new();
    for i in 0..8 {
        let pid = register(&app, "C", &format!("c{i}@example.org")).await;
        assert_eq!(prefer(&app, &pid, &SCREEN_PROTECTOR_PREFERENCES).await.0, StatusCode::OK);
        pids.push(pid);
    }
    let tasks: Vec<_> = pids
        .into_iter()
        .map(|pid| {
            let app = app.clone();
            tokio::spawn(async move {
                call(&app, "POST", "/api/sessions", Some(&json!({"participant_id": pid, "product_id": SCREEN_PROTECTOR_PRODUCT}))).await
            })
        })
        .collect();
    let mut ids = BTreeSet::new();
    for t in tasks {
        let (status, body) = t.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        ids.insert(body["session_id"].as_str().unwrap().to_string());
    }
    assert_eq!(ids.len(), 8);
}

#[test]
fn killed_server_replays_to_identical_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let server = common::ServerProcess::start(&data);
    let p = server.json("POST", "/api/participants", Some(&json!({"name": "K", "email": "k@example.org", "age_group": "55-64"})));
    let pid = p["participant_id"].as_str().unwrap();
    server.json("POST", &format!("/api/participants/{pid}/preferences"), Some(&json!({"category": "Screen_Protectors", "aspects": SCREEN_PROTECTOR_PREFERENCES})));
    let s = server.json("POST", "/api/sessions", Some(&json!({"participant_id": pid, "product_id": SCREEN_PROTECTOR_PRODUCT})));
    let sid = s["session_id"].as_str().unwrap();
    for position in 1..=2 {
        server.json(
            "POST",
            &format!("/api/sessions/{sid}/responses"),
            Some(&json!({"position": position, "t_start_ms": 0, "t_end_ms": 3_333 * position, "satisfaction": 2, "confidence": 3, "relevance": 4, "ease": 5, "purchase": position == 2})),
        );
    }
    let before = server.request("GET", "/api/reports/summary?format=csv", None, Some(ADMIN_TOKEN));
    server.kill();

    let server = common::ServerProcess::start(&data);
    let after = server.request("GET", "/api/reports/summary?format=csv", None, Some(ADMIN_TOKEN));
    assert_eq!(before, after);
    let ack = server.json(
        "POST",
        &format!("/api/sessions/{sid}/responses"),
        Some(&json!({"position": 3, "t_start_ms": 0, "t_end_ms": 9_000, "satisfaction": 2, "confidence": 3, "relevance": 4, "ease": 5, "purchase": true})),
    );
    assert_eq!(ack["session_complete"], true);
}
