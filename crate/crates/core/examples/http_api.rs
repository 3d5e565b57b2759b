// Drive the study HTTP API in-process.
//
// `revrank serve` exposes the same router on a TCP port. Here requests go
// straight to the router so the example needs no free port.

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use revrank::config::AppConfig;
use revrank::resources::{SCREEN_PROTECTOR_PREFERENCES, SCREEN_PROTECTOR_PRODUCT};
use revrank::service::{self, ServiceState};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>, token: Option<&str>) -> anyhow::Result<(StatusCode, String)> {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header("authorization", format!("Bearer {t}"));
    }
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string()))?,
        None => req.body(Body::empty())?,
    };
    let resp = app.clone().oneshot(req).await?;
    let status = resp.status();
    let bytes = resp.into_body().collect().await?.to_bytes();
    Ok((status, String::from_utf8(bytes.to_vec())?))
}

async fn json_call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> anyhow::Result<Value> {
    let (status, text) = call(app, method, uri, body, None).await?;
    anyhow::ensure!(status.is_success(), "{method} {uri} -> {status}: {text}");
    Ok(serde_json::from_str(&text)?)
}

async fn walkthrough() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let cfg = AppConfig { data_dir: dir.path().to_path_buf(), ..AppConfig::default() };
    let app = service::router(ServiceState::open(cfg)?.with_admin_token(Some("demo-token")));

    let categories = json_call(&app, "GET", "/api/categories", None).await?;
    println!("{} categories", categories.as_array().map_or(0, Vec::len));

    let p = json_call(&app, "POST", "/api/participants", Some(json!({"name": "Bo", "email": "bo@example.org", "age_group": "35-44"}))).await?;
    let pid = p["participant_id"].as_str().unwrap_or_default().to_string();

    let (status, text) = call(
        &app,
        "POST",
        &format!("/api/participants/{pid}/preferences"),
        Some(json!({"category": "Screen_Protectors", "aspects": ["clarity", "fit"]})),
        None,
    )
    .await?;
    println!("two preferences -> {status} {text}");

    let uri = format!("/api/participants/{pid}/preferences");
    json_call(&app, "POST", &uri, Some(json!({"category": "Screen_Protectors", "aspects": SCREEN_PROTECTOR_PREFERENCES}))).await?;

    let session = json_call(&app, "POST", "/api/sessions", Some(json!({"participant_id": pid, "product_id": SCREEN_PROTECTOR_PRODUCT}))).await?;
    let sid = session["session_id"].as_str().unwrap_or_default().to_string();
    for position in 1..=3u64 {
        let ack = json_call(
            &app,
            "POST",
            &format!("/api/sessions/{sid}/responses"),
            Some(json!({
                "position": position, "t_start_ms": 0, "t_end_ms": 15_000 * position,
                "satisfaction": 4, "confidence": 3, "relevance": 4, "ease": 5, "purchase": position > 1
            })),
        )
        .await?;
        println!("response {position}: complete = {}", ack["session_complete"]);
    }

    let ranked = json_call(&app, "POST", "/api/rank", Some(json!({"customer_id": "1047", "product_id": SCREEN_PROTECTOR_PRODUCT}))).await?;
    println!("top review for 1047: {}", ranked[0]["review_id"]);

    let (status, _) = call(&app, "GET", "/api/reports/summary", None, None).await?;
    println!("report without token -> {status}");
    let (_, csv) = call(&app, "GET", "/api/reports/summary?format=csv", None, Some("demo-token")).await?;
    print!("{csv}");
    Ok(())
}

pub fn run_example() -> anyhow::Result<()> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build()?.block_on(walkthrough())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
