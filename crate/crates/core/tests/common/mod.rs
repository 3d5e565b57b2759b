#![allow(dead_code)]

use std::path::Path;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use revrank::config::AppConfig;
use revrank::service::{self, ServiceState};
use revrank::study::{QuestionnaireResponse, ResponseRecord, ScreenExposure, ViewKind};
use serde_json::Value;
use tower::ServiceExt;

pub const ADMIN_TOKEN: &str = "test-admin-token";

pub fn service_state(data_dir: &Path) -> ServiceState {
    let cfg = AppConfig { data_dir: data_dir.to_path_buf(), ..AppConfig::default() };
    ServiceState::open(cfg).expect("service state opens").with_admin_token(Some(ADMIN_TOKEN))
}

pub fn app(data_dir: &Path) -> Router {
    service::router(service_state(data_dir))
}

/// Sends one request and returns the status with the raw body bytes.
pub async fn call_raw(app: &Router, method: &str, uri: &str, body: Option<&Value>, token: Option<&str>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header("authorization", format!("Bearer {t}"));
    }
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<&Value>) -> (StatusCode, Value) {
    let (status, bytes) = call_raw(app, method, uri, body, None).await;
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

pub fn answers(score: u8, purchase: bool) -> QuestionnaireResponse {
    QuestionnaireResponse {
        satisfaction: score,
        confidence: score,
        relevance: score,
        ease: score,
        purchase,
        justification: String::new(),
    }
}

pub fn record(session: &str, kind: ViewKind, duration_ms: u64, score: u8, purchase: bool) -> ResponseRecord {
    ResponseRecord {
        exposure: ScreenExposure {
            session_id: session.into(),
            participant_id: format!("P-{session}"),
            product_id: "B0TEST".into(),
            view_kind: kind,
            shown_position: 1,
            t_start_ms: 10_000,
            t_end_ms: 10_000 + duration_ms,
        },
        response: answers(score, purchase),
    }
}

/// A `revrank serve` child process listening on a free loopback port.
pub struct ServerProcess {
    pub child: std::process::Child,
    pub base: String,
}

impl ServerProcess {
    /// Starts the binary with a config pointing at `data_dir` and waits
    /// until the port accepts connections.
    pub fn start(data_dir: &Path) -> ServerProcess {
        let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let cfg = serde_json::json!({
            "data_dir": data_dir,
            "server": { "bind": "127.0.0.1", "port": port }
        });
        let cfg_path = data_dir.join(format!("config-{port}.json"));
        std::fs::create_dir_all(data_dir).unwrap();
        std::fs::write(&cfg_path, cfg.to_string()).unwrap();
        let child = std::process::Command::new(env!("CARGO_BIN_EXE_revrank"))
            .arg("--config")
            .arg(&cfg_path)
            .arg("serve")
            .env("REVRANK_ADMIN_TOKEN", ADMIN_TOKEN)
            .stdout(std::process::Stdio::null())
            .stderr(std::process::Stdio::null())
            .spawn()
            .expect("server binary starts");
        let deadline = std::time::Instant::now() + std::time::Duration::from_secs(20);
        while std::net::TcpStream::connect(("127.0.0.1", port)).is_err() {
            assert!(std::time::Instant::now() < deadline, "server did not start listening");
            std::thread::sleep(std::time::Duration::from_millis(25));
        }
        ServerProcess { child, base: format!("http://127.0.0.1:{port}") }
    }

    /// SIGKILL, no graceful shutdown.
    pub fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }

    pub fn request(&self, method: &str, path: &str, body: Option<&Value>, token: Option<&str>) -> (u16, String) {
        let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        let url = format!("{}{path}", self.base);
        let auth = token.map(|t| format!("Bearer {t}"));
        let result = match (method, body) {
            ("GET", _) => {
                let mut r = agent.get(&url);
                if let Some(a) = &auth {
                    r = r.header("Authorization", a);
                }
                r.call()
            }
            (_, Some(b)) => {
                let mut r = agent.post(&url);
                if let Some(a) = &auth {
                    r = r.header("Authorization", a);
                }
                r.send_json(b)
            }
            (_, None) => agent.post(&url).send_empty(),
        };
        let mut resp = result.expect("request reaches the server");
        let status = resp.status().as_u16();
        (status, resp.body_mut().read_to_string().unwrap())
    }

    pub fn json(&self, method: &str, path: &str, body: Option<&Value>) -> Value {
        let (status, text) = self.request(method, path, body, None);
        assert!((200..300).contains(&status), "{method} {path} -> {status}: {text}");
        serde_json::from_str(&text).unwrap()
    }
}

impl Drop for ServerProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
