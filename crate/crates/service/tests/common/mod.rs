//! Shared setup for the service tests: a fixture index, a token file and a
//! small blocking JSON client.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use tempfile::TempDir;

use coursemate_core::corpus::load_documents;
use coursemate_core::index::ReferenceEmbedder;
use coursemate_core::Index;
use coursemate_service::auth::TokenEntry;
use coursemate_service::{Service, ServiceConfig, ServerHandle};
use coursemate_testkit::fixture;

pub const COHORT: &str = "spring";
pub const OTHER_COHORT: &str = "autumn";

/// (token, user id, role, cohort)
pub const USERS: &[(&str, &str, &str, &str)] = &[
    ("tok-amara", "amara", "learner", COHORT),
    ("tok-benoit", "benoit", "learner", COHORT),
    ("tok-chidi", "chidi", "learner", COHORT),
    ("tok-fac", "facilitator", "facilitator", COHORT),
    ("tok-zoe", "zoe", "learner", OTHER_COHORT),
];

pub struct Fixture {
    pub dir: TempDir,
    pub config: ServiceConfig,
}

impl Fixture {
    pub fn new() -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let index_dir = dir.path().join("index");
        build_index(&index_dir);
        let tokens: Vec<TokenEntry> = USERS
            .iter()
            .map(|(token, user, role, cohort)| {
                serde_json::from_value(json!({
                    "token": token,
                    "user_id": user,
                    "display_name": capitalize(user),
                    "role": role,
                    "cohort_id": cohort,
                }))
                .unwrap()
            })
            .collect();
        let tokens_file = dir.path().join("tokens.json");
        std::fs::write(&tokens_file, serde_json::to_string_pretty(&tokens).unwrap()).unwrap();

        let mut config = ServiceConfig::new(index_dir, dir.path().join("data"));
        config.listen_address = "127.0.0.1:0".into();
        config.tokens_file = Some(tokens_file);
        config.durable_log = false;
        Fixture { dir, config }
    }

    pub fn start(&self) -> ServerHandle {
        ServerHandle::spawn(Service::build(self.config.clone()).unwrap()).unwrap()
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

pub fn build_index(out: &Path) {
    let docs = load_documents(&fixture("corpus.jsonl")).unwrap();
    Index::build_from_documents(&docs, &ReferenceEmbedder::default())
        .unwrap()
        .save(out)
        .unwrap();
}

pub struct Client {
    agent: ureq::Agent,
    base: String,
    token: Option<String>,
}

impl Client {
    pub fn new(server: &ServerHandle, token: Option<&str>) -> Client {
        Client {
            agent: ureq::Agent::config_builder()
                .http_status_as_error(false)
                .timeout_global(Some(Duration::from_secs(10)))
                .build()
                .into(),
            base: server.url(""),
            token: token.map(str::to_string),
        }
    }

    pub fn as_user(server: &ServerHandle, user: &str) -> Client {
        let token = USERS.iter().find(|u| u.1 == user).expect("known user").0;
        Client::new(server, Some(token))
    }

    pub fn get(&self, path: &str) -> (u16, Value) {
        let mut req = self.agent.get(format!("{}{path}", self.base));
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        read(req.call())
    }

    pub fn post(&self, path: &str, body: Value) -> (u16, Value) {
        self.post_with_key(path, body, None)
    }

    pub fn post_with_key(&self, path: &str, body: Value, key: Option<&str>) -> (u16, Value) {
        let mut req = self.agent.post(format!("{}{path}", self.base));
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        if let Some(k) = key {
            req = req.header("Idempotency-Key", k);
        }
        read(req.send_json(&body))
    }

    pub fn ask(&self, body: &str) -> u64 {
        let (status, view) = self.post(&format!("/cohorts/{COHORT}/questions"), json!({ "body": body }));
        assert_eq!(status, 202, "{view}");
        view["question_id"].as_u64().unwrap()
    }

    /// Polls a question until its AI answer appears.
    pub fn wait_for_ai_answer(&self, question: u64, timeout: Duration) -> Value {
        let started = Instant::now();
        loop {
            let (status, view) = self.get(&format!("/questions/{question}"));
            assert_eq!(status, 200, "{view}");
            if !view["ai_answer_pending"].as_bool().unwrap() {
                return view;
            }
            assert!(started.elapsed() < timeout, "no AI answer for question {question} after {timeout:?}");
            std::thread::sleep(Duration::from_millis(20));
        }
    }
}

fn read(resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> (u16, Value) {
    let mut resp = resp.expect("request reaches the server");
    let status = resp.status().as_u16();
    let text = resp.body_mut().read_to_string().unwrap();
    let value = if text.is_empty() { Value::Null } else { serde_json::from_str(&text).unwrap() };
    (status, value)
}

pub fn ai_answers(view: &Value) -> Vec<&Value> {
    view["answers"].as_array().unwrap().iter().filter(|a| a["is_ai"] == true).collect()
}

pub fn data_dir(fx: &Fixture) -> PathBuf {
    fx.config.data_dir.clone()
}
