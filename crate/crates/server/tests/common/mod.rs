#![allow(dead_code)]

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

/// Panics with every violation when `doc` does not match the named schema.
pub fn assert_schema(name: &str, doc: &Value) {
    let (_, schema) = csng::schemas::ALL.iter().find(|(n, _)| *n == name).expect("known schema");
    let schema: Value = serde_json::from_str(schema).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{name} schema violations: {errors:#?}");
}

#[derive(Clone)]
pub struct Client {
    pub app: Router,
}

pub struct Reply {
    pub status: StatusCode,
    pub body: Value,
}

impl Client {
    pub fn new(app: Router) -> Self {
        Self { app }
    }

    pub async fn send(&self, method: &str, uri: &str, body: Option<Vec<u8>>, generation: Option<u64>) -> Reply {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(g) = generation {
            req = req.header("If-Generation", g.to_string());
        }
        let req = req.body(body.map_or_else(Body::empty, Body::from)).unwrap();
        let res = self.app.clone().oneshot(req).await.unwrap();
        let status = res.status();
        let bytes = res.into_body().collect().await.unwrap().to_bytes();
        let body = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
        Reply { status, body }
    }

    pub async fn get(&self, uri: &str) -> Reply {
        self.send("GET", uri, None, None).await
    }

    pub async fn post(&self, uri: &str, body: Value) -> Reply {
        self.send("POST", uri, Some(body.to_string().into_bytes()), None).await
    }

    pub async fn post_at(&self, uri: &str, body: Value, generation: u64) -> Reply {
        self.send("POST", uri, Some(body.to_string().into_bytes()), Some(generation)).await
    }

    pub async fn session(&self) -> String {
        let r = self.post("/sessions", Value::Null).await;
        assert_eq!(r.status, StatusCode::CREATED);
        r.body["session"].as_str().unwrap().to_string()
    }

    pub async fn state_hash(&self, s: &str) -> String {
        self.get(&format!("/sessions/{s}")).await.body["state_hash"].as_str().unwrap().to_string()
    }
}
