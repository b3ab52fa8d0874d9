// Copyright 2026 The Tassy Authors
// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, HeaderMap, Method, Request, StatusCode};
use axum::Router;
use bytes::Bytes;
use http_body_util::BodyExt;
use serde_json::Value;
use tassy_core::spec::{InputKind, InputSpec};
use tassy_core::{AnswerValue, Store, SurveySpec};
use tassy_server::{router, AppState};
use tempfile::TempDir;
use tower::ServiceExt;

pub const ADMIN: &str = "test-admin-token";
pub const DEMO: &str = include_str!("../../../../demo/media_bias.survey");

pub struct TestApp {
    pub app: Router,
    pub store: Arc<Store>,
    _dir: TempDir,
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub body: Bytes,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body)
            .unwrap_or_else(|e| panic!("body is not JSON ({e}): {:?}", self.body))
    }

    pub fn code(&self) -> String {
        self.json()["code"].as_str().expect("error code").to_string()
    }

    pub fn text(&self) -> String {
        String::from_utf8(self.body.to_vec()).expect("UTF-8 body")
    }
}

impl TestApp {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let store = Arc::new(Store::open(dir.path().join("t.db")).unwrap());
        let app = router(AppState::new(store.clone(), ADMIN), None);
        Self { app, store, _dir: dir }
    }

    pub async fn send(&self, method: Method, uri: &str, body: Option<&str>, bearer: Option<&str>) -> Reply {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(token) = bearer {
            req = req.header(header::AUTHORIZATION, format!("Bearer {token}"));
        }
        if body.is_some() {
            req = req.header(header::CONTENT_TYPE, "application/json");
        }
        let req = req
            .body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty))
            .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let headers = resp.headers().clone();
        let body = resp.into_body().collect().await.unwrap().to_bytes();
        Reply { status, headers, body }
    }

    pub async fn get(&self, uri: &str) -> Reply {
        self.send(Method::GET, uri, None, None).await
    }

    pub async fn post(&self, uri: &str, body: Option<&str>) -> Reply {
        self.send(Method::POST, uri, body, None).await
    }

    pub async fn put(&self, uri: &str, body: &str) -> Reply {
        self.send(Method::PUT, uri, Some(body), None).await
    }

    pub async fn delete(&self, uri: &str) -> Reply {
        self.send(Method::DELETE, uri, None, None).await
    }

    pub async fn publish(&self, spec_text: &str) -> Reply {
        self.send(Method::POST, "/api/admin/surveys", Some(spec_text), Some(ADMIN)).await
    }

    pub async fn start(&self, survey_id: &str) -> String {
        let r = self.post(&format!("/api/surveys/{survey_id}/sessions"), None).await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
        r.json()["session_token"].as_str().unwrap().to_string()
    }

    /// Answers every input on the shown question, then moves on with NEXT
    /// or SUBMIT. Returns the document shown afterwards.
    pub async fn complete_question(&self, spec: &SurveySpec, token: &str, doc: &Value) -> Value {
        let qid = doc["question"]["question_id"].as_str().unwrap();
        let (_, _, question) = spec.locate_question(qid).unwrap();
        for input in &question.inputs {
            let body = serde_json::to_string(&valid_answer(input)).unwrap();
            let r = self
                .put(&format!("/api/sessions/{token}/answers/{qid}/{}", input.input_id), &body)
                .await;
            assert_eq!(r.status, StatusCode::OK, "{}", r.text());
        }
        let r = self.get(&format!("/api/sessions/{token}/current")).await;
        let nav = &r.json()["nav"];
        let r = if nav["can_next"] == true {
            self.post(&format!("/api/sessions/{token}/next"), None).await
        } else {
            assert_eq!(nav["can_submit"], true, "{nav}");
            let section = doc["section_id"].as_str().unwrap();
            self.post(&format!("/api/sessions/{token}/sections/{section}/submit"), None)
                .await
        };
        assert_eq!(r.status, StatusCode::OK, "{}", r.text());
        r.json()
    }
}

pub fn demo_spec() -> SurveySpec {
    tassy_core::parse_spec(DEMO).unwrap()
}

pub fn valid_answer(input: &InputSpec) -> AnswerValue {
    match &input.kind {
        InputKind::SingleSelect { options } => AnswerValue::Choice {
            value: options[0].value.clone(),
        },
        InputKind::MultiSelect {
            options,
            min_selections,
            ..
        } => AnswerValue::ChoiceSet {
            values: options
                .iter()
                .take((*min_selections as usize).max(1))
                .map(|o| o.value.clone())
                .collect(),
            free_additions: Vec::new(),
        },
        InputKind::Numeric { min_value, .. } => AnswerValue::Number { value: *min_value },
        InputKind::Slider { .. } => AnswerValue::SliderPos { value: 0 },
        InputKind::FreeText { .. } => AnswerValue::Text {
            value: "some text".into(),
        },
    }
}
