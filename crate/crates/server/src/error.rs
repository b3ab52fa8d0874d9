// Copyright 2026 The Tassy Authors
// SPDX-License-Identifier: Apache-2.0

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use serde_json::{json, Value};
use tassy_core::spec::SpecError;
use tassy_core::{SessionError, StoreError, Violation};

/// Every `code` the API can return, in the order documented in the README.
pub const ERROR_CODES: &[&str] = &[
    "bad_request",
    "not_found",
    "unauthorized",
    "invalid_spec",
    "survey_conflict",
    "unknown_survey",
    "unknown_session",
    "unknown_section",
    "unknown_question",
    "unknown_input",
    "unknown_annotation",
    "session_complete",
    "section_frozen",
    "section_not_started",
    "already_submitted",
    "gating_violation",
    "at_boundary",
    "back_disabled",
    "not_at_section_end",
    "type_mismatch",
    "range_violation",
    "unknown_option",
    "not_extensible",
    "no_annotation_task",
    "too_short",
    "too_long",
    "out_of_range",
    "empty_selection",
    "overlap",
    "store_unavailable",
    "internal",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub details: Option<Value>,
}

#[derive(Serialize)]
struct Body<'a> {
    code: &'a str,
    message: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    details: Option<&'a Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        debug_assert!(ERROR_CODES.contains(&code), "undocumented code {code}");
        Self {
            status,
            code,
            message: message.into(),
            details: None,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn unauthorized() -> Self {
        Self::new(
            StatusCode::UNAUTHORIZED,
            "unauthorized",
            "a valid admin bearer token is required",
        )
    }

    pub fn unknown_session(token: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "unknown_session",
            format!("unknown session token '{token}'"),
        )
    }

    pub fn invalid_spec(violations: &[Violation]) -> Self {
        Self::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_spec",
            format!("survey spec has {} violation(s)", violations.len()),
        )
        .with_details(serde_json::to_value(violations).expect("violations serialize"))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Body {
            code: self.code,
            message: &self.message,
            details: self.details.as_ref(),
        };
        (self.status, Json(body)).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        use SessionError as E;
        let message = e.to_string();
        let (status, code) = match &e {
            E::SessionComplete => (StatusCode::GONE, "session_complete"),
            E::SurveyMismatch { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
            E::SectionFrozen { .. } => (StatusCode::CONFLICT, "section_frozen"),
            E::SectionNotStarted { .. } => (StatusCode::CONFLICT, "section_not_started"),
            E::AlreadySubmitted { .. } => (StatusCode::CONFLICT, "already_submitted"),
            E::UnknownSection { .. } => (StatusCode::NOT_FOUND, "unknown_section"),
            E::UnknownQuestion { .. } => (StatusCode::NOT_FOUND, "unknown_question"),
            E::UnknownInput { .. } => (StatusCode::NOT_FOUND, "unknown_input"),
            E::UnknownAnnotation { .. } => (StatusCode::NOT_FOUND, "unknown_annotation"),
            E::TypeMismatch { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "type_mismatch"),
            E::RangeViolation(_) => (StatusCode::UNPROCESSABLE_ENTITY, "range_violation"),
            E::UnknownOption { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "unknown_option"),
            E::NotExtensible => (StatusCode::UNPROCESSABLE_ENTITY, "not_extensible"),
            E::NoAnnotationTask { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "no_annotation_task"),
            E::TooShort { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "too_short"),
            E::TooLong { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "too_long"),
            E::SelectionOutOfRange => (StatusCode::UNPROCESSABLE_ENTITY, "out_of_range"),
            E::EmptySelection => (StatusCode::UNPROCESSABLE_ENTITY, "empty_selection"),
            E::Overlap { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "overlap"),
            E::GatingViolation { .. } => (StatusCode::CONFLICT, "gating_violation"),
            E::AtBoundary => (StatusCode::CONFLICT, "at_boundary"),
            E::BackDisabled => (StatusCode::CONFLICT, "back_disabled"),
            E::NotAtSectionEnd => (StatusCode::CONFLICT, "not_at_section_end"),
        };
        let err = ApiError::new(status, code, message);
        match e {
            E::GatingViolation { missing } => {
                err.with_details(serde_json::to_value(missing).expect("missing items serialize"))
            }
            E::Overlap { annotation_id } => err.with_details(json!([annotation_id])),
            E::TooLong { word_count, max_words } => {
                err.with_details(json!({ "word_count": word_count, "max_words": max_words }))
            }
            E::TooShort { word_count, min_words } => {
                err.with_details(json!({ "word_count": word_count, "min_words": min_words }))
            }
            _ => err,
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Rejected(inner) => inner.into(),
            StoreError::UnknownSurvey(id) => ApiError::new(
                StatusCode::NOT_FOUND,
                "unknown_survey",
                format!("unknown survey '{id}'"),
            ),
            StoreError::UnknownToken(token) => ApiError::unknown_session(&token),
            StoreError::SurveyConflict(_) => {
                ApiError::new(StatusCode::CONFLICT, "survey_conflict", e.to_string())
            }
            StoreError::InvalidSpec(violations) => ApiError::invalid_spec(&violations),
            StoreError::Unavailable(_) => {
                tracing::error!("{e}");
                ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "store_unavailable", e.to_string())
            }
            StoreError::Corrupt(_) | StoreError::Replay(_) => {
                tracing::error!("{e}");
                ApiError::internal(e.to_string())
            }
        }
    }
}

impl From<SpecError> for ApiError {
    fn from(e: SpecError) -> Self {
        ApiError::invalid_spec(&[e.to_violation()])
    }
}
