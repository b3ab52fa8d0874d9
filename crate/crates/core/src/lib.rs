// Copyright 2026 The Tassy Authors
// SPDX-License-Identifier: Apache-2.0

//! Core of a self-hosted survey system whose questions can ask participants
//! to mark spans of a text, alongside ordinary survey inputs.
//!
//! * [`spec`]: the declarative survey file, its validation and canonical form
//! * [`annotation`]: word tokenization and span checks
//! * [`shuffle`]: reproducible per-section question order
//! * [`session`]: the participant state machine
//! * [`store`]: SQLite persistence with an operation log
//! * [`export`]: CSV and full-dump exports, survey statistics

pub mod annotation;
pub mod export;
pub mod session;
pub mod shuffle;
pub mod spec;
pub mod store;

pub use annotation::{Annotation, AnnotationVerdict, WordSpan};
pub use export::{ExportBundle, FullDump, SurveyStats};
pub use session::{
    create_session, AnswerValue, Cursor, Missing, NavFlags, Progress, Session, SessionError,
    SessionOp, SessionToken, View,
};
pub use spec::{
    canonical_serialize, parse_spec, validate_spec, AnnotationTask, InputKind, InputSpec,
    Question, Section, SpecError, SurveySpec, Violation,
};
pub use store::{Store, StoreError};
