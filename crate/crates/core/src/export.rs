// Copyright 2026 The Tassy Authors
// SPDX-License-Identifier: Apache-2.0

//! Dataset export.
//!
//! Annotations and answers are flattened into two tables keyed by session
//! token, so that each participant's annotations can be joined with their
//! background answers. CSV output follows RFC 4180 with LF line endings.

use serde::{Deserialize, Serialize};

use crate::session::Session;
use crate::spec::SurveySpec;

pub const DUMP_FORMAT: &str = "tassy-dump/1";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AnnotationRow {
    pub survey_id: String,
    pub session_token: String,
    pub question_id: String,
    pub span_start: usize,
    pub span_end: usize,
    pub extracted_text: String,
    pub word_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRow {
    pub survey_id: String,
    pub session_token: String,
    pub section_id: String,
    pub question_id: String,
    pub input_id: String,
    pub value_rendered: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportBundle {
    pub annotations: Vec<AnnotationRow>,
    pub responses: Vec<ResponseRow>,
    pub completed_only: bool,
}

impl ExportBundle {
    pub fn build<'a, I>(survey_id: &str, sessions: I, completed_only: bool) -> Self
    where
        I: IntoIterator<Item = &'a Session>,
    {
        let mut annotations = Vec::new();
        let mut responses = Vec::new();
        for session in sessions {
            if session.survey_id != survey_id || (completed_only && !session.is_complete()) {
                continue;
            }
            let token = session.session_token.as_str();
            for (_, a) in session.all_annotations() {
                annotations.push(AnnotationRow {
                    survey_id: survey_id.to_string(),
                    session_token: token.to_string(),
                    question_id: a.question_id.clone(),
                    span_start: a.span.start,
                    span_end: a.span.end,
                    extracted_text: a.extracted.clone(),
                    word_count: a.word_count,
                });
            }
            for state in &session.section_states {
                for (question_id, inputs) in &state.answers {
                    for (input_id, value) in inputs {
                        responses.push(ResponseRow {
                            survey_id: survey_id.to_string(),
                            session_token: token.to_string(),
                            section_id: state.section_id.clone(),
                            question_id: question_id.clone(),
                            input_id: input_id.clone(),
                            value_rendered: value.render(),
                        });
                    }
                }
            }
        }
        annotations.sort_by(|a, b| {
            (&a.session_token, &a.question_id, a.span_start)
                .cmp(&(&b.session_token, &b.question_id, b.span_start))
        });
        // input ids are only unique per question, so question_id breaks ties
        responses.sort_by(|a, b| {
            (&a.session_token, &a.section_id, &a.input_id, &a.question_id)
                .cmp(&(&b.session_token, &b.section_id, &b.input_id, &b.question_id))
        });
        Self {
            annotations,
            responses,
            completed_only,
        }
    }

    pub fn annotations_csv(&self) -> String {
        to_csv(&ANNOTATION_COLUMNS, &self.annotations)
    }

    pub fn responses_csv(&self) -> String {
        to_csv(&RESPONSE_COLUMNS, &self.responses)
    }
}

pub const ANNOTATION_COLUMNS: [&str; 7] = [
    "survey_id",
    "session_token",
    "question_id",
    "span_start",
    "span_end",
    "extracted_text",
    "word_count",
];

pub const RESPONSE_COLUMNS: [&str; 6] = [
    "survey_id",
    "session_token",
    "section_id",
    "question_id",
    "input_id",
    "value_rendered",
];

fn to_csv<T: Serialize>(header: &[&str], rows: &[T]) -> String {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(false)
        .from_writer(Vec::new());
    writer.write_record(header).expect("writing to memory");
    for row in rows {
        writer.serialize(row).expect("writing to memory");
    }
    let bytes = writer.into_inner().expect("writing to memory");
    String::from_utf8(bytes).expect("csv output is UTF-8")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpedSession {
    pub complete: bool,
    pub session: Session,
}

/// Everything stored for one survey in a single JSON document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FullDump {
    pub format: String,
    pub survey_id: String,
    pub spec: SurveySpec,
    pub sessions: Vec<DumpedSession>,
}

impl FullDump {
    pub fn new<'a, I>(spec: &SurveySpec, sessions: I) -> Self
    where
        I: IntoIterator<Item = &'a Session>,
    {
        let mut sessions: Vec<DumpedSession> = sessions
            .into_iter()
            .map(|s| DumpedSession {
                complete: s.is_complete(),
                session: s.clone(),
            })
            .collect();
        sessions.sort_by(|a, b| a.session.session_token.cmp(&b.session.session_token));
        Self {
            format: DUMP_FORMAT.to_string(),
            survey_id: spec.survey_id.clone(),
            spec: spec.clone(),
            sessions,
        }
    }

    pub fn render(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("dump serialization is infallible");
        out.push('\n');
        out
    }

    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn bundle(&self, completed_only: bool) -> ExportBundle {
        ExportBundle::build(
            &self.survey_id,
            self.sessions.iter().map(|d| &d.session),
            completed_only,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SurveyStats {
    pub survey_id: String,
    pub sessions_started: usize,
    pub sessions_completed: usize,
    pub annotations_total: usize,
    /// Annotation count for every question with an annotation task, in authored order.
    pub per_question: Vec<(String, usize)>,
}

impl SurveyStats {
    pub fn compute<'a, I>(spec: &SurveySpec, sessions: I) -> Self
    where
        I: IntoIterator<Item = &'a Session>,
    {
        let mut per_question: Vec<(String, usize)> = spec
            .questions()
            .filter(|(_, q)| q.annotation_task.is_some())
            .map(|(_, q)| (q.question_id.clone(), 0))
            .collect();
        let mut stats = Self {
            survey_id: spec.survey_id.clone(),
            sessions_started: 0,
            sessions_completed: 0,
            annotations_total: 0,
            per_question: Vec::new(),
        };
        for session in sessions {
            stats.sessions_started += 1;
            stats.sessions_completed += usize::from(session.is_complete());
            for (_, a) in session.all_annotations() {
                stats.annotations_total += 1;
                if let Some(slot) = per_question.iter_mut().find(|(q, _)| *q == a.question_id) {
                    slot.1 += 1;
                }
            }
        }
        stats.per_question = per_question;
        stats
    }
}
