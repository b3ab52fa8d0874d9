// Copyright 2026 The Tassy Authors
// SPDX-License-Identifier: Apache-2.0

//! Per-participant survey state machine.
//!
//! A [`Session`] walks through the sections of a [`SurveySpec`] in authored
//! order. Within a section questions are presented in a per-session
//! permutation. Every transition validates completely before mutating, so a
//! failed operation leaves the session untouched.
//!
//! Transitions take the current time as an argument. Replaying the same
//! operations with the same timestamps yields an identical session.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{self, Annotation, AnnotationVerdict, SnapError};
use crate::shuffle::{section_seed, seeded_shuffle};
use crate::spec::{InputKind, InputSpec, Ordering, Question, Section, SurveySpec};

/// 128-bit capability token, rendered as 32 lowercase hex characters.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SessionToken(String);

impl SessionToken {
    pub fn from_entropy(entropy: u128) -> Self {
        Self(format!("{entropy:032x}"))
    }

    pub fn parse(s: &str) -> Option<Self> {
        let ok = s.len() == 32 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'));
        ok.then(|| Self(s.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn entropy(&self) -> u128 {
        u128::from_str_radix(&self.0, 16).expect("validated on construction")
    }
}

impl fmt::Display for SessionToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for SessionToken {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::parse(&s).ok_or_else(|| format!("invalid session token '{s}'"))
    }
}

impl From<SessionToken> for String {
    fn from(t: SessionToken) -> Self {
        t.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnswerValue {
    Choice {
        value: String,
    },
    ChoiceSet {
        values: Vec<String>,
        #[serde(default)]
        free_additions: Vec<String>,
    },
    Number {
        value: i64,
    },
    SliderPos {
        value: u32,
    },
    Text {
        value: String,
    },
}

impl AnswerValue {
    pub fn type_name(&self) -> &'static str {
        match self {
            AnswerValue::Choice { .. } => "choice",
            AnswerValue::ChoiceSet { .. } => "choice_set",
            AnswerValue::Number { .. } => "number",
            AnswerValue::SliderPos { .. } => "slider_pos",
            AnswerValue::Text { .. } => "text",
        }
    }

    /// Flat rendering used by the CSV export. Choice sets join authored values
    /// with `|` and prefix participant additions with `+`.
    pub fn render(&self) -> String {
        match self {
            AnswerValue::Choice { value } | AnswerValue::Text { value } => value.clone(),
            AnswerValue::ChoiceSet {
                values,
                free_additions,
            } => values
                .iter()
                .cloned()
                .chain(free_additions.iter().map(|a| format!("+{a}")))
                .collect::<Vec<_>>()
                .join("|"),
            AnswerValue::Number { value } => value.to_string(),
            AnswerValue::SliderPos { value } => value.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Cursor {
    At { section: usize, position: usize },
    Complete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionState {
    pub section_id: String,
    /// `order[position]` is the authored index of the question shown at `position`.
    pub order: Vec<usize>,
    pub submitted: bool,
    /// question_id → input_id → value
    pub answers: BTreeMap<String, BTreeMap<String, AnswerValue>>,
    /// question_id → annotations in creation order
    pub annotations: BTreeMap<String, Vec<Annotation>>,
}

impl SectionState {
    fn annotations_for(&self, question_id: &str) -> &[Annotation] {
        self.annotations
            .get(question_id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    fn answers_for(&self, question_id: &str) -> Option<&BTreeMap<String, AnswerValue>> {
        self.answers.get(question_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_token: SessionToken,
    pub survey_id: String,
    pub started_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub section_states: Vec<SectionState>,
    pub cursor: Cursor,
    /// Number of annotations ever created; drives annotation ids.
    pub annotation_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Progress {
    pub section_label: String,
    #[serde(rename = "noun")]
    pub progress_noun: String,
    pub index: usize,
    pub total: usize,
}

impl fmt::Display for Progress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} of {}", self.progress_noun, self.index, self.total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NavFlags {
    pub can_prev: bool,
    pub can_next: bool,
    pub can_submit: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct View<'a> {
    pub section_id: &'a str,
    pub question: &'a Question,
    pub progress: Progress,
    pub answers: BTreeMap<String, AnswerValue>,
    pub annotations: Vec<Annotation>,
    pub nav: NavFlags,
}

/// Something that keeps NEXT or SUBMIT disabled.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Missing {
    Input { question_id: String, input_id: String },
    Annotation { question_id: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("session is complete")]
    SessionComplete,
    #[error("session belongs to survey '{session}', not '{spec}'")]
    SurveyMismatch { session: String, spec: String },
    #[error("section '{section_id}' has been submitted")]
    SectionFrozen { section_id: String },
    #[error("section '{section_id}' has not been reached yet")]
    SectionNotStarted { section_id: String },
    #[error("section '{section_id}' was already submitted")]
    AlreadySubmitted { section_id: String },
    #[error("unknown section '{section_id}'")]
    UnknownSection { section_id: String },
    #[error("unknown question '{question_id}'")]
    UnknownQuestion { question_id: String },
    #[error("question '{question_id}' has no input '{input_id}'")]
    UnknownInput {
        question_id: String,
        input_id: String,
    },
    #[error("unknown annotation '{annotation_id}'")]
    UnknownAnnotation { annotation_id: String },
    #[error("expected a {expected} answer, got {found}")]
    TypeMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("{0}")]
    RangeViolation(String),
    #[error("'{value}' is not an option of this input")]
    UnknownOption { value: String },
    #[error("this input does not accept additional answers")]
    NotExtensible,
    #[error("question '{question_id}' has no annotation task")]
    NoAnnotationTask { question_id: String },
    #[error("selection covers {word_count} words, at least {min_words} required")]
    TooShort { word_count: usize, min_words: u32 },
    #[error("selection covers {word_count} words, at most {max_words} allowed")]
    TooLong { word_count: usize, max_words: u32 },
    #[error("selection lies outside the text")]
    SelectionOutOfRange,
    #[error("selection contains no words")]
    EmptySelection,
    #[error("selection overlaps annotation '{annotation_id}'")]
    Overlap { annotation_id: String },
    #[error("required inputs are missing")]
    GatingViolation { missing: Vec<Missing> },
    #[error("no further question in this direction")]
    AtBoundary,
    #[error("this section does not allow going back")]
    BackDisabled,
    #[error("a section can only be submitted from its last question")]
    NotAtSectionEnd,
}

/// Recorded form of every successful transition, used by the event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum SessionOp {
    Create {
        session_token: SessionToken,
    },
    RecordAnswer {
        question_id: String,
        input_id: String,
        value: AnswerValue,
    },
    AddAnnotation {
        question_id: String,
        raw_start: usize,
        raw_end: usize,
    },
    RemoveAnnotation {
        annotation_id: String,
    },
    Advance,
    GoBack,
    SubmitSection {
        section_id: String,
    },
}

impl SessionOp {
    pub fn name(&self) -> &'static str {
        match self {
            SessionOp::Create { .. } => "create",
            SessionOp::RecordAnswer { .. } => "record_answer",
            SessionOp::AddAnnotation { .. } => "add_annotation",
            SessionOp::RemoveAnnotation { .. } => "remove_annotation",
            SessionOp::Advance => "advance",
            SessionOp::GoBack => "go_back",
            SessionOp::SubmitSection { .. } => "submit_section",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OpOutcome {
    Done,
    Annotated(Annotation),
}

pub fn create_session(spec: &SurveySpec, entropy: u128, now: DateTime<Utc>) -> Session {
    let token = SessionToken::from_entropy(entropy);
    let section_states = spec
        .sections
        .iter()
        .map(|section| {
            let n = section.questions.len();
            let order = match section.ordering {
                Ordering::Fixed => (0..n).collect(),
                Ordering::Random => {
                    seeded_shuffle(n, section_seed(token.as_str(), &section.section_id))
                }
            };
            SectionState {
                section_id: section.section_id.clone(),
                order,
                submitted: false,
                answers: BTreeMap::new(),
                annotations: BTreeMap::new(),
            }
        })
        .collect();
    Session {
        session_token: token,
        survey_id: spec.survey_id.clone(),
        started_at: now,
        updated_at: now,
        section_states,
        cursor: Cursor::At {
            section: 0,
            position: 0,
        },
        annotation_seq: 0,
    }
}

fn input_satisfied(input: &InputSpec, answer: Option<&AnswerValue>) -> bool {
    let Some(answer) = answer else {
        return !input.mandatory;
    };
    match (&input.kind, answer) {
        (
            InputKind::MultiSelect { min_selections, .. },
            AnswerValue::ChoiceSet {
                values,
                free_additions,
            },
        ) => values.len() + free_additions.len() >= *min_selections as usize,
        (InputKind::FreeText { .. }, AnswerValue::Text { value }) => {
            !input.mandatory || !value.trim().is_empty()
        }
        _ => true,
    }
}

fn question_missing(state: &SectionState, question: &Question) -> Vec<Missing> {
    let answers = state.answers_for(&question.question_id);
    let mut missing = Vec::new();
    if let Some(task) = &question.annotation_task {
        if task.required && state.annotations_for(&question.question_id).is_empty() {
            missing.push(Missing::Annotation {
                question_id: question.question_id.clone(),
            });
        }
    }
    for input in &question.inputs {
        if !input_satisfied(input, answers.and_then(|a| a.get(&input.input_id))) {
            missing.push(Missing::Input {
                question_id: question.question_id.clone(),
                input_id: input.input_id.clone(),
            });
        }
    }
    missing
}

fn section_missing(state: &SectionState, section: &Section) -> Vec<Missing> {
    section
        .questions
        .iter()
        .flat_map(|q| question_missing(state, q))
        .collect()
}

fn check_answer(input: &InputSpec, value: &AnswerValue) -> Result<(), SessionError> {
    let mismatch = |expected| SessionError::TypeMismatch {
        expected,
        found: value.type_name(),
    };
    match (&input.kind, value) {
        (InputKind::SingleSelect { options }, AnswerValue::Choice { value }) => {
            if !options.iter().any(|o| &o.value == value) {
                return Err(SessionError::UnknownOption {
                    value: value.clone(),
                });
            }
        }
        (
            InputKind::MultiSelect {
                options,
                extensible,
                ..
            },
            AnswerValue::ChoiceSet {
                values,
                free_additions,
            },
        ) => {
            for (i, v) in values.iter().enumerate() {
                if !options.iter().any(|o| &o.value == v) {
                    return Err(SessionError::UnknownOption { value: v.clone() });
                }
                if values[..i].contains(v) {
                    return Err(SessionError::RangeViolation(format!(
                        "option '{v}' selected twice"
                    )));
                }
            }
            if !free_additions.is_empty() && !extensible {
                return Err(SessionError::NotExtensible);
            }
            if free_additions.iter().any(|a| a.trim().is_empty()) {
                return Err(SessionError::RangeViolation(
                    "additional answers must not be blank".into(),
                ));
            }
        }
        (
            InputKind::Numeric {
                min_value,
                max_value,
                step,
            },
            AnswerValue::Number { value },
        ) => {
            if value < min_value || value > max_value {
                return Err(SessionError::RangeViolation(format!(
                    "{value} is outside [{min_value}, {max_value}]"
                )));
            }
            if (i128::from(*value) - i128::from(*min_value)) % i128::from(*step) != 0 {
                return Err(SessionError::RangeViolation(format!(
                    "{value} is not on a step of {step} from {min_value}"
                )));
            }
        }
        (InputKind::Slider { positions, .. }, AnswerValue::SliderPos { value }) => {
            if value >= positions {
                return Err(SessionError::RangeViolation(format!(
                    "slider position {value} is outside 0..={}",
                    positions - 1
                )));
            }
        }
        (InputKind::FreeText { max_chars }, AnswerValue::Text { value }) => {
            let n = value.chars().count();
            if n > *max_chars as usize {
                return Err(SessionError::RangeViolation(format!(
                    "text has {n} characters, at most {max_chars} allowed"
                )));
            }
        }
        (InputKind::SingleSelect { .. }, _) => return Err(mismatch("choice")),
        (InputKind::MultiSelect { .. }, _) => return Err(mismatch("choice_set")),
        (InputKind::Numeric { .. }, _) => return Err(mismatch("number")),
        (InputKind::Slider { .. }, _) => return Err(mismatch("slider_pos")),
        (InputKind::FreeText { .. }, _) => return Err(mismatch("text")),
    }
    Ok(())
}

impl Session {
    pub fn is_complete(&self) -> bool {
        self.cursor == Cursor::Complete
    }

    fn ensure_spec(&self, spec: &SurveySpec) -> Result<(), SessionError> {
        if self.survey_id != spec.survey_id || self.section_states.len() != spec.sections.len() {
            return Err(SessionError::SurveyMismatch {
                session: self.survey_id.clone(),
                spec: spec.survey_id.clone(),
            });
        }
        Ok(())
    }

    fn current(&self) -> Result<(usize, usize), SessionError> {
        match self.cursor {
            Cursor::At { section, position } => Ok((section, position)),
            Cursor::Complete => Err(SessionError::SessionComplete),
        }
    }

    /// Mutations are only allowed in the section under the cursor.
    fn ensure_writable(&self, section_index: usize) -> Result<(), SessionError> {
        let state = &self.section_states[section_index];
        if state.submitted {
            return Err(SessionError::SectionFrozen {
                section_id: state.section_id.clone(),
            });
        }
        match self.cursor {
            Cursor::At { section, .. } if section == section_index => Ok(()),
            Cursor::At { section, .. } if section < section_index => {
                Err(SessionError::SectionNotStarted {
                    section_id: state.section_id.clone(),
                })
            }
            _ => Err(SessionError::SectionFrozen {
                section_id: state.section_id.clone(),
            }),
        }
    }

    fn nav_flags(&self, spec: &SurveySpec, si: usize, position: usize) -> NavFlags {
        let section = &spec.sections[si];
        let state = &self.section_states[si];
        let question = &section.questions[state.order[position]];
        let last = position + 1 == section.questions.len();
        NavFlags {
            can_prev: section.allow_back && position > 0 && !state.submitted,
            can_next: !last && !state.submitted && question_missing(state, question).is_empty(),
            can_submit: last && !state.submitted && section_missing(state, section).is_empty(),
        }
    }

    pub fn current_view<'a>(&self, spec: &'a SurveySpec) -> Result<View<'a>, SessionError> {
        self.ensure_spec(spec)?;
        let (si, position) = self.current()?;
        let section = &spec.sections[si];
        let state = &self.section_states[si];
        let question = &section.questions[state.order[position]];
        Ok(View {
            section_id: &section.section_id,
            question,
            progress: Progress {
                section_label: section.label.clone(),
                progress_noun: section.progress_noun.clone(),
                index: position + 1,
                total: section.questions.len(),
            },
            answers: state
                .answers_for(&question.question_id)
                .cloned()
                .unwrap_or_default(),
            annotations: state.annotations_for(&question.question_id).to_vec(),
            nav: self.nav_flags(spec, si, position),
        })
    }

    pub fn record_answer(
        &mut self,
        spec: &SurveySpec,
        question_id: &str,
        input_id: &str,
        value: AnswerValue,
        now: DateTime<Utc>,
    ) -> Result<(), SessionError> {
        self.ensure_spec(spec)?;
        let (si, _, question) =
            spec.locate_question(question_id)
                .ok_or_else(|| SessionError::UnknownQuestion {
                    question_id: question_id.to_string(),
                })?;
        let input = question
            .input(input_id)
            .ok_or_else(|| SessionError::UnknownInput {
                question_id: question_id.to_string(),
                input_id: input_id.to_string(),
            })?;
        self.ensure_writable(si)?;
        check_answer(input, &value)?;
        self.section_states[si]
            .answers
            .entry(question_id.to_string())
            .or_default()
            .insert(input_id.to_string(), value);
        self.updated_at = now;
        Ok(())
    }

    pub fn add_annotation(
        &mut self,
        spec: &SurveySpec,
        question_id: &str,
        raw_start: usize,
        raw_end: usize,
        now: DateTime<Utc>,
    ) -> Result<Annotation, SessionError> {
        self.ensure_spec(spec)?;
        let (si, _, question) =
            spec.locate_question(question_id)
                .ok_or_else(|| SessionError::UnknownQuestion {
                    question_id: question_id.to_string(),
                })?;
        let task = question
            .annotation_task
            .as_ref()
            .ok_or_else(|| SessionError::NoAnnotationTask {
                question_id: question_id.to_string(),
            })?;
        self.ensure_writable(si)?;

        let span = annotation::snap_to_words(&task.text, raw_start, raw_end).map_err(|e| match e {
            SnapError::OutOfRange { .. } => SessionError::SelectionOutOfRange,
            SnapError::EmptySelection => SessionError::EmptySelection,
        })?;
        let word_count = annotation::word_count(&task.text, span);
        match annotation::check_bounds(task, span) {
            AnnotationVerdict::Ok => {}
            AnnotationVerdict::TooLong => {
                return Err(SessionError::TooLong {
                    word_count,
                    max_words: task.max_words,
                })
            }
            AnnotationVerdict::TooShort => {
                return Err(SessionError::TooShort {
                    word_count,
                    min_words: task.min_words,
                })
            }
            AnnotationVerdict::OutOfRange => return Err(SessionError::SelectionOutOfRange),
            AnnotationVerdict::Overlap(annotation_id) => {
                return Err(SessionError::Overlap { annotation_id })
            }
        }
        let state = &mut self.section_states[si];
        if let AnnotationVerdict::Overlap(annotation_id) =
            annotation::check_overlap(state.annotations_for(question_id), span)
        {
            return Err(SessionError::Overlap { annotation_id });
        }

        let created = Annotation {
            annotation_id: format!("a{}", self.annotation_seq + 1),
            question_id: question_id.to_string(),
            span,
            extracted: annotation::extract(&task.text, span),
            word_count,
        };
        state
            .annotations
            .entry(question_id.to_string())
            .or_default()
            .push(created.clone());
        self.annotation_seq += 1;
        self.updated_at = now;
        Ok(created)
    }

    pub fn remove_annotation(
        &mut self,
        spec: &SurveySpec,
        annotation_id: &str,
        now: DateTime<Utc>,
    ) -> Result<(), SessionError> {
        self.ensure_spec(spec)?;
        let found = self.section_states.iter().enumerate().find_map(|(si, state)| {
            state.annotations.iter().find_map(|(qid, list)| {
                list.iter()
                    .position(|a| a.annotation_id == annotation_id)
                    .map(|idx| (si, qid.clone(), idx))
            })
        });
        let (si, question_id, idx) = found.ok_or_else(|| SessionError::UnknownAnnotation {
            annotation_id: annotation_id.to_string(),
        })?;
        self.ensure_writable(si)?;
        let list = self.section_states[si]
            .annotations
            .get_mut(&question_id)
            .expect("located above");
        list.remove(idx);
        if list.is_empty() {
            self.section_states[si].annotations.remove(&question_id);
        }
        self.updated_at = now;
        Ok(())
    }

    pub fn advance(&mut self, spec: &SurveySpec, now: DateTime<Utc>) -> Result<(), SessionError> {
        self.ensure_spec(spec)?;
        let (si, position) = self.current()?;
        let section = &spec.sections[si];
        let state = &self.section_states[si];
        if position + 1 >= section.questions.len() {
            return Err(SessionError::AtBoundary);
        }
        let missing = question_missing(state, &section.questions[state.order[position]]);
        if !missing.is_empty() {
            return Err(SessionError::GatingViolation { missing });
        }
        self.cursor = Cursor::At {
            section: si,
            position: position + 1,
        };
        self.updated_at = now;
        Ok(())
    }

    pub fn go_back(&mut self, spec: &SurveySpec, now: DateTime<Utc>) -> Result<(), SessionError> {
        self.ensure_spec(spec)?;
        let (si, position) = self.current()?;
        if position == 0 {
            return Err(SessionError::AtBoundary);
        }
        if !spec.sections[si].allow_back {
            return Err(SessionError::BackDisabled);
        }
        self.cursor = Cursor::At {
            section: si,
            position: position - 1,
        };
        self.updated_at = now;
        Ok(())
    }

    pub fn submit_section(
        &mut self,
        spec: &SurveySpec,
        section_id: &str,
        now: DateTime<Utc>,
    ) -> Result<(), SessionError> {
        self.ensure_spec(spec)?;
        let (si, section) = spec
            .section(section_id)
            .ok_or_else(|| SessionError::UnknownSection {
                section_id: section_id.to_string(),
            })?;
        let state = &self.section_states[si];
        if state.submitted {
            return Err(SessionError::AlreadySubmitted {
                section_id: section_id.to_string(),
            });
        }
        let (current, position) = self.current()?;
        if current != si {
            return Err(SessionError::SectionNotStarted {
                section_id: section_id.to_string(),
            });
        }
        if position + 1 != section.questions.len() {
            return Err(SessionError::NotAtSectionEnd);
        }
        let missing = section_missing(state, section);
        if !missing.is_empty() {
            return Err(SessionError::GatingViolation { missing });
        }
        self.section_states[si].submitted = true;
        self.cursor = if si + 1 < spec.sections.len() {
            Cursor::At {
                section: si + 1,
                position: 0,
            }
        } else {
            Cursor::Complete
        };
        self.updated_at = now;
        Ok(())
    }

    /// Applies a recorded operation. `Create` is not a transition; use
    /// [`create_session`] or [`replay`].
    pub fn apply(
        &mut self,
        spec: &SurveySpec,
        op: &SessionOp,
        now: DateTime<Utc>,
    ) -> Result<OpOutcome, SessionError> {
        match op {
            SessionOp::Create { .. } => Err(SessionError::SurveyMismatch {
                session: self.survey_id.clone(),
                spec: spec.survey_id.clone(),
            }),
            SessionOp::RecordAnswer {
                question_id,
                input_id,
                value,
            } => self
                .record_answer(spec, question_id, input_id, value.clone(), now)
                .map(|_| OpOutcome::Done),
            SessionOp::AddAnnotation {
                question_id,
                raw_start,
                raw_end,
            } => self
                .add_annotation(spec, question_id, *raw_start, *raw_end, now)
                .map(OpOutcome::Annotated),
            SessionOp::RemoveAnnotation { annotation_id } => self
                .remove_annotation(spec, annotation_id, now)
                .map(|_| OpOutcome::Done),
            SessionOp::Advance => self.advance(spec, now).map(|_| OpOutcome::Done),
            SessionOp::GoBack => self.go_back(spec, now).map(|_| OpOutcome::Done),
            SessionOp::SubmitSection { section_id } => self
                .submit_section(spec, section_id, now)
                .map(|_| OpOutcome::Done),
        }
    }

    /// Every stored annotation, in section then question-id then creation order.
    pub fn all_annotations(&self) -> impl Iterator<Item = (&SectionState, &Annotation)> {
        self.section_states
            .iter()
            .flat_map(|s| s.annotations.values().flatten().map(move |a| (s, a)))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error("event log is empty")]
    Empty,
    #[error("event log must start with a create event")]
    MissingCreate,
    #[error("event {index} ({op}) failed: {source}")]
    Rejected {
        index: usize,
        op: &'static str,
        source: SessionError,
    },
}

/// Rebuilds a session from its operation log.
pub fn replay<'a, I>(spec: &SurveySpec, events: I) -> Result<Session, ReplayError>
where
    I: IntoIterator<Item = (&'a SessionOp, DateTime<Utc>)>,
{
    let mut events = events.into_iter();
    let (first, at) = events.next().ok_or(ReplayError::Empty)?;
    let SessionOp::Create { session_token } = first else {
        return Err(ReplayError::MissingCreate);
    };
    let mut session = create_session(spec, session_token.entropy(), at);
    for (index, (op, at)) in events.enumerate() {
        session
            .apply(spec, op, at)
            .map_err(|source| ReplayError::Rejected {
                index: index + 1,
                op: op.name(),
                source,
            })?;
    }
    Ok(session)
}

/// Checks the stored-annotation invariants: pairwise disjoint per question,
/// word-aligned, and within the task's word bounds.
pub fn annotations_consistent(spec: &SurveySpec, session: &Session) -> bool {
    session.section_states.iter().all(|state| {
        state.annotations.iter().all(|(qid, list)| {
            let Some(task) = spec
                .locate_question(qid)
                .and_then(|(_, _, q)| q.annotation_task.as_ref())
            else {
                return false;
            };
            let aligned = list.iter().all(|a| {
                annotation::snap_to_words(&task.text, a.span.start, a.span.end) == Ok(a.span)
                    && annotation::check_bounds(task, a.span) == AnnotationVerdict::Ok
                    && annotation::extract(&task.text, a.span) == a.extracted
            });
            let disjoint = list.iter().enumerate().all(|(i, a)| {
                list[i + 1..]
                    .iter()
                    .all(|b: &Annotation| !a.span.overlaps(&b.span))
            });
            aligned && disjoint
        })
    })
}
