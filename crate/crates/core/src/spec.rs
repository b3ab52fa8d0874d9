// Copyright 2026 The Tassy Authors
// SPDX-License-Identifier: Apache-2.0

//! Declarative survey specification.
//!
//! A survey is a UTF-8 JSON document with top-level keys `survey_id`, `title`
//! and `sections`. Parsing fills every defaulted field, so a parsed spec is
//! always fully explicit and [`canonical_serialize`] writes every field back
//! out. Equal specs therefore serialize to identical bytes regardless of the
//! key order or omitted defaults in their source.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurveySpec {
    pub survey_id: String,
    pub title: String,
    pub sections: Vec<Section>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    Fixed,
    Random,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Section {
    pub section_id: String,
    /// Header shown above every question, e.g. "Annotation Task".
    pub label: String,
    /// Unit used by the progress indicator, e.g. "Sentence" in "Sentence 4 of 20".
    pub progress_noun: String,
    pub ordering: Ordering,
    #[serde(default = "default_true")]
    pub allow_back: bool,
    pub questions: Vec<Question>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Question {
    pub question_id: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instructions: Option<String>,
    /// Coding book or other long-form instructions, opened in a modal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instructions_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation_task: Option<AnnotationTask>,
    #[serde(default)]
    pub inputs: Vec<InputSpec>,
}

impl Question {
    pub fn input(&self, input_id: &str) -> Option<&InputSpec> {
        self.inputs.iter().find(|i| i.input_id == input_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationTask {
    pub text: String,
    #[serde(default = "default_one")]
    pub min_words: u32,
    pub max_words: u32,
    #[serde(default)]
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSpec {
    pub input_id: String,
    pub label: String,
    #[serde(default)]
    pub mandatory: bool,
    #[serde(flatten)]
    pub kind: InputKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputKind {
    SingleSelect {
        options: Vec<OptionItem>,
    },
    MultiSelect {
        options: Vec<OptionItem>,
        #[serde(default)]
        extensible: bool,
        #[serde(default)]
        min_selections: u32,
    },
    Numeric {
        min_value: i64,
        max_value: i64,
        #[serde(default = "default_step")]
        step: i64,
    },
    /// Discrete slider with `positions` stops, answered as a 0-based stop index.
    Slider {
        left_label: String,
        right_label: String,
        positions: u32,
    },
    FreeText {
        max_chars: u32,
    },
}

impl InputKind {
    pub fn type_name(&self) -> &'static str {
        match self {
            InputKind::SingleSelect { .. } => "single_select",
            InputKind::MultiSelect { .. } => "multi_select",
            InputKind::Numeric { .. } => "numeric",
            InputKind::Slider { .. } => "slider",
            InputKind::FreeText { .. } => "free_text",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionItem {
    pub value: String,
    pub display: String,
}

fn default_true() -> bool {
    true
}

fn default_one() -> u32 {
    1
}

fn default_step() -> i64 {
    1
}

impl SurveySpec {
    pub fn section(&self, section_id: &str) -> Option<(usize, &Section)> {
        self.sections
            .iter()
            .enumerate()
            .find(|(_, s)| s.section_id == section_id)
    }

    /// Locates a question by id, returning `(section index, question index, question)`.
    pub fn locate_question(&self, question_id: &str) -> Option<(usize, usize, &Question)> {
        self.sections.iter().enumerate().find_map(|(si, s)| {
            s.questions
                .iter()
                .enumerate()
                .find(|(_, q)| q.question_id == question_id)
                .map(|(qi, q)| (si, qi, q))
        })
    }

    pub fn questions(&self) -> impl Iterator<Item = (&Section, &Question)> {
        self.sections
            .iter()
            .flat_map(|s| s.questions.iter().map(move |q| (s, q)))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpecError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
}

impl SpecError {
    /// The error as a single violation; syntax errors have an empty path.
    pub fn to_violation(&self) -> Violation {
        match self {
            SpecError::Syntax { line, column, message } => Violation {
                path: String::new(),
                rule: "syntax".into(),
                message: format!("line {line}, column {column}: {message}"),
            },
            SpecError::Schema { path, message } => Violation {
                path: path.clone(),
                rule: "schema".into(),
                message: message.clone(),
            },
        }
    }
}

/// One broken invariant, located by a dotted path such as
/// `sections[0].questions[2].annotation_task.max_words`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub rule: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{} [{}]", self.message, self.rule)
        } else {
            write!(f, "{}: {} [{}]", self.path, self.message, self.rule)
        }
    }
}

/// Parses the document structure and fills defaults without checking the
/// cross-field invariants. Use [`validate_spec`] afterwards to list them all.
pub fn parse_spec_structure(raw: &str) -> Result<SurveySpec, SpecError> {
    let value: serde_json::Value = serde_json::from_str(raw).map_err(|e| SpecError::Syntax {
        line: e.line(),
        column: e.column(),
        message: strip_position(&e.to_string()),
    })?;
    from_value(value)
}

/// Converts an already-decoded JSON value, e.g. the `spec` member of a full dump.
pub fn from_value(value: serde_json::Value) -> Result<SurveySpec, SpecError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        SpecError::Schema {
            path: if path == "." { String::new() } else { path },
            message: e.into_inner().to_string(),
        }
    })
}

/// Parses and validates a spec. The first violation, if any, is reported as a
/// [`SpecError::Schema`].
pub fn parse_spec(raw: &str) -> Result<SurveySpec, SpecError> {
    let spec = parse_spec_structure(raw)?;
    match validate_spec(&spec).into_iter().next() {
        None => Ok(spec),
        Some(v) => Err(SpecError::Schema {
            path: v.path,
            message: v.message,
        }),
    }
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(idx) => msg[..idx].to_string(),
        None => msg.to_string(),
    }
}

/// Deterministic pretty-printed JSON with a trailing newline.
pub fn canonical_serialize(spec: &SurveySpec) -> String {
    let mut out = serde_json::to_string_pretty(spec).expect("spec serialization is infallible");
    out.push('\n');
    out
}

pub fn validate_spec(spec: &SurveySpec) -> Vec<Violation> {
    let mut v = Validator::default();
    v.survey(spec);
    v.out
}

#[derive(Default)]
struct Validator {
    out: Vec<Violation>,
}

impl Validator {
    fn push(&mut self, path: impl Into<String>, rule: &str, message: impl Into<String>) {
        self.out.push(Violation {
            path: path.into(),
            rule: rule.to_string(),
            message: message.into(),
        });
    }

    fn survey(&mut self, spec: &SurveySpec) {
        if spec.survey_id.trim().is_empty() {
            self.push("survey_id", "survey_id.non_empty", "survey_id must not be empty");
        }
        if spec.sections.is_empty() {
            self.push("sections", "sections.non_empty", "a survey needs at least one section");
        }

        let mut section_ids: HashMap<&str, String> = HashMap::new();
        let mut question_ids: HashMap<&str, String> = HashMap::new();
        for (si, section) in spec.sections.iter().enumerate() {
            let sp = format!("sections[{si}]");
            let id_path = format!("{sp}.section_id");
            if section.section_id.trim().is_empty() {
                self.push(&id_path, "section_id.non_empty", "section_id must not be empty");
            } else if let Some(first) = section_ids.get(section.section_id.as_str()) {
                let msg = format!(
                    "duplicate section_id '{}' (first defined at {first})",
                    section.section_id
                );
                self.push(&id_path, "section_id.unique", msg);
            } else {
                section_ids.insert(&section.section_id, id_path);
            }
            if section.progress_noun.trim().is_empty() {
                self.push(
                    format!("{sp}.progress_noun"),
                    "progress_noun.non_empty",
                    "progress_noun must not be empty",
                );
            }
            if section.questions.is_empty() {
                self.push(
                    format!("{sp}.questions"),
                    "section.questions.non_empty",
                    "a section needs at least one question",
                );
            }
            for (qi, question) in section.questions.iter().enumerate() {
                let qp = format!("{sp}.questions[{qi}]");
                let id_path = format!("{qp}.question_id");
                if question.question_id.trim().is_empty() {
                    self.push(&id_path, "question_id.non_empty", "question_id must not be empty");
                } else if let Some(first) = question_ids.get(question.question_id.as_str()) {
                    let msg = format!(
                        "duplicate question_id '{}' (first defined at {first})",
                        question.question_id
                    );
                    self.push(&id_path, "question_id.unique", msg);
                } else {
                    question_ids.insert(&question.question_id, id_path);
                }
                self.question(&qp, question);
            }
        }
    }

    fn question(&mut self, qp: &str, q: &Question) {
        if q.annotation_task.is_none() && q.inputs.is_empty() {
            self.push(
                qp,
                "question.content",
                "a question needs an annotation_task or at least one input",
            );
        }
        if let Some(url) = &q.instructions_url {
            if let Err(e) = url::Url::parse(url) {
                self.push(
                    format!("{qp}.instructions_url"),
                    "instructions_url.valid",
                    format!("not an absolute URL: {e}"),
                );
            }
        }
        if let Some(task) = &q.annotation_task {
            let tp = format!("{qp}.annotation_task");
            if task.text.trim().is_empty() {
                self.push(
                    format!("{tp}.text"),
                    "annotation.text_non_empty",
                    "annotation text must not be blank",
                );
            }
            if task.min_words < 1 {
                self.push(
                    format!("{tp}.min_words"),
                    "annotation.min_words",
                    "min_words must be at least 1",
                );
            } else if task.min_words > task.max_words {
                self.push(
                    format!("{tp}.max_words"),
                    "annotation.word_bounds",
                    format!(
                        "max_words ({}) must be at least min_words ({})",
                        task.max_words, task.min_words
                    ),
                );
            }
        }
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (ii, input) in q.inputs.iter().enumerate() {
            let ip = format!("{qp}.inputs[{ii}]");
            if input.input_id.trim().is_empty() {
                self.push(
                    format!("{ip}.input_id"),
                    "input_id.non_empty",
                    "input_id must not be empty",
                );
            } else if let Some(first) = seen.get(input.input_id.as_str()) {
                self.push(
                    format!("{ip}.input_id"),
                    "input_id.unique",
                    format!(
                        "duplicate input_id '{}' (first defined at {qp}.inputs[{first}])",
                        input.input_id
                    ),
                );
            } else {
                seen.insert(&input.input_id, ii);
            }
            self.input(&ip, &input.kind);
        }
    }

    fn input(&mut self, ip: &str, kind: &InputKind) {
        match kind {
            InputKind::SingleSelect { options } => {
                if options.len() < 2 {
                    self.push(
                        format!("{ip}.options"),
                        "single_select.options",
                        "a single-select needs at least 2 options",
                    );
                }
                self.options(ip, options);
            }
            InputKind::MultiSelect {
                options,
                extensible,
                min_selections,
            } => {
                if options.is_empty() {
                    self.push(
                        format!("{ip}.options"),
                        "multi_select.options",
                        "a multi-select needs at least 1 option",
                    );
                }
                if !extensible && *min_selections as usize > options.len() {
                    self.push(
                        format!("{ip}.min_selections"),
                        "multi_select.min_selections",
                        format!(
                            "min_selections ({min_selections}) exceeds the {} available options",
                            options.len()
                        ),
                    );
                }
                self.options(ip, options);
            }
            InputKind::Numeric {
                min_value,
                max_value,
                step,
            } => {
                if min_value >= max_value {
                    self.push(
                        format!("{ip}.max_value"),
                        "numeric.range",
                        format!("min_value ({min_value}) must be below max_value ({max_value})"),
                    );
                }
                if *step < 1 {
                    self.push(format!("{ip}.step"), "numeric.step", "step must be at least 1");
                }
            }
            InputKind::Slider { positions, .. } => {
                if *positions < 2 {
                    self.push(
                        format!("{ip}.positions"),
                        "slider.positions",
                        "a slider needs at least 2 positions",
                    );
                }
            }
            InputKind::FreeText { max_chars } => {
                if *max_chars < 1 {
                    self.push(
                        format!("{ip}.max_chars"),
                        "free_text.max_chars",
                        "max_chars must be at least 1",
                    );
                }
            }
        }
    }

    fn options(&mut self, ip: &str, options: &[OptionItem]) {
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (oi, opt) in options.iter().enumerate() {
            let op = format!("{ip}.options[{oi}].value");
            if opt.value.is_empty() {
                self.push(op, "option.value_non_empty", "option value must not be empty");
            } else if let Some(first) = seen.get(opt.value.as_str()) {
                self.push(
                    op,
                    "option.value_unique",
                    format!("duplicate option value '{}' (first at index {first})", opt.value),
                );
            } else {
                seen.insert(&opt.value, oi);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "survey_id": "s1",
        "title": "Minimal",
        "sections": [{
            "section_id": "main",
            "label": "Main",
            "progress_noun": "Question",
            "ordering": "fixed",
            "questions": [{
                "question_id": "q1",
                "prompt": "Pick one",
                "inputs": [{
                    "input_id": "choice",
                    "label": "Choice",
                    "type": "single_select",
                    "options": [
                        {"value": "a", "display": "A"},
                        {"value": "b", "display": "B"}
                    ]
                }]
            }]
        }]
    }"#;

    fn with_task(task: &str) -> String {
        format!(
            r#"{{"survey_id":"s","title":"t","sections":[{{"section_id":"a","label":"A",
            "progress_noun":"Sentence","ordering":"random","questions":[{{"question_id":"q",
            "prompt":"p","annotation_task":{task}}}]}}]}}"#
        )
    }

    #[test]
    fn minimal_spec_gets_defaults() {
        let spec = parse_spec(MINIMAL).unwrap();
        let section = &spec.sections[0];
        assert!(section.allow_back);
        assert_eq!(section.ordering, Ordering::Fixed);
        let input = &section.questions[0].inputs[0];
        assert!(!input.mandatory);
        assert_eq!(input.kind.type_name(), "single_select");
    }

    #[test]
    fn annotation_defaults() {
        let spec = parse_spec(&with_task(r#"{"text":"a b c","max_words":6}"#)).unwrap();
        let task = spec.sections[0].questions[0].annotation_task.as_ref().unwrap();
        assert_eq!(task.min_words, 1);
        assert!(!task.required);
    }

    #[test]
    fn max_words_zero_is_schema_error_at_field() {
        let err = parse_spec(&with_task(r#"{"text":"a b c","max_words":0}"#)).unwrap_err();
        match err {
            SpecError::Schema { path, .. } => {
                assert_eq!(path, "sections[0].questions[0].annotation_task.max_words")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_error_carries_line() {
        let err = parse_spec("{\n  \"survey_id\": \"x\",\n  oops\n}").unwrap_err();
        match err {
            SpecError::Syntax { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn type_error_carries_path() {
        let raw = with_task(r#"{"text":"a b c","max_words":-1}"#);
        match parse_spec(&raw).unwrap_err() {
            SpecError::Schema { path, .. } => {
                assert_eq!(path, "sections[0].questions[0].annotation_task.max_words")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_field_rejected() {
        let raw = with_task(r#"{"text":"a","max_words":2,"maxwords":3}"#);
        assert!(matches!(
            parse_spec(&raw),
            Err(SpecError::Schema { .. })
        ));
    }

    #[test]
    fn duplicate_question_id_names_both_paths() {
        let mut spec = parse_spec(MINIMAL).unwrap();
        let mut second = spec.sections[0].clone();
        second.section_id = "other".into();
        spec.sections.push(second);
        let violations = validate_spec(&spec);
        assert_eq!(violations.len(), 1);
        let v = &violations[0];
        assert_eq!(v.rule, "question_id.unique");
        assert_eq!(v.path, "sections[1].questions[0].question_id");
        assert!(v.message.contains("sections[0].questions[0].question_id"));
    }

    #[test]
    fn multiselect_cardinality() {
        let mut spec = parse_spec(MINIMAL).unwrap();
        spec.sections[0].questions[0].inputs[0].kind = InputKind::MultiSelect {
            options: vec![
                OptionItem { value: "a".into(), display: "A".into() },
                OptionItem { value: "b".into(), display: "B".into() },
            ],
            extensible: false,
            min_selections: 3,
        };
        let violations = validate_spec(&spec);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].rule, "multi_select.min_selections");
        assert_eq!(violations[0].path, "sections[0].questions[0].inputs[0].min_selections");

        if let InputKind::MultiSelect { extensible, .. } =
            &mut spec.sections[0].questions[0].inputs[0].kind
        {
            *extensible = true;
        }
        assert!(validate_spec(&spec).is_empty());
    }

    #[test]
    fn empty_question_and_single_option() {
        let mut spec = parse_spec(MINIMAL).unwrap();
        if let InputKind::SingleSelect { options } = &mut spec.sections[0].questions[0].inputs[0].kind {
            options.pop();
        }
        spec.sections[0].questions.push(Question {
            question_id: "q2".into(),
            prompt: "nothing".into(),
            instructions: None,
            instructions_url: Some("not a url".into()),
            annotation_task: None,
            inputs: vec![],
        });
        let rules: Vec<_> = validate_spec(&spec).into_iter().map(|v| v.rule).collect();
        assert_eq!(
            rules,
            ["single_select.options", "question.content", "instructions_url.valid"]
        );
    }

    #[test]
    fn key_order_does_not_change_canonical_bytes() {
        let reordered = r#"{
            "sections": [{
                "questions": [{
                    "inputs": [{
                        "options": [
                            {"display": "A", "value": "a"},
                            {"display": "B", "value": "b"}
                        ],
                        "type": "single_select",
                        "label": "Choice",
                        "input_id": "choice"
                    }],
                    "prompt": "Pick one",
                    "question_id": "q1"
                }],
                "ordering": "fixed",
                "progress_noun": "Question",
                "label": "Main",
                "section_id": "main"
            }],
            "title": "Minimal",
            "survey_id": "s1"
        }"#;
        let a = canonical_serialize(&parse_spec(MINIMAL).unwrap());
        let b = canonical_serialize(&parse_spec(reordered).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn minimal_round_trip() {
        let spec = parse_spec(MINIMAL).unwrap();
        let text = canonical_serialize(&spec);
        let again = parse_spec(&text).unwrap();
        assert_eq!(spec, again);
        assert_eq!(text, canonical_serialize(&again));
    }
}
