// Copyright 2026 The Tassy Authors
// SPDX-License-Identifier: Apache-2.0

use tassy_core::spec::{self, InputKind, Ordering};

const DEMO: &str = include_str!("../../../demo/media_bias.survey");

#[test]
fn demo_parses_and_validates() {
    let spec = spec::parse_spec(DEMO).unwrap();
    assert!(spec::validate_spec(&spec).is_empty());
    assert_eq!(spec.sections.len(), 3);

    let annotation = &spec.sections[0];
    assert_eq!(annotation.label, "Annotation Task");
    assert_eq!(annotation.progress_noun, "Sentence");
    assert_eq!(annotation.ordering, Ordering::Random);
    assert!(!annotation.allow_back);
    assert_eq!(annotation.questions.len(), 20);
    for q in &annotation.questions {
        let task = q.annotation_task.as_ref().unwrap();
        assert_eq!(task.max_words, 6);
        assert!(!task.required);
        let selects: Vec<_> = q
            .inputs
            .iter()
            .filter(|i| i.mandatory && matches!(i.kind, InputKind::SingleSelect { .. }))
            .collect();
        assert_eq!(selects.len(), 2);
        assert!(q.instructions_url.is_some());
    }

    let background = &spec.sections[1];
    assert_eq!(background.questions.len(), 4);
    assert!(matches!(
        background.questions[1].inputs[0].kind,
        InputKind::Numeric { min_value: 0, max_value: 120, step: 1 }
    ));

    let news = &spec.sections[2];
    assert_eq!(news.questions.len(), 3);
    match &news.questions[0].inputs[0].kind {
        InputKind::Slider { left_label, right_label, positions } => {
            assert_eq!(left_label, "Very liberal");
            assert_eq!(right_label, "Very conservative");
            assert_eq!(*positions, 7);
        }
        other => panic!("expected a slider, got {other:?}"),
    }
    match &news.questions[2].inputs[0].kind {
        InputKind::MultiSelect { extensible, min_selections, options } => {
            assert!(*extensible);
            assert_eq!(*min_selections, 1);
            assert!(options.iter().any(|o| o.display == "Reuters"));
        }
        other => panic!("expected a multi-select, got {other:?}"),
    }
}

#[test]
fn demo_file_is_in_canonical_form() {
    let spec = spec::parse_spec(DEMO).unwrap();
    assert_eq!(spec::canonical_serialize(&spec), DEMO);
}

#[test]
fn demo_texts_survive_round_trip() {
    // oracle: read the texts straight from the raw JSON tree
    let raw: serde_json::Value = serde_json::from_str(DEMO).unwrap();
    let expected: Vec<&str> = raw["sections"][0]["questions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|q| q["annotation_task"]["text"].as_str().unwrap())
        .collect();
    assert_eq!(expected.len(), 20);

    let spec = spec::parse_spec(DEMO).unwrap();
    let again = spec::parse_spec(&spec::canonical_serialize(&spec)).unwrap();
    assert_eq!(again, spec);
    let texts: Vec<&str> = again.sections[0]
        .questions
        .iter()
        .map(|q| q.annotation_task.as_ref().unwrap().text.as_str())
        .collect();
    assert_eq!(texts, expected);
}
