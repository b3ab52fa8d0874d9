// Copyright 2026 The Tassy Authors
// SPDX-License-Identifier: Apache-2.0

//! Word-aligned text spans.
//!
//! All offsets count Unicode scalar values (Rust `char`s), never bytes or
//! UTF-16 units. A word is a maximal run of non-whitespace characters, so
//! punctuation stays attached to the word it touches.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spec::AnnotationTask;

/// Half-open character range `[start, end)` into a task text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WordSpan {
    pub start: usize,
    pub end: usize,
}

impl WordSpan {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    /// True when the spans share at least one character.
    pub fn overlaps(&self, other: &WordSpan) -> bool {
        !self.is_empty() && !other.is_empty() && self.start < other.end && other.start < self.end
    }

    pub fn contains(&self, other: &WordSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub annotation_id: String,
    pub question_id: String,
    pub span: WordSpan,
    pub extracted: String,
    pub word_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnnotationVerdict {
    Ok,
    TooShort,
    TooLong,
    OutOfRange,
    Overlap(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SnapError {
    #[error("selection [{start}, {end}) lies outside a text of {len} characters")]
    OutOfRange { start: usize, end: usize, len: usize },
    #[error("selection contains no words")]
    EmptySelection,
}

pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Substring by character offsets. Panics if the span is outside `text`.
pub fn extract(text: &str, span: WordSpan) -> String {
    text.chars().skip(span.start).take(span.len()).collect()
}

pub fn tokenize_words(text: &str) -> Vec<WordSpan> {
    let mut words = Vec::new();
    let mut start = None;
    let mut pos = 0;
    for c in text.chars() {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(pos),
            (true, Some(s)) => {
                words.push(WordSpan::new(s, pos));
                start = None;
            }
            _ => {}
        }
        pos += 1;
    }
    if let Some(s) = start {
        words.push(WordSpan::new(s, pos));
    }
    words
}

/// Expands a raw selection outward to whole words and trims whitespace at
/// both ends. Every word sharing at least one character with the selection
/// is included.
pub fn snap_to_words(text: &str, start: usize, end: usize) -> Result<WordSpan, SnapError> {
    let len = char_len(text);
    if start > end || end > len {
        return Err(SnapError::OutOfRange { start, end, len });
    }
    let raw = WordSpan::new(start, end);
    let mut touched = tokenize_words(text).into_iter().filter(|w| w.overlaps(&raw));
    let first = touched.next().ok_or(SnapError::EmptySelection)?;
    let last = touched.next_back().unwrap_or(first);
    Ok(WordSpan::new(first.start, last.end))
}

pub fn word_count(text: &str, span: WordSpan) -> usize {
    tokenize_words(text)
        .iter()
        .filter(|w| span.contains(w))
        .count()
}

pub fn check_bounds(task: &AnnotationTask, span: WordSpan) -> AnnotationVerdict {
    if span.is_empty() || span.end > char_len(&task.text) {
        return AnnotationVerdict::OutOfRange;
    }
    let n = word_count(&task.text, span);
    if n > task.max_words as usize {
        AnnotationVerdict::TooLong
    } else if n < task.min_words as usize {
        AnnotationVerdict::TooShort
    } else {
        AnnotationVerdict::Ok
    }
}

pub fn check_overlap(existing: &[Annotation], candidate: WordSpan) -> AnnotationVerdict {
    existing
        .iter()
        .find(|a| a.span.overlaps(&candidate))
        .map(|a| AnnotationVerdict::Overlap(a.annotation_id.clone()))
        .unwrap_or(AnnotationVerdict::Ok)
}
