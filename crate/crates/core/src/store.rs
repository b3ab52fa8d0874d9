// Copyright 2026 The Tassy Authors
// SPDX-License-Identifier: Apache-2.0

//! Durable single-file storage.
//!
//! Three tables live in one SQLite database:
//!
//! * `specs`: survey_id → canonical spec text
//! * `sessions`: token → latest serialized [`Session`]
//! * `events`: append-only log of every accepted [`SessionOp`], numbered per token
//!
//! Every accepted operation writes its event and the new session row in one
//! transaction, so the materialized row always equals a replay of the log.

use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};

use chrono::{DateTime, SecondsFormat, Utc};
use rusqlite::{params, Connection, OptionalExtension, Transaction};
use thiserror::Error;

use crate::export::{ExportBundle, FullDump, SurveyStats};
use crate::session::{self, OpOutcome, ReplayError, Session, SessionError, SessionOp, SessionToken};
use crate::spec::{self, SurveySpec, Violation};

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS specs (
    survey_id  TEXT PRIMARY KEY,
    canonical  TEXT NOT NULL,
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS sessions (
    token      TEXT PRIMARY KEY,
    survey_id  TEXT NOT NULL REFERENCES specs(survey_id),
    state      TEXT NOT NULL,
    complete   INTEGER NOT NULL,
    updated_at TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS sessions_by_survey ON sessions(survey_id, token);
CREATE TABLE IF NOT EXISTS events (
    token   TEXT NOT NULL,
    seq     INTEGER NOT NULL,
    op      TEXT NOT NULL,
    payload TEXT NOT NULL,
    at      TEXT NOT NULL,
    PRIMARY KEY (token, seq)
);
";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store unavailable: {0}")]
    Unavailable(#[from] rusqlite::Error),
    #[error("unknown survey '{0}'")]
    UnknownSurvey(String),
    #[error("unknown session token '{0}'")]
    UnknownToken(String),
    #[error("survey '{0}' already exists with different content")]
    SurveyConflict(String),
    #[error("invalid survey spec ({} violations)", .0.len())]
    InvalidSpec(Vec<Violation>),
    #[error("stored data is corrupt: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Rejected(#[from] SessionError),
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PutSpec {
    Created,
    Unchanged,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredEvent {
    pub seq: u64,
    pub op: SessionOp,
    pub at: DateTime<Utc>,
}

pub struct Store {
    path: PathBuf,
    conn: Mutex<Connection>,
}

fn timestamp(at: DateTime<Utc>) -> String {
    at.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn parse_timestamp(s: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| StoreError::Corrupt(format!("timestamp '{s}': {e}")))
}

fn corrupt(what: &str, e: impl std::fmt::Display) -> StoreError {
    StoreError::Corrupt(format!("{what}: {e}"))
}

impl Store {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let conn = Connection::open(&path)?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        conn.pragma_update(None, "synchronous", "FULL")?;
        conn.pragma_update(None, "foreign_keys", "ON")?;
        conn.busy_timeout(std::time::Duration::from_secs(5))?;
        conn.execute_batch(SCHEMA)?;
        Ok(Self {
            path,
            conn: Mutex::new(conn),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn conn(&self) -> MutexGuard<'_, Connection> {
        // a panic while holding the lock cannot leave a half-written
        // transaction behind, so a poisoned guard is still usable
        self.conn.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Stores a spec under its survey id. Re-publishing identical canonical
    /// bytes is a no-op; different content under an existing id is refused.
    pub fn put_spec(&self, spec: &SurveySpec) -> Result<PutSpec> {
        let violations = spec::validate_spec(spec);
        if !violations.is_empty() {
            return Err(StoreError::InvalidSpec(violations));
        }
        let canonical = spec::canonical_serialize(spec);
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        let existing: Option<String> = tx
            .query_row(
                "SELECT canonical FROM specs WHERE survey_id = ?1",
                [&spec.survey_id],
                |r| r.get(0),
            )
            .optional()?;
        let outcome = match existing {
            Some(text) if text == canonical => PutSpec::Unchanged,
            Some(_) => return Err(StoreError::SurveyConflict(spec.survey_id.clone())),
            None => {
                tx.execute(
                    "INSERT INTO specs (survey_id, canonical, created_at) VALUES (?1, ?2, ?3)",
                    params![spec.survey_id, canonical, timestamp(Utc::now())],
                )?;
                PutSpec::Created
            }
        };
        tx.commit()?;
        Ok(outcome)
    }

    pub fn get_spec(&self, survey_id: &str) -> Result<SurveySpec> {
        let conn = self.conn();
        get_spec(&conn, survey_id)
    }

    pub fn survey_ids(&self) -> Result<Vec<String>> {
        let conn = self.conn();
        let mut stmt = conn.prepare("SELECT survey_id FROM specs ORDER BY survey_id")?;
        let ids = stmt
            .query_map([], |r| r.get(0))?
            .collect::<rusqlite::Result<Vec<String>>>()?;
        Ok(ids)
    }

    /// Persists `session` together with the operation that produced it.
    /// Returns the event sequence number.
    pub fn save_session(&self, session: &Session, op: &SessionOp, at: DateTime<Utc>) -> Result<u64> {
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        let seq = save_in(&tx, session, op, at)?;
        tx.commit()?;
        Ok(seq)
    }

    /// Creates and persists a fresh session for `survey_id`.
    pub fn create_session(&self, survey_id: &str, entropy: u128, now: DateTime<Utc>) -> Result<Session> {
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        let spec = get_spec(&tx, survey_id)?;
        let session = session::create_session(&spec, entropy, now);
        let op = SessionOp::Create {
            session_token: session.session_token.clone(),
        };
        save_in(&tx, &session, &op, now)?;
        tx.commit()?;
        Ok(session)
    }

    /// Loads the session, applies `op` and persists the result, all under one
    /// lock and transaction. A rejected operation leaves the store untouched.
    pub fn apply(
        &self,
        token: &SessionToken,
        op: &SessionOp,
        now: DateTime<Utc>,
    ) -> Result<(Session, SurveySpec, OpOutcome)> {
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        let mut session = load_in(&tx, token.as_str())?;
        let spec = get_spec(&tx, &session.survey_id)?;
        let outcome = session.apply(&spec, op, now)?;
        save_in(&tx, &session, op, now)?;
        tx.commit()?;
        Ok((session, spec, outcome))
    }

    pub fn load_session(&self, token: &str) -> Result<Session> {
        let conn = self.conn();
        load_in(&conn, token)
    }

    pub fn events(&self, token: &str) -> Result<Vec<StoredEvent>> {
        let conn = self.conn();
        let mut stmt =
            conn.prepare("SELECT seq, payload, at FROM events WHERE token = ?1 ORDER BY seq")?;
        let rows = stmt
            .query_map([token], |r| {
                Ok((r.get::<_, i64>(0)?, r.get::<_, String>(1)?, r.get::<_, String>(2)?))
            })?
            .collect::<rusqlite::Result<Vec<_>>>()?;
        if rows.is_empty() {
            return Err(StoreError::UnknownToken(token.to_string()));
        }
        rows.into_iter()
            .map(|(seq, payload, at)| {
                Ok(StoredEvent {
                    seq: seq as u64,
                    op: serde_json::from_str(&payload).map_err(|e| corrupt("event payload", e))?,
                    at: parse_timestamp(&at)?,
                })
            })
            .collect()
    }

    /// Rebuilds a session purely from its event log.
    pub fn replay_session(&self, token: &str) -> Result<Session> {
        let events = self.events(token)?;
        let survey_id = self.load_session(token)?.survey_id;
        let spec = self.get_spec(&survey_id)?;
        Ok(session::replay(&spec, events.iter().map(|e| (&e.op, e.at)))?)
    }

    /// All sessions of a survey, ordered by token.
    pub fn sessions(&self, survey_id: &str) -> Result<Vec<Session>> {
        let conn = self.conn();
        get_spec(&conn, survey_id)?;
        let mut stmt =
            conn.prepare("SELECT state FROM sessions WHERE survey_id = ?1 ORDER BY token")?;
        let rows = stmt
            .query_map([survey_id], |r| r.get::<_, String>(0))?
            .collect::<rusqlite::Result<Vec<_>>>()?;
        rows.iter()
            .map(|s| serde_json::from_str(s).map_err(|e| corrupt("session row", e)))
            .collect()
    }

    pub fn export_bundle(&self, survey_id: &str, completed_only: bool) -> Result<ExportBundle> {
        let sessions = self.sessions(survey_id)?;
        Ok(ExportBundle::build(survey_id, &sessions, completed_only))
    }

    /// Returns `(annotations.csv, responses.csv)`.
    pub fn export_csv(&self, survey_id: &str, completed_only: bool) -> Result<(String, String)> {
        let bundle = self.export_bundle(survey_id, completed_only)?;
        Ok((bundle.annotations_csv(), bundle.responses_csv()))
    }

    pub fn export_full(&self, survey_id: &str) -> Result<String> {
        let spec = self.get_spec(survey_id)?;
        let sessions = self.sessions(survey_id)?;
        Ok(FullDump::new(&spec, &sessions).render())
    }

    pub fn stats(&self, survey_id: &str) -> Result<SurveyStats> {
        let spec = self.get_spec(survey_id)?;
        let sessions = self.sessions(survey_id)?;
        Ok(SurveyStats::compute(&spec, &sessions))
    }
}

fn get_spec(conn: &Connection, survey_id: &str) -> Result<SurveySpec> {
    let text: Option<String> = conn
        .query_row(
            "SELECT canonical FROM specs WHERE survey_id = ?1",
            [survey_id],
            |r| r.get(0),
        )
        .optional()?;
    let text = text.ok_or_else(|| StoreError::UnknownSurvey(survey_id.to_string()))?;
    spec::parse_spec(&text).map_err(|e| corrupt("stored spec", e))
}

fn load_in(conn: &Connection, token: &str) -> Result<Session> {
    let state: Option<String> = conn
        .query_row("SELECT state FROM sessions WHERE token = ?1", [token], |r| {
            r.get(0)
        })
        .optional()?;
    let state = state.ok_or_else(|| StoreError::UnknownToken(token.to_string()))?;
    serde_json::from_str(&state).map_err(|e| corrupt("session row", e))
}

fn save_in(tx: &Transaction<'_>, session: &Session, op: &SessionOp, at: DateTime<Utc>) -> Result<u64> {
    let exists: Option<i64> = tx
        .query_row(
            "SELECT 1 FROM specs WHERE survey_id = ?1",
            [&session.survey_id],
            |r| r.get(0),
        )
        .optional()?;
    if exists.is_none() {
        return Err(StoreError::UnknownSurvey(session.survey_id.clone()));
    }
    let token = session.session_token.as_str();
    let seq: i64 = tx.query_row(
        "SELECT COALESCE(MAX(seq), 0) + 1 FROM events WHERE token = ?1",
        [token],
        |r| r.get(0),
    )?;
    let payload = serde_json::to_string(op).expect("op serialization is infallible");
    tx.execute(
        "INSERT INTO events (token, seq, op, payload, at) VALUES (?1, ?2, ?3, ?4, ?5)",
        params![token, seq, op.name(), payload, timestamp(at)],
    )?;
    let state = serde_json::to_string(session).expect("session serialization is infallible");
    tx.execute(
        "INSERT INTO sessions (token, survey_id, state, complete, updated_at)
         VALUES (?1, ?2, ?3, ?4, ?5)
         ON CONFLICT(token) DO UPDATE SET
            state = excluded.state,
            complete = excluded.complete,
            updated_at = excluded.updated_at",
        params![
            token,
            session.survey_id,
            state,
            session.is_complete(),
            timestamp(session.updated_at)
        ],
    )?;
    Ok(seq as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::AnswerValue;
    use chrono::TimeZone;

    const SPEC: &str = r#"{"survey_id":"x","title":"X","sections":[
      {"section_id":"a","label":"A","progress_noun":"Sentence","ordering":"random","questions":[
        {"question_id":"q1","prompt":"p","annotation_task":{"text":"one two three four","max_words":2}},
        {"question_id":"q2","prompt":"p","inputs":[{"input_id":"n","label":"n","mandatory":true,
          "type":"numeric","min_value":0,"max_value":10}]}
      ]}]}"#;

    fn open() -> (tempfile::TempDir, Store) {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path().join("t.db")).unwrap();
        store.put_spec(&spec::parse_spec(SPEC).unwrap()).unwrap();
        (dir, store)
    }

    fn t(s: i64) -> DateTime<Utc> {
        Utc.timestamp_opt(1_700_000_000, 0).unwrap() + chrono::Duration::nanoseconds(s * 1_000_000_123)
    }

    #[test]
    fn put_spec_is_idempotent_and_detects_conflicts() {
        let (_d, store) = open();
        let mut spec = spec::parse_spec(SPEC).unwrap();
        assert_eq!(store.put_spec(&spec).unwrap(), PutSpec::Unchanged);
        spec.title = "changed".into();
        assert!(matches!(store.put_spec(&spec), Err(StoreError::SurveyConflict(_))));
        spec.survey_id = String::new();
        assert!(matches!(store.put_spec(&spec), Err(StoreError::InvalidSpec(_))));
        assert_eq!(store.survey_ids().unwrap(), vec!["x".to_string()]);
    }

    #[test]
    fn save_then_load_round_trips() {
        let (_d, store) = open();
        let a = store.create_session("x", 1, t(0)).unwrap();
        let b = store.create_session("x", 2, t(0)).unwrap();
        let (a2, _, _) = store
            .apply(
                &a.session_token,
                &SessionOp::AddAnnotation { question_id: "q1".into(), raw_start: 0, raw_end: 3 },
                t(1),
            )
            .unwrap();
        assert_eq!(store.load_session(a.session_token.as_str()).unwrap(), a2);
        assert_eq!(store.load_session(b.session_token.as_str()).unwrap(), b);
        assert_ne!(a2, a);
    }

    #[test]
    fn unknown_token_and_survey() {
        let (_d, store) = open();
        assert!(matches!(store.load_session("nope"), Err(StoreError::UnknownToken(_))));
        assert!(matches!(store.create_session("nope", 1, t(0)), Err(StoreError::UnknownSurvey(_))));
        assert!(matches!(store.export_csv("nope", false), Err(StoreError::UnknownSurvey(_))));
        let spec = spec::parse_spec(&SPEC.replace("\"x\"", "\"y\"")).unwrap();
        let orphan = session::create_session(&spec, 3, t(0));
        let op = SessionOp::Create { session_token: orphan.session_token.clone() };
        assert!(matches!(
            store.save_session(&orphan, &op, t(0)),
            Err(StoreError::UnknownSurvey(_))
        ));
    }

    #[test]
    fn rejected_op_leaves_store_untouched() {
        let (_d, store) = open();
        let s = store.create_session("x", 1, t(0)).unwrap();
        let bad = SessionOp::RecordAnswer {
            question_id: "q2".into(),
            input_id: "n".into(),
            value: AnswerValue::Number { value: 11 },
        };
        assert!(matches!(
            store.apply(&s.session_token, &bad, t(1)),
            Err(StoreError::Rejected(SessionError::RangeViolation(_)))
        ));
        assert_eq!(store.events(s.session_token.as_str()).unwrap().len(), 1);
        assert_eq!(store.load_session(s.session_token.as_str()).unwrap(), s);
    }

    #[test]
    fn replay_matches_row_with_subsecond_timestamps() {
        let (_d, store) = open();
        let s = store.create_session("x", 42, t(0)).unwrap();
        let ops = [
            SessionOp::AddAnnotation { question_id: "q1".into(), raw_start: 0, raw_end: 3 },
            SessionOp::AddAnnotation { question_id: "q1".into(), raw_start: 8, raw_end: 18 },
            SessionOp::RemoveAnnotation { annotation_id: "a1".into() },
            SessionOp::RecordAnswer {
                question_id: "q2".into(),
                input_id: "n".into(),
                value: AnswerValue::Number { value: 3 },
            },
        ];
        for (i, op) in ops.iter().enumerate() {
            store.apply(&s.session_token, op, t(i as i64 + 1)).unwrap();
        }
        let token = s.session_token.as_str();
        let events = store.events(token).unwrap();
        assert_eq!(events.iter().map(|e| e.seq).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
        assert_eq!(store.replay_session(token).unwrap(), store.load_session(token).unwrap());
    }

    #[test]
    fn reopen_sees_committed_state() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.db");
        let token = {
            let store = Store::open(&path).unwrap();
            store.put_spec(&spec::parse_spec(SPEC).unwrap()).unwrap();
            let s = store.create_session("x", 9, t(0)).unwrap();
            store
                .apply(
                    &s.session_token,
                    &SessionOp::AddAnnotation { question_id: "q1".into(), raw_start: 0, raw_end: 3 },
                    t(1),
                )
                .unwrap();
            s.session_token
        };
        let store = Store::open(&path).unwrap();
        let s = store.load_session(token.as_str()).unwrap();
        assert_eq!(s.annotation_seq, 1);
    }

    #[test]
    fn exports_are_deterministic() {
        let (_d, store) = open();
        for e in 0..5 {
            let s = store.create_session("x", e * 7919, t(0)).unwrap();
            store
                .apply(
                    &s.session_token,
                    &SessionOp::AddAnnotation { question_id: "q1".into(), raw_start: 4, raw_end: 7 },
                    t(1),
                )
                .unwrap();
        }
        assert_eq!(store.export_csv("x", false).unwrap(), store.export_csv("x", false).unwrap());
        assert_eq!(store.export_full("x").unwrap(), store.export_full("x").unwrap());
        let (ann, resp) = store.export_csv("x", false).unwrap();
        assert_eq!(ann.lines().count(), 6);
        assert_eq!(resp.lines().count(), 1);
        assert_eq!(store.export_csv("x", true).unwrap().0.lines().count(), 1);
        let stats = store.stats("x").unwrap();
        assert_eq!((stats.sessions_started, stats.annotations_total), (5, 5));
    }
}
