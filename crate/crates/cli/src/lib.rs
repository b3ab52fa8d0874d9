// Copyright 2026 The Tassy Authors
// SPDX-License-Identifier: Apache-2.0

//! The `tassy` command line.
//!
//! Exit status is 0 on success, 1 when the input was understood but
//! rejected (spec violations, unknown survey, bind failure) and 2 for
//! usage and I/O errors.

use std::fmt;
use std::io::{self, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::Utc;
use clap::{Parser, Subcommand, ValueEnum};
use tassy_core::spec::{self, SurveySpec};
use tassy_core::store::PutSpec;
use tassy_core::{Store, StoreError, Violation};
use tassy_server::AppState;

pub const EXIT_REJECTED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "tassy", version, about = "Run and administer text-annotation surveys")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a survey spec and print every violation.
    Validate { spec: PathBuf },
    /// Store a survey spec in the database.
    Publish {
        #[arg(long)]
        db: PathBuf,
        spec: PathBuf,
    },
    /// Serve the HTTP API and, optionally, the participant UI bundle.
    Serve {
        #[arg(long)]
        db: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
        /// Directory with the built participant UI.
        #[arg(long)]
        ui: Option<PathBuf>,
        /// Environment variable holding the admin bearer token.
        #[arg(long, default_value = "TASSY_ADMIN_TOKEN")]
        admin_token_env: String,
    },
    /// Create participant sessions and print one link per session.
    Mint {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        survey: String,
        #[arg(long, default_value_t = 1)]
        count: u32,
        #[arg(long, default_value = "http://127.0.0.1:8080")]
        base_url: String,
    },
    /// Write the collected data to files.
    Export {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        survey: String,
        #[arg(long, value_enum)]
        format: ExportFormat,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Skip sessions that have not submitted every section.
        #[arg(long)]
        completed_only: bool,
    },
    /// Print session and annotation counts.
    Stats {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        survey: String,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Csv,
    Full,
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn rejected(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_REJECTED,
            message: message.into(),
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Unavailable(_) | StoreError::Corrupt(_) => CliError::usage(e.to_string()),
            _ => CliError::rejected(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::usage(format!("{}: {e}", path.display()))
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { spec } => cmd_validate(&spec, out),
        Command::Publish { db, spec } => cmd_publish(&db, &spec, out),
        Command::Serve {
            db,
            port,
            bind,
            ui,
            admin_token_env,
        } => {
            let token = std::env::var(&admin_token_env).unwrap_or_default();
            if token.trim().is_empty() {
                return Err(CliError::usage(format!(
                    "environment variable {admin_token_env} must hold the admin token"
                )));
            }
            cmd_serve(&db, SocketAddr::new(bind, port), ui, token, out)
        }
        Command::Mint {
            db,
            survey,
            count,
            base_url,
        } => cmd_mint(&db, &survey, count, &base_url, out),
        Command::Export {
            db,
            survey,
            format,
            out: dir,
            completed_only,
        } => cmd_export(&db, &survey, format, &dir, completed_only, out),
        Command::Stats { db, survey, json } => cmd_stats(&db, &survey, json, out),
    }
}

/// Parses and validates a spec file. Parse failures are reported as a
/// single violation, like the HTTP API does.
pub fn check_spec(text: &str) -> Result<SurveySpec, Vec<Violation>> {
    let parsed = spec::parse_spec_structure(text).map_err(|e| vec![e.to_violation()])?;
    let violations = spec::validate_spec(&parsed);
    if violations.is_empty() {
        Ok(parsed)
    } else {
        Err(violations)
    }
}

fn read_spec(path: &Path, out: &mut dyn Write) -> Result<SurveySpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    check_spec(&text).map_err(|violations| {
        for v in &violations {
            let _ = writeln!(out, "{v}");
        }
        CliError::rejected(format!(
            "{}: {} violation(s)",
            path.display(),
            violations.len()
        ))
    })
}

pub fn cmd_validate(path: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let spec = read_spec(path, out)?;
    let questions = spec.questions().count();
    writeln!(
        out,
        "ok: {} ({} sections, {} questions)",
        spec.survey_id,
        spec.sections.len(),
        questions
    )
    .map_err(|e| io_error(path, e))
}

/// Opens a database file, creating it if its directory exists.
fn open_store(db: &Path) -> Result<Store, CliError> {
    let parent = db.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(parent) = parent {
        if !parent.is_dir() {
            return Err(CliError::usage(format!(
                "directory {} does not exist",
                parent.display()
            )));
        }
    }
    Ok(Store::open(db)?)
}

fn open_existing_store(db: &Path) -> Result<Store, CliError> {
    if !db.is_file() {
        return Err(CliError::usage(format!("database {} does not exist", db.display())));
    }
    open_store(db)
}

pub fn cmd_publish(db: &Path, path: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let spec = read_spec(path, out)?;
    let store = open_store(db)?;
    let verb = match store.put_spec(&spec)? {
        PutSpec::Created => "published",
        PutSpec::Unchanged => "unchanged",
    };
    writeln!(out, "{verb}: {}", spec.survey_id).map_err(|e| io_error(path, e))
}

pub fn cmd_serve(
    db: &Path,
    addr: SocketAddr,
    ui: Option<PathBuf>,
    admin_token: String,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    if let Some(dir) = &ui {
        if !dir.is_dir() {
            return Err(CliError::usage(format!("UI directory {} does not exist", dir.display())));
        }
    }
    let store = Arc::new(open_store(db)?);
    let app = tassy_server::router(AppState::new(store, admin_token), ui);
    let runtime = tokio::runtime::Runtime::new()
        .map_err(|e| CliError::usage(format!("cannot start runtime: {e}")))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::rejected(format!("cannot bind {addr}: {e}")))?;
        let local = listener
            .local_addr()
            .map_err(|e| CliError::rejected(e.to_string()))?;
        let _ = writeln!(out, "listening on http://{local}");
        let _ = out.flush();
        tracing::info!(%local, db = %db.display(), "serving");
        tassy_server::serve(listener, app, shutdown_signal())
            .await
            .map_err(|e| CliError::rejected(format!("server error: {e}")))
    })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
    tracing::info!("shutting down");
}

pub fn participant_link(base_url: &str, token: &str) -> String {
    format!("{}/?session={token}", base_url.trim_end_matches('/'))
}

pub fn cmd_mint(
    db: &Path,
    survey: &str,
    count: u32,
    base_url: &str,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let store = open_existing_store(db)?;
    for _ in 0..count {
        let session = store.create_session(survey, rand::random(), Utc::now())?;
        writeln!(out, "{}", participant_link(base_url, session.session_token.as_str()))
            .map_err(|e| io_error(db, e))?;
    }
    Ok(())
}

pub fn export_file_name(survey: &str, suffix: &str) -> String {
    format!("{survey}-{suffix}")
}

pub fn cmd_export(
    db: &Path,
    survey: &str,
    format: ExportFormat,
    dir: &Path,
    completed_only: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let store = open_existing_store(db)?;
    let files = match format {
        ExportFormat::Csv => {
            let (annotations, responses) = store.export_csv(survey, completed_only)?;
            vec![
                (export_file_name(survey, "annotations.csv"), annotations),
                (export_file_name(survey, "responses.csv"), responses),
            ]
        }
        ExportFormat::Full => vec![(export_file_name(survey, "full.json"), store.export_full(survey)?)],
    };
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    for (name, contents) in files {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
        writeln!(out, "{}", path.display()).map_err(|e| io_error(&path, e))?;
    }
    Ok(())
}

pub fn cmd_stats(db: &Path, survey: &str, json: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let store = open_existing_store(db)?;
    let stats = store.stats(survey)?;
    let written = if json {
        writeln!(out, "{}", serde_json::to_string_pretty(&stats).expect("stats serialize"))
    } else {
        let width = stats
            .per_question
            .iter()
            .map(|(q, _)| q.len())
            .chain([20])
            .max()
            .unwrap_or(20);
        let mut text = String::new();
        for (label, value) in [
            ("survey", stats.survey_id.clone()),
            ("sessions started", stats.sessions_started.to_string()),
            ("sessions completed", stats.sessions_completed.to_string()),
            ("annotations total", stats.annotations_total.to_string()),
        ] {
            text.push_str(&format!("{label:<width$}  {value}\n"));
        }
        if !stats.per_question.is_empty() {
            text.push_str(&format!("\n{:<width$}  annotations\n", "question"));
            for (q, n) in &stats.per_question {
                text.push_str(&format!("{q:<width$}  {n}\n"));
            }
        }
        out.write_all(text.as_bytes())
    };
    written.map_err(|e| io_error(db, e))
}
