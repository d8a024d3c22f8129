//! Summary JSON, per-trial CSV and plot CSV.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::CliError;
use crate::experiments::{payload_columns, plot_rows, SummaryRecord, TrialRecord};

pub const SUMMARY_FILE: &str = "summary.json";
pub const TRIALS_FILE: &str = "trials.csv";
pub const PLOT_FILE: &str = "plot.csv";

pub fn timestamp() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    secs.to_string()
}

/// Hex SHA-256 of the serialised config echo.
pub fn run_id(config_echo: &str) -> String {
    Sha256::digest(config_echo.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Pretty JSON; `timestamp` is the first field and sits alone on line 2.
pub fn summary_json(summary: &SummaryRecord) -> String {
    let mut s = serde_json::to_string_pretty(summary).expect("summary serialises");
    s.push('\n');
    s
}

/// The summary with its timestamp line removed.
pub fn strip_timestamp(json: &str) -> String {
    json.lines()
        .filter(|l| !l.trim_start().starts_with("\"timestamp\""))
        .collect::<Vec<_>>()
        .join("\n")
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn write_trials_csv(path: &Path, cfg: &ExperimentConfig, trials: &[TrialRecord]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    let mut header: Vec<String> = ["experiment", "n", "m", "trial", "stream_id"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(payload_columns(cfg));
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    for r in trials {
        let mut row = vec![
            r.experiment.name().to_string(),
            r.n.to_string(),
            r.m.map(|m| m.to_string()).unwrap_or_default(),
            r.trial.to_string(),
            r.stream_id.to_string(),
        ];
        row.extend(r.payload.iter().map(|&v| fmt_f64(v)));
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_trials_csv(path: &Path) -> Result<Vec<TrialRecord>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let bad = |what: &str| io_err(path, format!("malformed {what}"));
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        if rec.len() < 5 {
            return Err(bad("row"));
        }
        let experiment: ExperimentKind = rec[0].parse().map_err(|_| bad("experiment"))?;
        let m = if rec[2].is_empty() {
            None
        } else {
            Some(rec[2].parse().map_err(|_| bad("m"))?)
        };
        let payload = rec
            .iter()
            .skip(5)
            .map(|s| s.parse::<f64>().map_err(|_| bad("payload")))
            .collect::<Result<Vec<_>, _>>()?;
        out.push(TrialRecord {
            experiment,
            n: rec[1].parse().map_err(|_| bad("n"))?,
            m,
            trial: rec[3].parse().map_err(|_| bad("trial"))?,
            stream_id: rec[4].parse().map_err(|_| bad("stream_id"))?,
            payload,
        });
    }
    Ok(out)
}

pub fn write_plot_csv(path: &Path, summary: &SummaryRecord) -> Result<bool, CliError> {
    let Some(rows) = plot_rows(summary) else {
        return Ok(false);
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(["n", "probability", "stderr", "fitted"])
        .map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record([r.n.to_string(), fmt_f64(r.probability), fmt_f64(r.stderr), fmt_f64(r.fitted)])
            .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(true)
}

/// Writes every output into `dir` and returns the paths written.
pub fn emit_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    summary: &SummaryRecord,
    trials: &[TrialRecord],
) -> Result<Vec<PathBuf>, CliError> {
    if cfg.experiment != ExperimentKind::QuadratureReport && trials.is_empty() {
        return Err(CliError::EmptyTrials);
    }
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut written = Vec::new();
    let p = dir.join(SUMMARY_FILE);
    fs::write(&p, summary_json(summary)).map_err(|e| io_err(&p, e))?;
    written.push(p);
    if cfg.per_trial_csv && !trials.is_empty() {
        let p = dir.join(TRIALS_FILE);
        write_trials_csv(&p, cfg, trials)?;
        written.push(p);
    }
    let p = dir.join(PLOT_FILE);
    if write_plot_csv(&p, summary)? {
        written.push(p);
    }
    Ok(written)
}
