use std::process::Command;

use majlab_cli::config::{parse_config_str, ExperimentConfig, ExperimentKind, MRule};
use majlab_cli::error::{CliError, ConfigError};
use majlab_cli::experiments::{replay_trial, run_experiment, summarise, CellDetail};
use majlab_cli::output::{emit_outputs, read_trials_csv, strip_timestamp, summary_json, PLOT_FILE, SUMMARY_FILE, TRIALS_FILE};

fn majlab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_majlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small(kind: ExperimentKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind);
    cfg.seed = 7;
    match kind {
        ExperimentKind::Persistence => {
            cfg.n_values = vec![8, 16, 32, 64];
            cfg.trials = 300;
        }
        ExperimentKind::CltCheck => {
            cfg.n_values = vec![12];
            cfg.trials = 1000;
        }
        ExperimentKind::UniformDecay => {
            cfg.n_values = vec![8, 16, 32];
            cfg.trials = 300;
        }
        ExperimentKind::QuadratureReport => {}
        _ => {
            cfg.n_values = vec![8, 12];
            cfg.trials = 60;
        }
    }
    cfg
}

#[test]
fn exit_code_for_unknown_experiment() {
    let o = majlab(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown experiment"));
}

#[test]
fn exit_code_for_inconsistent_rule_and_bad_json() {
    let o = majlab(&["uniform-decay", "--c", "2"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("cfg.json");
    std::fs::write(&p, "{ not json").unwrap();
    let o = majlab(&["--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("malformed"));
}

#[test]
fn distinct_config_diagnostics() {
    assert!(matches!(
        parse_config_str(r#"{"experiment":"frobnicate"}"#),
        Err(ConfigError::UnknownExperiment(_))
    ));
    assert!(matches!(
        parse_config_str(r#"{"experiment":"persistence","m_rule":{"kind":"offset","gap_c":1.0}}"#),
        Err(ConfigError::InconsistentMRule(_))
    ));
    assert!(matches!(parse_config_str("[1,"), Err(ConfigError::MalformedJson(_))));
    assert!(matches!(
        parse_config_str(r#"{"experiment":"pi-dist","trials":0}"#),
        Err(ConfigError::Invalid(_))
    ));
    assert!(matches!(
        parse_config_str(r#"{"experiment":"pi-dist","n_values":[]}"#),
        Err(ConfigError::Invalid(_))
    ));
}

#[test]
fn flags_override_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("cfg.json");
    std::fs::write(
        &p,
        r#"{"experiment":"pi-dist","n_values":[8],"trials":5,"seed":3,"m_rule":{"kind":"fixed-ratio","c":2.0}}"#,
    )
    .unwrap();
    let o = majlab(&["--config", p.to_str().unwrap(), "--trials", "4", "--n", "6"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["config"]["trials"], 4);
    assert_eq!(v["config"]["seed"], 3);
    assert_eq!(v["cells"][0]["n"], 6);
    assert_eq!(v["cells"][0]["m"], 12);
}

#[test]
fn summaries_independent_of_worker_count() {
    for kind in ExperimentKind::ALL {
        if kind == ExperimentKind::QuadratureReport {
            continue;
        }
        let mut cfg = small(kind);
        let mut outs = Vec::new();
        for w in [1, 2, 8] {
            cfg.workers = w;
            outs.push(strip_timestamp(&summary_json(&run_experiment(&cfg).unwrap().summary)));
        }
        assert_eq!(outs[0], outs[1], "{kind}");
        assert_eq!(outs[0], outs[2], "{kind}");
    }
}

#[test]
fn timestamp_isolated_on_one_line() {
    let s = run_experiment(&small(ExperimentKind::PiDist)).unwrap().summary;
    let json = summary_json(&s);
    let lines: Vec<&str> = json.lines().filter(|l| l.contains("timestamp")).collect();
    assert_eq!(lines.len(), 1);
    assert_eq!(json.lines().nth(1).unwrap(), lines[0]);
}

#[test]
fn csv_round_trip_reproduces_aggregates() {
    for kind in [
        ExperimentKind::NielsenDecay,
        ExperimentKind::UniformDecay,
        ExperimentKind::PiDist,
        ExperimentKind::CltCheck,
        ExperimentKind::Persistence,
        ExperimentKind::Concentration,
    ] {
        let cfg = small(kind);
        let out = run_experiment(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_outputs(dir.path(), &cfg, &out.summary, &out.trials).unwrap();
        let back = read_trials_csv(&dir.path().join(TRIALS_FILE)).unwrap();
        assert_eq!(back.len(), out.trials.len());
        let again = summarise(&cfg, &back).unwrap();
        for (a, b) in out.summary.cells.iter().zip(&again.cells) {
            for (x, y) in a.column_means.iter().zip(&b.column_means) {
                assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()), "{kind}: {x} vs {y}");
            }
        }
        assert_eq!(
            strip_timestamp(&summary_json(&out.summary)),
            strip_timestamp(&summary_json(&again))
        );
    }
}

#[test]
fn trial_counts_are_conserved() {
    let cfg = small(ExperimentKind::NielsenDecay);
    let out = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_outputs(dir.path(), &cfg, &out.summary, &out.trials).unwrap();
    let rows = read_trials_csv(&dir.path().join(TRIALS_FILE)).unwrap();
    assert_eq!(rows.len(), cfg.trials * cfg.n_values.len());
    for &n in &cfg.n_values {
        assert_eq!(rows.iter().filter(|r| r.n == n).count(), cfg.trials);
    }
    let header = std::fs::read_to_string(dir.path().join(TRIALS_FILE)).unwrap();
    assert!(header.starts_with("experiment,n,m,trial,stream_id,"));
    let plot = std::fs::read_to_string(dir.path().join(PLOT_FILE)).unwrap();
    assert!(plot.starts_with("n,probability,stderr,fitted\n"));
    assert_eq!(plot.lines().count(), 1 + cfg.n_values.len());
}

#[test]
fn empty_trial_set_is_rejected() {
    let cfg = small(ExperimentKind::PiDist);
    assert!(matches!(summarise(&cfg, &[]), Err(CliError::EmptyTrials)));
    let out = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        emit_outputs(dir.path(), &cfg, &out.summary, &[]),
        Err(CliError::EmptyTrials)
    ));
    assert!(!dir.path().join(SUMMARY_FILE).exists());
}

#[test]
fn missing_trials_are_detected() {
    let cfg = small(ExperimentKind::PiDist);
    let out = run_experiment(&cfg).unwrap();
    assert!(summarise(&cfg, &out.trials[1..]).is_err());
}

#[test]
fn single_trial_replays() {
    for kind in [
        ExperimentKind::NielsenDecay,
        ExperimentKind::CltCheck,
        ExperimentKind::Persistence,
        ExperimentKind::Concentration,
    ] {
        let mut cfg = small(kind);
        cfg.workers = 4;
        let out = run_experiment(&cfg).unwrap();
        for rec in [&out.trials[0], &out.trials[out.trials.len() / 2], out.trials.last().unwrap()] {
            let cell = (rec.stream_id / cfg.trials as u64) as usize;
            let again = replay_trial(&cfg, cell, rec.trial).unwrap();
            assert_eq!(&again, rec, "{kind}");
        }
    }
}

#[test]
fn unwritable_output_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let o = majlab(&["pi-dist", "--n", "6", "--trials", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    // the summary still reaches standard output
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["total_trials"], 3);
}

#[test]
fn seeds_and_rules_change_results() {
    let mut a = small(ExperimentKind::PiDist);
    let base = run_experiment(&a).unwrap().trials;
    a.seed = 8;
    assert_ne!(run_experiment(&a).unwrap().trials[0].payload, base[0].payload);
    let mut b = small(ExperimentKind::PiDist);
    b.m_rule = Some(MRule::Explicit { m_values: vec![20, 30] });
    let s = run_experiment(&b).unwrap().summary;
    assert_eq!(s.cells[1].m, Some(30));
    let CellDetail::Pi(p) = &s.cells[0].detail else { panic!() };
    assert!(p.mean > 0.0 && p.mean <= 1.0);
}

#[test]
fn run_id_depends_only_on_config() {
    let mut cfg = small(ExperimentKind::UniformDecay);
    let a = run_experiment(&cfg).unwrap().summary.run_id;
    cfg.workers = 3;
    assert_eq!(run_experiment(&cfg).unwrap().summary.run_id, a);
    cfg.seed += 1;
    assert_ne!(run_experiment(&cfg).unwrap().summary.run_id, a);
    assert_eq!(a.len(), 64);
}

#[test]
fn quadrature_report_runs_without_trials() {
    let o = majlab(&["quadrature-report"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let q = &v["aggregate"];
    assert_eq!(q["kind"], "quadrature");
    let (aw, cal) = (q["gamma_x2_x2"][0].as_f64().unwrap(), q["gamma_x2_x2"][1].as_f64().unwrap());
    assert!((aw - 0.5).abs() < 1e-8 && (cal - 0.125).abs() < 1e-8);
    // both gamma conventions are reported
    let m2 = &q["semicircle_moments"][2];
    assert!((m2["density"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert!((m2["as_written"].as_f64().unwrap() - 0.125).abs() < 1e-12);
}
