use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use majlab_cli::config::{load_config, CltScaling, Overrides};
use majlab_cli::error::CliError;
use majlab_cli::experiments::{replay_trial, run_experiment};
use majlab_cli::output::{emit_outputs, summary_json};
use majlab_core::stats::PersistenceDriver;

/// Monte Carlo and quadrature experiments on majorisation of random spectra.
#[derive(Debug, Parser)]
#[command(name = "majlab", version)]
struct Args {
    /// nielsen-decay, uniform-decay, pi-dist, clt-check, quadrature-report,
    /// persistence or concentration.
    experiment: Option<String>,
    #[arg(long = "experiment", conflicts_with = "experiment")]
    experiment_flag: Option<String>,
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated dimensions.
    #[arg(long = "n", value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Fixed ratio m = round(c n).
    #[arg(long)]
    c: Option<f64>,
    /// Offset rule m = n + ceil(C sqrt(n ln n)).
    #[arg(long = "gap-C")]
    gap_c: Option<f64>,
    /// Explicit m per n, comma-separated.
    #[arg(long = "m", value_delimiter = ',')]
    m: Option<Vec<usize>>,
    /// Trials per (n, m) cell.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory; without it only the summary is printed.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the dense sampler for every n.
    #[arg(long)]
    validate_sampler: bool,
    #[arg(long)]
    eps: Option<f64>,
    /// Persistence threshold.
    #[arg(long = "t")]
    t: Option<f64>,
    /// gaussian or exp-difference.
    #[arg(long)]
    driver: Option<String>,
    /// Comma-separated monomial degrees for clt-check.
    #[arg(long, value_delimiter = ',')]
    degrees: Option<Vec<u32>>,
    /// raw or shifted.
    #[arg(long)]
    scaling: Option<String>,
    /// Skip the per-trial CSV.
    #[arg(long)]
    no_trial_csv: bool,
    /// Re-run a single trial given as CELL,TRIAL and print its payload.
    #[arg(long, value_delimiter = ',')]
    replay: Option<Vec<u64>>,
}

fn parse_enum<T: serde::de::DeserializeOwned>(flag: &str, v: Option<String>) -> Result<Option<T>, CliError> {
    v.map(|s| {
        serde_json::from_value(serde_json::Value::String(s.clone()))
            .map_err(|_| CliError::Config(majlab_cli::ConfigError::Invalid(format!("bad value `{s}` for --{flag}"))))
    })
    .transpose()
}

fn run(args: Args) -> Result<(), CliError> {
    let overrides = Overrides {
        experiment: args.experiment.or(args.experiment_flag),
        n_values: args.n,
        c: args.c,
        gap_c: args.gap_c,
        m_values: args.m,
        trials: args.trials,
        seed: args.seed,
        workers: args.workers,
        out: args.out,
        validate_sampler: args.validate_sampler,
        eps: args.eps,
        threshold: args.t,
        degrees: args.degrees,
        clt_scaling: parse_enum::<CltScaling>("scaling", args.scaling)?,
        driver: parse_enum::<PersistenceDriver>("driver", args.driver)?,
        no_trial_csv: args.no_trial_csv,
    };
    let cfg = load_config(args.config.as_deref(), overrides)?;
    if let Some(r) = args.replay {
        if r.len() != 2 {
            return Err(CliError::Config(majlab_cli::ConfigError::Invalid("--replay takes CELL,TRIAL".into())));
        }
        let rec = replay_trial(&cfg, r[0] as usize, r[1])?;
        println!(
            "{} n={} m={} trial={} stream_id={} payload={:?}",
            rec.experiment,
            rec.n,
            rec.m.map_or("-".to_string(), |m| m.to_string()),
            rec.trial,
            rec.stream_id,
            rec.payload
        );
        return Ok(());
    }
    let out = run_experiment(&cfg)?;
    print!("{}", summary_json(&out.summary));
    if let Some(dir) = &cfg.out_dir {
        for p in emit_outputs(dir, &cfg, &out.summary, &out.trials)? {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
