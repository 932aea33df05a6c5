use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use cgpr::experiments::equalize::EqualizeReport;
use cgpr::experiments::results::{emit_exp1, write_json};
use cgpr::experiments::{
    emit_results, run_experiment_1, run_scenario, Algorithm, EqualizeConfig, Exp1Config, OutputFormat,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

/// Proper complex Gaussian process regression experiments.
#[derive(Debug, Parser)]
#[command(name = "cgpr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learn a sampled GP with non-null real/imaginary cross-covariance.
    Exp1(Common),
    /// Nonlinear channel equalization benchmark.
    Equalize(Common),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Profile {
    Paper,
    Ci,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON config; keys override the profile defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Trials (equalize) or independent runs (exp1).
    #[arg(long)]
    trials: Option<usize>,
    /// Samples per trial (equalize) or training points (exp1).
    #[arg(long)]
    samples: Option<usize>,
    /// Comma-separated algorithm labels (equalize only).
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<String>>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long, value_enum, default_value_t = Profile::Paper)]
    profile: Profile,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) | Failure::Io(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numerical(m) | Failure::Io(m) => m,
        }
    }
}

fn from_lib(e: cgpr::Error) -> Failure {
    match e {
        cgpr::Error::Io { .. } | cgpr::Error::Csv { .. } => Failure::Io(e.to_string()),
        e if e.is_numerical() => Failure::Numerical(e.to_string()),
        e => Failure::Config(e.to_string()),
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Profile defaults, overlaid with the config file if any.
fn resolve<T: Serialize + DeserializeOwned>(defaults: &T, path: Option<&Path>) -> Result<T, Failure> {
    let mut v = serde_json::to_value(defaults).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(p) = path {
        let text = std::fs::read_to_string(p)
            .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", p.display())))?;
        let over: Value =
            serde_json::from_str(&text).map_err(|e| Failure::Config(format!("invalid config {}: {e}", p.display())))?;
        if !over.is_object() {
            return Err(Failure::Config(format!("config {} must be a JSON object", p.display())));
        }
        merge(&mut v, over);
    }
    serde_json::from_value(v).map_err(|e| Failure::Config(format!("invalid config: {e}")))
}

fn format_of(f: Format) -> OutputFormat {
    match f {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::Json,
    }
}

fn write_timings(out: &Path, timings: Value) -> Result<(), Failure> {
    write_json(&out.join("timings.json"), &timings).map_err(from_lib)
}

fn exp1(args: &Common) -> Result<(), Failure> {
    if args.algorithms.is_some() {
        return Err(Failure::Config("--algorithms applies to equalize only".into()));
    }
    let defaults = match args.profile {
        Profile::Paper => Exp1Config::default(),
        Profile::Ci => Exp1Config {
            runs: 10,
            ..Exp1Config::default()
        },
    };
    let mut cfg = resolve(&defaults, args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.trials {
        cfg.runs = t;
    }
    if let Some(n) = args.samples {
        cfg.n_train = n;
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;

    let start = Instant::now();
    let report = run_experiment_1(&cfg).map_err(from_lib)?;
    let elapsed = start.elapsed().as_secs_f64();
    emit_exp1(&report, &args.out, format_of(args.format)).map_err(from_lib)?;
    write_timings(&args.out, json!({ "exp1_seconds": elapsed }))?;

    for r in &report.runs {
        println!(
            "run {:>3}: MSE {:7.2} dB  gamma {:.4}  mu {:.4}{:+.4}j  sigma {:.4}",
            r.run, r.mse_db, r.recovered.gamma, r.recovered.mu.re, r.recovered.mu.im, r.recovered.noise_std
        );
    }
    for (run, msg) in &report.failures {
        eprintln!("run {run} failed: {msg}");
    }
    if let Some(m) = report.median_mse_db {
        println!("median MSE over {} runs: {m:.2} dB", report.runs.len());
    }
    if report.runs.is_empty() {
        return Err(Failure::Numerical("every run failed numerically".into()));
    }
    Ok(())
}

fn equalize(args: &Common) -> Result<(), Failure> {
    let defaults = match args.profile {
        Profile::Paper => EqualizeConfig::default(),
        Profile::Ci => EqualizeConfig::ci(),
    };
    let mut cfg = resolve(&defaults, args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(n) = args.samples {
        cfg.samples = n;
    }
    if let Some(list) = &args.algorithms {
        cfg.algorithms = list
            .iter()
            .map(|s| s.parse::<Algorithm>())
            .collect::<Result<_, _>>()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;

    let mut scenarios = Vec::with_capacity(cfg.scenarios.len());
    let mut timings = serde_json::Map::new();
    for s in &cfg.scenarios {
        let start = Instant::now();
        let rep = run_scenario(&cfg, *s).map_err(from_lib)?;
        timings.insert(s.to_string(), json!(start.elapsed().as_secs_f64()));
        println!("{s}:");
        for c in &rep.curves {
            println!(
                "  {:<10} steady state {:7.2} dB  ({} trials, {} flagged, {} failed)",
                c.label(),
                c.steady_state_db(cfg.steady_window),
                c.trials,
                c.flagged_trials.len(),
                c.failed_trials.len()
            );
        }
        scenarios.push(rep);
    }
    let report = EqualizeReport { config: cfg, scenarios };
    emit_results(&report, &args.out, format_of(args.format)).map_err(from_lib)?;
    write_timings(&args.out, json!({ "scenario_seconds": timings }))?;
    if report.all_failed() {
        return Err(Failure::Numerical("every trial failed numerically".into()));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Exp1(a) => exp1(a),
        Command::Equalize(a) => equalize(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
