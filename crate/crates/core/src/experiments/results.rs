//! Writing experiment results to disk.
//!
//! Curves go to CSV (`sample_index` followed by one `mse_db` column per
//! algorithm, headed by its label) or JSON, and a JSON manifest echoes the
//! resolved configuration, seeds and recovered hyperparameters. Outputs are
//! byte-identical for identical inputs; wall-clock timings belong in a
//! separate file written by the caller.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::equalize::{EqualizeReport, LearningCurve};
use super::exp1::Exp1Report;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::InvalidArgument(format!("unknown format {s:?}"))),
        }
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Writes `value` as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes curves as CSV. All curves must share their sample indices; an
/// empty slice writes the `sample_index` header only.
pub fn write_curves_csv(path: &Path, curves: &[LearningCurve]) -> Result<()> {
    let Some(first) = curves.first() else {
        let mut w = csv::Writer::from_writer(create(path)?);
        w.write_record(["sample_index"]).map_err(csv_err(path))?;
        return w.flush().map_err(|e| Error::io(path, e));
    };
    if let Some(c) = curves.iter().find(|c| c.sample_index != first.sample_index) {
        return Err(Error::InvalidArgument(format!(
            "curve {} has different sample indices",
            c.label()
        )));
    }
    let mut w = csv::Writer::from_writer(create(path)?);
    let header: Vec<&str> = std::iter::once("sample_index")
        .chain(curves.iter().map(|c| c.label()))
        .collect();
    w.write_record(&header).map_err(csv_err(path))?;
    for (row, idx) in first.sample_index.iter().enumerate() {
        let rec: Vec<String> = std::iter::once(idx.to_string())
            .chain(curves.iter().map(|c| c.mse_db[row].to_string()))
            .collect();
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Curves read back from [`write_curves_csv`]: sample indices and
/// `(label, mse_db)` columns.
pub type CurveTable = (Vec<usize>, Vec<(String, Vec<f64>)>);

pub fn read_curves_csv(path: &Path) -> Result<CurveTable> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = r.headers().map_err(csv_err(path))?.clone();
    if headers.get(0) != Some("sample_index") {
        return Err(Error::InvalidArgument(format!(
            "{}: first column must be sample_index",
            path.display()
        )));
    }
    let mut idx = Vec::new();
    let mut cols: Vec<(String, Vec<f64>)> = headers.iter().skip(1).map(|h| (h.to_string(), Vec::new())).collect();
    let parse_err = |m: String| Error::InvalidArgument(format!("{}: {m}", path.display()));
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        idx.push(rec[0].parse().map_err(|e| parse_err(format!("{e}")))?);
        for (c, v) in cols.iter_mut().zip(rec.iter().skip(1)) {
            c.1.push(v.parse().map_err(|e| parse_err(format!("{e}")))?);
        }
    }
    Ok((idx, cols))
}

/// Writes an equalization report into `dir`: one curve file per scenario
/// and `manifest.json`. Returns the written paths.
pub fn emit_results(report: &EqualizeReport, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for s in &report.scenarios {
        let path = match format {
            OutputFormat::Csv => {
                let p = dir.join(format!("curves_{}.csv", s.scenario));
                write_curves_csv(&p, &s.curves)?;
                p
            }
            OutputFormat::Json => {
                let p = dir.join(format!("curves_{}.json", s.scenario));
                write_json(&p, &s.curves)?;
                p
            }
        };
        written.push(path);
    }
    let cfg = &report.config;
    let manifest = json!({
        "experiment": "equalize",
        "config": cfg,
        "master_seed": cfg.seed,
        "trial_streams": (0..cfg.trials).collect::<Vec<_>>(),
        "scenarios": report.scenarios.iter().map(|s| json!({
            "scenario": s.scenario,
            "channel": s.channel,
            "steady_state_db": s.curves.iter().map(|c| (c.label(), c.steady_state_db(cfg.steady_window))).collect::<std::collections::BTreeMap<_, _>>(),
            "trials_used": s.curves.iter().map(|c| (c.label(), c.trials)).collect::<std::collections::BTreeMap<_, _>>(),
            "flagged_trials": s.curves.iter().map(|c| (c.label(), &c.flagged_trials)).collect::<std::collections::BTreeMap<_, _>>(),
            "failed_trials": s.curves.iter().map(|c| (c.label(), &c.failed_trials)).collect::<std::collections::BTreeMap<_, _>>(),
            "hyperparameters": s.hyperparameters,
        })).collect::<Vec<_>>(),
    });
    let p = dir.join("manifest.json");
    write_json(&p, &manifest)?;
    written.push(p);
    Ok(written)
}

/// Writes an Experiment-1 report into `dir`. CSV output has one summary
/// row per run and a long-format slice table; JSON output is the whole
/// report. Both come with `manifest.json`.
pub fn emit_exp1(report: &Exp1Report, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    match format {
        OutputFormat::Csv => {
            let p = dir.join("exp1_runs.csv");
            let mut w = csv::Writer::from_writer(create(&p)?);
            w.write_record([
                "run",
                "mse_db",
                "gamma",
                "mu_re",
                "mu_im",
                "noise_std",
                "log_likelihood",
                "iterations",
                "converged",
                "interpolation_mse_db",
            ])
            .map_err(csv_err(&p))?;
            for r in &report.runs {
                let rec = r.recovered.clone();
                w.write_record([
                    r.run.to_string(),
                    r.mse_db.to_string(),
                    rec.gamma.to_string(),
                    rec.mu.re.to_string(),
                    rec.mu.im.to_string(),
                    rec.noise_std.to_string(),
                    rec.log_likelihood.to_string(),
                    r.optimizer.iterations.to_string(),
                    r.optimizer.converged.to_string(),
                    r.interpolation_mse_db.map_or(String::new(), |v| v.to_string()),
                ])
                .map_err(csv_err(&p))?;
            }
            w.flush().map_err(|e| Error::io(&p, e))?;
            written.push(p);

            let p = dir.join("exp1_slices.csv");
            let samples = report.config.posterior_samples;
            let mut w = csv::Writer::from_writer(create(&p)?);
            let mut header: Vec<String> = ["run", "im", "re", "truth_re", "truth_im", "mean_re", "mean_im", "std"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            for k in 0..samples {
                header.push(format!("sample{k}_re"));
                header.push(format!("sample{k}_im"));
            }
            w.write_record(&header).map_err(csv_err(&p))?;
            for r in &report.runs {
                for s in &r.slices {
                    for i in 0..s.re.len() {
                        let mut rec = vec![
                            r.run.to_string(),
                            s.im.to_string(),
                            s.re[i].to_string(),
                            s.truth[i].re.to_string(),
                            s.truth[i].im.to_string(),
                            s.mean[i].re.to_string(),
                            s.mean[i].im.to_string(),
                            s.std[i].to_string(),
                        ];
                        for k in 0..samples {
                            let v = s.samples.get(k).map(|d| d[i]);
                            rec.push(v.map_or(String::new(), |v| v.re.to_string()));
                            rec.push(v.map_or(String::new(), |v| v.im.to_string()));
                        }
                        w.write_record(&rec).map_err(csv_err(&p))?;
                    }
                }
            }
            w.flush().map_err(|e| Error::io(&p, e))?;
            written.push(p);
        }
        OutputFormat::Json => {
            let p = dir.join("exp1.json");
            write_json(&p, report)?;
            written.push(p);
        }
    }
    let manifest = json!({
        "experiment": "exp1",
        "config": report.config,
        "master_seed": report.config.seed,
        "run_streams": (0..report.config.runs).collect::<Vec<_>>(),
        "median_mse_db": report.median_mse_db,
        "recovered": report.runs.iter().map(|r| json!({
            "run": r.run,
            "mse_db": r.mse_db,
            "hyperparameters": r.recovered,
            "optimizer": {
                "iterations": r.optimizer.iterations,
                "converged": r.optimizer.converged,
                "grad_norm": r.optimizer.grad_norm,
                "starts": r.starts,
            },
        })).collect::<Vec<_>>(),
        "failures": report.failures,
    });
    let p = dir.join("manifest.json");
    write_json(&p, &manifest)?;
    written.push(p);
    Ok(written)
}
