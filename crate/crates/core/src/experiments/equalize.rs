//! Nonlinear channel equalization benchmark.
//!
//! Every algorithm sees the same channel realization per trial and predicts
//! `s(n)` from the received window before learning from it. Per-trial
//! squared errors are tail-averaged over a sliding window, averaged over
//! trials in linear scale and reported in dB.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::channel::{equalizer_pairs, samples_for_pairs, simulate_with_rng, ChannelConfig, CIRCULAR_RHO};
use super::{db, run_rng};
use crate::error::{Error, Result};
use crate::gpr::{ComplexDataset, SequentialGpr};
use crate::hyperlearn::{maximize, median_squared_distance, HyperEntry, HyperSpec, OptimizeOptions};
use crate::kaf::{kaf_step, KafAlgorithm, KafConfig, KafState};
use crate::kernels::{HyperId, Kernel};

/// Linear MSE at which a trial is clamped and flagged (60 dB).
pub const MSE_CLAMP: f64 = 1e6;
/// Largest allowed sample-to-sample jump for a smooth curve, in dB.
pub const SMOOTH_JUMP_DB: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Algorithm {
    Kaf(KafAlgorithm),
    Cgpr,
    OptCgpr,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Kaf(KafAlgorithm::Ncklms2),
        Algorithm::Kaf(KafAlgorithm::Ncklms2I),
        Algorithm::Kaf(KafAlgorithm::Ncklms2G),
        Algorithm::Kaf(KafAlgorithm::Acklms),
        Algorithm::Cgpr,
        Algorithm::OptCgpr,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Kaf(k) => k.label(),
            Algorithm::Cgpr => "CGPR",
            Algorithm::OptCgpr => "opt-CGPR",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Self::ALL
            .into_iter()
            .find(|a| a.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown algorithm {s:?}")))
    }
}

impl TryFrom<String> for Algorithm {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Algorithm> for String {
    fn from(a: Algorithm) -> Self {
        a.label().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    SoftCircular,
    StrongCircular,
    SoftNoncircular,
    StrongNoncircular,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::SoftCircular,
        Scenario::StrongCircular,
        Scenario::SoftNoncircular,
        Scenario::StrongNoncircular,
    ];

    /// `ρ` of the noncircular scenarios.
    pub const NONCIRCULAR_RHO: f64 = 0.1;

    pub fn label(self) -> &'static str {
        match self {
            Scenario::SoftCircular => "soft_circular",
            Scenario::StrongCircular => "strong_circular",
            Scenario::SoftNoncircular => "soft_noncircular",
            Scenario::StrongNoncircular => "strong_noncircular",
        }
    }

    pub fn is_strong(self) -> bool {
        matches!(self, Scenario::StrongCircular | Scenario::StrongNoncircular)
    }

    pub fn channel(self) -> ChannelConfig {
        let rho = match self {
            Scenario::SoftCircular | Scenario::StrongCircular => CIRCULAR_RHO,
            _ => Self::NONCIRCULAR_RHO,
        };
        if self.is_strong() {
            ChannelConfig::strong(rho)
        } else {
            ChannelConfig::soft(rho)
        }
    }

    fn index(self) -> u64 {
        Self::ALL.iter().position(|s| *s == self).expect("listed") as u64
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.label() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scenario {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EqualizeConfig {
    pub scenarios: Vec<Scenario>,
    pub algorithms: Vec<Algorithm>,
    pub samples: usize,
    pub trials: usize,
    pub seed: u64,
    /// Tail-averaging window of the learning curves.
    pub window: usize,
    /// Number of final curve entries averaged into the steady-state MSE.
    pub steady_window: usize,
    /// Leading samples used to learn the CGPR hyperparameters.
    pub cgpr_train: usize,
    /// Random samples used to tune `γ` for opt-CGPR.
    pub opt_tuning: usize,
    /// Number of log-spaced `γ` candidates for opt-CGPR.
    pub opt_grid: usize,
    /// Candidate range as multiples of the median squared input distance.
    pub opt_grid_range: (f64, f64),
    /// Stop growing the GPR training sets after this many samples.
    pub training_cap: Option<usize>,
    /// CGPR hyperparameter optimizer. The two-parameter likelihood is
    /// smooth and flat near its maximum, so one start and a looser gradient
    /// tolerance suffice.
    pub optimizer: OptimizeOptions,
    pub delta1: f64,
    pub delta2: f64,
    /// Overrides the scenario's SNR.
    pub snr_db: Option<f64>,
}

impl Default for EqualizeConfig {
    fn default() -> Self {
        Self {
            scenarios: Scenario::ALL.to_vec(),
            algorithms: Algorithm::ALL.to_vec(),
            samples: 3000,
            trials: 100,
            seed: 0,
            window: 100,
            steady_window: 200,
            cgpr_train: 250,
            opt_tuning: 1000,
            opt_grid: 16,
            opt_grid_range: (1e-2, 1e2),
            training_cap: None,
            optimizer: OptimizeOptions {
                restarts: 0,
                grad_tol: 1e-4,
                ..OptimizeOptions::default()
            },
            delta1: crate::kaf::DELTA1,
            delta2: crate::kaf::DELTA2,
            snr_db: None,
        }
    }
}

impl EqualizeConfig {
    /// Reduced settings for quick runs: 10 trials, GPR training sets capped
    /// at 1000 samples.
    pub fn ci() -> Self {
        Self {
            trials: 10,
            training_cap: Some(1000),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if self.window == 0 || self.window >= self.samples {
            return bad(format!(
                "window must lie in 1..{} (samples), got {}",
                self.samples, self.window
            ));
        }
        if self.steady_window == 0 || self.steady_window > self.samples - self.window {
            return bad(format!(
                "steady_window must lie in 1..={}, got {}",
                self.samples - self.window,
                self.steady_window
            ));
        }
        if self.algorithms.contains(&Algorithm::Cgpr) && !(2..=self.samples).contains(&self.cgpr_train) {
            return bad(format!("cgpr_train must lie in 2..={}", self.samples));
        }
        if self.algorithms.contains(&Algorithm::OptCgpr) {
            if !(2..=self.samples).contains(&self.opt_tuning) {
                return bad(format!("opt_tuning must lie in 2..={}", self.samples));
            }
            if self.opt_grid == 0 || !(self.opt_grid_range.0 > 0.0 && self.opt_grid_range.1 >= self.opt_grid_range.0) {
                return bad("opt-CGPR grid must be non-empty with 0 < low <= high".into());
            }
        }
        if self.training_cap == Some(0) {
            return bad("training_cap must be positive".into());
        }
        for s in &self.scenarios {
            self.channel(*s).validate()?;
        }
        Ok(())
    }

    pub fn channel(&self, scenario: Scenario) -> ChannelConfig {
        let mut c = scenario.channel();
        if let Some(snr) = self.snr_db {
            c.snr_db = Some(snr);
        }
        c
    }

    fn kaf(&self, alg: KafAlgorithm, scenario: Scenario) -> KafConfig {
        let mut c = KafConfig::benchmark(alg, scenario.is_strong());
        c.delta1 = self.delta1;
        c.delta2 = self.delta2;
        c
    }
}

/// Trial-averaged learning curve of one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub algorithm: Algorithm,
    /// Trials that contributed to the average.
    pub trials: usize,
    pub window: usize,
    /// Sample count at the end of each window: `window + 1..=samples`.
    pub sample_index: Vec<usize>,
    pub mse_db: Vec<f64>,
    /// Trials whose MSE was non-finite or above the clamp.
    pub flagged_trials: Vec<usize>,
    /// Trials that failed outright, with the error.
    pub failed_trials: Vec<(usize, String)>,
}

impl LearningCurve {
    pub fn label(&self) -> &'static str {
        self.algorithm.label()
    }

    /// Mean linear MSE of the last `n` entries, in dB.
    pub fn steady_state_db(&self, n: usize) -> f64 {
        let k = n.min(self.mse_db.len()).max(1);
        let tail = &self.mse_db[self.mse_db.len().saturating_sub(k)..];
        db(tail.iter().map(|v| 10f64.powf(v / 10.0)).sum::<f64>() / tail.len() as f64)
    }

    /// Mean linear MSE, in dB, of the entries whose sample index lies in
    /// `[from, to)`.
    pub fn mean_db_between(&self, from: usize, to: usize) -> Option<f64> {
        let v: Vec<f64> = self
            .sample_index
            .iter()
            .zip(&self.mse_db)
            .filter(|(i, _)| (from..to).contains(*i))
            .map(|(_, m)| 10f64.powf(m / 10.0))
            .collect();
        (!v.is_empty()).then(|| db(v.iter().sum::<f64>() / v.len() as f64))
    }

    /// Largest absolute change between consecutive entries, in dB.
    pub fn max_jump_db(&self) -> f64 {
        self.mse_db.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
    }
}

/// Hyperparameters used by the GPR equalizers in one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialHyper {
    pub trial: usize,
    pub channel_noise_var: f64,
    pub cgpr: Option<(f64, f64)>,
    pub opt_cgpr_gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub channel: ChannelConfig,
    pub curves: Vec<LearningCurve>,
    pub hyperparameters: Vec<TrialHyper>,
}

impl ScenarioReport {
    pub fn curve(&self, alg: Algorithm) -> Option<&LearningCurve> {
        self.curves.iter().find(|c| c.algorithm == alg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualizeReport {
    pub config: EqualizeConfig,
    pub scenarios: Vec<ScenarioReport>,
}

impl EqualizeReport {
    /// True when every trial of every algorithm failed.
    pub fn all_failed(&self) -> bool {
        self.scenarios.iter().flat_map(|s| &s.curves).all(|c| c.trials == 0)
    }
}

/// Sliding mean of `sq` over `window`; entry `i` averages `sq[i..i+window]`.
pub fn tail_average(sq: &[f64], window: usize) -> Vec<f64> {
    if window == 0 || sq.len() < window {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(sq.len() - window + 1);
    let mut acc: f64 = sq[..window].iter().sum();
    out.push(acc / window as f64);
    for i in window..sq.len() {
        acc += sq[i] - sq[i - window];
        out.push(acc / window as f64);
    }
    out
}

fn kaf_errors(cfg: KafConfig, data: &ComplexDataset) -> Result<Vec<f64>> {
    let mut st = KafState::new(cfg)?;
    data.inputs()
        .iter()
        .zip(data.outputs())
        .map(|(x, &y)| kaf_step(&mut st, x, y).map(|e| e.norm_sqr()))
        .collect()
}

fn sequential_errors(kernel: Kernel, noise_var: f64, cap: Option<usize>, data: &ComplexDataset) -> Result<Vec<f64>> {
    let mut g = SequentialGpr::new(kernel, noise_var)?.with_capacity_limit(cap);
    data.inputs()
        .iter()
        .zip(data.outputs())
        .map(|(x, &y)| g.predict_then_observe(x, y).map(|p| (y - p).norm_sqr()))
        .collect()
}

/// Learns `γ` and `σ²` of the complex-metric Gaussian by marginal
/// likelihood on `train`.
pub fn fit_cgpr(train: &ComplexDataset, opts: &OptimizeOptions) -> Result<(f64, f64)> {
    let msd = median_squared_distance(train.inputs());
    let power = train.outputs().iter().map(|y| y.norm_sqr()).sum::<f64>() / train.len() as f64;
    let spec = HyperSpec::new(vec![
        HyperEntry::log(HyperId::Gamma, msd),
        HyperEntry::log(HyperId::NoiseVar, 0.1 * power.max(1e-12)),
    ])?;
    let base = Kernel::complex_metric_gaussian(msd)?;
    let (k, s2, _) = maximize(train, &base, 0.1 * power, &spec, opts)?;
    Ok((k.params.gamma(), s2))
}

/// Picks the `γ` with the lowest one-step-ahead MSE over `tuning`, with
/// `σ²` fixed.
pub fn tune_opt_cgpr(
    tuning: &ComplexDataset,
    noise_var: f64,
    grid: usize,
    range: (f64, f64),
    cap: Option<usize>,
) -> Result<f64> {
    let msd = median_squared_distance(tuning.inputs());
    let (lo, hi) = (range.0.ln(), range.1.ln());
    let mut best = (f64::INFINITY, f64::NAN);
    let mut last_err = None;
    for i in 0..grid {
        let t = if grid == 1 { 0.5 } else { i as f64 / (grid - 1) as f64 };
        let gamma = msd * (lo + t * (hi - lo)).exp();
        match sequential_errors(Kernel::complex_metric_gaussian(gamma)?, noise_var, cap, tuning) {
            Ok(e) => {
                let m = e.iter().sum::<f64>() / e.len() as f64;
                if m < best.0 {
                    best = (m, gamma);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    if best.1.is_nan() {
        return Err(last_err.unwrap_or_else(|| Error::InvalidArgument("no finite opt-CGPR candidate".into())));
    }
    Ok(best.1)
}

struct TrialOutcome {
    errors: Vec<std::result::Result<Vec<f64>, String>>,
    hyper: TrialHyper,
}

fn run_trial(cfg: &EqualizeConfig, scenario: Scenario, trial: usize) -> Result<TrialOutcome> {
    let channel = cfg.channel(scenario);
    let mut rng = run_rng(
        cfg.seed
            .wrapping_add(scenario.index().wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        trial as u64,
    );
    let real = simulate_with_rng(&channel, samples_for_pairs(&channel, cfg.samples), &mut rng)?;
    let data = equalizer_pairs(&channel, &real.s, &real.r);
    debug_assert_eq!(data.len(), cfg.samples);
    let mut hyper = TrialHyper {
        trial,
        channel_noise_var: real.noise_var,
        cgpr: None,
        opt_cgpr_gamma: None,
    };
    let mut sub = ChaCha8Rng::seed_from_u64(rng.random());
    let mut errors = Vec::with_capacity(cfg.algorithms.len());
    for alg in &cfg.algorithms {
        let out = match *alg {
            Algorithm::Kaf(k) => kaf_errors(cfg.kaf(k, scenario), &data),
            Algorithm::Cgpr => {
                let train = data.select(&(0..cfg.cgpr_train).collect::<Vec<_>>());
                let mut opts = cfg.optimizer.clone();
                opts.seed = sub.random();
                fit_cgpr(&train, &opts).and_then(|(gamma, s2)| {
                    hyper.cgpr = Some((gamma, s2));
                    sequential_errors(Kernel::complex_metric_gaussian(gamma)?, s2, cfg.training_cap, &data)
                })
            }
            Algorithm::OptCgpr => {
                let mut idx = sample(&mut sub, cfg.samples, cfg.opt_tuning).into_vec();
                idx.sort_unstable();
                let tuning = data.select(&idx);
                // the tuning pass costs O(n³); the cap bounds it like the main pass
                let noise = real.noise_var.max(1e-12);
                tune_opt_cgpr(&tuning, noise, cfg.opt_grid, cfg.opt_grid_range, cfg.training_cap).and_then(|gamma| {
                    hyper.opt_cgpr_gamma = Some(gamma);
                    sequential_errors(Kernel::complex_metric_gaussian(gamma)?, noise, cfg.training_cap, &data)
                })
            }
        };
        errors.push(out.map_err(|e| e.to_string()));
    }
    Ok(TrialOutcome { errors, hyper })
}

/// Runs one scenario over all trials. Trials run in parallel; results are
/// merged in trial order.
pub fn run_scenario(cfg: &EqualizeConfig, scenario: Scenario) -> Result<ScenarioReport> {
    cfg.validate()?;
    let outcomes: Vec<Result<TrialOutcome>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, scenario, t))
        .collect();
    let mut trials = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        trials.push(o?);
    }
    let len = cfg.samples - cfg.window;
    let mut curves = Vec::with_capacity(cfg.algorithms.len());
    for (a, alg) in cfg.algorithms.iter().enumerate() {
        let mut sum = vec![0.0; len];
        let mut used = 0;
        let mut flagged = Vec::new();
        let mut failed = Vec::new();
        for (t, tr) in trials.iter().enumerate() {
            match &tr.errors[a] {
                Ok(sq) => {
                    // drop the window ending at sample `window` so the curve
                    // has `samples − window` entries
                    let mut tail = tail_average(sq, cfg.window).split_off(1);
                    let mut flag = false;
                    for v in tail.iter_mut() {
                        if !v.is_finite() || *v > MSE_CLAMP {
                            *v = MSE_CLAMP;
                            flag = true;
                        }
                    }
                    if flag {
                        flagged.push(t);
                    }
                    for (s, v) in sum.iter_mut().zip(&tail) {
                        *s += v;
                    }
                    used += 1;
                }
                Err(e) => failed.push((t, e.clone())),
            }
        }
        let mse_db = if used == 0 {
            vec![db(MSE_CLAMP); len]
        } else {
            sum.iter().map(|s| db(s / used as f64)).collect()
        };
        curves.push(LearningCurve {
            algorithm: *alg,
            trials: used,
            window: cfg.window,
            sample_index: (cfg.window + 1..=cfg.samples).collect(),
            mse_db,
            flagged_trials: flagged,
            failed_trials: failed,
        });
    }
    Ok(ScenarioReport {
        scenario,
        channel: cfg.channel(scenario),
        curves,
        hyperparameters: trials.into_iter().map(|t| t.hyper).collect(),
    })
}

/// Runs every configured scenario.
pub fn run_equalization(cfg: &EqualizeConfig) -> Result<EqualizeReport> {
    cfg.validate()?;
    let scenarios = cfg
        .scenarios
        .iter()
        .map(|s| run_scenario(cfg, *s))
        .collect::<Result<_>>()?;
    Ok(EqualizeReport {
        config: cfg.clone(),
        scenarios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    #[test]
    fn tail_average_is_sliding_mean() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(tail_average(&v, 2), vec![1.5, 2.5, 3.5, 4.5]);
        assert_eq!(tail_average(&v, 5), vec![3.0]);
        assert!(tail_average(&v, 6).is_empty());
    }

    #[test]
    fn algorithm_labels_parse() {
        for a in Algorithm::ALL {
            assert_eq!(a.label().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!("opt-cgpr".parse::<Algorithm>().unwrap(), Algorithm::OptCgpr);
        assert!("LMS".parse::<Algorithm>().is_err());
        let j = serde_json::to_string(&Algorithm::ALL.to_vec()).unwrap();
        assert!(j.contains("\"NCKLMS2-G\""));
    }

    #[test]
    fn scenario_channels() {
        assert_eq!(Scenario::StrongNoncircular.channel().rho, 0.1);
        assert_eq!(Scenario::SoftCircular.channel().a2, C64::new(0.1, 0.15));
        assert_eq!("strong_circular".parse::<Scenario>().unwrap(), Scenario::StrongCircular);
    }

    #[test]
    fn curve_statistics() {
        let c = LearningCurve {
            algorithm: Algorithm::Cgpr,
            trials: 1,
            window: 1,
            sample_index: vec![1, 2, 3],
            mse_db: vec![0.0, 10.0, 0.0],
            flagged_trials: vec![],
            failed_trials: vec![],
        };
        assert_eq!(c.max_jump_db(), 10.0);
        assert!((c.steady_state_db(2) - db(5.5)).abs() < 1e-12);
        assert_eq!(c.mean_db_between(2, 3), Some(10.0));
        assert_eq!(c.mean_db_between(5, 9), None);
    }

    #[test]
    fn validation_rejects_bad_windows() {
        let c = EqualizeConfig {
            samples: 100,
            window: 100,
            ..EqualizeConfig::default()
        };
        assert!(c.validate().is_err());
        let c = EqualizeConfig {
            samples: 300,
            window: 100,
            steady_window: 250,
            ..EqualizeConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn tiny_run_is_deterministic() {
        let cfg = EqualizeConfig {
            scenarios: vec![Scenario::SoftCircular],
            samples: 150,
            trials: 2,
            window: 20,
            steady_window: 20,
            cgpr_train: 40,
            opt_tuning: 60,
            opt_grid: 3,
            optimizer: OptimizeOptions {
                max_iter: 10,
                restarts: 0,
                ..Default::default()
            },
            ..EqualizeConfig::default()
        };
        let a = run_equalization(&cfg).unwrap();
        let b = run_equalization(&cfg).unwrap();
        assert_eq!(a, b);
        let s = &a.scenarios[0];
        assert_eq!(s.curves.len(), 6);
        for c in &s.curves {
            assert_eq!(c.mse_db.len(), 130);
            assert!(c.mse_db.iter().all(|v| v.is_finite()));
        }
    }
}
