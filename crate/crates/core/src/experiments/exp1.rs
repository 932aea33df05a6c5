//! Learning a sampled proper GP with a non-null real/imaginary
//! cross-covariance.
//!
//! Each run samples `f` from the convolution kernel on a square grid over
//! the complex plane, picks training points, adds circular noise, learns the
//! hyperparameters by maximizing the marginal likelihood and reports the
//! grid MSE of the posterior mean against the noiseless `f`.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::circulant::{grid_inputs, linspace, CirculantSampler};
use super::{db, run_rng};
use crate::error::{Error, Result};
use crate::gpr::{ComplexDataset, GprModel};
use crate::hyperlearn::{maximize, HyperEntry, HyperSpec, OptimizeOptions, OptimizeReport};
use crate::kernels::{HyperId, Kernel};
use crate::linalg::C64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Exp1Config {
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_points: usize,
    pub n_train: usize,
    pub gamma: f64,
    pub mu: C64,
    pub v_r: f64,
    pub v_rj: f64,
    pub noise_std: f64,
    pub seed: u64,
    pub runs: usize,
    /// Starting noise variance for every optimizer run.
    pub initial_noise_var: f64,
    /// `γ` values screened for optimizer starts.
    pub gamma_screen: Vec<f64>,
    /// `μ` screening grid: `mu_screen_points` values per real coordinate
    /// over `[−mu_screen_radius, mu_screen_radius]`.
    pub mu_screen_radius: f64,
    pub mu_screen_points: usize,
    /// Extra `μ` candidates screened alongside the grid.
    pub mu_starts: Vec<C64>,
    /// Number of best screened candidates refined by gradient ascent.
    pub ascents: usize,
    pub optimizer: OptimizeOptions,
    /// Imaginary parts of the reported slices (nearest grid row is used).
    pub slices_im: Vec<f64>,
    pub posterior_samples: usize,
    /// Also fit noiseless data at the true hyperparameters and report the
    /// MSE at the training inputs.
    pub interpolation_check: bool,
}

impl Default for Exp1Config {
    fn default() -> Self {
        Self {
            grid_min: -6.0,
            grid_max: 5.0,
            grid_points: 80,
            n_train: 200,
            gamma: 1.125,
            mu: C64::new(2.0, 2.0),
            v_r: 1.0,
            v_rj: 1.0,
            noise_std: 0.1,
            seed: 0,
            runs: 1,
            initial_noise_var: 0.05,
            gamma_screen: vec![0.3, 1.0, 3.0],
            mu_screen_radius: 4.0,
            mu_screen_points: 8,
            mu_starts: Vec::new(),
            ascents: 2,
            optimizer: OptimizeOptions {
                restarts: 0,
                ..OptimizeOptions::default()
            },
            slices_im: vec![4.4430, -0.5696],
            posterior_samples: 4,
            interpolation_check: true,
        }
    }
}

impl Exp1Config {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points < 2 || !(self.grid_max > self.grid_min) {
            return Err(Error::InvalidArgument(
                "grid needs two or more points and max > min".into(),
            ));
        }
        if self.n_train == 0 || self.n_train > self.grid_points * self.grid_points {
            return Err(Error::InvalidArgument(format!(
                "n_train must lie in 1..={}, got {}",
                self.grid_points * self.grid_points,
                self.n_train
            )));
        }
        if !(self.noise_std >= 0.0) || !(self.gamma > 0.0) {
            return Err(Error::InvalidArgument(
                "gamma must be positive and noise_std non-negative".into(),
            ));
        }
        if self.gamma_screen.is_empty() || self.gamma_screen.iter().any(|g| !(*g > 0.0)) {
            return Err(Error::InvalidArgument("gamma_screen needs positive entries".into()));
        }
        if self.mu_screen_points == 0 && self.mu_starts.is_empty() {
            return Err(Error::InvalidArgument("no mu candidates to screen".into()));
        }
        if self.ascents == 0 || !(self.initial_noise_var > 0.0) {
            return Err(Error::InvalidArgument(
                "ascents and initial_noise_var must be positive".into(),
            ));
        }
        if self.runs == 0 {
            return Err(Error::InvalidArgument("runs must be positive".into()));
        }
        Ok(())
    }

    pub fn true_kernel(&self) -> Result<Kernel> {
        Kernel::convolution_proper(self.gamma, vec![self.mu], self.v_r, self.v_rj)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recovered {
    pub gamma: f64,
    pub mu: C64,
    pub noise_std: f64,
    pub log_likelihood: f64,
}

/// Grid row at one imaginary part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub im: f64,
    pub re: Vec<f64>,
    pub truth: Vec<C64>,
    pub mean: Vec<C64>,
    pub std: Vec<f64>,
    pub samples: Vec<Vec<C64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp1Run {
    pub run: usize,
    pub mse_db: f64,
    pub recovered: Recovered,
    pub optimizer: OptimizeReport,
    /// `(γ start, μ start, final L)` for every refined start.
    pub starts: Vec<(f64, C64, f64)>,
    pub interpolation_mse_db: Option<f64>,
    pub slices: Vec<Slice>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp1Report {
    pub config: Exp1Config,
    pub runs: Vec<Exp1Run>,
    /// `(run, message)` for runs that failed numerically.
    pub failures: Vec<(usize, String)>,
    pub median_mse_db: Option<f64>,
}

pub(crate) fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    Some(if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    })
}

fn mse(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>() / a.len() as f64
}

fn learn_spec(cfg: &Exp1Config, gamma0: f64, mu0: C64) -> Result<HyperSpec> {
    HyperSpec::new(vec![
        HyperEntry::log(HyperId::Gamma, gamma0),
        HyperEntry::real(HyperId::MuRe(0), mu0.re),
        HyperEntry::real(HyperId::MuIm(0), mu0.im),
        HyperEntry::log(HyperId::NoiseVar, cfg.initial_noise_var),
    ])
}

/// The `cfg.ascents` `(γ, μ)` candidates with the largest likelihood at
/// the starting noise variance, best first.
fn screen_starts(cfg: &Exp1Config, train: &ComplexDataset, kernel: &Kernel) -> Vec<(f64, C64)> {
    let axis = linspace(-cfg.mu_screen_radius, cfg.mu_screen_radius, cfg.mu_screen_points);
    let mut mus: Vec<C64> = axis
        .iter()
        .flat_map(|&re| axis.iter().map(move |&im| C64::new(re, im)))
        .collect();
    mus.extend(&cfg.mu_starts);
    let mut scored = Vec::with_capacity(mus.len() * cfg.gamma_screen.len());
    for &g in &cfg.gamma_screen {
        for &mu in &mus {
            let mut k = kernel.clone();
            if k.params.set_gamma(g).is_err() {
                continue;
            }
            k.params.mu = vec![mu];
            if let Ok(m) = GprModel::fit(train.clone(), k, cfg.initial_noise_var) {
                let ll = m.log_marginal_likelihood();
                if ll.is_finite() {
                    scored.push((ll, g, mu));
                }
            }
        }
    }
    // stable sort keeps screening order on ties
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.into_iter().take(cfg.ascents).map(|(_, g, mu)| (g, mu)).collect()
}

/// Runs one realization. `run` selects the RNG stream.
pub fn run_once(cfg: &Exp1Config, sampler: &CirculantSampler, run: usize) -> Result<Exp1Run> {
    let mut rng = run_rng(cfg.seed, run as u64);
    let kernel = cfg.true_kernel()?;
    let grid = grid_inputs(cfg.grid_min, cfg.grid_max, cfg.grid_points);
    let f = sampler.sample(&mut rng);

    let idx = sample(&mut rng, grid.len(), cfg.n_train).into_vec();
    let sd = cfg.noise_std * std::f64::consts::FRAC_1_SQRT_2;
    let inputs: Vec<Vec<C64>> = idx.iter().map(|&i| grid[i].clone()).collect();
    let outputs: Vec<C64> = idx
        .iter()
        .map(|&i| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            f[i] + C64::new(a, b) * sd
        })
        .collect();
    let train = ComplexDataset::new(inputs, outputs)?;

    let mut opts = cfg.optimizer.clone();
    opts.seed = rng.random();
    let mut best: Option<(Kernel, f64, OptimizeReport)> = None;
    let starts = screen_starts(cfg, &train, &kernel);
    let mut per_start = Vec::with_capacity(starts.len());
    let mut last_err = None;
    for &(gamma0, mu0) in &starts {
        let spec = learn_spec(cfg, gamma0, mu0)?;
        match maximize(&train, &kernel, cfg.initial_noise_var, &spec, &opts) {
            Ok(out) => {
                per_start.push((gamma0, mu0, out.2.log_likelihood));
                if best.as_ref().is_none_or(|b| out.2.log_likelihood > b.2.log_likelihood) {
                    best = Some(out);
                }
            }
            Err(e) => {
                per_start.push((gamma0, mu0, f64::NEG_INFINITY));
                last_err = Some(e);
            }
        }
    }
    let Some((learned, noise_var, report)) = best else {
        return Err(
            last_err.unwrap_or_else(|| Error::InvalidArgument("no screened start had a finite likelihood".into()))
        );
    };

    let model = GprModel::fit(train.clone(), learned.clone(), noise_var)?;
    let mean = model.predict_mean(&grid)?;
    let mse_db = db(mse(&mean, &f));

    let interpolation_mse_db = if cfg.interpolation_check {
        let clean: Vec<C64> = idx.iter().map(|&i| f[i]).collect();
        let d = ComplexDataset::new(train.inputs().to_vec(), clean.clone())?;
        let m = GprModel::fit(d, kernel.clone(), 1e-10)?;
        Some(db(mse(&m.predict_mean(train.inputs())?, &clean)))
    } else {
        None
    };

    let axis = linspace(cfg.grid_min, cfg.grid_max, cfg.grid_points);
    let mut slices = Vec::with_capacity(cfg.slices_im.len());
    for &target in &cfg.slices_im {
        let q = (0..axis.len())
            .min_by(|&a, &b| (axis[a] - target).abs().total_cmp(&(axis[b] - target).abs()))
            .expect("non-empty axis");
        let rows: Vec<usize> = (0..cfg.grid_points).map(|p| q * cfg.grid_points + p).collect();
        let xs: Vec<Vec<C64>> = rows.iter().map(|&i| grid[i].clone()).collect();
        let (mean, var) = model.predict_marginal(&xs)?;
        let samples = if cfg.posterior_samples > 0 {
            model.sample_posterior(&xs, cfg.posterior_samples, rng.random())?
        } else {
            Vec::new()
        };
        slices.push(Slice {
            im: axis[q],
            re: axis.clone(),
            truth: rows.iter().map(|&i| f[i]).collect(),
            mean,
            std: var.iter().map(|v| v.max(0.0).sqrt()).collect(),
            samples,
        });
    }

    Ok(Exp1Run {
        run,
        mse_db,
        recovered: Recovered {
            gamma: learned.params.gamma(),
            mu: learned.params.mu[0],
            noise_std: noise_var.sqrt(),
            log_likelihood: report.log_likelihood,
        },
        optimizer: report,
        starts: per_start,
        interpolation_mse_db,
        slices,
    })
}

/// Runs `cfg.runs` independent realizations. Numerical failures are
/// recorded per run.
pub fn run_experiment_1(cfg: &Exp1Config) -> Result<Exp1Report> {
    cfg.validate()?;
    let sampler = CirculantSampler::new(&cfg.true_kernel()?, cfg.grid_min, cfg.grid_max, cfg.grid_points)?;
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for run in 0..cfg.runs {
        match run_once(cfg, &sampler, run) {
            Ok(r) => runs.push(r),
            Err(e) if e.is_numerical() => failures.push((
                run,
                Error::AtSeed {
                    seed: cfg.seed,
                    source: Box::new(e),
                }
                .to_string(),
            )),
            Err(e) => return Err(e),
        }
    }
    let median_mse_db = median(&runs.iter().map(|r| r.mse_db).collect::<Vec<_>>());
    Ok(Exp1Report {
        config: cfg.clone(),
        runs,
        failures,
        median_mse_db,
    })
}
