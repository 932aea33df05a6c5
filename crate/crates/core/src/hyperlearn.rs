//! Hyperparameter learning by maximizing the log marginal likelihood.
//!
//! `L(θ) = −yᴴC⁻¹y − log det C − n·ln π` is a real function of the real
//! hyperparameters. Treating `C` as an unpatterned complex matrix and
//! applying the chain rule through its entries gives
//!
//! ```text
//! ∂L/∂θᵢ = Tr((C⁻¹·y·yᴴ·C⁻¹ − C⁻¹)·∂C/∂θᵢ)
//! ```
//!
//! Both factors are Hermitian whenever `θᵢ` is real, so the trace is real;
//! an imaginary residue above round-off is reported as an error rather than
//! dropped.
//!
//! The optimizer is plain gradient ascent with Armijo backtracking, run
//! from the given start plus a few randomized restarts in `γ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpr::{ComplexDataset, GprModel};
use crate::kernels::{HyperId, Kernel};
use crate::linalg::{ComplexMatrix, C64};

/// Relative tolerance on the imaginary part of a gradient trace.
pub const GRADIENT_IMAG_TOL: f64 = 1e-10;

/// Coordinate in which a hyperparameter is optimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// `θ = ln p`, for strictly positive `p`.
    LogPositive,
    /// `θ = p`.
    UnconstrainedReal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperEntry {
    pub id: HyperId,
    pub domain: Domain,
    /// Starting value in natural units (e.g. `γ`, not `ln γ`).
    pub initial: f64,
}

impl HyperEntry {
    pub fn log(id: HyperId, initial: f64) -> Self {
        Self {
            id,
            domain: Domain::LogPositive,
            initial,
        }
    }

    pub fn real(id: HyperId, initial: f64) -> Self {
        Self {
            id,
            domain: Domain::UnconstrainedReal,
            initial,
        }
    }

    fn to_coordinate(&self, natural: f64) -> Result<f64> {
        match self.domain {
            Domain::LogPositive if natural > 0.0 => Ok(natural.ln()),
            Domain::LogPositive => Err(Error::InvalidArgument(format!(
                "{} must be positive, got {natural}",
                self.id
            ))),
            Domain::UnconstrainedReal => Ok(natural),
        }
    }

    fn to_natural(&self, coordinate: f64) -> f64 {
        match self.domain {
            Domain::LogPositive => coordinate.exp(),
            Domain::UnconstrainedReal => coordinate,
        }
    }
}

/// Ordered list of hyperparameters to learn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<HyperEntry>", into = "Vec<HyperEntry>")]
pub struct HyperSpec {
    entries: Vec<HyperEntry>,
}

impl HyperSpec {
    pub fn new(entries: Vec<HyperEntry>) -> Result<Self> {
        for (i, e) in entries.iter().enumerate() {
            if entries[..i].iter().any(|f| f.id == e.id) {
                return Err(Error::InvalidArgument(format!("duplicate hyperparameter {}", e.id)));
            }
            if e.domain == Domain::LogPositive && !e.id.is_positive() {
                return Err(Error::InvalidArgument(format!(
                    "{} is not a positive parameter and cannot use the log domain",
                    e.id
                )));
            }
            if e.id.is_positive() && !(e.initial > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{} must start positive, got {}",
                    e.id, e.initial
                )));
            }
            if !e.initial.is_finite() {
                return Err(Error::InvalidArgument(format!("{} must be finite", e.id)));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[HyperEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Checks that every id is either `noise_var` or read by the kernel.
    pub fn validate_for(&self, kernel: &Kernel, dim: usize) -> Result<()> {
        for e in &self.entries {
            let ok = match e.id {
                HyperId::NoiseVar => true,
                HyperId::MuRe(k) | HyperId::MuIm(k) => kernel.kind.reads(e.id) && k < dim,
                id => kernel.kind.reads(id),
            };
            if !ok {
                return Err(Error::UnknownHyperparameter(format!("{} for {}", e.id, kernel.kind)));
            }
        }
        Ok(())
    }

    /// Initial optimization coordinates.
    pub fn initial_coordinates(&self) -> Result<Vec<f64>> {
        self.entries.iter().map(|e| e.to_coordinate(e.initial)).collect()
    }

    /// Current coordinates read back from a kernel and noise variance.
    pub fn coordinates_of(&self, kernel: &Kernel, noise_var: f64) -> Result<Vec<f64>> {
        self.entries
            .iter()
            .map(|e| e.to_coordinate(natural_value(kernel, noise_var, e.id)?))
            .collect()
    }

    /// Writes coordinates `theta` into copies of `kernel` and `noise_var`.
    pub fn apply(&self, kernel: &Kernel, noise_var: f64, theta: &[f64]) -> Result<(Kernel, f64)> {
        if theta.len() != self.entries.len() {
            return Err(Error::DimensionMismatch {
                expected: self.entries.len(),
                found: theta.len(),
            });
        }
        let mut k = kernel.clone();
        let mut noise = noise_var;
        for (e, &t) in self.entries.iter().zip(theta) {
            let p = e.to_natural(t);
            if !p.is_finite() || (e.id.is_positive() && !(p > 0.0)) {
                return Err(Error::InvalidArgument(format!("{} out of range: {p}", e.id)));
            }
            match e.id {
                HyperId::NoiseVar => noise = p,
                id if id.is_positive() => k.params.set(id, p.ln())?,
                id => k.params.set(id, p)?,
            }
        }
        Ok((k, noise))
    }

    /// `(id, natural value)` pairs for coordinates `theta`.
    pub fn named_values(&self, theta: &[f64]) -> Vec<(HyperId, f64)> {
        self.entries
            .iter()
            .zip(theta)
            .map(|(e, &t)| (e.id, e.to_natural(t)))
            .collect()
    }
}

impl TryFrom<Vec<HyperEntry>> for HyperSpec {
    type Error = Error;

    fn try_from(v: Vec<HyperEntry>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<HyperSpec> for Vec<HyperEntry> {
    fn from(s: HyperSpec) -> Self {
        s.entries
    }
}

fn natural_value(kernel: &Kernel, noise_var: f64, id: HyperId) -> Result<f64> {
    match id {
        HyperId::NoiseVar => Ok(noise_var),
        id if id.is_positive() => Ok(kernel.params.get(id)?.exp()),
        id => kernel.params.get(id),
    }
}

/// `Tr(W·G)` for square matrices of equal size.
fn trace_product(w: &ComplexMatrix, g: &ComplexMatrix) -> (C64, f64) {
    let n = w.rows();
    let mut acc = C64::new(0.0, 0.0);
    let mut scale = 0.0;
    for a in 0..n {
        for b in 0..n {
            let t = w[(a, b)] * g[(b, a)];
            acc += t;
            scale += t.norm();
        }
    }
    (acc, scale)
}

/// `W = C⁻¹·y·yᴴ·C⁻¹ − C⁻¹`.
fn gradient_weight(model: &GprModel) -> ComplexMatrix {
    let alpha = model.alpha();
    let mut w = model.factor().inverse();
    let n = w.rows();
    for a in 0..n {
        for b in 0..n {
            w[(a, b)] = alpha[a] * alpha[b].conj() - w[(a, b)];
        }
    }
    w
}

/// Gradient of the log marginal likelihood with respect to the spec's
/// coordinates, evaluated at the model's current hyperparameters.
pub fn likelihood_gradient(model: &GprModel, spec: &HyperSpec) -> Result<Vec<f64>> {
    let kernel = model.kernel();
    spec.validate_for(kernel, model.dataset().dim())?;
    let w = gradient_weight(model);
    let inputs = model.dataset().inputs();
    let mut grad = Vec::with_capacity(spec.len());
    for e in spec.entries() {
        // derivative with respect to the parameter's internal coordinate
        // (log for positive parameters)
        let (value, scale) = match e.id {
            HyperId::NoiseVar => {
                let s2 = model.noise_var();
                let tr = w.trace();
                let scale = (0..w.rows()).map(|i| w[(i, i)].norm()).sum::<f64>();
                (tr * s2, scale * s2)
            }
            id => {
                let g = kernel.gram_gradient(inputs, id)?;
                trace_product(&w, &g)
            }
        };
        if value.im.abs() > GRADIENT_IMAG_TOL * scale.max(1.0) {
            return Err(Error::GradientNotReal {
                id: e.id.to_string(),
                residue: value.im,
            });
        }
        let mut d = value.re;
        if e.id.is_positive() && e.domain == Domain::UnconstrainedReal {
            d /= natural_value(kernel, model.noise_var(), e.id)?;
        }
        grad.push(d);
    }
    Ok(grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizeOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub seed: u64,
    /// Randomized restarts in addition to the start given by the `HyperSpec`.
    pub restarts: usize,
    pub initial_step: f64,
    /// Start each line search after the first from twice the previously
    /// accepted step (capped at `initial_step`) instead of `initial_step`.
    pub reuse_step: bool,
    pub armijo: f64,
    pub backtrack: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            grad_tol: 1e-6,
            seed: 0,
            restarts: 4,
            initial_step: 1.0,
            reuse_step: true,
            armijo: 1e-4,
            backtrack: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeReport {
    /// Final hyperparameters in natural units.
    pub params: Vec<(HyperId, f64)>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
    /// `(iteration, L)` after each accepted step, starting at iteration 0.
    pub trace: Vec<(usize, f64)>,
    /// Index of the winning start (0 is the spec's start).
    pub start_index: usize,
    /// Final `L` of every start.
    pub start_likelihoods: Vec<f64>,
}

struct Ascent {
    theta: Vec<f64>,
    model: GprModel,
    ll: f64,
    grad: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn describe(spec: &HyperSpec, theta: &[f64]) -> String {
    spec.named_values(theta)
        .iter()
        .map(|(id, v)| format!("{id}={v:.6e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn evaluate(
    dataset: &ComplexDataset,
    kernel: &Kernel,
    noise_var: f64,
    spec: &HyperSpec,
    theta: &[f64],
) -> Result<(GprModel, f64)> {
    let (k, s2) = spec.apply(kernel, noise_var, theta)?;
    let model = GprModel::fit(dataset.clone(), k, s2)?;
    let ll = model.log_marginal_likelihood();
    if !ll.is_finite() {
        return Err(Error::InvalidArgument("non-finite log likelihood".into()));
    }
    Ok((model, ll))
}

fn ascend(
    dataset: &ComplexDataset,
    kernel: &Kernel,
    noise_var: f64,
    spec: &HyperSpec,
    theta0: Vec<f64>,
    opts: &OptimizeOptions,
) -> Result<(Ascent, OptimizeReport)> {
    let attach = |theta: &[f64], e: Error| Error::AtParameters {
        params: describe(spec, theta),
        source: Box::new(e),
    };
    let (model, ll) = evaluate(dataset, kernel, noise_var, spec, &theta0).map_err(|e| attach(&theta0, e))?;
    let grad = likelihood_gradient(&model, spec).map_err(|e| attach(&theta0, e))?;
    let mut state = Ascent {
        theta: theta0,
        model,
        ll,
        grad,
    };
    let mut trace = vec![(0, state.ll)];
    let mut converged = false;
    let mut iterations = 0;
    let mut first_step = opts.initial_step;
    while iterations < opts.max_iter {
        let gnorm = norm(&state.grad);
        if gnorm <= opts.grad_tol {
            converged = true;
            break;
        }
        let g2 = gnorm * gnorm;
        let mut step = first_step;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = state.theta.iter().zip(&state.grad).map(|(t, g)| t + step * g).collect();
            if let Ok((m, ll)) = evaluate(dataset, kernel, noise_var, spec, &trial) {
                if ll >= state.ll + opts.armijo * step * g2 {
                    accepted = Some((trial, m, ll));
                    break;
                }
            }
            step *= opts.backtrack;
        }
        let Some((theta, model, ll)) = accepted else {
            break;
        };
        if opts.reuse_step {
            first_step = (2.0 * step).min(opts.initial_step);
        }
        let grad = likelihood_gradient(&model, spec).map_err(|e| attach(&theta, e))?;
        iterations += 1;
        state = Ascent { theta, model, ll, grad };
        trace.push((iterations, state.ll));
    }
    if !converged && norm(&state.grad) <= opts.grad_tol {
        converged = true;
    }
    let report = OptimizeReport {
        params: spec.named_values(&state.theta),
        log_likelihood: state.ll,
        iterations,
        grad_norm: norm(&state.grad),
        converged,
        trace,
        start_index: 0,
        start_likelihoods: Vec::new(),
    };
    Ok((state, report))
}

/// Median squared Hermitian distance between inputs, over at most the
/// first 200 points.
pub fn median_squared_distance(inputs: &[Vec<C64>]) -> f64 {
    let pts = &inputs[..inputs.len().min(200)];
    let mut d: Vec<f64> = Vec::with_capacity(pts.len() * pts.len() / 2);
    for i in 0..pts.len() {
        for j in 0..i {
            d.push(pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b).norm_sqr()).sum());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    if *m > 0.0 {
        *m
    } else {
        1.0
    }
}

/// Maximizes the log marginal likelihood over the hyperparameters in `spec`.
///
/// Hyperparameters not listed in `spec` keep their values from `kernel`
/// and `noise_var`. Start 0 uses the spec's initial values; each of the
/// `opts.restarts` further starts draws `γ` log-uniformly from
/// `[0.1, 10]·median squared distance` and resets `μ` to zero. The start with
/// the largest final likelihood wins; ties go to the lower index.
pub fn maximize(
    dataset: &ComplexDataset,
    kernel: &Kernel,
    noise_var: f64,
    spec: &HyperSpec,
    opts: &OptimizeOptions,
) -> Result<(Kernel, f64, OptimizeReport)> {
    if spec.is_empty() {
        return Err(Error::InvalidArgument("empty hyperparameter spec".into()));
    }
    if dataset.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two observations to learn hyperparameters".into(),
        ));
    }
    spec.validate_for(kernel, dataset.dim())?;
    let theta0 = spec.initial_coordinates()?;
    let mut starts = vec![theta0.clone()];
    if opts.max_iter > 0 {
        let msd = median_squared_distance(dataset.inputs());
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for _ in 0..opts.restarts {
            let mut t = theta0.clone();
            let u: f64 = rng.random_range(-1.0..=1.0);
            let gamma = msd * 10f64.powf(u);
            for (e, ti) in spec.entries().iter().zip(t.iter_mut()) {
                match e.id {
                    HyperId::Gamma => *ti = e.to_coordinate(gamma)?,
                    HyperId::MuRe(_) | HyperId::MuIm(_) => *ti = 0.0,
                    _ => {}
                }
            }
            starts.push(t);
        }
    }

    let mut best: Option<(Ascent, OptimizeReport)> = None;
    let mut lls = Vec::with_capacity(starts.len());
    let mut first_err = None;
    for (idx, theta) in starts.into_iter().enumerate() {
        match ascend(dataset, kernel, noise_var, spec, theta, opts) {
            Ok((state, mut report)) => {
                lls.push(report.log_likelihood);
                report.start_index = idx;
                let better = best.as_ref().is_none_or(|(b, _)| state.ll > b.ll);
                if better {
                    best = Some((state, report));
                }
            }
            Err(e) => {
                lls.push(f64::NEG_INFINITY);
                if idx == 0 {
                    first_err = Some(e);
                }
            }
        }
    }
    let Some((state, mut report)) = best else {
        return Err(first_err.expect("start 0 always runs"));
    };
    report.start_likelihoods = lls;
    let kernel = state.model.kernel().clone();
    let noise = state.model.noise_var();
    Ok((kernel, noise, report))
}
