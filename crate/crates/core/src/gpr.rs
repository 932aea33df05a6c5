//! Proper complex Gaussian-process regression.
//!
//! With a zero-mean proper prior `f ~ CN(0, K, 0)` and proper white noise
//! of variance `σ²`, the training outputs are `y ~ CN(0, C, 0)` with
//! `C = K + σ²·I`, and the predictive distribution at test inputs `X*` is
//! proper with
//!
//! ```text
//! mean       = K(X*, X)·C⁻¹·y
//! covariance = K(X*, X*) − K(X*, X)·C⁻¹·K(X, X*)
//! ```
//!
//! The pseudo-covariance of the prediction is identically zero and is not
//! returned. No check is made that user data are actually proper.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernels::{check_inputs, Kernel};
use crate::linalg::{cholesky_with_fallback, dot_conj, log_det, ComplexMatrix, HermitianFactor, C64};
use crate::mol::{composite_covariance, real_cholesky_with_fallback};

/// Paired complex inputs and complex scalar outputs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComplexDataset {
    inputs: Vec<Vec<C64>>,
    outputs: Vec<C64>,
}

impl ComplexDataset {
    pub fn new(inputs: Vec<Vec<C64>>, outputs: Vec<C64>) -> Result<Self> {
        if inputs.len() != outputs.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                found: outputs.len(),
            });
        }
        check_inputs(&inputs)?;
        Ok(Self { inputs, outputs })
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    /// Input dimension (0 for an empty dataset).
    pub fn dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn inputs(&self) -> &[Vec<C64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[C64] {
        &self.outputs
    }

    pub fn push(&mut self, x: Vec<C64>, y: C64) -> Result<()> {
        if !self.is_empty() && x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        self.inputs.push(x);
        self.outputs.push(y);
        Ok(())
    }

    /// Subset by index, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            outputs: indices.iter().map(|&i| self.outputs[i]).collect(),
        }
    }

    /// CSV header for `dim`-dimensional inputs.
    pub fn csv_header(dim: usize) -> Vec<String> {
        let mut h: Vec<String> = (0..dim).map(|k| format!("x_re_{k}")).collect();
        h.extend((0..dim).map(|k| format!("x_im_{k}")));
        h.push("y_re".into());
        h.push("y_im".into());
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> std::result::Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        let d = self.dim();
        wr.write_record(Self::csv_header(d))?;
        for (x, y) in self.inputs.iter().zip(&self.outputs) {
            let mut rec: Vec<String> = x.iter().map(|z| z.re.to_string()).collect();
            rec.extend(x.iter().map(|z| z.im.to_string()));
            rec.push(y.re.to_string());
            rec.push(y.im.to_string());
            wr.write_record(rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd
            .headers()
            .map_err(|e| csv_err("<reader>", e))?
            .iter()
            .map(str::to_string)
            .collect::<Vec<_>>();
        if header.len() < 2 || header.len() % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "dataset header must have 2d+2 columns, got {}",
                header.len()
            )));
        }
        let d = (header.len() - 2) / 2;
        if header != Self::csv_header(d) {
            return Err(Error::InvalidArgument(format!("unexpected dataset header {header:?}")));
        }
        let mut out = Self::default();
        for rec in rd.records() {
            let rec = rec.map_err(|e| csv_err("<reader>", e))?;
            let vals = rec
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidArgument(format!("not a number: {s:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            let x = (0..d).map(|k| C64::new(vals[k], vals[d + k])).collect();
            out.push(x, C64::new(vals[2 * d], vals[2 * d + 1]))?;
        }
        Ok(out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(f).map_err(|e| csv_err(path, e))
    }
}

fn csv_err(path: impl AsRef<Path>, source: csv::Error) -> Error {
    Error::Csv {
        path: path.as_ref().to_path_buf(),
        source,
    }
}

/// Posterior mean and Hermitian covariance at a set of test inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorPredictive {
    pub mean: Vec<C64>,
    pub covariance: ComplexMatrix,
}

impl PosteriorPredictive {
    /// Diagonal of the covariance.
    pub fn variance(&self) -> Vec<f64> {
        (0..self.mean.len()).map(|i| self.covariance[(i, i)].re).collect()
    }
}

/// A fitted model: dataset, kernel, noise variance and the cached factor
/// of `C = K + σ²·I` together with `C⁻¹·y`.
///
/// Models are immutable; [`GprModel::append_observation`] consumes the model
/// and returns the grown one.
#[derive(Debug, Clone)]
pub struct GprModel {
    dataset: ComplexDataset,
    kernel: Kernel,
    noise_var: f64,
    jitter: f64,
    factor: HermitianFactor,
    /// `L⁻¹·y`
    whitened: Vec<C64>,
    /// `C⁻¹·y`
    alpha: Vec<C64>,
}

fn check_noise(noise_var: f64) -> Result<()> {
    if !(noise_var > 0.0 && noise_var.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise variance must be positive, got {noise_var}"
        )));
    }
    Ok(())
}

impl GprModel {
    pub fn fit(dataset: ComplexDataset, kernel: Kernel, noise_var: f64) -> Result<Self> {
        check_noise(noise_var)?;
        if dataset.is_empty() {
            return Err(Error::InvalidArgument("cannot fit an empty dataset".into()));
        }
        let mut c = kernel.gram(dataset.inputs())?;
        c.add_diagonal(noise_var);
        let (factor, jitter) = cholesky_with_fallback(&c)?;
        let whitened = factor.whiten(dataset.outputs())?;
        let mut alpha = whitened.clone();
        factor.backward_solve_in_place(&mut alpha);
        Ok(Self {
            dataset,
            kernel,
            noise_var,
            jitter,
            factor,
            whitened,
            alpha,
        })
    }

    pub fn dataset(&self) -> &ComplexDataset {
        &self.dataset
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Diagonal jitter that the factorization needed on top of `σ²`.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn factor(&self) -> &HermitianFactor {
        &self.factor
    }

    /// `C⁻¹·y`.
    pub fn alpha(&self) -> &[C64] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.dataset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dataset.is_empty()
    }

    fn check_test(&self, test: &[Vec<C64>]) -> Result<()> {
        let d = check_inputs(test)?;
        if !test.is_empty() && d != self.dataset.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dataset.dim(),
                found: d,
            });
        }
        Ok(())
    }

    /// Posterior mean `K(X*, X)·C⁻¹·y`.
    pub fn predict_mean(&self, test: &[Vec<C64>]) -> Result<Vec<C64>> {
        self.check_test(test)?;
        let train = self.dataset.inputs();
        Ok(test
            .iter()
            .map(|x| {
                train
                    .iter()
                    .zip(&self.alpha)
                    .map(|(xi, a)| self.kernel.eval_unchecked(x, xi) * a)
                    .sum()
            })
            .collect())
    }

    /// Posterior mean and marginal variances, without the full covariance.
    pub fn predict_marginal(&self, test: &[Vec<C64>]) -> Result<(Vec<C64>, Vec<f64>)> {
        self.check_test(test)?;
        let train = self.dataset.inputs();
        let mut means = Vec::with_capacity(test.len());
        let mut vars = Vec::with_capacity(test.len());
        for x in test {
            // column k(X, x*)
            let col: Vec<C64> = train.iter().map(|xi| self.kernel.eval_unchecked(xi, x)).collect();
            let mean: C64 = col.iter().zip(&self.alpha).map(|(k, a)| k.conj() * a).sum();
            let v = self.factor.whiten(&col)?;
            let prior = self.kernel.eval_unchecked(x, x).re;
            means.push(mean);
            vars.push(prior - v.iter().map(|z| z.norm_sqr()).sum::<f64>());
        }
        Ok((means, vars))
    }

    /// Full posterior predictive distribution.
    pub fn predict(&self, test: &[Vec<C64>]) -> Result<PosteriorPredictive> {
        self.check_test(test)?;
        let m = test.len();
        let n = self.len();
        let train = self.dataset.inputs();
        // V = L⁻¹·K(X, X*), one column per test point
        let mut v = Vec::with_capacity(m);
        let mut mean = Vec::with_capacity(m);
        for x in test {
            let col: Vec<C64> = train.iter().map(|xi| self.kernel.eval_unchecked(xi, x)).collect();
            mean.push(col.iter().zip(&self.alpha).map(|(k, a)| k.conj() * a).sum());
            let mut w = col;
            self.factor.forward_solve_in_place(&mut w);
            v.push(w);
        }
        debug_assert!(v.iter().all(|w| w.len() == n));
        let mut cov = ComplexMatrix::zeros(m, m);
        for a in 0..m {
            for b in 0..=a {
                let prior = self.kernel.eval_unchecked(&test[a], &test[b]);
                // (Vᴴ V)[a, b] = Σ conj(V[k, a])·V[k, b]
                let q = dot_conj(&v[b], &v[a]);
                let s = prior - q;
                cov[(a, b)] = s;
                cov[(b, a)] = s.conj();
            }
            cov[(a, a)].im = 0.0;
        }
        Ok(PosteriorPredictive { mean, covariance: cov })
    }

    /// `L = −yᴴ·C⁻¹·y − log det C − n·ln π`.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let quad: f64 = self.whitened.iter().map(|z| z.norm_sqr()).sum();
        -quad - log_det(&self.factor) - self.len() as f64 * std::f64::consts::PI.ln()
    }

    /// Grows the model by one observation using an incremental factor update.
    pub fn append_observation(mut self, x: Vec<C64>, y: C64) -> Result<Self> {
        if x.len() != self.dataset.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dataset.dim(),
                found: x.len(),
            });
        }
        let mut col: Vec<C64> = self
            .dataset
            .inputs()
            .iter()
            .map(|xi| self.kernel.eval_unchecked(xi, &x))
            .collect();
        self.factor.forward_solve_in_place(&mut col);
        let diag = self.kernel.eval_unchecked(&x, &x).re + self.noise_var + self.jitter;
        let pivot = self.factor.extend_whitened(&col, diag)?;
        let z = (y - col.iter().zip(&self.whitened).map(|(b, w)| b.conj() * w).sum::<C64>()) / pivot;
        self.whitened.push(z);
        self.dataset.push(x, y)?;
        let mut alpha = self.whitened.clone();
        self.factor.backward_solve_in_place(&mut alpha);
        self.alpha = alpha;
        Ok(self)
    }

    /// Draws from the posterior at `test` using the stacked-real sampler.
    pub fn sample_posterior(&self, test: &[Vec<C64>], count: usize, seed: u64) -> Result<Vec<Vec<C64>>> {
        let post = self.predict(test)?;
        let draws = sample_proper(&post.covariance, count, seed)?;
        Ok(draws
            .into_iter()
            .map(|f| f.iter().zip(&post.mean).map(|(a, b)| a + b).collect())
            .collect())
    }
}

/// Online regressor for one-step-ahead prediction on a growing training set.
///
/// Keeps only the factor and `L⁻¹·y`: the mean at a new input is
/// `bᴴ·(L⁻¹y)` with `b = L⁻¹·k(X, x)`, and `b` is exactly the off-diagonal
/// part of the next factor row, so each step costs one triangular solve.
#[derive(Debug, Clone)]
pub struct SequentialGpr {
    kernel: Kernel,
    noise_var: f64,
    inputs: Vec<Vec<C64>>,
    factor: HermitianFactor,
    whitened: Vec<C64>,
    capacity: Option<usize>,
    alpha: Option<Vec<C64>>,
}

impl SequentialGpr {
    pub fn new(kernel: Kernel, noise_var: f64) -> Result<Self> {
        check_noise(noise_var)?;
        Ok(Self {
            kernel,
            noise_var,
            inputs: Vec::new(),
            factor: HermitianFactor::empty(),
            whitened: Vec::new(),
            capacity: None,
            alpha: None,
        })
    }

    /// Stops growing the training set after `cap` observations; later
    /// predictions reuse the frozen model.
    pub fn with_capacity_limit(mut self, cap: Option<usize>) -> Self {
        self.capacity = cap;
        self
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    fn is_full(&self) -> bool {
        self.capacity.is_some_and(|c| self.len() >= c)
    }

    fn check_dim(&self, x: &[C64]) -> Result<()> {
        if let Some(first) = self.inputs.first() {
            if first.len() != x.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    found: x.len(),
                });
            }
        }
        Ok(())
    }

    /// Posterior mean at `x` given everything observed so far.
    pub fn predict(&self, x: &[C64]) -> Result<C64> {
        self.check_dim(x)?;
        if let Some(alpha) = &self.alpha {
            return Ok(self
                .inputs
                .iter()
                .zip(alpha)
                .map(|(xi, a)| self.kernel.eval_unchecked(x, xi) * a)
                .sum());
        }
        let (mean, _) = self.whitened_column(x);
        Ok(mean)
    }

    fn whitened_column(&self, x: &[C64]) -> (C64, Vec<C64>) {
        let mut b: Vec<C64> = self.inputs.iter().map(|xi| self.kernel.eval_unchecked(xi, x)).collect();
        self.factor.forward_solve_in_place(&mut b);
        let mean = b.iter().zip(&self.whitened).map(|(bk, w)| bk.conj() * w).sum();
        (mean, b)
    }

    /// Predicts `y` at `x` from the current training set, then adds the
    /// pair. Returns the prediction.
    pub fn predict_then_observe(&mut self, x: &[C64], y: C64) -> Result<C64> {
        self.check_dim(x)?;
        if self.is_full() {
            return self.predict(x);
        }
        let (mean, b) = self.whitened_column(x);
        let diag = self.kernel.eval_unchecked(x, x).re + self.noise_var;
        let pivot = self.factor.extend_whitened(&b, diag)?;
        self.whitened.push((y - mean) / pivot);
        self.inputs.push(x.to_vec());
        if self.is_full() {
            let mut alpha = self.whitened.clone();
            self.factor.backward_solve_in_place(&mut alpha);
            self.alpha = Some(alpha);
        }
        Ok(mean)
    }
}

/// Draws `count` proper complex vectors with covariance `k`.
///
/// The stacked real vector `[f_r; f_j]` is drawn from
/// `½·[[Re K, −Im K], [Im K, Re K]]`; the ½ splits the complex variance
/// evenly between the two real components, so `E[f fᴴ] = K` and
/// `E[f fᵀ] = 0`.
pub fn sample_proper(k: &ComplexMatrix, count: usize, seed: u64) -> Result<Vec<Vec<C64>>> {
    let n = k.rows();
    let l = real_cholesky_with_fallback(&composite_covariance(k))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = nalgebra::DVector::<f64>::zeros(2 * n);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let s = &l * &z;
        out.push((0..n).map(|i| C64::new(s[i], s[n + i])).collect());
    }
    Ok(out)
}

/// Draws `count` functions from the zero-mean proper GP prior at `inputs`.
pub fn sample_prior(kernel: &Kernel, inputs: &[Vec<C64>], count: usize, seed: u64) -> Result<Vec<Vec<C64>>> {
    let k = kernel.gram(inputs)?;
    sample_proper(&k, count, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn toy() -> ComplexDataset {
        let inputs = (0..6)
            .map(|i| vec![c(0.4 * i as f64 - 1.0, 0.3 * (i as f64).sin())])
            .collect();
        let outputs = (0..6).map(|i| c((i as f64).cos(), 0.5 * i as f64 - 1.0)).collect();
        ComplexDataset::new(inputs, outputs).unwrap()
    }

    #[test]
    fn single_point_alpha() {
        let y = c(0.6, -1.4);
        let d = ComplexDataset::new(vec![vec![c(0.3, 0.1)]], vec![y]).unwrap();
        let m = GprModel::fit(d, Kernel::complex_metric_gaussian(1.0).unwrap(), 1.0).unwrap();
        assert!((m.alpha()[0] - y / 2.0).norm() < 1e-15);
    }

    #[test]
    fn rejects_nonpositive_noise_and_empty_data() {
        let k = Kernel::complex_metric_gaussian(1.0).unwrap();
        assert!(GprModel::fit(toy(), k.clone(), 0.0).is_err());
        assert!(GprModel::fit(toy(), k.clone(), -1.0).is_err());
        assert!(GprModel::fit(ComplexDataset::default(), k, 0.1).is_err());
    }

    #[test]
    fn alpha_solves_the_system() {
        let k = Kernel::convolution_proper(0.8, vec![c(0.5, 0.5)], 1.0, 0.7).unwrap();
        let d = toy();
        let m = GprModel::fit(d.clone(), k.clone(), 0.05).unwrap();
        let mut cmat = k.gram(d.inputs()).unwrap();
        cmat.add_diagonal(0.05);
        let r = cmat.mul_vec(m.alpha()).unwrap();
        let resid: f64 = r
            .iter()
            .zip(d.outputs())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(resid <= 1e-9);
    }

    #[test]
    fn single_point_posterior_closed_form() {
        let x = vec![c(0.3, 0.1)];
        let y = c(0.6, -1.4);
        let k = Kernel::convolution_proper(0.8, vec![c(0.5, 0.5)], 1.0, 0.7).unwrap();
        let noise = 0.3;
        let m = GprModel::fit(ComplexDataset::new(vec![x.clone()], vec![y]).unwrap(), k.clone(), noise).unwrap();
        let xs = vec![c(-0.2, 0.4)];
        let p = m.predict(std::slice::from_ref(&xs)).unwrap();
        let kxx = k.eval(&x, &x).unwrap().re;
        let ksx = k.eval(&xs, &x).unwrap();
        let expected = ksx * y / (kxx + noise);
        assert!((p.mean[0] - expected).norm() < 1e-14);
        let var = k.eval(&xs, &xs).unwrap().re - ksx.norm_sqr() / (kxx + noise);
        assert!((p.variance()[0] - var).abs() < 1e-14);
    }

    #[test]
    fn interpolates_with_tiny_noise() {
        let d = toy();
        let m = GprModel::fit(d.clone(), Kernel::complex_metric_gaussian(0.5).unwrap(), 1e-12).unwrap();
        let p = m.predict(&d.inputs()[2..3]).unwrap();
        assert!((p.mean[0] - d.outputs()[2]).norm() <= 1e-4);
        assert!(p.variance()[0] <= 1e-4);
    }

    #[test]
    fn far_away_prediction_reverts_to_prior() {
        let m = GprModel::fit(toy(), Kernel::complex_metric_gaussian(0.5).unwrap(), 0.01).unwrap();
        let far = vec![vec![c(1e3, -1e3)]];
        let p = m.predict(&far).unwrap();
        assert!(p.mean[0].norm() < 1e-300);
        assert!((p.variance()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn marginal_matches_full_prediction() {
        let k = Kernel::convolution_proper(0.8, vec![c(0.5, 0.5)], 1.0, 0.7).unwrap();
        let m = GprModel::fit(toy(), k, 0.05).unwrap();
        let test: Vec<Vec<C64>> = (0..4).map(|i| vec![c(0.3 * i as f64, -0.2)]).collect();
        let full = m.predict(&test).unwrap();
        let (mean, var) = m.predict_marginal(&test).unwrap();
        let mean2 = m.predict_mean(&test).unwrap();
        for i in 0..4 {
            assert!((full.mean[i] - mean[i]).norm() < 1e-12);
            assert!((full.mean[i] - mean2[i]).norm() < 1e-12);
            assert!((full.variance()[i] - var[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn lml_single_point() {
        let y = c(0.6, -1.4);
        let noise = 0.25;
        let m = GprModel::fit(
            ComplexDataset::new(vec![vec![c(0.3, 0.1)]], vec![y]).unwrap(),
            Kernel::complex_metric_gaussian(1.0).unwrap(),
            noise,
        )
        .unwrap();
        let cval: f64 = 1.0 + noise;
        let expected = -y.norm_sqr() / cval - cval.ln() - std::f64::consts::PI.ln();
        assert!((m.log_marginal_likelihood() - expected).abs() < 1e-14);
    }

    #[test]
    fn lml_with_zero_outputs() {
        let d = toy();
        let zero = ComplexDataset::new(d.inputs().to_vec(), vec![C64::default(); d.len()]).unwrap();
        let m = GprModel::fit(zero, Kernel::complex_metric_gaussian(1.0).unwrap(), 0.1).unwrap();
        let expected = -log_det(m.factor()) - d.len() as f64 * std::f64::consts::PI.ln();
        assert!((m.log_marginal_likelihood() - expected).abs() < 1e-12);
    }

    #[test]
    fn lml_conjugation_symmetry_for_real_kernel() {
        let d = toy();
        let conj = ComplexDataset::new(d.inputs().to_vec(), d.outputs().iter().map(|z| z.conj()).collect()).unwrap();
        let k = Kernel::complex_metric_gaussian(0.7).unwrap();
        let a = GprModel::fit(d, k.clone(), 0.1).unwrap().log_marginal_likelihood();
        let b = GprModel::fit(conj, k, 0.1).unwrap().log_marginal_likelihood();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn append_matches_refit() {
        let d = toy();
        let k = Kernel::convolution_proper(0.8, vec![c(0.5, 0.5)], 1.0, 0.7).unwrap();
        let mut m = GprModel::fit(d.select(&[0, 1]), k.clone(), 0.05).unwrap();
        for i in 2..d.len() {
            m = m.append_observation(d.inputs()[i].clone(), d.outputs()[i]).unwrap();
            assert_eq!(m.len(), i + 1);
        }
        let full = GprModel::fit(d, k, 0.05).unwrap();
        for (a, b) in m.alpha().iter().zip(full.alpha()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn appending_duplicate_point_is_fine() {
        let d = toy();
        let k = Kernel::complex_metric_gaussian(1.0).unwrap();
        let m = GprModel::fit(d.select(&[0]), k, 0.01).unwrap();
        let m = m.append_observation(d.inputs()[0].clone(), d.outputs()[0]).unwrap();
        assert_eq!(m.len(), 2);
    }

    #[test]
    fn append_checks_dimension() {
        let m = GprModel::fit(toy(), Kernel::complex_metric_gaussian(1.0).unwrap(), 0.01).unwrap();
        assert!(m.append_observation(vec![c(0., 0.), c(1., 1.)], c(0., 0.)).is_err());
    }

    #[test]
    fn sequential_matches_batch_predictions() {
        let d = toy();
        let k = Kernel::convolution_proper(0.8, vec![c(0.5, 0.5)], 1.0, 0.7).unwrap();
        let mut seq = SequentialGpr::new(k.clone(), 0.05).unwrap();
        assert_eq!(
            seq.predict_then_observe(&d.inputs()[0], d.outputs()[0]).unwrap(),
            c(0., 0.)
        );
        for i in 1..d.len() {
            let batch = GprModel::fit(d.select(&(0..i).collect::<Vec<_>>()), k.clone(), 0.05)
                .unwrap()
                .predict_mean(&d.inputs()[i..i + 1])
                .unwrap()[0];
            let online = seq.predict_then_observe(&d.inputs()[i], d.outputs()[i]).unwrap();
            assert!((batch - online).norm() < 1e-12);
        }
    }

    #[test]
    fn capped_sequential_model_freezes() {
        let d = toy();
        let k = Kernel::complex_metric_gaussian(0.8).unwrap();
        let mut seq = SequentialGpr::new(k.clone(), 0.05)
            .unwrap()
            .with_capacity_limit(Some(3));
        for i in 0..d.len() {
            seq.predict_then_observe(&d.inputs()[i], d.outputs()[i]).unwrap();
        }
        assert_eq!(seq.len(), 3);
        let batch = GprModel::fit(d.select(&[0, 1, 2]), k, 0.05).unwrap();
        let x = vec![c(0.1, 0.1)];
        let a = batch.predict_mean(std::slice::from_ref(&x)).unwrap()[0];
        assert!((seq.predict(&x).unwrap() - a).norm() < 1e-12);
    }

    #[test]
    fn prior_samples_are_reproducible() {
        let k = Kernel::convolution_proper(1.0, vec![c(1.0, 1.0)], 1.0, 1.0).unwrap();
        let x: Vec<Vec<C64>> = (0..4).map(|i| vec![c(i as f64, 0.0)]).collect();
        let a = sample_prior(&k, &x, 3, 42).unwrap();
        let b = sample_prior(&k, &x, 3, 42).unwrap();
        assert_eq!(a, b);
        let c2 = sample_prior(&k, &x, 3, 43).unwrap();
        assert_ne!(a, c2);
    }

    #[test]
    fn dataset_csv_roundtrip() {
        let d = ComplexDataset::new(
            vec![vec![c(0.1, -0.2), c(1.5, 2.5)], vec![c(-3.0, 0.0), c(0.25, 1e-3)]],
            vec![c(1.0, 2.0), c(-0.5, 0.125)],
        )
        .unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x_re_0,x_re_1,x_im_0,x_im_1,y_re,y_im\n"));
        assert_eq!(ComplexDataset::read_csv(buf.as_slice()).unwrap(), d);
        assert!(ComplexDataset::read_csv("a,b,c\n1,2,3\n".as_bytes()).is_err());
    }
}
