//! Complex covariance functions.
//!
//! Four kernels over complex input vectors:
//!
//! * [`KernelKind::ComplexMetricGaussian`]: `exp(−(x−x′)ᴴ(x−x′)/γ)`, a real,
//!   stationary and isotropic kernel built on the Hermitian distance.
//! * [`KernelKind::ConvolutionProper`]: the kernel induced by filtering two
//!   independent white noises with Gaussian responses, one of them shifted by
//!   a complex lag `μ`. Its real part is a Gaussian in `d = x′ − x` and its
//!   imaginary part is the skew term
//!   `v_r·v_rj·[exp(−|d−μ|²/2γ) − exp(−|d+μ|²/2γ)]`, which vanishes at `d = 0`.
//!   The `(πγ/2)^d` normalization of the construction is dropped; the overall
//!   scale lives in `v_r` and `v_rj`.
//! * [`KernelKind::PriorArtComplexGaussian`]: `exp(−(x−x′*)ᵀ(x−x′*)/γ)`, the
//!   non-stationary complex Gaussian kernel used by complex kernel LMS.
//!   Its real exponent grows with the imaginary parts of the inputs and can
//!   overflow.
//! * [`KernelKind::IndependentKernel`]: a real Gaussian applied separately to
//!   real and imaginary input parts, with skew cross terms.
//!
//! All four are Hermitian: `k(x, x′) = conj(k(x′, x))`.
//!
//! The convolution kernel is sign-symmetric in `(v_r, v_rj)` jointly: only
//! `v_r²`, `v_rj²` and `v_r·v_rj` enter, so `(v_r, v_rj)` and `(−v_r, −v_rj)`
//! are indistinguishable.
//!
//! Note: an older typeset form of the convolution kernel shows the two
//! imaginary-part exponentials multiplied. That product is symmetric in `d`
//! and cannot be the imaginary part of a Hermitian kernel; the difference
//! used here is the correct result of the convolution integral.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64};

/// Real exponent above which the prior-art kernel is flagged as overflowing.
pub const OVERFLOW_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    ComplexMetricGaussian,
    ConvolutionProper,
    PriorArtComplexGaussian,
    IndependentKernel,
}

impl KernelKind {
    pub const ALL: [KernelKind; 4] = [
        KernelKind::ComplexMetricGaussian,
        KernelKind::ConvolutionProper,
        KernelKind::PriorArtComplexGaussian,
        KernelKind::IndependentKernel,
    ];

    /// Whether this kind reads the given hyperparameter.
    pub fn reads(self, id: HyperId) -> bool {
        use HyperId::*;
        match self {
            KernelKind::ComplexMetricGaussian | KernelKind::PriorArtComplexGaussian => {
                matches!(id, Gamma)
            }
            KernelKind::ConvolutionProper => matches!(id, Gamma | MuRe(_) | MuIm(_) | VR | VRJ),
            KernelKind::IndependentKernel => matches!(id, Gamma | Amplitude),
        }
    }

    /// Hyperparameters read by this kind for `dim`-dimensional inputs.
    pub fn hyperparameters(self, dim: usize) -> Vec<HyperId> {
        let mut ids = vec![HyperId::Gamma];
        match self {
            KernelKind::ConvolutionProper => {
                ids.extend((0..dim).map(HyperId::MuRe));
                ids.extend((0..dim).map(HyperId::MuIm));
                ids.push(HyperId::VR);
                ids.push(HyperId::VRJ);
            }
            KernelKind::IndependentKernel => ids.push(HyperId::Amplitude),
            _ => {}
        }
        ids
    }

    /// True for kinds whose value depends only on `x′ − x`.
    pub fn is_stationary(self) -> bool {
        !matches!(self, KernelKind::PriorArtComplexGaussian)
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Identifier of a tunable hyperparameter.
///
/// Positive quantities (`gamma`, `amplitude`, `noise_var`) are addressed in
/// the log domain; `mu` is addressed per real coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HyperId {
    Gamma,
    MuRe(usize),
    MuIm(usize),
    VR,
    VRJ,
    Amplitude,
    NoiseVar,
}

impl HyperId {
    /// Parameters constrained to be strictly positive.
    pub fn is_positive(self) -> bool {
        matches!(self, HyperId::Gamma | HyperId::Amplitude | HyperId::NoiseVar)
    }
}

impl fmt::Display for HyperId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HyperId::Gamma => write!(f, "gamma"),
            HyperId::MuRe(k) => write!(f, "mu_re_{k}"),
            HyperId::MuIm(k) => write!(f, "mu_im_{k}"),
            HyperId::VR => write!(f, "v_r"),
            HyperId::VRJ => write!(f, "v_rj"),
            HyperId::Amplitude => write!(f, "amplitude"),
            HyperId::NoiseVar => write!(f, "noise_var"),
        }
    }
}

impl FromStr for HyperId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownHyperparameter(s.to_string());
        Ok(match s {
            "gamma" => HyperId::Gamma,
            "v_r" => HyperId::VR,
            "v_rj" => HyperId::VRJ,
            "amplitude" => HyperId::Amplitude,
            "noise_var" => HyperId::NoiseVar,
            _ => {
                if let Some(k) = s.strip_prefix("mu_re_") {
                    HyperId::MuRe(k.parse().map_err(|_| unknown())?)
                } else if let Some(k) = s.strip_prefix("mu_im_") {
                    HyperId::MuIm(k.parse().map_err(|_| unknown())?)
                } else {
                    return Err(unknown());
                }
            }
        })
    }
}

impl Serialize for HyperId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for HyperId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Kernel hyperparameters. `gamma` and `amplitude` are stored as logs.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    log_gamma: f64,
    /// Lag of the cross-covariance filter; empty means the zero vector.
    pub mu: Vec<C64>,
    pub v_r: f64,
    pub v_rj: f64,
    log_amplitude: f64,
}

impl KernelParams {
    pub fn new(gamma: f64) -> Result<Self> {
        let mut p = Self {
            log_gamma: 0.0,
            mu: Vec::new(),
            v_r: 1.0,
            v_rj: 0.0,
            log_amplitude: 0.0,
        };
        p.set_gamma(gamma)?;
        Ok(p)
    }

    pub fn with_mu(mut self, mu: Vec<C64>) -> Result<Self> {
        if mu.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("mu must be finite".into()));
        }
        self.mu = mu;
        Ok(self)
    }

    pub fn with_filters(mut self, v_r: f64, v_rj: f64) -> Self {
        self.v_r = v_r;
        self.v_rj = v_rj;
        self
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Result<Self> {
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "amplitude must be positive, got {amplitude}"
            )));
        }
        self.log_amplitude = amplitude.ln();
        Ok(self)
    }

    pub fn gamma(&self) -> f64 {
        self.log_gamma.exp()
    }

    pub fn log_gamma(&self) -> f64 {
        self.log_gamma
    }

    pub fn set_gamma(&mut self, gamma: f64) -> Result<()> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
        }
        self.log_gamma = gamma.ln();
        Ok(())
    }

    pub fn amplitude(&self) -> f64 {
        self.log_amplitude.exp()
    }

    fn mu_at(&self, k: usize) -> C64 {
        self.mu.get(k).copied().unwrap_or_default()
    }

    /// Value of a kernel hyperparameter in its optimization coordinate
    /// (log for positive quantities).
    pub fn get(&self, id: HyperId) -> Result<f64> {
        Ok(match id {
            HyperId::Gamma => self.log_gamma,
            HyperId::Amplitude => self.log_amplitude,
            HyperId::VR => self.v_r,
            HyperId::VRJ => self.v_rj,
            HyperId::MuRe(k) => self.mu_at(k).re,
            HyperId::MuIm(k) => self.mu_at(k).im,
            HyperId::NoiseVar => return Err(Error::UnknownHyperparameter(id.to_string())),
        })
    }

    /// Sets a kernel hyperparameter from its optimization coordinate.
    pub fn set(&mut self, id: HyperId, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::InvalidArgument(format!("{id} must be finite")));
        }
        match id {
            HyperId::Gamma => self.log_gamma = value,
            HyperId::Amplitude => self.log_amplitude = value,
            HyperId::VR => self.v_r = value,
            HyperId::VRJ => self.v_rj = value,
            HyperId::MuRe(k) | HyperId::MuIm(k) => {
                if self.mu.len() <= k {
                    self.mu.resize(k + 1, C64::default());
                }
                if let HyperId::MuRe(_) = id {
                    self.mu[k].re = value;
                } else {
                    self.mu[k].im = value;
                }
            }
            HyperId::NoiseVar => return Err(Error::UnknownHyperparameter(id.to_string())),
        }
        Ok(())
    }
}

fn check_dims(x: &[C64], x2: &[C64]) -> Result<()> {
    if x.len() != x2.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: x2.len(),
        });
    }
    Ok(())
}

/// `(a−b)ᴴ(a−b)`.
#[inline]
fn dist_sq(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).norm_sqr()).sum()
}

/// `|d − μ|²` and `|d + μ|²` with `d = x2 − x`.
#[inline]
fn shifted_dist_sq(x: &[C64], x2: &[C64], params: &KernelParams) -> (f64, f64) {
    let mut minus = 0.0;
    let mut plus = 0.0;
    for (k, (a, b)) in x.iter().zip(x2).enumerate() {
        let d = b - a;
        let mu = params.mu_at(k);
        minus += (d - mu).norm_sqr();
        plus += (d + mu).norm_sqr();
    }
    (minus, plus)
}

/// `exp(−(x−x′)ᴴ(x−x′)/γ)`.
pub fn eval_complex_metric_gaussian(x: &[C64], x2: &[C64], gamma: f64) -> Result<C64> {
    check_dims(x, x2)?;
    Ok(C64::new((-dist_sq(x, x2) / gamma).exp(), 0.0))
}

/// Convolution-constructed proper kernel with lag `μ`.
pub fn eval_convolution_proper(x: &[C64], x2: &[C64], params: &KernelParams) -> Result<C64> {
    check_dims(x, x2)?;
    check_mu(params, x.len())?;
    Ok(convolution(x, x2, params))
}

fn check_mu(params: &KernelParams, dim: usize) -> Result<()> {
    if !params.mu.is_empty() && params.mu.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: params.mu.len(),
        });
    }
    Ok(())
}

#[inline]
fn convolution(x: &[C64], x2: &[C64], p: &KernelParams) -> C64 {
    let two_gamma = 2.0 * p.gamma();
    let real = (p.v_r * p.v_r + p.v_rj * p.v_rj) * (-dist_sq(x, x2) / two_gamma).exp();
    let cross = p.v_r * p.v_rj;
    if cross == 0.0 {
        return C64::new(real, 0.0);
    }
    let (minus, plus) = shifted_dist_sq(x, x2, p);
    let imag = cross * ((-minus / two_gamma).exp() - (-plus / two_gamma).exp());
    C64::new(real, imag)
}

/// Value of the prior-art complex Gaussian kernel and whether its real
/// exponent exceeded [`OVERFLOW_EXPONENT`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlaggedValue {
    pub value: C64,
    pub overflow: bool,
}

#[inline]
fn prior_art_exponent(x: &[C64], x2: &[C64], gamma: f64) -> C64 {
    let s: C64 = x
        .iter()
        .zip(x2)
        .map(|(a, b)| {
            let t = a - b.conj();
            t * t
        })
        .sum();
    -s / gamma
}

/// `exp(−(x−conj(x′))ᵀ(x−conj(x′))/γ)`.
pub fn eval_prior_art_complex_gaussian(x: &[C64], x2: &[C64], gamma: f64) -> Result<FlaggedValue> {
    check_dims(x, x2)?;
    let e = prior_art_exponent(x, x2, gamma);
    Ok(FlaggedValue {
        value: e.exp(),
        overflow: e.re > OVERFLOW_EXPONENT,
    })
}

#[inline]
fn real_gaussian(a: impl Iterator<Item = f64>, b: impl Iterator<Item = f64>, gamma: f64) -> f64 {
    let d: f64 = a.zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
    (-d / gamma).exp()
}

#[inline]
fn independent_parts(x: &[C64], x2: &[C64], gamma: f64) -> [(f64, f64); 4] {
    // (value, squared distance / gamma) of κ(x_r,x2_r), κ(x_j,x2_j), κ(x_r,x2_j), κ(x_j,x2_r)
    type Part = fn(&C64) -> f64;
    let pairs: [(Part, Part); 4] = [
        (|z| z.re, |z| z.re),
        (|z| z.im, |z| z.im),
        (|z| z.re, |z| z.im),
        (|z| z.im, |z| z.re),
    ];
    pairs.map(|(fa, fb)| {
        let d: f64 = x.iter().zip(x2).map(|(a, b)| (fa(a) - fb(b)).powi(2)).sum::<f64>() / gamma;
        ((-d).exp(), d)
    })
}

/// Independent kernel `κ(x_r,x′_r) + κ(x_j,x′_j) + j(κ(x_r,x′_j) − κ(x_j,x′_r))`
/// with `κ(a, b) = amplitude·exp(−|a−b|²/γ)`.
pub fn eval_independent(x: &[C64], x2: &[C64], gamma: f64, amplitude: f64) -> Result<C64> {
    check_dims(x, x2)?;
    let k = |fa: fn(&C64) -> f64, fb: fn(&C64) -> f64| {
        amplitude * real_gaussian(x.iter().map(fa), x2.iter().map(fb), gamma)
    };
    let re = k(|z| z.re, |z| z.re) + k(|z| z.im, |z| z.im);
    let im = k(|z| z.re, |z| z.im) - k(|z| z.im, |z| z.re);
    Ok(C64::new(re, im))
}

/// A kernel kind together with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelConfig", into = "KernelConfig")]
pub struct Kernel {
    pub kind: KernelKind,
    pub params: KernelParams,
}

impl Kernel {
    pub fn new(kind: KernelKind, params: KernelParams) -> Self {
        Self { kind, params }
    }

    pub fn complex_metric_gaussian(gamma: f64) -> Result<Self> {
        Ok(Self::new(KernelKind::ComplexMetricGaussian, KernelParams::new(gamma)?))
    }

    pub fn convolution_proper(gamma: f64, mu: Vec<C64>, v_r: f64, v_rj: f64) -> Result<Self> {
        Ok(Self::new(
            KernelKind::ConvolutionProper,
            KernelParams::new(gamma)?.with_mu(mu)?.with_filters(v_r, v_rj),
        ))
    }

    pub fn prior_art_complex_gaussian(gamma: f64) -> Result<Self> {
        Ok(Self::new(
            KernelKind::PriorArtComplexGaussian,
            KernelParams::new(gamma)?,
        ))
    }

    pub fn independent(gamma: f64, amplitude: f64) -> Result<Self> {
        Ok(Self::new(
            KernelKind::IndependentKernel,
            KernelParams::new(gamma)?.with_amplitude(amplitude)?,
        ))
    }

    /// Checks that the kernel can be evaluated on `dim`-dimensional inputs.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.kind == KernelKind::ConvolutionProper {
            check_mu(&self.params, dim)?;
        }
        Ok(())
    }

    pub fn eval(&self, x: &[C64], x2: &[C64]) -> Result<C64> {
        check_dims(x, x2)?;
        self.check_dim(x.len())?;
        Ok(self.eval_unchecked(x, x2))
    }

    /// Evaluation without dimension checks.
    #[inline]
    pub fn eval_unchecked(&self, x: &[C64], x2: &[C64]) -> C64 {
        let p = &self.params;
        match self.kind {
            KernelKind::ComplexMetricGaussian => C64::new((-dist_sq(x, x2) / p.gamma()).exp(), 0.0),
            KernelKind::ConvolutionProper => convolution(x, x2, p),
            KernelKind::PriorArtComplexGaussian => prior_art_exponent(x, x2, p.gamma()).exp(),
            KernelKind::IndependentKernel => {
                let a = p.amplitude();
                let [rr, jj, rj, jr] = independent_parts(x, x2, p.gamma());
                C64::new(a * (rr.0 + jj.0), a * (rj.0 - jr.0))
            }
        }
    }

    /// Derivative of `k(x, x2)` with respect to the optimization coordinate
    /// of `id` (log domain for positive parameters).
    pub fn eval_derivative(&self, x: &[C64], x2: &[C64], id: HyperId) -> Result<C64> {
        check_dims(x, x2)?;
        self.check_dim(x.len())?;
        self.check_reads(id, x.len())?;
        Ok(self.derivative_unchecked(x, x2, id))
    }

    fn check_reads(&self, id: HyperId, dim: usize) -> Result<()> {
        let in_range = match id {
            HyperId::MuRe(k) | HyperId::MuIm(k) => k < dim,
            _ => true,
        };
        if !self.kind.reads(id) || !in_range {
            return Err(Error::UnknownHyperparameter(format!("{id} for {}", self.kind)));
        }
        Ok(())
    }

    fn derivative_unchecked(&self, x: &[C64], x2: &[C64], id: HyperId) -> C64 {
        let p = &self.params;
        let gamma = p.gamma();
        match (self.kind, id) {
            (KernelKind::ComplexMetricGaussian, HyperId::Gamma) => {
                let q = dist_sq(x, x2) / gamma;
                C64::new((-q).exp() * q, 0.0)
            }
            (KernelKind::PriorArtComplexGaussian, HyperId::Gamma) => {
                // k = exp(e) with e = −s/γ, so ∂k/∂ln γ = −e·k
                let e = prior_art_exponent(x, x2, gamma);
                -e * e.exp()
            }
            (KernelKind::IndependentKernel, HyperId::Gamma) => {
                let a = p.amplitude();
                let [rr, jj, rj, jr] = independent_parts(x, x2, gamma);
                let g = |t: (f64, f64)| t.0 * t.1;
                C64::new(a * (g(rr) + g(jj)), a * (g(rj) - g(jr)))
            }
            (KernelKind::IndependentKernel, HyperId::Amplitude) => self.eval_unchecked(x, x2),
            (KernelKind::ConvolutionProper, id) => convolution_derivative(x, x2, p, id),
            _ => C64::new(0.0, 0.0),
        }
    }

    /// Gram matrix `K[i,l] = k(X[i], X[l])`.
    pub fn gram(&self, inputs: &[Vec<C64>]) -> Result<ComplexMatrix> {
        let dim = check_inputs(inputs)?;
        self.check_dim(dim)?;
        let n = inputs.len();
        let mut k = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for l in 0..=i {
                let v = self.eval_unchecked(&inputs[i], &inputs[l]);
                k[(i, l)] = v;
                if i != l {
                    k[(l, i)] = v.conj();
                }
            }
            // skew-symmetric imaginary part vanishes on the diagonal
            k[(i, i)].im = 0.0;
        }
        Ok(k)
    }

    /// Cross-covariance `K[i,l] = k(A[i], B[l])`.
    pub fn cross_gram(&self, a: &[Vec<C64>], b: &[Vec<C64>]) -> Result<ComplexMatrix> {
        let da = check_inputs(a)?;
        let db = check_inputs(b)?;
        if !a.is_empty() && !b.is_empty() && da != db {
            return Err(Error::DimensionMismatch {
                expected: da,
                found: db,
            });
        }
        self.check_dim(da.max(db))?;
        Ok(ComplexMatrix::from_fn(a.len(), b.len(), |i, l| {
            self.eval_unchecked(&a[i], &b[l])
        }))
    }

    /// Entrywise derivative of the Gram matrix with respect to `id`.
    pub fn gram_gradient(&self, inputs: &[Vec<C64>], id: HyperId) -> Result<ComplexMatrix> {
        let dim = check_inputs(inputs)?;
        self.check_dim(dim)?;
        self.check_reads(id, dim)?;
        let n = inputs.len();
        let mut g = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for l in 0..=i {
                let v = self.derivative_unchecked(&inputs[i], &inputs[l], id);
                g[(i, l)] = v;
                if i != l {
                    g[(l, i)] = v.conj();
                }
            }
            g[(i, i)].im = 0.0;
        }
        Ok(g)
    }
}

fn convolution_derivative(x: &[C64], x2: &[C64], p: &KernelParams, id: HyperId) -> C64 {
    let gamma = p.gamma();
    let two_gamma = 2.0 * gamma;
    let a = p.v_r * p.v_r + p.v_rj * p.v_rj;
    let b = p.v_r * p.v_rj;
    let q0 = dist_sq(x, x2) / two_gamma;
    let (minus, plus) = shifted_dist_sq(x, x2, p);
    let (qm, qp) = (minus / two_gamma, plus / two_gamma);
    let (e0, em, ep) = ((-q0).exp(), (-qm).exp(), (-qp).exp());
    match id {
        HyperId::Gamma => C64::new(a * e0 * q0, b * (em * qm - ep * qp)),
        HyperId::VR => C64::new(2.0 * p.v_r * e0, p.v_rj * (em - ep)),
        HyperId::VRJ => C64::new(2.0 * p.v_rj * e0, p.v_r * (em - ep)),
        HyperId::MuRe(k) | HyperId::MuIm(k) => {
            let d = x2[k] - x[k];
            let mu = p.mu_at(k);
            let (dm, dp) = if let HyperId::MuRe(_) = id {
                ((d - mu).re, (d + mu).re)
            } else {
                ((d - mu).im, (d + mu).im)
            };
            // ∂/∂μ of exp(−|d∓μ|²/2γ) = ±(d∓μ)·exp(·)/γ per real coordinate
            C64::new(0.0, b * (em * dm + ep * dp) / gamma)
        }
        _ => C64::new(0.0, 0.0),
    }
}

/// Validates a nonempty list of equally sized inputs and returns the dimension.
pub(crate) fn check_inputs(inputs: &[Vec<C64>]) -> Result<usize> {
    let dim = inputs.first().map_or(0, Vec::len);
    for x in inputs {
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
    }
    Ok(dim)
}

/// `gram` for a kind and parameter set.
pub fn gram(kind: KernelKind, params: &KernelParams, inputs: &[Vec<C64>]) -> Result<ComplexMatrix> {
    Kernel::new(kind, params.clone()).gram(inputs)
}

/// `gram_gradient` for a kind and parameter set.
pub fn gram_gradient(
    kind: KernelKind,
    params: &KernelParams,
    inputs: &[Vec<C64>],
    which: HyperId,
) -> Result<ComplexMatrix> {
    Kernel::new(kind, params.clone()).gram_gradient(inputs, which)
}

/// Text form of a kernel: `{"kind": ..., "gamma": ..., "mu_re": [...],
/// "mu_im": [...], "v_r": ..., "v_rj": ..., "amplitude": ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub kind: KernelKind,
    pub gamma: f64,
    #[serde(default)]
    pub mu_re: Vec<f64>,
    #[serde(default)]
    pub mu_im: Vec<f64>,
    #[serde(default = "one")]
    pub v_r: f64,
    #[serde(default)]
    pub v_rj: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<KernelConfig> for Kernel {
    type Error = Error;

    fn try_from(c: KernelConfig) -> Result<Self> {
        if c.mu_re.len() != c.mu_im.len() {
            return Err(Error::DimensionMismatch {
                expected: c.mu_re.len(),
                found: c.mu_im.len(),
            });
        }
        let mu = c
            .mu_re
            .iter()
            .zip(&c.mu_im)
            .map(|(&re, &im)| C64::new(re, im))
            .collect();
        let params = KernelParams::new(c.gamma)?
            .with_mu(mu)?
            .with_filters(c.v_r, c.v_rj)
            .with_amplitude(c.amplitude)?;
        Ok(Kernel::new(c.kind, params))
    }
}

impl From<Kernel> for KernelConfig {
    fn from(k: Kernel) -> Self {
        let p = &k.params;
        KernelConfig {
            kind: k.kind,
            gamma: p.gamma(),
            mu_re: p.mu.iter().map(|z| z.re).collect(),
            mu_im: p.mu.iter().map(|z| z.im).collect(),
            v_r: p.v_r,
            v_rj: p.v_rj,
            amplitude: p.amplitude(),
        }
    }
}
