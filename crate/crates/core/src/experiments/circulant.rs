//! Exact-covariance sampling of a stationary proper GP on a square grid in
//! the complex plane, by circulant embedding on a torus.
//!
//! For a grid `x = a_p + j·b_q` with spacing `h`, the covariance
//! `k(x_a, x_b) = c(x_b − x_a)` is a block-Toeplitz matrix that embeds in a
//! block-circulant one with first row `r[u, v] = c(lag(u)·h + j·lag(v)·h)`.
//! Its eigenvalues are the unnormalized inverse 2D DFT of `r`, and
//! `f = IDFT(√λ·z)/M` with proper standard normal `z` has covariance exactly
//! the circulant matrix and zero pseudo-covariance.

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::kernels::{Kernel, KernelKind};
use crate::linalg::C64;

/// `points` evenly spaced values from `min` to `max` inclusive.
pub fn linspace(min: f64, max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![min],
        _ => {
            let h = (max - min) / (points - 1) as f64;
            (0..points).map(|i| min + h * i as f64).collect()
        }
    }
}

/// Grid inputs in row-major order over the imaginary part: index
/// `q·points + p` holds `a_p + j·a_q`.
pub fn grid_inputs(min: f64, max: f64, points: usize) -> Vec<Vec<C64>> {
    let axis = linspace(min, max, points);
    let mut out = Vec::with_capacity(points * points);
    for &b in &axis {
        for &a in &axis {
            out.push(vec![C64::new(a, b)]);
        }
    }
    out
}

/// Precomputed square-root spectrum of one embedded kernel.
pub struct CirculantSampler {
    points: usize,
    m: usize,
    sqrt_lambda: Vec<f64>,
    fft: std::sync::Arc<dyn Fft<f64>>,
    /// Largest clipped negative eigenvalue relative to the largest one.
    pub negative_mass: f64,
}

impl std::fmt::Debug for CirculantSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantSampler")
            .field("points", &self.points)
            .field("m", &self.m)
            .field("negative_mass", &self.negative_mass)
            .finish()
    }
}

fn ifft2(fft: &dyn Fft<f64>, data: &mut [C64], m: usize) {
    for row in data.chunks_exact_mut(m) {
        fft.process(row);
    }
    let mut col = vec![C64::new(0.0, 0.0); m];
    for j in 0..m {
        for i in 0..m {
            col[i] = data[i * m + j];
        }
        fft.process(&mut col);
        for i in 0..m {
            data[i * m + j] = col[i];
        }
    }
}

impl CirculantSampler {
    /// Embeds a one-dimensional stationary kernel over the square grid
    /// `linspace(min, max, points)²`.
    pub fn new(kernel: &Kernel, min: f64, max: f64, points: usize) -> Result<Self> {
        if !kernel.kind.is_stationary() {
            return Err(Error::InvalidArgument(format!(
                "circulant embedding needs a stationary kernel, got {}",
                kernel.kind
            )));
        }
        kernel.check_dim(1)?;
        if points < 2 || !(max > min) {
            return Err(Error::InvalidArgument(
                "grid needs two or more points and max > min".into(),
            ));
        }
        let h = (max - min) / (points - 1) as f64;
        let span = max - min;
        let p = &kernel.params;
        let mu = if kernel.kind == KernelKind::ConvolutionProper {
            p.mu.first().map_or(0.0, |m| m.norm())
        } else {
            0.0
        };
        let reach = span.max(mu + 10.0 * p.gamma().sqrt());
        let m = ((2.0 * reach / h).ceil() as usize).max(2 * points).next_power_of_two();

        let lag = |u: usize| -> f64 {
            if u <= m / 2 {
                u as f64 * h
            } else {
                (u as f64 - m as f64) * h
            }
        };
        let zero = [C64::new(0.0, 0.0)];
        let mut r: Vec<C64> = (0..m * m)
            .map(|idx| {
                let (u, v) = (idx / m, idx % m);
                kernel.eval_unchecked(&zero, &[C64::new(lag(u), lag(v))])
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_inverse(m);
        ifft2(fft.as_ref(), &mut r, m);
        let max_l = r.iter().map(|z| z.re).fold(0.0, f64::max);
        let min_l = r.iter().map(|z| z.re).fold(0.0, f64::min);
        let sqrt_lambda = r.iter().map(|z| z.re.max(0.0).sqrt()).collect();
        Ok(Self {
            points,
            m,
            sqrt_lambda,
            fft,
            negative_mass: if max_l > 0.0 { -min_l / max_l } else { 0.0 },
        })
    }

    pub fn torus_size(&self) -> usize {
        self.m
    }

    /// One draw over the grid, in [`grid_inputs`] order.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<C64> {
        let m = self.m;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut w: Vec<C64> = self
            .sqrt_lambda
            .iter()
            .map(|&l| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                C64::new(a, b) * (s * l)
            })
            .collect();
        ifft2(self.fft.as_ref(), &mut w, m);
        let scale = 1.0 / m as f64;
        // torus index (u, v) ↔ (real lag, imaginary lag); grid order is
        // imaginary-major
        let mut out = Vec::with_capacity(self.points * self.points);
        for q in 0..self.points {
            for p in 0..self.points {
                out.push(w[p * m + q] * scale);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linspace_endpoints() {
        let v = linspace(-6.0, 5.0, 80);
        assert_eq!(v.len(), 80);
        assert_eq!(v[0], -6.0);
        assert!((v[79] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn grid_is_imaginary_major() {
        let g = grid_inputs(0.0, 1.0, 2);
        assert_eq!(g[1][0], C64::new(1.0, 0.0));
        assert_eq!(g[2][0], C64::new(0.0, 1.0));
    }

    #[test]
    fn rejects_non_stationary_kernel() {
        let k = Kernel::prior_art_complex_gaussian(1.0).unwrap();
        assert!(CirculantSampler::new(&k, -1.0, 1.0, 8).is_err());
    }

    #[test]
    fn embedding_is_nearly_psd() {
        let k = Kernel::convolution_proper(1.125, vec![C64::new(2.0, 2.0)], 1.0, 1.0).unwrap();
        let s = CirculantSampler::new(&k, -6.0, 5.0, 80).unwrap();
        assert!(s.negative_mass < 1e-8, "{}", s.negative_mass);
    }

    #[test]
    fn empirical_covariance_matches_kernel() {
        let k = Kernel::convolution_proper(0.8, vec![C64::new(0.6, -0.4)], 1.0, 0.9).unwrap();
        let (min, max, pts) = (-1.0, 1.0, 3);
        let s = CirculantSampler::new(&k, min, max, pts).unwrap();
        let grid = grid_inputs(min, max, pts);
        let gram = k.gram(&grid).unwrap();
        let n = grid.len();
        let draws = 20_000;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut cov = vec![C64::new(0.0, 0.0); n * n];
        let mut pcov = vec![C64::new(0.0, 0.0); n * n];
        for _ in 0..draws {
            let f = s.sample(&mut rng);
            for a in 0..n {
                for b in 0..n {
                    cov[a * n + b] += f[a] * f[b].conj();
                    pcov[a * n + b] += f[a] * f[b];
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                let c = cov[a * n + b] / draws as f64;
                let p = pcov[a * n + b] / draws as f64;
                // per-component standard error of a product of unit-scale
                // Gaussians is at most sqrt(k_aa·k_bb / draws)
                let se = (gram[(a, a)].re * gram[(b, b)].re / draws as f64).sqrt();
                assert!(
                    (c - gram[(a, b)]).norm() < 5.0 * se,
                    "cov {a},{b}: {c} vs {}",
                    gram[(a, b)]
                );
                assert!(p.norm() < 5.0 * se, "pseudo-cov {a},{b}: {p}");
            }
        }
    }
}
