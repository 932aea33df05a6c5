//! Shared generators and oracles for the integration suites.
#![allow(dead_code)]

use cgpr::{ComplexMatrix, Kernel, KernelKind, C64};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn random_c64<R: Rng>(rng: &mut R, scale: f64) -> C64 {
    c(rng.random_range(-scale..scale), rng.random_range(-scale..scale))
}

pub fn random_inputs<R: Rng>(rng: &mut R, n: usize, dim: usize, scale: f64) -> Vec<Vec<C64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| random_c64(rng, scale)).collect())
        .collect()
}

pub fn random_outputs<R: Rng>(rng: &mut R, n: usize) -> Vec<C64> {
    (0..n).map(|_| random_c64(rng, 1.0)).collect()
}

/// A random kernel of the given kind with moderate hyperparameters.
pub fn random_kernel<R: Rng>(rng: &mut R, kind: KernelKind, dim: usize) -> Kernel {
    let gamma = 10f64.powf(rng.random_range(-0.5..0.7));
    match kind {
        KernelKind::ComplexMetricGaussian => Kernel::complex_metric_gaussian(gamma).unwrap(),
        KernelKind::ConvolutionProper => {
            let mu = (0..dim).map(|_| random_c64(rng, 1.5)).collect();
            let v_r = rng.random_range(0.3..1.5);
            let v_rj = rng.random_range(-1.5..1.5);
            Kernel::convolution_proper(gamma, mu, v_r, v_rj).unwrap()
        }
        KernelKind::PriorArtComplexGaussian => Kernel::prior_art_complex_gaussian(gamma).unwrap(),
        KernelKind::IndependentKernel => Kernel::independent(gamma, rng.random_range(0.3..2.0)).unwrap(),
    }
}

/// Real `2n × 2n` representation `[[Re A, −Im A], [Im A, Re A]]`; each
/// eigenvalue of a Hermitian `A` appears twice in it.
pub fn realify(a: &ComplexMatrix) -> DMatrix<f64> {
    let n = a.rows();
    DMatrix::from_fn(2 * n, 2 * n, |i, l| {
        let z = a[(i % n, l % n)];
        match (i < n, l < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Eigenvalues of a Hermitian matrix, via its real representation.
pub fn hermitian_eigenvalues(a: &ComplexMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(realify(a)).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev.into_iter().step_by(2).collect()
}

/// Random Hermitian positive definite matrix `B·Bᴴ + shift·I`.
pub fn random_hpd<R: Rng>(rng: &mut R, n: usize, shift: f64) -> ComplexMatrix {
    let b = ComplexMatrix::from_fn(n, n, |_, _| random_c64(rng, 1.0));
    let mut a = b.matmul(&b.adjoint()).unwrap();
    a.add_diagonal(shift);
    a
}

/// Determinant by Laplace expansion along the first row.
pub fn cofactor_det(a: &[Vec<C64>]) -> C64 {
    let n = a.len();
    if n == 1 {
        return a[0][0];
    }
    let mut sum = c(0.0, 0.0);
    for j in 0..n {
        let minor: Vec<Vec<C64>> = a[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(k, _)| *k != j)
                    .map(|(_, v)| *v)
                    .collect()
            })
            .collect();
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        sum += a[0][j] * cofactor_det(&minor) * sign;
    }
    sum
}

pub fn rel_diff(a: C64, b: C64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}

pub fn max_rel_diff(a: &[C64], b: &[C64]) -> f64 {
    let scale = a
        .iter()
        .chain(b)
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}
