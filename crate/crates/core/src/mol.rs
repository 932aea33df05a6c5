//! Stacked-real (multiple-output) view of a proper complex GP.
//!
//! A proper complex vector `f = f_r + j·f_j` with covariance `K` has
//! real-part and imaginary-part blocks
//!
//! ```text
//! K_rr = K_jj = ½·Re K        K_rj = −½·Im K        K_jr = K_rjᵀ = ½·Im K
//! ```
//!
//! so the `2n` real outputs `[f_r; f_j]` have covariance
//! `[[K_rr, K_rj], [K_jr, K_rr]]`. Complex noise of variance `σ²` puts
//! `σ²/2` on each real component.
//!
//! Everything here goes through dense real algebra (`nalgebra`) and serves
//! as an independent check of the complex formulation, and as the covariance
//! builder for proper complex sampling.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gpr::ComplexDataset;
use crate::kernels::Kernel;
use crate::linalg::{ComplexMatrix, HERMITIAN_TOL};

#[derive(Debug, Clone)]
pub struct CompositeRealSystem {
    /// Covariance of the real parts (equal to that of the imaginary parts).
    pub k_rr: DMatrix<f64>,
    /// Cross-covariance `E[f_r f_jᵀ]`; skew-symmetric.
    pub k_rj: DMatrix<f64>,
    /// `[y_r; y_j]`.
    pub outputs: DVector<f64>,
    dataset: ComplexDataset,
}

impl CompositeRealSystem {
    pub fn len(&self) -> usize {
        self.k_rr.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `2n × 2n` block covariance `[[K_rr, K_rj], [K_jr, K_rr]]`.
    pub fn block(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&self.k_rr);
        m.view_mut((n, n), (n, n)).copy_from(&self.k_rr);
        m.view_mut((0, n), (n, n)).copy_from(&self.k_rj);
        m.view_mut((n, 0), (n, n)).copy_from(&self.k_rj.transpose());
        m
    }

    /// Complex Gram rebuilt from the blocks: `K = 2K_rr − 2j·K_rj`.
    pub fn complex_gram(&self) -> ComplexMatrix {
        let n = self.len();
        ComplexMatrix::from_fn(n, n, |i, l| {
            crate::linalg::C64::new(2.0 * self.k_rr[(i, l)], -2.0 * self.k_rj[(i, l)])
        })
    }

    pub fn dataset(&self) -> &ComplexDataset {
        &self.dataset
    }
}

/// Splits the kernel Gram over the dataset inputs into its real blocks.
pub fn build_composite(kernel: &Kernel, dataset: &ComplexDataset) -> Result<CompositeRealSystem> {
    let k = kernel.gram(dataset.inputs())?;
    let tolerance = HERMITIAN_TOL * k.max_abs();
    let deviation = k.hermitian_deviation();
    if deviation > tolerance {
        return Err(Error::NotHermitian { deviation, tolerance });
    }
    let n = k.rows();
    let k_rr = DMatrix::from_fn(n, n, |i, l| 0.5 * k[(i, l)].re);
    let k_rj = DMatrix::from_fn(n, n, |i, l| -0.5 * k[(i, l)].im);
    let y = dataset.outputs();
    let outputs = DVector::from_fn(2 * n, |i, _| if i < n { y[i].re } else { y[i - n].im });
    Ok(CompositeRealSystem {
        k_rr,
        k_rj,
        outputs,
        dataset: dataset.clone(),
    })
}

/// Real `2n × 2n` covariance of `[f_r; f_j]` for a proper complex vector
/// with Hermitian covariance `k`: `½·[[Re K, −Im K], [Im K, Re K]]`.
pub fn composite_covariance(k: &ComplexMatrix) -> DMatrix<f64> {
    let n = k.rows();
    DMatrix::from_fn(2 * n, 2 * n, |a, b| {
        let z = k[(a % n, b % n)];
        match (a < n, b < n) {
            (true, true) | (false, false) => 0.5 * z.re,
            (true, false) => -0.5 * z.im,
            (false, true) => 0.5 * z.im,
        }
    })
}

/// Posterior mean `(ŷ_r, ŷ_j)` at one test input from the stacked-real
/// system with `C_ℝ = K_ℝ + (σ²/2)·I₂ₙ`.
pub fn predict_composite(
    system: &CompositeRealSystem,
    noise_var: f64,
    kernel: &Kernel,
    test_input: &[crate::linalg::C64],
) -> Result<(f64, f64)> {
    let n = system.len();
    let inputs = system.dataset.inputs();
    if n > 0 && inputs[0].len() != test_input.len() {
        return Err(Error::DimensionMismatch {
            expected: inputs[0].len(),
            found: test_input.len(),
        });
    }
    let mut c = system.block();
    for i in 0..2 * n {
        c[(i, i)] += 0.5 * noise_var;
    }
    let sol = match c.clone().cholesky() {
        Some(ch) => ch.solve(&system.outputs),
        None => c
            .lu()
            .solve(&system.outputs)
            .ok_or(Error::NotPositiveDefinite { index: 0, pivot: 0.0 })?,
    };
    let mut yr = 0.0;
    let mut yj = 0.0;
    for (i, x) in inputs.iter().enumerate() {
        let k = kernel.eval(test_input, x)?;
        let (krr, krj, kjr) = (0.5 * k.re, -0.5 * k.im, 0.5 * k.im);
        yr += krr * sol[i] + krj * sol[n + i];
        yj += kjr * sol[i] + krr * sol[n + i];
    }
    Ok((yr, yj))
}

/// Lower Cholesky factor of a real symmetric matrix, with the same jitter
/// escalation as the complex factorization.
pub(crate) fn real_cholesky_with_fallback(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(ch) = m.clone().cholesky() {
        return Ok(ch.l());
    }
    let n = m.nrows().max(1);
    let mean_diag = m.diagonal().iter().map(|d| d.abs()).sum::<f64>() / n as f64;
    let mut jitter = 1e-10 * mean_diag.max(f64::MIN_POSITIVE);
    for _ in 0..crate::linalg::JITTER_RETRIES {
        let mut a = m.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += jitter;
        }
        if let Some(ch) = a.cholesky() {
            return Ok(ch.l());
        }
        jitter *= 10.0;
    }
    Err(Error::NotPositiveDefinite {
        index: 0,
        pivot: m.diagonal().min(),
    })
}
