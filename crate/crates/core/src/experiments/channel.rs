//! Nonlinear channel model and equalizer windows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpr::ComplexDataset;
use crate::linalg::C64;

/// `ρ` at which the input `s(n)` is circular.
pub const CIRCULAR_RHO: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Channel `t(n) = h0·s(n) + h1·s(n−1)`, `q = t + a2·t² + a3·t³`, plus
/// circular white noise at `snr_db` relative to the empirical power of `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelConfig {
    pub h0: C64,
    pub h1: C64,
    pub a2: C64,
    pub a3: C64,
    /// `None` disables the noise.
    pub snr_db: Option<f64>,
    pub rho: f64,
    pub amplitude: f64,
    pub filter_len: usize,
    pub delay: usize,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self::soft(CIRCULAR_RHO)
    }
}

impl ChannelConfig {
    pub fn soft(rho: f64) -> Self {
        Self {
            h0: C64::new(-0.9, 0.8),
            h1: C64::new(0.6, -0.7),
            a2: C64::new(0.1, 0.15),
            a3: C64::new(0.06, 0.05),
            snr_db: Some(16.0),
            rho,
            amplitude: 0.70,
            filter_len: 5,
            delay: 2,
        }
    }

    pub fn strong(rho: f64) -> Self {
        Self {
            a2: C64::new(0.2, 0.25),
            a3: C64::new(0.12, 0.09),
            ..Self::soft(rho)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidArgument(format!(
                "rho must lie in [0, 1], got {}",
                self.rho
            )));
        }
        if self.filter_len == 0 {
            return Err(Error::InvalidArgument("filter_len must be positive".into()));
        }
        if self.snr_db.is_some_and(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument("snr_db must be finite".into()));
        }
        Ok(())
    }

    /// `q = t + a2·t² + a3·t³` with `t(n) = h0·s(n) + h1·s(n−1)`, `s(−1) = 0`.
    pub fn distort(&self, s: &[C64]) -> Vec<C64> {
        let mut prev = C64::new(0.0, 0.0);
        s.iter()
            .map(|&sn| {
                let t = self.h0 * sn + self.h1 * prev;
                prev = sn;
                t + self.a2 * t * t + self.a3 * t * t * t
            })
            .collect()
    }
}

/// One simulated transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Transmitted symbols.
    pub s: Vec<C64>,
    /// Noiseless channel output.
    pub q: Vec<C64>,
    /// Received signal.
    pub r: Vec<C64>,
    /// Complex noise variance `E|r − q|²` used.
    pub noise_var: f64,
}

/// Draws `s`, passes it through the channel and adds noise.
pub fn simulate_channel(config: &ChannelConfig, n_samples: usize, seed: u64) -> Result<(Vec<C64>, Vec<C64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let real = simulate_with_rng(config, n_samples, &mut rng)?;
    Ok((real.s, real.r))
}

pub fn simulate_with_rng<R: Rng>(config: &ChannelConfig, n_samples: usize, rng: &mut R) -> Result<ChannelRealization> {
    config.validate()?;
    let need = config.filter_len + config.delay;
    if n_samples < need {
        return Err(Error::InvalidArgument(format!(
            "need at least L + D = {need} samples, got {n_samples}"
        )));
    }
    let a = config.rho.mul_add(-config.rho, 1.0).sqrt();
    let s: Vec<C64> = (0..n_samples)
        .map(|_| {
            let x: f64 = rng.sample(StandardNormal);
            let y: f64 = rng.sample(StandardNormal);
            C64::new(a * x, config.rho * y) * config.amplitude
        })
        .collect();
    Ok(transmit(config, s, rng))
}

/// Passes a given symbol sequence through the channel.
pub fn transmit<R: Rng>(config: &ChannelConfig, s: Vec<C64>, rng: &mut R) -> ChannelRealization {
    let q = config.distort(&s);
    let noise_var = match config.snr_db {
        Some(snr) if !q.is_empty() => {
            let p = q.iter().map(|v| v.norm_sqr()).sum::<f64>() / q.len() as f64;
            p / 10f64.powf(snr / 10.0)
        }
        _ => 0.0,
    };
    let sd = (noise_var / 2.0).sqrt();
    let r = q
        .iter()
        .map(|&v| {
            if noise_var == 0.0 {
                return v;
            }
            let nr: f64 = rng.sample(StandardNormal);
            let ni: f64 = rng.sample(StandardNormal);
            v + C64::new(nr, ni) * sd
        })
        .collect();
    ChannelRealization { s, q, r, noise_var }
}

/// Equalizer pairs `x = [r(n+D), …, r(n+D−L+1)]`, target `s(n)`, for
/// `n = L, …`, as many as fit in the sequence.
pub fn equalizer_pairs(config: &ChannelConfig, s: &[C64], r: &[C64]) -> ComplexDataset {
    let (l, d) = (config.filter_len, config.delay);
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut n = l;
    while n + d < r.len() && n < s.len() {
        inputs.push((0..l).map(|i| r[n + d - i]).collect());
        outputs.push(s[n]);
        n += 1;
    }
    ComplexDataset::new(inputs, outputs).expect("windows share one length")
}

/// Number of channel samples needed for `pairs` equalizer pairs.
pub fn samples_for_pairs(config: &ChannelConfig, pairs: usize) -> usize {
    pairs + config.filter_len + config.delay
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn impulse_through_linear_filter() {
        let cfg = ChannelConfig {
            a2: C64::new(0.0, 0.0),
            a3: C64::new(0.0, 0.0),
            snr_db: None,
            ..ChannelConfig::soft(CIRCULAR_RHO)
        };
        let mut s = vec![C64::new(0.0, 0.0); 6];
        s[0] = C64::new(1.0, 0.0);
        let real = transmit(&cfg, s, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(real.q[0], C64::new(-0.9, 0.8));
        assert_eq!(real.q[1], C64::new(0.6, -0.7));
        assert!(real.q[2..].iter().all(|v| *v == C64::new(0.0, 0.0)));
        assert_eq!(real.r, real.q);
    }

    #[test]
    fn windows_line_up_with_delay() {
        let cfg = ChannelConfig::soft(CIRCULAR_RHO);
        let n = samples_for_pairs(&cfg, 10);
        let s: Vec<C64> = (0..n).map(|i| C64::new(i as f64, 0.0)).collect();
        let r: Vec<C64> = (0..n).map(|i| C64::new(0.0, i as f64)).collect();
        let d = equalizer_pairs(&cfg, &s, &r);
        assert_eq!(d.len(), 10);
        assert_eq!(d.outputs()[0], C64::new(5.0, 0.0));
        let x0: Vec<f64> = d.inputs()[0].iter().map(|v| v.im).collect();
        assert_eq!(x0, vec![7.0, 6.0, 5.0, 4.0, 3.0]);
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(simulate_channel(&ChannelConfig::default(), 6, 1).is_err());
        assert!(simulate_channel(&ChannelConfig::default(), 7, 1).is_ok());
    }

    #[test]
    fn bad_rho_rejected() {
        assert!(simulate_channel(&ChannelConfig::soft(1.5), 100, 1).is_err());
    }

    #[test]
    fn strong_keeps_linear_taps() {
        let s = ChannelConfig::strong(0.1);
        assert_eq!(s.h0, C64::new(-0.9, 0.8));
        assert_eq!(s.a3, C64::new(0.12, 0.09));
        assert_eq!(s.rho, 0.1);
    }
}
