mod common;

use std::time::Instant;

use cgpr::hyperlearn::{likelihood_gradient, maximize, HyperEntry, HyperSpec, OptimizeOptions};
use cgpr::{ComplexDataset, GprModel, HyperId, Kernel, KernelKind};
use common::*;
use rand::Rng;

const FD_STEP: f64 = 1e-6;
const FD_REL_TOL: f64 = 1e-5;
const CONFIGS_PER_KIND: usize = 20;

/// Spec over every hyperparameter of the kernel plus the noise variance,
/// positive ones in the log domain.
fn full_spec(kernel: &Kernel, noise: f64, dim: usize) -> HyperSpec {
    let mut entries: Vec<HyperEntry> = kernel
        .kind
        .hyperparameters(dim)
        .into_iter()
        .map(|id| {
            let v = kernel.params.get(id).unwrap();
            if id.is_positive() {
                HyperEntry::log(id, v.exp())
            } else {
                HyperEntry::real(id, v)
            }
        })
        .collect();
    entries.push(HyperEntry::log(HyperId::NoiseVar, noise));
    HyperSpec::new(entries).unwrap()
}

fn log_likelihood(data: &ComplexDataset, kernel: &Kernel, noise: f64, spec: &HyperSpec, theta: &[f64]) -> f64 {
    let (k, s2) = spec.apply(kernel, noise, theta).unwrap();
    GprModel::fit(data.clone(), k, s2).unwrap().log_marginal_likelihood()
}

fn central_difference(
    data: &ComplexDataset,
    kernel: &Kernel,
    noise: f64,
    spec: &HyperSpec,
    theta: &[f64],
    i: usize,
) -> f64 {
    let mut up = theta.to_vec();
    let mut down = theta.to_vec();
    up[i] += FD_STEP;
    down[i] -= FD_STEP;
    (log_likelihood(data, kernel, noise, spec, &up) - log_likelihood(data, kernel, noise, spec, &down))
        / (2.0 * FD_STEP)
}

/// Dataset drawn from the GP itself so the likelihood surface is realistic.
///
/// The prior-art kernel grows like `exp((Im x + Im x′)²/γ)`, so its inputs
/// stay closer to the real axis to keep the Gram well conditioned.
fn sampled_dataset<R: Rng>(r: &mut R, kernel: &Kernel, noise: f64, n: usize, dim: usize, seed: u64) -> ComplexDataset {
    let scale = if kernel.kind == KernelKind::PriorArtComplexGaussian {
        0.6
    } else {
        1.5
    };
    let inputs = random_inputs(r, n, dim, scale);
    let mut g = kernel.gram(&inputs).unwrap();
    g.add_diagonal(noise);
    let y = cgpr::gpr::sample_proper(&g, 1, seed).unwrap().remove(0);
    ComplexDataset::new(inputs, y).unwrap()
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let start = Instant::now();
    let mut r = rng(41);
    let mut worst = 0.0f64;
    let mut checked = std::collections::BTreeMap::<(String, String), usize>::new();
    for kind in KernelKind::ALL {
        for cfg in 0..CONFIGS_PER_KIND {
            let dim = r.random_range(1..=2);
            let n = r.random_range(8..=30);
            let kernel = random_kernel(&mut r, kind, dim);
            let noise = 10f64.powf(r.random_range(-1.5..-0.3));
            let data = sampled_dataset(&mut r, &kernel, noise, n, dim, cfg as u64);
            let spec = full_spec(&kernel, noise, dim);
            let theta = spec.initial_coordinates().unwrap();
            let model = GprModel::fit(data.clone(), kernel.clone(), noise).unwrap();
            let grad = likelihood_gradient(&model, &spec).unwrap();
            for (i, e) in spec.entries().iter().enumerate() {
                let fd = central_difference(&data, &kernel, noise, &spec, &theta, i);
                let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(f64::MIN_POSITIVE);
                worst = worst.max(rel);
                assert!(
                    rel <= FD_REL_TOL,
                    "{kind} config {cfg} {}: analytic {} vs fd {fd} (rel {rel:e})",
                    e.id,
                    grad[i]
                );
                *checked.entry((kind.to_string(), e.id.to_string())).or_default() += 1;
            }
        }
    }
    // every kind/parameter pair that occurs in one-dimensional inputs was
    // checked on every configuration
    for kind in KernelKind::ALL {
        for id in kind.hyperparameters(1).into_iter().chain([HyperId::NoiseVar]) {
            let count = checked.get(&(kind.to_string(), id.to_string())).copied().unwrap_or(0);
            assert!(count >= CONFIGS_PER_KIND, "{kind} {id}: {count} configurations");
        }
    }
    let secs = start.elapsed().as_secs_f64();
    println!("worst relative error {worst:e}, {secs:.1} s");
    assert!(secs <= 60.0, "gradient suite took {secs:.1} s");
}

#[test]
fn noise_gradient_with_zero_outputs_is_minus_trace_of_inverse() {
    let mut r = rng(42);
    for kind in KernelKind::ALL {
        let kernel = random_kernel(&mut r, kind, 2);
        let n = 15;
        let noise = 0.2;
        let inputs = random_inputs(&mut r, n, 2, 1.0);
        let data = ComplexDataset::new(inputs.clone(), vec![c(0.0, 0.0); n]).unwrap();
        let model = GprModel::fit(data, kernel.clone(), noise).unwrap();
        let spec = HyperSpec::new(vec![HyperEntry::real(HyperId::NoiseVar, noise)]).unwrap();
        let g = likelihood_gradient(&model, &spec).unwrap()[0];
        let mut cov = kernel.gram(&inputs).unwrap();
        cov.add_diagonal(noise);
        let oracle: f64 = -hermitian_eigenvalues(&cov).iter().map(|l| 1.0 / l).sum::<f64>();
        assert!((g - oracle).abs() <= 1e-9 * oracle.abs(), "{kind}: {g} vs {oracle}");
    }
}

#[test]
fn log_and_natural_domains_are_consistent() {
    let mut r = rng(43);
    for kind in KernelKind::ALL {
        let kernel = random_kernel(&mut r, kind, 1);
        let noise = 0.1;
        let data = sampled_dataset(&mut r, &kernel, noise, 20, 1, 7);
        let model = GprModel::fit(data, kernel.clone(), noise).unwrap();
        let positive: Vec<HyperId> = kind
            .hyperparameters(1)
            .into_iter()
            .chain([HyperId::NoiseVar])
            .filter(|id| id.is_positive())
            .collect();
        for id in positive {
            let value = if id == HyperId::NoiseVar {
                noise
            } else {
                kernel.params.get(id).unwrap().exp()
            };
            let log = HyperSpec::new(vec![HyperEntry::log(id, value)]).unwrap();
            let nat = HyperSpec::new(vec![HyperEntry::real(id, value)]).unwrap();
            let gl = likelihood_gradient(&model, &log).unwrap()[0];
            let gn = likelihood_gradient(&model, &nat).unwrap()[0];
            assert!(
                (gl - value * gn).abs() <= 1e-12 * gl.abs().max(1.0),
                "{kind} {id}: {gl} vs {}",
                value * gn
            );
        }
    }
}

/// One-dimensional problem in log γ: returns the data, the kernel, the
/// noise and the zero of the finite-difference slope located by bisection.
fn gamma_stationary_point() -> (ComplexDataset, Kernel, f64, f64) {
    let mut r = rng(44);
    let truth = Kernel::complex_metric_gaussian(1.0).unwrap();
    let noise = 0.05;
    let data = sampled_dataset(&mut r, &truth, noise, 40, 1, 3);
    let spec = HyperSpec::new(vec![HyperEntry::log(HyperId::Gamma, 1.0)]).unwrap();
    let slope = |log_gamma: f64| central_difference(&data, &truth, noise, &spec, &[log_gamma], 0);
    let (mut lo, mut hi) = ((0.05f64).ln(), (20.0f64).ln());
    assert!(slope(lo) > 0.0 && slope(hi) < 0.0, "no sign change in the bracket");
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (data, truth, noise, 0.5 * (lo + hi))
}

fn analytic_gamma_slope(data: &ComplexDataset, noise: f64, log_gamma: f64) -> f64 {
    let k = Kernel::complex_metric_gaussian(log_gamma.exp()).unwrap();
    let model = GprModel::fit(data.clone(), k, noise).unwrap();
    let spec = HyperSpec::new(vec![HyperEntry::log(HyperId::Gamma, log_gamma.exp())]).unwrap();
    likelihood_gradient(&model, &spec).unwrap()[0]
}

#[test]
fn analytic_gradient_vanishes_at_bisected_stationary_point() {
    let (data, _, noise, log_gamma) = gamma_stationary_point();
    let g = analytic_gamma_slope(&data, noise, log_gamma);
    assert!(g.abs() <= 1e-6, "analytic slope {g:e}");
}

#[test]
fn bisection_zero_is_a_likelihood_maximum() {
    let (data, kernel, noise, log_gamma) = gamma_stationary_point();
    let spec = HyperSpec::new(vec![HyperEntry::log(HyperId::Gamma, log_gamma.exp())]).unwrap();
    let theta = [log_gamma];
    let l0 = log_likelihood(&data, &kernel, noise, &spec, &theta);
    for d in [-0.05, 0.05] {
        assert!(log_likelihood(&data, &kernel, noise, &spec, &[log_gamma + d]) < l0);
    }
    // the optimizer started elsewhere finds the same point
    let far = HyperSpec::new(vec![HyperEntry::log(HyperId::Gamma, 5.0 * log_gamma.exp())]).unwrap();
    let opts = OptimizeOptions {
        restarts: 0,
        ..OptimizeOptions::default()
    };
    let (k, _, report) = maximize(&data, &kernel, noise, &far, &opts).unwrap();
    assert!(report.converged);
    assert!(
        (k.params.gamma() / log_gamma.exp() - 1.0).abs() < 1e-4,
        "{} vs {}",
        k.params.gamma(),
        log_gamma.exp()
    );
}

#[test]
fn optimal_start_converges_immediately() {
    let (data, kernel, noise, log_gamma) = gamma_stationary_point();
    let spec = HyperSpec::new(vec![HyperEntry::log(HyperId::Gamma, log_gamma.exp())]).unwrap();
    let opts = OptimizeOptions {
        restarts: 0,
        ..OptimizeOptions::default()
    };
    let (_, _, report) = maximize(&data, &kernel, noise, &spec, &opts).unwrap();
    assert!(report.converged);
    assert!(report.iterations <= 2, "{} iterations", report.iterations);
}

#[test]
fn likelihood_trace_never_decreases() {
    let mut r = rng(45);
    for kind in [
        KernelKind::ConvolutionProper,
        KernelKind::ComplexMetricGaussian,
        KernelKind::IndependentKernel,
    ] {
        let truth = random_kernel(&mut r, kind, 1);
        let data = sampled_dataset(&mut r, &truth, 0.05, 40, 1, 9);
        let start = random_kernel(&mut r, kind, 1);
        let spec = full_spec(&start, 0.3, 1);
        let opts = OptimizeOptions {
            restarts: 0,
            max_iter: 60,
            ..OptimizeOptions::default()
        };
        let (_, _, report) = maximize(&data, &start, 0.3, &spec, &opts).unwrap();
        assert!(report.trace.len() >= 2, "{kind}: no accepted step");
        for w in report.trace.windows(2) {
            assert!(w[1].1 >= w[0].1, "{kind}: L fell from {} to {}", w[0].1, w[1].1);
        }
        assert_eq!(report.trace.last().unwrap().1, report.log_likelihood);
    }
}

/// Central difference extrapolated in the step, `(4·D(h/2) − D(h))/3`. Its
/// truncation error is O(h⁴) and its rounding error is far below that of a
/// plain difference at step 1e-6.
fn richardson(data: &ComplexDataset, kernel: &Kernel, noise: f64, spec: &HyperSpec, theta: &[f64], i: usize) -> f64 {
    let d = |h: f64| {
        let (mut up, mut down) = (theta.to_vec(), theta.to_vec());
        up[i] += h;
        down[i] -= h;
        (log_likelihood(data, kernel, noise, spec, &up) - log_likelihood(data, kernel, noise, spec, &down)) / (2.0 * h)
    };
    let h = 1e-3;
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

#[test]
fn analytic_gradient_matches_extrapolated_differences() {
    let mut r = rng(46);
    let mut worst = 0.0f64;
    for kind in KernelKind::ALL {
        for cfg in 0..CONFIGS_PER_KIND {
            let dim = r.random_range(1..=2);
            let n = r.random_range(8..=30);
            let kernel = random_kernel(&mut r, kind, dim);
            let noise = 10f64.powf(r.random_range(-1.5..-0.3));
            let data = sampled_dataset(&mut r, &kernel, noise, n, dim, 100 + cfg as u64);
            let spec = full_spec(&kernel, noise, dim);
            let theta = spec.initial_coordinates().unwrap();
            let model = GprModel::fit(data.clone(), kernel.clone(), noise).unwrap();
            let grad = likelihood_gradient(&model, &spec).unwrap();
            for (i, e) in spec.entries().iter().enumerate() {
                let oracle = richardson(&data, &kernel, noise, &spec, &theta, i);
                let rel = (grad[i] - oracle).abs() / grad[i].abs().max(oracle.abs()).max(f64::MIN_POSITIVE);
                worst = worst.max(rel);
                assert!(
                    rel <= 1e-6,
                    "{kind} config {cfg} {}: analytic {} vs {oracle} (rel {rel:e})",
                    e.id,
                    grad[i]
                );
            }
        }
    }
    println!("worst relative error against the extrapolated oracle {worst:e}");
}

#[test]
fn log_and_natural_parametrizations_reach_the_same_likelihood() {
    let (data, kernel, noise, log_gamma) = gamma_stationary_point();
    let start = 3.0 * log_gamma.exp();
    let opts = OptimizeOptions {
        restarts: 0,
        ..OptimizeOptions::default()
    };
    let run = |entry: HyperEntry| {
        maximize(&data, &kernel, noise, &HyperSpec::new(vec![entry]).unwrap(), &opts)
            .unwrap()
            .2
    };
    let log = run(HyperEntry::log(HyperId::Gamma, start));
    let nat = run(HyperEntry::real(HyperId::Gamma, start));
    assert!(
        (log.log_likelihood - nat.log_likelihood).abs() <= 1e-6,
        "log domain {} vs natural {}",
        log.log_likelihood,
        nat.log_likelihood
    );
}
