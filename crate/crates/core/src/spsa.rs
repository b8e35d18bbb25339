//! Simultaneous perturbation stochastic approximation.
//!
//! Each iteration evaluates the objective at `θ ± c_k Δ` for a random ±1
//! vector `Δ`, forms the gradient estimate
//! `g = (f(θ+c_kΔ) - f(θ-c_kΔ)) / (2c_k) · Δ` and steps `θ ← θ - a_k g` with
//! `a_k = a/(k+1+A)^α`, `c_k = c/(k+1)^γ`.
//!
//! Unless `a` is fixed by the caller, a calibration phase of
//! `min(⌊maxiter/5⌋, 25)` perturbation pairs at `θ₀` measures the mean
//! `|f(θ₀+cΔ) - f(θ₀-cΔ)|` and picks `a` so the first update moves each
//! coordinate by `target_step`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpsaConfig {
    pub maxiter: usize,
    /// Step gain; `None` runs the calibration phase to choose it.
    pub a: Option<f64>,
    pub c: f64,
    pub alpha: f64,
    pub gamma: f64,
    /// Stability constant `A`.
    pub stability: f64,
    /// First-step size targeted by calibration.
    pub target_step: f64,
    pub seed: u64,
}

impl SpsaConfig {
    pub fn new(maxiter: usize, seed: u64) -> Self {
        Self {
            maxiter,
            a: None,
            c: 0.1,
            alpha: 0.602,
            gamma: 0.101,
            stability: 0.0,
            target_step: 2.0 * PI / 10.0,
            seed,
        }
    }

    /// `min(⌊maxiter/5⌋, 25)`, or zero when `a` is fixed.
    pub fn calibration_steps(&self) -> usize {
        if self.a.is_some() {
            0
        } else {
            (self.maxiter / 5).min(25)
        }
    }

    /// Objective evaluations `minimize` will perform.
    pub fn expected_evaluations(&self) -> usize {
        2 * self.calibration_steps() + 2 * self.maxiter
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.maxiter == 0 {
            return bad("maxiter must be >= 1".into());
        }
        if !(self.c > 0.0) {
            return bad(format!("SPSA c = {} must be > 0", self.c));
        }
        if let Some(a) = self.a {
            if !(a > 0.0) {
                return bad(format!("SPSA a = {a} must be > 0"));
            }
        }
        for (name, v) in [("alpha", self.alpha), ("gamma", self.gamma)] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("SPSA {name} = {v} outside (0, 1]"));
            }
        }
        if !(self.stability >= 0.0) {
            return bad(format!("SPSA A = {} must be >= 0", self.stability));
        }
        if !(self.target_step > 0.0) {
            return bad("target step must be > 0".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// Parameters before the update of iteration `k`.
    pub theta: Vec<f64>,
    pub f_plus: f64,
    pub f_minus: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub iterations: Vec<IterationRecord>,
    pub final_theta: Vec<f64>,
    pub evaluations: usize,
    /// Gain `a` actually used (calibrated or configured).
    pub a: f64,
}

/// Objective failure; carries everything computed before the abort.
#[derive(Debug, thiserror::Error)]
#[error("objective failed after {} evaluations: {source}", partial.evaluations)]
pub struct OptimizeError {
    pub partial: OptimizationTrace,
    #[source]
    pub source: Error,
}

/// Entries i.i.d. uniform on {-1, +1}.
pub fn perturbation<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

fn shifted(theta: &[f64], delta: &[f64], scale: f64) -> Vec<f64> {
    theta.iter().zip(delta).map(|(t, d)| t + scale * d).collect()
}

/// Two-sided simultaneous-perturbation gradient estimate.
pub fn gradient_estimate<F>(f: &mut F, theta: &[f64], ck: f64, delta: &[f64]) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(ck > 0.0) {
        return Err(Error::InvalidArgument(format!("c_k = {ck} must be > 0")));
    }
    if theta.len() != delta.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            actual: delta.len(),
        });
    }
    let plus = f(&shifted(theta, delta, ck))?;
    let minus = f(&shifted(theta, delta, -ck))?;
    let scale = (plus - minus) / (2.0 * ck);
    Ok(delta.iter().map(|d| scale * d).collect())
}

/// Runs calibration (if needed) and `maxiter` SPSA iterations; returns the
/// last iterate. The objective is called exactly
/// [`SpsaConfig::expected_evaluations`] times on success.
pub fn minimize<F>(mut f: F, theta0: &[f64], config: &SpsaConfig) -> Result<OptimizationTrace, OptimizeError>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut trace = OptimizationTrace {
        iterations: Vec::with_capacity(config.maxiter),
        final_theta: theta0.to_vec(),
        evaluations: 0,
        a: config.a.unwrap_or(f64::NAN),
    };
    if let Err(source) = config.validate() {
        return Err(OptimizeError { partial: trace, source });
    }
    if theta0.is_empty() {
        return Err(OptimizeError {
            partial: trace,
            source: Error::InvalidArgument("empty parameter vector".into()),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dim = theta0.len();

    macro_rules! eval {
        ($theta:expr) => {{
            let value = f($theta);
            trace.evaluations += 1;
            match value {
                Ok(v) => v,
                Err(source) => return Err(OptimizeError { partial: trace, source }),
            }
        }};
    }

    let a = match config.a {
        Some(a) => a,
        None => {
            let steps = config.calibration_steps();
            let mut mean_diff = 0.0;
            for _ in 0..steps {
                let delta = perturbation(dim, &mut rng);
                let plus = eval!(&shifted(theta0, &delta, config.c));
                let minus = eval!(&shifted(theta0, &delta, -config.c));
                mean_diff += (plus - minus).abs() / steps as f64;
            }
            if mean_diff > 0.0 && mean_diff.is_finite() {
                config.target_step * 2.0 / mean_diff * config.c * (config.stability + 1.0)
            } else {
                // Flat objective around θ₀ (or maxiter < 5): no scale information.
                config.target_step
            }
        }
    };
    trace.a = a;

    let mut theta = theta0.to_vec();
    for k in 0..config.maxiter {
        let ak = a / (k as f64 + 1.0 + config.stability).powf(config.alpha);
        let ck = config.c / (k as f64 + 1.0).powf(config.gamma);
        let delta = perturbation(dim, &mut rng);
        let f_plus = eval!(&shifted(&theta, &delta, ck));
        let f_minus = eval!(&shifted(&theta, &delta, -ck));
        let scale = (f_plus - f_minus) / (2.0 * ck);
        trace.iterations.push(IterationRecord {
            k,
            theta: theta.clone(),
            f_plus,
            f_minus,
        });
        for (t, d) in theta.iter_mut().zip(&delta) {
            *t -= ak * scale * d;
        }
        trace.final_theta.clone_from(&theta);
    }
    trace.final_theta = theta;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(theta: &[f64]) -> Result<f64> {
        Ok(theta.iter().map(|x| x * x).sum())
    }

    #[test]
    fn calibration_step_counts() {
        assert_eq!(SpsaConfig::new(1000, 0).calibration_steps(), 25);
        assert_eq!(SpsaConfig::new(50, 0).calibration_steps(), 10);
        assert_eq!(SpsaConfig::new(4, 0).calibration_steps(), 0);
        let mut fixed = SpsaConfig::new(1000, 0);
        fixed.a = Some(0.5);
        assert_eq!(fixed.calibration_steps(), 0);
    }

    #[test]
    fn perturbation_entries() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = perturbation(1000, &mut rng);
        assert!(d.iter().all(|&x| x == 1.0 || x == -1.0));
        let again = perturbation(1000, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(d, again);
        // 0.01 is about 3.2 standard deviations at n = 1e5.
        let big = perturbation(100_000, &mut rng);
        assert!((big.iter().sum::<f64>() / 1e5).abs() < 0.01);
    }

    #[test]
    fn gradient_of_constant_and_even_functions() {
        let mut constant = |_: &[f64]| Ok(3.0);
        let g = gradient_estimate(&mut constant, &[0.3, -0.2], 0.1, &[1.0, -1.0]).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
        let mut square = |t: &[f64]| Ok(t[0] * t[0]);
        let g = gradient_estimate(&mut square, &[0.0, 0.0], 0.2, &[-1.0, 1.0]).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
        assert!(gradient_estimate(&mut square, &[0.0], 0.0, &[1.0]).is_err());
    }

    #[test]
    fn linear_gradient_is_unbiased_over_all_perturbations() {
        // Average over every Δ ∈ {±1}^4 reproduces b exactly.
        let b = [0.7, -1.3, 2.0, 0.25];
        let theta = [0.1, 0.2, -0.3, 0.4];
        let mut linear = |t: &[f64]| Ok(t.iter().zip(&b).map(|(x, y)| x * y).sum());
        let mut mean = [0.0; 4];
        for bits in 0..16u32 {
            let delta: Vec<f64> = (0..4).map(|i| if bits >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
            let g = gradient_estimate(&mut linear, &theta, 0.05, &delta).unwrap();
            let bd: f64 = b.iter().zip(&delta).map(|(x, y)| x * y).sum();
            for i in 0..4 {
                assert!((g[i] - bd * delta[i]).abs() < 1e-12);
                mean[i] += g[i] / 16.0;
            }
        }
        for i in 0..4 {
            assert!((mean[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn evaluation_count_matches_accounting() {
        for maxiter in [1, 7, 50, 130] {
            let cfg = SpsaConfig::new(maxiter, 1);
            let trace = minimize(sphere, &[0.5, -0.5], &cfg).unwrap();
            assert_eq!(trace.evaluations, cfg.expected_evaluations());
            assert_eq!(trace.iterations.len(), maxiter);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let cfg = SpsaConfig::new(80, 42);
        let a = minimize(sphere, &[1.0, 0.0, 0.0, 0.0], &cfg).unwrap();
        let b = minimize(sphere, &[1.0, 0.0, 0.0, 0.0], &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn objective_failure_returns_partial_trace() {
        let mut calls = 0;
        let failing = |t: &[f64]| {
            calls += 1;
            if calls > 30 {
                Err(Error::InvalidArgument("boom".into()))
            } else {
                sphere(t)
            }
        };
        let err = minimize(failing, &[1.0, 1.0], &SpsaConfig::new(50, 0)).unwrap_err();
        assert_eq!(err.partial.evaluations, 31);
        // 20 calibration evaluations, then 5 full iterations.
        assert_eq!(err.partial.iterations.len(), 5);
    }

    #[test]
    fn converges_on_sphere() {
        let mut ok = 0;
        for seed in 0..100 {
            let theta0 = [0.5, -0.5, 0.5, -0.5];
            let trace = minimize(sphere, &theta0, &SpsaConfig::new(100, seed)).unwrap();
            let norm = trace.final_theta.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 0.1 {
                ok += 1;
            }
        }
        assert!(ok >= 90, "{ok}/100");
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = SpsaConfig::new(10, 0);
        cfg.alpha = 1.5;
        assert!(minimize(sphere, &[1.0], &cfg).is_err());
        assert!(minimize(sphere, &[], &SpsaConfig::new(10, 0)).is_err());
    }
}
