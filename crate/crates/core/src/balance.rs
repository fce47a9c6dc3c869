//! Max-min balancing: bound, scaled target interval, and bisection over SINR
//! targets with warm-started Levenberg-Marquardt solves.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bound::{bound_for, BoundResult, WhitenedProblem};
use crate::channel::{generate_channels, ChannelSet, SystemConfig};
use crate::error::{Error, Result};
use crate::lm::{finalize_precoder, realify_vector, solve_at_gamma, LmConfig};
use crate::sinr::{build_quadratic_problem, relay_power, sinr_direct, unvec, QuadraticProblem};
use crate::{CMatrix, CVector, RVector};

const DELTA_MIN: f64 = 0.6;
const DELTA_MAX: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BisectionConfig {
    /// Stop once the target interval is narrower than `eps_bisect · γ̄`.
    pub eps_bisect: f64,
    pub max_steps: usize,
    /// `(snr_db, δ)` pairs, sorted by SNR, interpolated linearly.
    pub snr_breakpoints: Vec<(f64, f64)>,
}

impl Default for BisectionConfig {
    fn default() -> Self {
        Self { eps_bisect: 1e-3, max_steps: 64, snr_breakpoints: vec![(0.0, 0.6), (10.0, 1.0)] }
    }
}

impl BisectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_bisect > 0.0) {
            return Err(Error::InvalidParameter(format!("eps_bisect must be positive, got {}", self.eps_bisect)));
        }
        if self.snr_breakpoints.is_empty() {
            return Err(Error::InvalidParameter("at least one SNR breakpoint is required".into()));
        }
        if self.snr_breakpoints.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(Error::InvalidParameter("SNR breakpoints must be strictly increasing".into()));
        }
        if let Some(&(snr, d)) = self.snr_breakpoints.iter().find(|(_, d)| !(DELTA_MIN..=DELTA_MAX).contains(d)) {
            return Err(Error::InvalidParameter(format!("breakpoint {snr} dB has delta {d} outside [0.6, 1]")));
        }
        Ok(())
    }
}

/// Bound scaling `δ` for a given peak-power-to-noise ratio.
pub fn delta_scale(snr_db: f64, cfg: &BisectionConfig) -> f64 {
    let pts = &cfg.snr_breakpoints;
    let delta = match pts.iter().position(|&(s, _)| s >= snr_db) {
        None => pts.last().map_or(DELTA_MAX, |p| p.1),
        Some(0) => pts[0].1,
        Some(i) => {
            let (s0, d0) = pts[i - 1];
            let (s1, d1) = pts[i];
            d0 + (d1 - d0) * (snr_db - s0) / (s1 - s0)
        }
    };
    delta.clamp(DELTA_MIN, DELTA_MAX)
}

/// `½ log₂(1 + γ)`, the two-phase rate.
pub fn min_rate(gamma: f64) -> f64 {
    0.5 * (1.0 + gamma).log2()
}

/// One channel realization with its derived quadratic problem.
#[derive(Debug, Clone)]
pub struct Instance {
    pub channels: ChannelSet,
    pub system: SystemConfig,
    pub problem: QuadraticProblem,
}

impl Instance {
    pub fn new(channels: ChannelSet, system: SystemConfig) -> Result<Self> {
        system.validate()?;
        let problem = build_quadratic_problem(&channels, &system)?;
        Ok(Self { channels, system, problem })
    }

    pub fn generate(system: &SystemConfig) -> Result<Self> {
        Self::new(generate_channels(system)?, system.clone())
    }

    pub fn sinrs(&self, omega: &CVector) -> Result<Vec<f64>> {
        Ok(sinr_direct(&unvec(omega)?, &self.channels, &self.system))
    }

    pub fn min_sinr(&self, omega: &CVector) -> Result<f64> {
        Ok(self.sinrs(omega)?.into_iter().fold(f64::INFINITY, f64::min))
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub omega_matrix: CMatrix,
    pub omega: CVector,
    pub sinrs: Vec<f64>,
    pub min_sinr: f64,
    pub gamma_bar: f64,
    pub j_star: usize,
    /// Bound scaling used for the initial interval.
    pub delta: f64,
    pub min_rate: f64,
    pub ratio_to_bound: f64,
    /// LM iterations summed over all bisection steps.
    pub iterations: usize,
    pub bisection_steps: usize,
    /// Armijo evaluations per LM iteration.
    pub linesearch_per_step: f64,
    pub relay_power: f64,
    pub wall_time: f64,
    /// Every LM solve stalled without progress; the report holds the
    /// bound-eigenvector precoder.
    pub degraded: bool,
    /// Min-SINR of the finalized bound eigenvector.
    pub initial_min_sinr: f64,
    /// Best recorded min-SINR after each bisection step.
    pub best_trace: Vec<f64>,
}

struct Candidate {
    w_hat: RVector,
    omega: CVector,
    min_sinr: f64,
}

fn candidate(inst: &Instance, wp: &WhitenedProblem, w: &CVector) -> Result<Candidate> {
    let omega = finalize_precoder(w, wp);
    let min_sinr = inst.min_sinr(&omega)?;
    Ok(Candidate { w_hat: realify_vector(w), omega, min_sinr })
}

/// Runs the bisection-driven balancing on one instance.
pub fn balance(inst: &Instance, lm_cfg: &LmConfig, bi_cfg: &BisectionConfig) -> Result<SolveReport> {
    lm_cfg.validate()?;
    bi_cfg.validate()?;
    let start = Instant::now();
    let qp = &inst.problem;
    let (wp, BoundResult { gamma_bar, j_star, w0, .. }) = bound_for(qp)?;
    let delta = delta_scale(qp.snr_db(), bi_cfg);

    let mut best = candidate(inst, &wp, &w0)?;
    let initial_min_sinr = best.min_sinr;
    let mut best_trace = Vec::new();
    let (mut lo, mut hi) = (0.0, delta * gamma_bar);
    let tol = bi_cfg.eps_bisect * gamma_bar;
    let (mut iterations, mut ls_evals, mut steps) = (0usize, 0usize, 0usize);
    let mut any_progress = false;

    while steps < bi_cfg.max_steps && hi - lo > tol {
        let gamma = 0.5 * (lo + hi);
        let (w, state) = solve_at_gamma(&wp, gamma, &best.w_hat, lm_cfg)?;
        iterations += state.k;
        ls_evals += state.line_search_evals();
        any_progress |= !state.made_no_progress();

        let trial = candidate(inst, &wp, &w)?;
        if trial.min_sinr >= best.min_sinr {
            best = trial;
            lo = gamma;
        } else {
            hi = gamma;
        }
        steps += 1;
        best_trace.push(best.min_sinr);
    }

    let omega_matrix = unvec(&best.omega)?;
    let sinrs = sinr_direct(&omega_matrix, &inst.channels, &inst.system);
    let min_sinr = sinrs.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio_to_bound = if gamma_bar > 0.0 { min_rate(min_sinr) / min_rate(gamma_bar) } else { 1.0 };
    Ok(SolveReport {
        relay_power: relay_power(&omega_matrix, &inst.channels, inst.system.sigma_r2),
        omega_matrix,
        omega: best.omega,
        sinrs,
        min_sinr,
        gamma_bar,
        j_star,
        delta,
        min_rate: min_rate(min_sinr),
        ratio_to_bound,
        iterations,
        bisection_steps: steps,
        linesearch_per_step: if iterations > 0 { ls_evals as f64 / iterations as f64 } else { 0.0 },
        wall_time: start.elapsed().as_secs_f64(),
        degraded: steps > 0 && !any_progress,
        initial_min_sinr,
        best_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::channels_from_real;
    use nalgebra::DMatrix;

    #[test]
    fn delta_examples() {
        let cfg = BisectionConfig { snr_breakpoints: vec![(0.0, 0.6), (30.0, 1.0)], ..Default::default() };
        assert_eq!(delta_scale(-10.0, &cfg), 0.6);
        assert_eq!(delta_scale(45.0, &cfg), 1.0);
        assert!((delta_scale(15.0, &cfg) - 0.8).abs() < 1e-15);
        assert_eq!(delta_scale(0.0, &cfg), 0.6);
        assert_eq!(delta_scale(30.0, &cfg), 1.0);
        let default = BisectionConfig::default();
        assert!((delta_scale(5.0, &default) - 0.8).abs() < 1e-15);
        assert_eq!(delta_scale(20.0, &default), 1.0);
        let three = BisectionConfig { snr_breakpoints: vec![(0.0, 0.6), (10.0, 0.9), (20.0, 0.7)], ..cfg };
        assert!((delta_scale(10.0, &three) - 0.9).abs() < 1e-15);
        assert!((delta_scale(15.0, &three) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn rate_examples() {
        assert_eq!(min_rate(0.0), 0.0);
        assert_eq!(min_rate(1.0), 0.5);
        assert_eq!(min_rate(3.0), 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(BisectionConfig::default().validate().is_ok());
        let bad = BisectionConfig { eps_bisect: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = BisectionConfig { snr_breakpoints: vec![(0.0, 0.5)], ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = BisectionConfig { snr_breakpoints: vec![(10.0, 0.7), (0.0, 0.8)], ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn scalar_case_is_tight() {
        let ch = channels_from_real(DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 1.0)).unwrap();
        let cfg = SystemConfig { pairs: 1, relay_antennas: 1, sigma2: 1.0, sigma_r2: 1.0, power: 1.0, ..Default::default() };
        let inst = Instance::new(ch, cfg).unwrap();
        let report = balance(&inst, &LmConfig::default(), &BisectionConfig::default()).unwrap();
        assert!((report.gamma_bar - 0.25).abs() < 1e-12);
        assert!((report.min_sinr - 0.25).abs() < 1e-6);
        assert!(report.ratio_to_bound >= 0.9999);
        assert!((report.relay_power - 1.0).abs() < 1e-9);
    }

    #[test]
    fn report_invariants_on_random_instances() {
        for seed in 0..4 {
            let sys = SystemConfig { seed, sigma2: 0.1, ..Default::default() };
            let inst = Instance::generate(&sys).unwrap();
            let bi = BisectionConfig::default();
            let report = balance(&inst, &LmConfig::default(), &bi).unwrap();
            assert!(report.min_sinr <= report.gamma_bar * (1.0 + 1e-9));
            assert!((report.relay_power - sys.power).abs() <= 1e-9 * sys.power);
            assert!(report.min_sinr >= report.initial_min_sinr);
            assert!(report.best_trace.windows(2).all(|w| w[0] <= w[1]));
            let bound_steps = ((report.delta / bi.eps_bisect).log2()).ceil() as usize;
            assert!(report.bisection_steps <= bound_steps);
        }
    }
}
