//! Stability-aware curriculum scheduler.
//!
//! The scheduler watches the batch-mean easy-tier reward and advances
//! through three phases: stabilization (weight pinned at zero), ramp-up
//! (weight grows along a configured curve), and consolidation (weight held
//! at its maximum). The transition out of stabilization fires only when a
//! full sliding window of observations clears the proficiency threshold, so
//! a transient lucky batch cannot start the ramp.
//!
//! Step indices are 0-based throughout: the trigger step is the index of
//! the last element of the first qualifying window. Triggering is one-way;
//! later dips in performance never regress the phase. The inequality in the
//! ramp is strict: the weight is still zero at the trigger step itself and
//! starts growing one step later.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{CurriculumConfig, Phase, RampKind};

/// Live state of the curriculum. One logical training loop advances it;
/// clones are immutable snapshots that can be shared freely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumState {
    pub phase: Phase,
    /// Number of observations consumed so far; the next observation gets
    /// 0-based index `step`.
    pub step: usize,
    /// The most recent batch means, at most `window_size` of them.
    pub window: VecDeque<f64>,
    /// Index of the observation that completed the first qualifying window.
    pub t_start: Option<usize>,
    pub current_lambda: f64,
}

impl CurriculumState {
    pub fn new() -> Self {
        Self {
            phase: Phase::Stabilization,
            step: 0,
            window: VecDeque::new(),
            t_start: None,
            current_lambda: 0.0,
        }
    }

    /// Feeds one batch-mean easy-tier reward into the state machine and
    /// updates the phase and curriculum weight.
    pub fn observe(&mut self, config: &CurriculumConfig, batch_mu_easy: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&batch_mu_easy) || batch_mu_easy.is_nan() {
            return Err(Error::MeanOutOfRange(batch_mu_easy));
        }
        let t = self.step;
        self.window.push_back(batch_mu_easy);
        while self.window.len() > config.window_size {
            self.window.pop_front();
        }
        self.step = t + 1;

        match self.phase {
            Phase::Stabilization => {
                let full = self.window.len() == config.window_size;
                if full
                    && self
                        .window
                        .iter()
                        .all(|mu| *mu >= config.proficiency_threshold)
                {
                    self.t_start = Some(t);
                    self.phase = Phase::RampUp;
                    // lambda stays 0 here: ramping begins strictly after the
                    // trigger step.
                }
            }
            Phase::RampUp => {
                let t_start = self.t_start.expect("ramp_up implies t_start");
                self.current_lambda = lambda_at(config, t, t_start)?;
                if t > t_start + config.ramp_steps {
                    self.phase = Phase::Consolidation;
                    self.current_lambda = config.lambda_max;
                }
            }
            Phase::Consolidation => {
                self.current_lambda = config.lambda_max;
            }
        }
        Ok(())
    }
}

impl Default for CurriculumState {
    fn default() -> Self {
        Self::new()
    }
}

/// Pure form of the stabilization trigger: the smallest 0-based index `t`
/// such that the window `trace[t-w+1..=t]` exists and every entry clears
/// the threshold. Returns `None` when no window ever qualifies.
pub fn trigger_step(trace: &[f64], window_size: usize, tau_th: f64) -> Option<usize> {
    if window_size == 0 {
        return None;
    }
    let mut run = 0usize;
    for (t, mu) in trace.iter().enumerate() {
        if *mu >= tau_th {
            run += 1;
            if run >= window_size {
                return Some(t);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// Normalized growth function on `[0, 1]`, clamped outside.
///
/// Linear is the identity on the unit interval. Sigmoid is the logistic
/// curve rescaled so that the endpoints land exactly on 0 and 1:
/// `(s(k(u - 1/2)) - s(-k/2)) / (s(k/2) - s(-k/2))` with `s` the standard
/// logistic. Both are strictly increasing on the interval.
pub fn ramp_value(kind: RampKind, steepness: f64, u: f64) -> Result<f64> {
    let u = u.clamp(0.0, 1.0);
    match kind {
        RampKind::Linear => Ok(u),
        RampKind::Sigmoid => {
            if !(steepness > 0.0) {
                return Err(Error::NonPositiveSteepness(steepness));
            }
            let logistic = |x: f64| 1.0 / (1.0 + (-x).exp());
            let lo = logistic(-steepness / 2.0);
            let hi = logistic(steepness / 2.0);
            Ok(((logistic(steepness * (u - 0.5)) - lo) / (hi - lo)).clamp(0.0, 1.0))
        }
    }
}

/// Curriculum weight at step `t` given the trigger step:
/// `lambda_base + (lambda_max - lambda_base) * phi((t - t_start) / ramp_steps)`.
/// Saturates at `lambda_max` once the ramp duration has elapsed.
pub fn lambda_at(config: &CurriculumConfig, t: usize, t_start: usize) -> Result<f64> {
    debug_assert!(t >= t_start, "lambda_at requires t >= t_start");
    let u = (t.saturating_sub(t_start)) as f64 / config.ramp_steps as f64;
    let phi = ramp_value(config.ramp_kind, config.sigmoid_steepness, u)?;
    Ok(config.lambda_base + (config.lambda_max - config.lambda_base) * phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn config(window: usize, threshold: f64, ramp_steps: usize, kind: RampKind) -> CurriculumConfig {
        CurriculumConfig {
            window_size: window,
            proficiency_threshold: threshold,
            ramp_steps,
            ramp_kind: kind,
            ..CurriculumConfig::default()
        }
    }

    fn run_trace(config: &CurriculumConfig, trace: &[f64]) -> CurriculumState {
        let mut state = CurriculumState::new();
        for mu in trace {
            state.observe(config, *mu).unwrap();
        }
        state
    }

    #[test]
    fn trigger_fires_at_the_first_qualifying_window() {
        let cfg = config(3, 0.9, 100, RampKind::Linear);
        let state = run_trace(&cfg, &[0.85, 0.92, 0.95, 0.91]);
        assert_eq!(state.t_start, Some(3));
        assert_eq!(state.phase, Phase::RampUp);
        assert_eq!(state.current_lambda, 0.0);
    }

    #[test]
    fn earliest_possible_trigger_is_the_first_full_window() {
        let cfg = config(3, 0.9, 100, RampKind::Linear);
        let state = run_trace(&cfg, &[1.0, 1.0, 1.0]);
        assert_eq!(state.t_start, Some(2));
    }

    #[test]
    fn no_trigger_means_lambda_stays_zero() {
        let cfg = config(3, 0.9, 10, RampKind::Linear);
        let state = run_trace(&cfg, &vec![0.5; 200]);
        assert_eq!(state.phase, Phase::Stabilization);
        assert_eq!(state.t_start, None);
        assert_eq!(state.current_lambda, 0.0);
    }

    #[test]
    fn out_of_range_mean_is_rejected() {
        let cfg = config(3, 0.9, 10, RampKind::Linear);
        let mut state = CurriculumState::new();
        assert!(state.observe(&cfg, 1.5).is_err());
        assert!(state.observe(&cfg, -0.1).is_err());
        assert!(state.observe(&cfg, f64::NAN).is_err());
    }

    #[test]
    fn ramp_completes_and_consolidates() {
        let cfg = config(2, 0.9, 4, RampKind::Linear);
        let mut state = CurriculumState::new();
        let mut lambdas = Vec::new();
        for _ in 0..10 {
            state.observe(&cfg, 0.95).unwrap();
            lambdas.push(state.current_lambda);
        }
        // Trigger at t = 1; lambda zero there, ramps over the next 4 steps.
        assert_eq!(lambdas[1], 0.0);
        assert!((lambdas[2] - 0.25).abs() < 1e-12);
        assert!((lambdas[5] - 1.0).abs() < 1e-12);
        assert_eq!(state.phase, Phase::Consolidation);
        assert_eq!(state.current_lambda, cfg.lambda_max);
    }

    #[test]
    fn trigger_step_examples() {
        assert_eq!(trigger_step(&[0.85, 0.92, 0.95, 0.91, 0.80], 3, 0.9), Some(3));
        assert_eq!(trigger_step(&[1.0, 1.0], 3, 0.9), None);
        assert_eq!(trigger_step(&[0.1, 0.9, 0.3], 1, 0.0), Some(0));
    }

    #[test]
    fn linear_ramp_is_the_identity() {
        assert_eq!(ramp_value(RampKind::Linear, 0.0, 0.5).unwrap(), 0.5);
        assert_eq!(ramp_value(RampKind::Linear, 0.0, -0.2).unwrap(), 0.0);
        assert_eq!(ramp_value(RampKind::Linear, 0.0, 1.7).unwrap(), 1.0);
    }

    #[test]
    fn sigmoid_ramp_endpoints_and_midpoint() {
        let phi = |u: f64| ramp_value(RampKind::Sigmoid, 12.0, u).unwrap();
        assert!(phi(0.0).abs() < 1e-15);
        assert!((phi(1.0) - 1.0).abs() < 1e-15);
        assert!((phi(0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_rejects_non_positive_steepness() {
        assert!(ramp_value(RampKind::Sigmoid, 0.0, 0.5).is_err());
        assert!(ramp_value(RampKind::Sigmoid, -3.0, 0.5).is_err());
    }

    #[test]
    fn lambda_at_boundaries() {
        let cfg = CurriculumConfig {
            lambda_base: 0.0,
            lambda_max: 1.0,
            ramp_steps: 100,
            ramp_kind: RampKind::Linear,
            ..CurriculumConfig::default()
        };
        assert!((lambda_at(&cfg, 150, 100).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(lambda_at(&cfg, 100, 100).unwrap(), cfg.lambda_base);
        assert_eq!(lambda_at(&cfg, 200, 100).unwrap(), cfg.lambda_max);
        assert_eq!(lambda_at(&cfg, 350, 100).unwrap(), cfg.lambda_max);
    }

    #[test]
    fn lambda_base_is_honored_at_ramp_start() {
        let cfg = CurriculumConfig {
            lambda_base: 0.2,
            lambda_max: 0.8,
            ramp_steps: 10,
            ramp_kind: RampKind::Linear,
            ..CurriculumConfig::default()
        };
        assert!((lambda_at(&cfg, 5, 5).unwrap() - 0.2).abs() < 1e-15);
        assert!((lambda_at(&cfg, 10, 5).unwrap() - 0.5).abs() < 1e-12);
        assert!((lambda_at(&cfg, 15, 5).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn ramp_sandwich_on_a_fine_grid() {
        for kind in [RampKind::Linear, RampKind::Sigmoid] {
            let mut prev = -1.0;
            for i in 0..=1000 {
                let u = i as f64 / 1000.0;
                let phi = ramp_value(kind, 12.0, u).unwrap();
                assert!((0.0..=1.0).contains(&phi));
                assert!(phi >= prev, "{kind:?} not nondecreasing at u={u}");
                prev = phi;
            }
        }
    }

    // Independent oracle for the trigger: explicit scan over every window.
    fn brute_force_trigger(trace: &[f64], w: usize, tau: f64) -> Option<usize> {
        (0..trace.len()).find(|&t| {
            t + 1 >= w && trace[t + 1 - w..=t].iter().all(|mu| *mu >= tau)
        })
    }

    fn trace_strategy() -> impl Strategy<Value = (Vec<f64>, usize, f64)> {
        (
            prop::collection::vec(0.0f64..=1.0, 0..120),
            1usize..12,
            0.0f64..=1.0,
        )
    }

    proptest! {
        #[test]
        fn trigger_step_matches_brute_force((trace, w, tau) in trace_strategy()) {
            prop_assert_eq!(trigger_step(&trace, w, tau), brute_force_trigger(&trace, w, tau));
        }

        #[test]
        fn observe_agrees_with_trigger_step((trace, w, tau) in trace_strategy()) {
            let cfg = CurriculumConfig {
                window_size: w,
                proficiency_threshold: tau.max(1e-9),
                ramp_steps: 7,
                ramp_kind: RampKind::Linear,
                ..CurriculumConfig::default()
            };
            let expected = trigger_step(&trace, w, cfg.proficiency_threshold);
            let state = run_trace(&cfg, &trace);
            prop_assert_eq!(state.t_start, expected);
        }

        #[test]
        fn lambda_series_is_sound((trace, w, tau) in trace_strategy(), sigmoid in any::<bool>()) {
            let cfg = CurriculumConfig {
                window_size: w,
                proficiency_threshold: tau.max(1e-9),
                ramp_steps: 9,
                ramp_kind: if sigmoid { RampKind::Sigmoid } else { RampKind::Linear },
                ..CurriculumConfig::default()
            };
            let mut state = CurriculumState::new();
            let mut prev_lambda = 0.0;
            let mut prev_phase = Phase::Stabilization;
            for (t, mu) in trace.iter().enumerate() {
                state.observe(&cfg, *mu).unwrap();
                prop_assert!(state.current_lambda >= prev_lambda, "lambda decreased at t={t}");
                prop_assert!(state.phase >= prev_phase, "phase regressed at t={t}");
                match state.t_start {
                    None => prop_assert_eq!(state.current_lambda, 0.0),
                    Some(ts) => {
                        if t <= ts {
                            prop_assert_eq!(state.current_lambda, 0.0);
                        }
                        if t > ts + cfg.ramp_steps {
                            prop_assert_eq!(state.current_lambda, cfg.lambda_max);
                            prop_assert_eq!(state.phase, Phase::Consolidation);
                        }
                    }
                }
                prev_lambda = state.current_lambda;
                prev_phase = state.phase;
            }
        }
    }
}
