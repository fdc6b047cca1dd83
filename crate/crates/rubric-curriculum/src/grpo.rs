//! Group-relative policy optimization over a toy softmax policy.
//!
//! No critic, no neural network: a policy is a logit vector over a finite
//! action set, and each update normalizes a group of scalar rewards against
//! the group's own mean and standard deviation. The clipped surrogate is
//! implemented in full generality even though a single on-policy update
//! evaluates it at ratio 1, where the clip is inert.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimizer parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrpoConfig {
    /// Rollouts per group. Must be at least 2 for the normalization to be
    /// nondegenerate.
    pub group_size: usize,
    /// Clip half-width for the surrogate ratio.
    pub clip_epsilon: f64,
    /// Weight of the KL penalty against the reference policy.
    pub kl_coefficient: f64,
    pub learning_rate: f64,
    /// Floor on the group standard deviation to avoid division blow-ups.
    pub std_guard: f64,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        Self {
            group_size: 8,
            clip_epsilon: 0.2,
            kl_coefficient: 0.01,
            learning_rate: 0.05,
            std_guard: 1e-8,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.group_size < 2 {
            return Err(Error::GroupTooSmall(self.group_size));
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "clip_epsilon must lie in (0, 1), got {}",
                self.clip_epsilon
            )));
        }
        if self.kl_coefficient < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "kl_coefficient must be nonnegative, got {}",
                self.kl_coefficient
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.std_guard > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "std_guard must be positive, got {}",
                self.std_guard
            )));
        }
        Ok(())
    }
}

/// Softmax policy over a finite action set, with a frozen reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyPolicy {
    logits: Vec<f64>,
    reference_logits: Vec<f64>,
}

impl ToyPolicy {
    pub fn new(logits: Vec<f64>, reference_logits: Vec<f64>) -> Result<Self> {
        if logits.is_empty() {
            return Err(Error::InvalidPolicy("action set is empty".into()));
        }
        if logits.len() != reference_logits.len() {
            return Err(Error::InvalidPolicy(format!(
                "policy has {} logits but reference has {}",
                logits.len(),
                reference_logits.len()
            )));
        }
        if logits.iter().chain(&reference_logits).any(|l| !l.is_finite()) {
            return Err(Error::InvalidPolicy("logits must be finite".into()));
        }
        Ok(Self {
            logits,
            reference_logits,
        })
    }

    /// Uniform policy whose reference is also uniform.
    pub fn uniform(action_count: usize) -> Result<Self> {
        Self::new(vec![0.0; action_count], vec![0.0; action_count])
    }

    pub fn action_count(&self) -> usize {
        self.logits.len()
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn reference_logits(&self) -> &[f64] {
        &self.reference_logits
    }

    /// Action distribution under the current logits.
    pub fn probabilities(&self) -> Vec<f64> {
        softmax(&self.logits)
    }

    /// Action distribution under the frozen reference logits.
    pub fn reference_probabilities(&self) -> Vec<f64> {
        softmax(&self.reference_logits)
    }

    /// Samples one action from the current distribution.
    pub fn sample(&self, rng: &mut impl rand::Rng) -> usize {
        let probs = self.probabilities();
        let draw: f64 = rng.gen();
        let mut acc = 0.0;
        for (action, p) in probs.iter().enumerate() {
            acc += p;
            if draw < acc {
                return action;
            }
        }
        probs.len() - 1
    }

    /// Replaces the logits, keeping the reference frozen.
    fn with_logits(&self, logits: Vec<f64>) -> Self {
        Self {
            logits,
            reference_logits: self.reference_logits.clone(),
        }
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Group-relative advantages: each reward centered on the group mean and
/// divided by the population standard deviation (guarded from below). A
/// group of identical rewards yields all zeros.
pub fn group_advantages(rewards: &[f64], std_guard: f64) -> Result<Vec<f64>> {
    if rewards.len() < 2 {
        return Err(Error::GroupTooSmall(rewards.len()));
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let variance = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let denom = variance.sqrt().max(std_guard);
    Ok(rewards.iter().map(|r| (r - mean) / denom).collect())
}

/// PPO-style clipped surrogate for a single sample:
/// `min(ratio * advantage, clip(ratio, 1 - eps, 1 + eps) * advantage)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

/// Exact categorical KL divergence between the policy's current and
/// reference action distributions. Errors if the reference probability
/// underflows to zero anywhere the policy has mass.
pub fn kl_divergence(policy: &ToyPolicy) -> Result<f64> {
    let p = policy.probabilities();
    let q = policy.reference_probabilities();
    let mut kl = 0.0;
    for (action, (pi, qi)) in p.iter().zip(&q).enumerate() {
        if *pi > 0.0 {
            if *qi == 0.0 {
                return Err(Error::DivergentKl(action));
            }
            kl += pi * (pi / qi).ln();
        }
    }
    Ok(kl.max(0.0))
}

/// Diagnostics reported by one optimization step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// Objective value at the pre-update logits (ratio 1 everywhere).
    pub objective: f64,
    pub mean_abs_advantage: f64,
    pub kl: f64,
}

/// Surrogate objective for candidate logits, holding fixed the sampling
/// distribution (`old_probs`) and the group. This is the function whose
/// gradient the optimizer ascends; keeping it standalone lets a finite
/// difference check probe it at arbitrary logits.
pub fn objective(
    candidate: &ToyPolicy,
    old_probs: &[f64],
    group: &[(usize, f64)],
    config: &GrpoConfig,
) -> Result<f64> {
    if old_probs.len() != candidate.action_count() {
        return Err(Error::InvalidPolicy(
            "old_probs length must match the action count".into(),
        ));
    }
    let advantages = group_advantages(
        &group.iter().map(|(_, r)| *r).collect::<Vec<_>>(),
        config.std_guard,
    )?;
    let probs = candidate.probabilities();
    let mut surrogate = 0.0;
    for ((action, _), advantage) in group.iter().zip(&advantages) {
        let ratio = probs[*action] / old_probs[*action];
        surrogate += clipped_surrogate(ratio, *advantage, config.clip_epsilon);
    }
    let kl = kl_divergence(candidate)?;
    Ok(surrogate / group.len() as f64 - config.kl_coefficient * kl)
}

/// Analytic gradient of [`objective`] with respect to the candidate logits.
pub fn objective_gradient(
    candidate: &ToyPolicy,
    old_probs: &[f64],
    group: &[(usize, f64)],
    config: &GrpoConfig,
) -> Result<Vec<f64>> {
    if old_probs.len() != candidate.action_count() {
        return Err(Error::InvalidPolicy(
            "old_probs length must match the action count".into(),
        ));
    }
    let advantages = group_advantages(
        &group.iter().map(|(_, r)| *r).collect::<Vec<_>>(),
        config.std_guard,
    )?;
    let probs = candidate.probabilities();
    let n = candidate.action_count();
    let mut grad = vec![0.0; n];

    // Surrogate term. The unclipped branch is active whenever it attains
    // the min; inside the clip band both branches coincide, so taking the
    // unclipped derivative there is exact.
    for ((action, _), advantage) in group.iter().zip(&advantages) {
        let ratio = probs[*action] / old_probs[*action];
        let clipped = ratio.clamp(1.0 - config.clip_epsilon, 1.0 + config.clip_epsilon);
        let unclipped_active = ratio * advantage <= clipped * advantage;
        if unclipped_active {
            // d ratio / d logit_k = ratio * (indicator(k == action) - p_k)
            let scale = advantage * ratio;
            for k in 0..n {
                let indicator = if k == *action { 1.0 } else { 0.0 };
                grad[k] += scale * (indicator - probs[k]);
            }
        }
    }
    for g in grad.iter_mut() {
        *g /= group.len() as f64;
    }

    // KL term: d KL / d logit_k = p_k * ((ln p_k - ln q_k) - KL).
    if config.kl_coefficient != 0.0 {
        let q = candidate.reference_probabilities();
        let kl = kl_divergence(candidate)?;
        for k in 0..n {
            if probs[k] > 0.0 {
                if q[k] == 0.0 {
                    return Err(Error::DivergentKl(k));
                }
                let log_ratio = (probs[k] / q[k]).ln();
                grad[k] -= config.kl_coefficient * probs[k] * (log_ratio - kl);
            }
        }
    }
    Ok(grad)
}

/// One on-policy ascent step: normalizes the group's rewards, evaluates the
/// objective and its gradient at the current logits (ratio 1, clip inert),
/// and moves the logits by one gradient step.
pub fn grpo_step(
    policy: &ToyPolicy,
    group: &[(usize, f64)],
    config: &GrpoConfig,
) -> Result<(ToyPolicy, StepDiagnostics)> {
    if group.len() != config.group_size {
        return Err(Error::GroupSizeMismatch {
            expected: config.group_size,
            actual: group.len(),
        });
    }
    for (action, _) in group {
        if *action >= policy.action_count() {
            return Err(Error::InvalidPolicy(format!(
                "group references action {action} but the policy has {}",
                policy.action_count()
            )));
        }
    }
    let old_probs = policy.probabilities();
    let advantages = group_advantages(
        &group.iter().map(|(_, r)| *r).collect::<Vec<_>>(),
        config.std_guard,
    )?;
    let objective_value = objective(policy, &old_probs, group, config)?;
    let gradient = objective_gradient(policy, &old_probs, group, config)?;

    let updated_logits: Vec<f64> = policy
        .logits
        .iter()
        .zip(&gradient)
        .map(|(logit, g)| logit + config.learning_rate * g)
        .collect();
    let updated = policy.with_logits(updated_logits);

    let kl = kl_divergence(policy)?;
    let mean_abs_advantage =
        advantages.iter().map(|a| a.abs()).sum::<f64>() / advantages.len() as f64;
    Ok((
        updated,
        StepDiagnostics {
            objective: objective_value,
            mean_abs_advantage,
            kl,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_point_normalization() {
        let adv = group_advantages(&[1.0, 0.0], 1e-8).unwrap();
        assert!((adv[0] - 1.0).abs() < 1e-12);
        assert!((adv[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_group_yields_zeros() {
        let adv = group_advantages(&[0.3; 4], 1e-8).unwrap();
        assert_eq!(adv, vec![0.0; 4]);
    }

    #[test]
    fn alternating_group() {
        let adv = group_advantages(&[1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0], 1e-8).unwrap();
        for (i, a) in adv.iter().enumerate() {
            let expected = if i % 2 == 0 { 1.0 } else { -1.0 };
            assert!((a - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_group_is_a_usage_error() {
        assert!(matches!(
            group_advantages(&[1.0], 1e-8),
            Err(Error::GroupTooSmall(1))
        ));
    }

    #[test]
    fn shift_and_scale_invariance_is_exact_on_dyadic_inputs() {
        let rewards = [0.25, 0.75, 1.0, 0.0, 0.5, 0.25, 0.75, 1.0];
        let base = group_advantages(&rewards, 1e-8).unwrap();

        let shifted: Vec<f64> = rewards.iter().map(|r| r + 2.5).collect();
        assert_eq!(group_advantages(&shifted, 1e-8).unwrap(), base);

        let scaled: Vec<f64> = rewards.iter().map(|r| r * 4.0).collect();
        assert_eq!(group_advantages(&scaled, 1e-8).unwrap(), base);
    }

    #[test]
    fn clipped_surrogate_examples() {
        assert!((clipped_surrogate(1.5, 1.0, 0.2) - 1.2).abs() < 1e-15);
        assert!((clipped_surrogate(0.5, -1.0, 0.2) + 0.8).abs() < 1e-15);
        assert_eq!(clipped_surrogate(1.0, 0.37, 0.2), 0.37);
        assert_eq!(clipped_surrogate(1.0, -0.37, 0.05), -0.37);
    }

    #[test]
    fn kl_of_identical_distributions_is_zero() {
        let policy = ToyPolicy::new(vec![0.3, -1.2, 0.8], vec![0.3, -1.2, 0.8]).unwrap();
        assert_eq!(kl_divergence(&policy).unwrap(), 0.0);
    }

    #[test]
    fn kl_closed_form_case() {
        // p = (1/2, 1/2), q = (1/4, 3/4): KL = ln 2 / 2 - ln(3/2) / 2.
        let policy = ToyPolicy::new(vec![0.0, 0.0], vec![0.0, (3.0f64).ln()]).unwrap();
        let expected = 0.5 * 2.0f64.ln() - 0.5 * 1.5f64.ln();
        assert!((kl_divergence(&policy).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn kl_underflow_is_reported() {
        let policy = ToyPolicy::new(vec![0.0, 0.0], vec![800.0, -800.0]).unwrap();
        assert!(matches!(kl_divergence(&policy), Err(Error::DivergentKl(1))));
    }

    #[test]
    fn equal_rewards_at_reference_leave_the_policy_unchanged() {
        let policy = ToyPolicy::new(vec![0.1, -0.4], vec![0.1, -0.4]).unwrap();
        let config = GrpoConfig {
            group_size: 4,
            ..GrpoConfig::default()
        };
        let group = vec![(0, 0.5), (1, 0.5), (0, 0.5), (1, 0.5)];
        let (updated, diagnostics) = grpo_step(&policy, &group, &config).unwrap();
        assert_eq!(updated.logits(), policy.logits());
        assert_eq!(diagnostics.kl, 0.0);
    }

    #[test]
    fn rewarded_action_gains_probability() {
        let policy = ToyPolicy::uniform(2).unwrap();
        let config = GrpoConfig {
            group_size: 2,
            kl_coefficient: 0.0,
            ..GrpoConfig::default()
        };
        let before = policy.probabilities()[0];
        let (updated, _) = grpo_step(&policy, &[(0, 1.0), (1, 0.0)], &config).unwrap();
        assert!(updated.probabilities()[0] > before);
    }

    #[test]
    fn group_size_mismatch_is_rejected() {
        let policy = ToyPolicy::uniform(2).unwrap();
        let config = GrpoConfig {
            group_size: 4,
            ..GrpoConfig::default()
        };
        assert!(matches!(
            grpo_step(&policy, &[(0, 1.0), (1, 0.0)], &config),
            Err(Error::GroupSizeMismatch { expected: 4, actual: 2 })
        ));
    }

    fn finite_difference_gradient(
        policy: &ToyPolicy,
        old_probs: &[f64],
        group: &[(usize, f64)],
        config: &GrpoConfig,
    ) -> Vec<f64> {
        let h = 1e-6;
        (0..policy.action_count())
            .map(|k| {
                let mut up = policy.logits().to_vec();
                up[k] += h;
                let mut down = policy.logits().to_vec();
                down[k] -= h;
                let plus = objective(
                    &ToyPolicy::new(up, policy.reference_logits().to_vec()).unwrap(),
                    old_probs,
                    group,
                    config,
                )
                .unwrap();
                let minus = objective(
                    &ToyPolicy::new(down, policy.reference_logits().to_vec()).unwrap(),
                    old_probs,
                    group,
                    config,
                )
                .unwrap();
                (plus - minus) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let config = GrpoConfig {
            group_size: 6,
            clip_epsilon: 0.2,
            kl_coefficient: 0.05,
            learning_rate: 0.1,
            std_guard: 1e-8,
        };
        for _ in 0..10 {
            let actions = 4;
            let logits: Vec<f64> = (0..actions).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let reference: Vec<f64> = (0..actions).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let old_logits: Vec<f64> = (0..actions).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let old_probs = ToyPolicy::new(old_logits.clone(), old_logits).unwrap().probabilities();
            let group: Vec<(usize, f64)> = (0..config.group_size)
                .map(|_| (rng.gen_range(0..actions), rng.gen_range(0.0..1.0)))
                .collect();
            let candidate = ToyPolicy::new(logits, reference).unwrap();

            let analytic = objective_gradient(&candidate, &old_probs, &group, &config).unwrap();
            let numeric = finite_difference_gradient(&candidate, &old_probs, &group, &config);
            let scale = analytic
                .iter()
                .map(|g| g.abs())
                .fold(1e-6, f64::max);
            for (a, n) in analytic.iter().zip(&numeric) {
                assert!(
                    (a - n).abs() / scale < 1e-5,
                    "gradient mismatch: analytic {a} vs numeric {n} (scale {scale})"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn advantages_are_mean_zero_unit_std(
            rewards in prop::collection::vec(0.0f64..=1.0, 2..16)
        ) {
            let adv = group_advantages(&rewards, 1e-8).unwrap();
            let n = adv.len() as f64;
            let mean = adv.iter().sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-9);

            let spread = rewards.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - rewards.iter().cloned().fold(f64::INFINITY, f64::min);
            if spread > 1e-6 {
                let std = (adv.iter().map(|a| a * a).sum::<f64>() / n).sqrt();
                prop_assert!((std - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn kl_is_nonnegative(
            logits in prop::collection::vec(-5.0f64..5.0, 2..6),
            reference in prop::collection::vec(-5.0f64..5.0, 2..6),
        ) {
            let n = logits.len().min(reference.len());
            let policy = ToyPolicy::new(logits[..n].to_vec(), reference[..n].to_vec()).unwrap();
            prop_assert!(kl_divergence(&policy).unwrap() >= 0.0);
        }
    }
}
