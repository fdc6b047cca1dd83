//! Hybrid reward composition.
//!
//! The scalar reward mixes a rule-based answer verdict with a
//! curriculum-modulated rubric reward. The rubric reward is itself a convex
//! combination of the easy and hard tier means, which is the two-tier
//! special case of the general weighted combination implemented here.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::types::{JudgeRecord, RewardBreakdown, RewardConfig, StratifiedRubricSet};

/// Pluggable answer verdict. Implementations must be deterministic for
/// fixed inputs.
pub trait AnswerGrader {
    fn grade(&self, predicted: &str, ground_truth: &str) -> bool;
}

/// Default grader: exact match after whitespace trim and case folding.
/// Deliberately strict — no numeric-equivalence rewriting.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactMatchGrader;

impl AnswerGrader for ExactMatchGrader {
    fn grade(&self, predicted: &str, ground_truth: &str) -> bool {
        predicted.trim().to_lowercase() == ground_truth.trim().to_lowercase()
    }
}

/// Binary answer reward: 1 iff the grader accepts the prediction.
pub fn answer_reward(predicted: &str, ground_truth: &str, grader: &dyn AnswerGrader) -> u8 {
    u8::from(grader.grade(predicted, ground_truth))
}

/// Mean score over the record's applicable verdicts whose rubric belongs to
/// the tier. `None` when the judge marked every tier member inapplicable
/// (or produced no verdict for any of them).
pub fn tier_mean(record: &JudgeRecord, tier_ids: &BTreeSet<String>) -> Result<Option<f64>> {
    if tier_ids.is_empty() {
        return Err(Error::EmptyTier);
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for verdict in &record.verdicts {
        if verdict.applicable && tier_ids.contains(&verdict.rubric_id) {
            if let Some(score) = verdict.score {
                sum += f64::from(score);
                count += 1;
            }
        }
    }
    Ok((count > 0).then(|| sum / count as f64))
}

/// Fallback applied when a tier mean was unavailable at composition time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TierFallback {
    /// Easy mean missing; the hard mean carried full weight.
    EasyMissing,
    /// Hard mean missing; the easy mean carried full weight.
    HardMissing,
    /// Both missing; the rubric reward degraded to zero.
    BothMissing,
}

impl std::fmt::Display for TierFallback {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TierFallback::EasyMissing => write!(f, "easy tier mean missing; used hard mean"),
            TierFallback::HardMissing => write!(f, "hard tier mean missing; used easy mean"),
            TierFallback::BothMissing => write!(f, "both tier means missing; rubric reward is 0"),
        }
    }
}

/// Curriculum-modulated rubric reward:
/// `(1 - lambda) * easy + lambda * hard` when both tier means exist.
///
/// When exactly one tier mean is absent the present one carries full weight
/// and the fallback is reported; when both are absent the reward is zero.
/// With coverage-filtered rubrics this is rare, and a conservative fallback
/// beats silently rewarding nothing.
pub fn rubric_reward(
    easy_mean: Option<f64>,
    hard_mean: Option<f64>,
    lambda: f64,
) -> (f64, Option<TierFallback>) {
    debug_assert!((0.0..=1.0).contains(&lambda), "lambda must lie in [0, 1]");
    match (easy_mean, hard_mean) {
        (Some(easy), Some(hard)) => ((1.0 - lambda) * easy + lambda * hard, None),
        (Some(easy), None) => (easy, Some(TierFallback::HardMissing)),
        (None, Some(hard)) => (hard, Some(TierFallback::EasyMissing)),
        (None, None) => (0.0, Some(TierFallback::BothMissing)),
    }
}

/// General weighted combination of per-rubric scores. Weights must sum to
/// one within 1e-9; the two-tier rubric reward is the special case with
/// weights `(1 - lambda, lambda)` over the tier means.
pub fn weighted_rubric_combination(weights: &[f64], scores: &[f64]) -> Result<f64> {
    if weights.is_empty() || weights.len() != scores.len() {
        return Err(Error::InvalidCombination(format!(
            "need equal nonempty lengths, got {} weights and {} scores",
            weights.len(),
            scores.len()
        )));
    }
    for (i, w) in weights.iter().enumerate() {
        if !(0.0..=1.0).contains(w) {
            return Err(Error::InvalidCombination(format!(
                "weight {w} at index {i} is outside [0, 1]"
            )));
        }
    }
    for (i, s) in scores.iter().enumerate() {
        if !(0.0..=1.0).contains(s) {
            return Err(Error::InvalidCombination(format!(
                "score {s} at index {i} is outside [0, 1]"
            )));
        }
    }
    let sum: f64 = weights.iter().sum();
    let deviation = (sum - 1.0).abs();
    if deviation > 1e-9 {
        return Err(Error::WeightSum { sum, deviation });
    }
    Ok(weights
        .iter()
        .zip(scores)
        .fold(0.0, |acc, (w, s)| acc + w * s))
}

/// Scalar reward handed to the optimizer:
/// `alpha * answer + (1 - alpha) * rubric_reward`.
pub fn total_reward(answer: u8, rubric_reward: f64, config: &RewardConfig) -> f64 {
    config.alpha * f64::from(answer) + (1.0 - config.alpha) * rubric_reward
}

/// Composes the full reward breakdown for one record against a stratified
/// rubric set. The record must carry an answer verdict.
pub fn reward_breakdown(
    record: &JudgeRecord,
    strata: &StratifiedRubricSet,
    lambda: f64,
    config: &RewardConfig,
) -> Result<(RewardBreakdown, Option<TierFallback>)> {
    let answer = record
        .answer_correct
        .ok_or_else(|| Error::MissingAnswer(record.sample_id.clone()))?;
    let easy_mean = tier_mean(record, &strata.easy_ids)?;
    let hard_mean = tier_mean(record, &strata.hard_ids)?;
    let (rubric, fallback) = rubric_reward(easy_mean, hard_mean, lambda);
    let total = total_reward(answer, rubric, config);
    Ok((
        RewardBreakdown {
            answer_reward: answer,
            easy_mean,
            hard_mean,
            lambda_used: lambda,
            rubric_reward: rubric,
            total,
        },
        fallback,
    ))
}
