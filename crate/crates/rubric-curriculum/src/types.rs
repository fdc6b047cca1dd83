//! Shared domain types.
//!
//! Everything here is an immutable value object once constructed: safe to
//! clone, share, and send across threads. Validation lives next to the types
//! so every downstream module can assume the structural invariants hold.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether a rubric judges the reasoning process or the final outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RubricKind {
    Process,
    Outcome,
}

/// One evaluation criterion with binary (0/1) scoring semantics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rubric {
    /// Unique id within any pool this rubric belongs to.
    pub id: String,
    /// Short human-readable label.
    pub name: String,
    /// What the rubric evaluates.
    pub description: String,
    pub kind: RubricKind,
    /// Text of the binary scoring criteria handed to a judge.
    pub criteria_text: String,
}

/// A judge's per-rubric verdict: applicability plus an optional binary score.
///
/// Invariant after validation: `score` is present if and only if
/// `applicable` is true.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub rubric_id: String,
    pub applicable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<u8>,
}

/// All verdicts a judge produced for one sampled response, plus the
/// rule-based answer verdict when a grader ran.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeRecord {
    pub sample_id: String,
    pub verdicts: Vec<JudgeVerdict>,
    /// Absent when no grader verdict exists for this sample (early rollout
    /// corpora); statistics over answer correctness skip absent values.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer_correct: Option<u8>,
}

/// A repair applied during validation rather than a rejection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepairWarning {
    pub sample_id: String,
    pub rubric_id: String,
    pub message: String,
}

/// Validates a raw judge record, repairing the one benign inconsistency a
/// real judge emits: a score attached to an inapplicable verdict is dropped
/// (with a warning) instead of rejecting the record. Inapplicable scores
/// must never be counted, but tolerating them keeps ingestion robust to
/// schema drift.
///
/// Errors on duplicate rubric ids within the record and on non-binary
/// scores. Idempotent: validating an already-valid record returns it
/// unchanged with no warnings.
pub fn validate_judge_record(record: JudgeRecord) -> Result<(JudgeRecord, Vec<RepairWarning>)> {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for verdict in &record.verdicts {
        if !seen.insert(verdict.rubric_id.as_str()) {
            return Err(Error::DuplicateVerdict {
                sample_id: record.sample_id.clone(),
                rubric_id: verdict.rubric_id.clone(),
            });
        }
        if let Some(score) = verdict.score {
            if score > 1 {
                return Err(Error::NonBinaryScore {
                    sample_id: record.sample_id.clone(),
                    rubric_id: verdict.rubric_id.clone(),
                    value: i64::from(score),
                });
            }
        } else if verdict.applicable {
            return Err(Error::MissingScore {
                sample_id: record.sample_id.clone(),
                rubric_id: verdict.rubric_id.clone(),
            });
        }
    }
    if let Some(answer) = record.answer_correct {
        if answer > 1 {
            return Err(Error::NonBinaryScore {
                sample_id: record.sample_id.clone(),
                rubric_id: "<answer_correct>".to_string(),
                value: i64::from(answer),
            });
        }
    }

    let mut warnings = Vec::new();
    let mut repaired = record;
    for verdict in &mut repaired.verdicts {
        if !verdict.applicable && verdict.score.is_some() {
            verdict.score = None;
            warnings.push(RepairWarning {
                sample_id: repaired.sample_id.clone(),
                rubric_id: verdict.rubric_id.clone(),
                message: "score accompanied applicable=false; dropped".to_string(),
            });
        }
    }
    Ok((repaired, warnings))
}

/// Per-rubric aggregate over a rollout corpus.
///
/// Invariants: `pass_count <= applicable_count <= total_count`;
/// `pass_rate` is present iff `applicable_count > 0`; `cv` is present iff
/// the pass rate is present and positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricStats {
    pub rubric_id: String,
    pub total_count: usize,
    pub applicable_count: usize,
    pub pass_count: usize,
    /// Fraction of the corpus on which the judge deemed the rubric relevant.
    pub applicability_rate: f64,
    /// Conditional success rate on applicable instances.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pass_rate: Option<f64>,
    /// Relative noise of the rubric's Bernoulli reward signal.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cv: Option<f64>,
}

/// Why a rubric was dropped during filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    LowApplicability,
    OutcomeKind,
    UndefinedPassRate,
}

/// A filtered-out rubric together with the machine-readable reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscardedRubric {
    pub rubric_id: String,
    pub reason: DiscardReason,
}

/// The two-tier partition of retained rubrics.
///
/// `easy_ids` and `hard_ids` are disjoint; outcome-kind rubrics never
/// appear in either tier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratifiedRubricSet {
    pub easy_ids: BTreeSet<String>,
    pub hard_ids: BTreeSet<String>,
    pub discarded: Vec<DiscardedRubric>,
}

impl StratifiedRubricSet {
    pub fn is_empty(&self) -> bool {
        self.easy_ids.is_empty() && self.hard_ids.is_empty()
    }
}

/// Shape of the curriculum growth function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampKind {
    Linear,
    Sigmoid,
}

/// Parameters of the stability-aware curriculum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumConfig {
    /// Sliding-window length `w` for the proficiency trigger.
    pub window_size: usize,
    /// Batch-mean threshold the whole window must clear to trigger.
    pub proficiency_threshold: f64,
    /// Curriculum weight at the start of the ramp.
    pub lambda_base: f64,
    /// Curriculum weight held after the ramp completes.
    pub lambda_max: f64,
    /// Ramp duration in steps.
    pub ramp_steps: usize,
    pub ramp_kind: RampKind,
    /// Steepness `k` of the normalized sigmoid ramp; ignored for linear.
    pub sigmoid_steepness: f64,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            window_size: 20,
            proficiency_threshold: 0.9,
            lambda_base: 0.0,
            lambda_max: 1.0,
            ramp_steps: 200,
            ramp_kind: RampKind::Sigmoid,
            sigmoid_steepness: 12.0,
        }
    }
}

impl CurriculumConfig {
    /// Checks the documented ranges. Call once at the config boundary.
    pub fn validate(&self) -> Result<()> {
        if self.window_size == 0 {
            return Err(Error::InvalidConfig("window_size must be >= 1".into()));
        }
        if !(self.proficiency_threshold > 0.0 && self.proficiency_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "proficiency_threshold must lie in (0, 1], got {}",
                self.proficiency_threshold
            )));
        }
        if !(0.0 <= self.lambda_base && self.lambda_base <= self.lambda_max && self.lambda_max <= 1.0)
        {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= lambda_base <= lambda_max <= 1, got base {} max {}",
                self.lambda_base, self.lambda_max
            )));
        }
        if self.ramp_steps == 0 {
            return Err(Error::InvalidConfig("ramp_steps must be >= 1".into()));
        }
        if self.ramp_kind == RampKind::Sigmoid && !(self.sigmoid_steepness > 0.0) {
            return Err(Error::NonPositiveSteepness(self.sigmoid_steepness));
        }
        Ok(())
    }
}

/// Scheduler phase. Strictly ordered; the scheduler never regresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Stabilization,
    RampUp,
    Consolidation,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Phase::Stabilization => write!(f, "stabilization"),
            Phase::RampUp => write!(f, "ramp_up"),
            Phase::Consolidation => write!(f, "consolidation"),
        }
    }
}

/// Mixing weight for the hybrid reward: `alpha` on answer correctness,
/// `1 - alpha` on the rubric reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub alpha: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { alpha: 0.7 }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Full decomposition of one sample's scalar reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub answer_reward: u8,
    /// Mean score over applicable easy-tier verdicts; absent when the judge
    /// marked every easy rubric inapplicable.
    pub easy_mean: Option<f64>,
    pub hard_mean: Option<f64>,
    /// Curriculum weight in force when the reward was composed.
    pub lambda_used: f64,
    pub rubric_reward: f64,
    pub total: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(verdicts: Vec<JudgeVerdict>) -> JudgeRecord {
        JudgeRecord {
            sample_id: "s1".to_string(),
            verdicts,
            answer_correct: Some(1),
        }
    }

    fn verdict(id: &str, applicable: bool, score: Option<u8>) -> JudgeVerdict {
        JudgeVerdict {
            rubric_id: id.to_string(),
            applicable,
            score,
        }
    }

    #[test]
    fn valid_record_passes_through_unchanged() {
        let input = record(vec![verdict("R01", true, Some(1))]);
        let (validated, warnings) = validate_judge_record(input.clone()).unwrap();
        assert_eq!(validated, input);
        assert!(warnings.is_empty());
    }

    #[test]
    fn score_on_inapplicable_verdict_is_dropped_with_warning() {
        let input = record(vec![verdict("R01", false, Some(1))]);
        let (validated, warnings) = validate_judge_record(input).unwrap();
        assert_eq!(validated.verdicts[0].score, None);
        assert!(!validated.verdicts[0].applicable);
        assert_eq!(warnings.len(), 1);
        assert_eq!(warnings[0].rubric_id, "R01");
    }

    #[test]
    fn duplicate_rubric_is_a_structural_error() {
        let input = record(vec![
            verdict("R02", true, Some(1)),
            verdict("R02", true, Some(0)),
        ]);
        match validate_judge_record(input) {
            Err(Error::DuplicateVerdict { rubric_id, .. }) => assert_eq!(rubric_id, "R02"),
            other => panic!("expected duplicate error, got {other:?}"),
        }
    }

    #[test]
    fn non_binary_score_is_a_value_error() {
        let input = record(vec![verdict("R01", true, Some(5))]);
        assert!(matches!(
            validate_judge_record(input),
            Err(Error::NonBinaryScore { value: 5, .. })
        ));
    }

    #[test]
    fn applicable_without_score_is_rejected() {
        let input = record(vec![verdict("R01", true, None)]);
        assert!(matches!(
            validate_judge_record(input),
            Err(Error::MissingScore { .. })
        ));
    }

    #[test]
    fn non_binary_answer_is_a_value_error() {
        let mut input = record(vec![]);
        input.answer_correct = Some(2);
        assert!(matches!(
            validate_judge_record(input),
            Err(Error::NonBinaryScore { value: 2, .. })
        ));
    }

    #[test]
    fn validation_is_idempotent() {
        let input = record(vec![
            verdict("R01", false, Some(1)),
            verdict("R02", true, Some(0)),
        ]);
        let (once, _) = validate_judge_record(input).unwrap();
        let (twice, warnings) = validate_judge_record(once.clone()).unwrap();
        assert_eq!(once, twice);
        assert!(warnings.is_empty());
    }
}
