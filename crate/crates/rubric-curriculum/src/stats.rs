//! Per-rubric statistics, coverage filtering, and difficulty stratification.
//!
//! Everything here is a pure function over validated records, so the whole
//! pipeline is deterministic and order-independent: permuting the input
//! record list yields an identical partition.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{
    DiscardReason, DiscardedRubric, JudgeRecord, Rubric, RubricKind, RubricStats,
    StratifiedRubricSet,
};

/// Thresholds controlling filtering and the easy/hard split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StratificationConfig {
    /// Minimum applicability rate a rubric must reach to be retained.
    pub tau_app: f64,
    /// Pass-rate split point: `pass_rate >= tau_pass` goes to the easy tier.
    pub tau_pass: f64,
    /// Drop outcome-kind rubrics before stratifying.
    pub exclude_outcome: bool,
}

impl Default for StratificationConfig {
    fn default() -> Self {
        Self {
            tau_app: 0.99,
            tau_pass: 0.8,
            exclude_outcome: true,
        }
    }
}

/// Computes applicability rate, conditional pass rate, and CV for one rubric
/// over a record corpus. A record without a verdict for the rubric counts as
/// not applicable: the denominator of the applicability rate is always the
/// full corpus size.
pub fn compute_stats(records: &[JudgeRecord], rubric_id: &str) -> Result<RubricStats> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let total = records.len();
    let mut applicable = 0usize;
    let mut passed = 0usize;
    for record in records {
        if let Some(verdict) = record.verdicts.iter().find(|v| v.rubric_id == rubric_id) {
            if verdict.applicable {
                applicable += 1;
                if verdict.score == Some(1) {
                    passed += 1;
                }
            }
        }
    }
    Ok(build_stats(rubric_id, total, applicable, passed))
}

/// Computes stats for every rubric in the pool in a single pass over the
/// records. Equivalent to calling [`compute_stats`] once per rubric.
pub fn compute_all_stats(records: &[JudgeRecord], pool: &[Rubric]) -> Result<Vec<RubricStats>> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for rubric in pool {
        counts.insert(rubric.id.as_str(), (0, 0));
    }
    for record in records {
        for verdict in &record.verdicts {
            if let Some((applicable, passed)) = counts.get_mut(verdict.rubric_id.as_str()) {
                if verdict.applicable {
                    *applicable += 1;
                    if verdict.score == Some(1) {
                        *passed += 1;
                    }
                }
            }
        }
    }
    Ok(pool
        .iter()
        .map(|rubric| {
            let (applicable, passed) = counts[rubric.id.as_str()];
            build_stats(&rubric.id, records.len(), applicable, passed)
        })
        .collect())
}

/// Assembles a [`RubricStats`] from raw counts, deriving the rates and CV.
pub fn stats_from_counts(
    rubric_id: &str,
    total: usize,
    applicable: usize,
    passed: usize,
) -> Result<RubricStats> {
    if total == 0 {
        return Err(Error::EmptyRecords);
    }
    if passed > applicable || applicable > total {
        return Err(Error::InvalidConfig(format!(
            "counts must satisfy passed <= applicable <= total, got {passed}/{applicable}/{total}"
        )));
    }
    Ok(build_stats(rubric_id, total, applicable, passed))
}

fn build_stats(rubric_id: &str, total: usize, applicable: usize, passed: usize) -> RubricStats {
    let applicability_rate = applicable as f64 / total as f64;
    let pass_rate = (applicable > 0).then(|| passed as f64 / applicable as f64);
    let cv = match pass_rate {
        Some(p) if p > 0.0 => Some(coefficient_of_variation(p).expect("p in (0, 1]")),
        _ => None,
    };
    RubricStats {
        rubric_id: rubric_id.to_string(),
        total_count: total,
        applicable_count: applicable,
        pass_count: passed,
        applicability_rate,
        pass_rate,
        cv,
    }
}

/// Relative noise of a Bernoulli reward with the given pass rate:
/// `sqrt(1/p - 1)`. Strictly decreasing in `p`; diverges as `p -> 0`, which
/// is why the rate must be strictly positive.
pub fn coefficient_of_variation(pass_rate: f64) -> Result<f64> {
    if !(pass_rate > 0.0 && pass_rate <= 1.0) {
        return Err(Error::PassRateOutOfDomain(pass_rate));
    }
    Ok((1.0 / pass_rate - 1.0).sqrt())
}

/// Drops rubrics that cannot back a stable reward signal: outcome-kind
/// rubrics (when configured), rubrics below the coverage threshold, and
/// rubrics whose pass rate is undefined because nothing was applicable.
/// Returns the surviving stats plus machine-readable discard reasons.
pub fn filter_rubrics(
    stats: &[RubricStats],
    pool: &[Rubric],
    config: &StratificationConfig,
) -> Result<(Vec<RubricStats>, Vec<DiscardedRubric>)> {
    let kinds: BTreeMap<&str, RubricKind> = pool
        .iter()
        .map(|rubric| (rubric.id.as_str(), rubric.kind))
        .collect();

    let mut retained = Vec::new();
    let mut discarded = Vec::new();
    for entry in stats {
        let kind = kinds
            .get(entry.rubric_id.as_str())
            .copied()
            .ok_or_else(|| Error::UnknownRubric(entry.rubric_id.clone()))?;
        let reason = if config.exclude_outcome && kind == RubricKind::Outcome {
            Some(DiscardReason::OutcomeKind)
        } else if entry.applicability_rate < config.tau_app {
            Some(DiscardReason::LowApplicability)
        } else if entry.pass_rate.is_none() {
            Some(DiscardReason::UndefinedPassRate)
        } else {
            None
        };
        match reason {
            Some(reason) => discarded.push(DiscardedRubric {
                rubric_id: entry.rubric_id.clone(),
                reason,
            }),
            None => retained.push(entry.clone()),
        }
    }
    Ok((retained, discarded))
}

/// Splits retained rubrics into easy (`pass_rate >= tau_pass`) and hard
/// (`pass_rate < tau_pass`) tiers. The boundary is inclusive on the easy
/// side. Either tier may come out empty; the curriculum scheduler is the
/// component that rejects an empty easy tier.
pub fn stratify(
    retained: &[RubricStats],
    discarded: Vec<DiscardedRubric>,
    config: &StratificationConfig,
) -> Result<StratifiedRubricSet> {
    let mut easy_ids = BTreeSet::new();
    let mut hard_ids = BTreeSet::new();
    for entry in retained {
        let pass_rate = entry
            .pass_rate
            .ok_or_else(|| Error::MissingPassRate(entry.rubric_id.clone()))?;
        if pass_rate >= config.tau_pass {
            easy_ids.insert(entry.rubric_id.clone());
        } else {
            hard_ids.insert(entry.rubric_id.clone());
        }
    }
    Ok(StratifiedRubricSet {
        easy_ids,
        hard_ids,
        discarded,
    })
}

/// Runs the full pipeline: stats over the corpus, coverage filter, then the
/// two-tier split.
pub fn stratify_records(
    records: &[JudgeRecord],
    pool: &[Rubric],
    config: &StratificationConfig,
) -> Result<(Vec<RubricStats>, StratifiedRubricSet)> {
    let stats = compute_all_stats(records, pool)?;
    let (retained, discarded) = filter_rubrics(&stats, pool, config)?;
    let strata = stratify(&retained, discarded, config)?;
    Ok((stats, strata))
}
