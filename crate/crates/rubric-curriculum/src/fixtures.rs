//! Bundled demo data: a 20-candidate rubric pool with observed rates from a
//! rollout study, and the default simulator configuration. The files under
//! `data/` are the canonical copies; they are embedded here so examples and
//! tests stay in sync with them.

use serde::Deserialize;

use crate::sim::SimConfig;
use crate::types::{JudgeRecord, JudgeVerdict, Rubric};

const POOL_JSON: &str = include_str!("../data/rubric_pool.json");
const RATES_JSON: &str = include_str!("../data/candidate_rates.json");
const DEFAULT_SIM_TOML: &str = include_str!("../data/default_sim.toml");

/// Observed applicability and conditional pass rate for one candidate.
#[derive(Debug, Clone, Deserialize)]
pub struct CandidateRate {
    pub rubric_id: String,
    pub applicability: f64,
    pub pass_rate: f64,
}

/// The bundled 20-candidate rubric pool.
pub fn bundled_pool() -> Vec<Rubric> {
    serde_json::from_str(POOL_JSON).expect("bundled pool is valid JSON")
}

/// Observed rates for the bundled pool, in pool order.
pub fn bundled_rates() -> Vec<CandidateRate> {
    serde_json::from_str(RATES_JSON).expect("bundled rates are valid JSON")
}

/// The default simulator configuration (environment plus all run configs).
pub fn default_sim_config() -> SimConfig {
    toml::from_str(DEFAULT_SIM_TOML).expect("bundled sim config is valid TOML")
}

/// Seeds pinned for the schedule ablation. Committed so that the ablation
/// numbers are reproducible run over run.
pub fn ablation_seeds() -> [u64; 10] {
    [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]
}

/// Synthesizes a deterministic corpus matching the bundled rates at the
/// given corpus size: counts are the rates rounded at `n`, laid out so the
/// first `applicable` records carry applicable verdicts and the first
/// `passed` of those carry passing scores. Answer correctness follows the
/// outcome candidate's pass rate.
pub fn synthesize_bundled_records(n: usize) -> Vec<JudgeRecord> {
    let rates = bundled_rates();
    let counts: Vec<(String, usize, usize)> = rates
        .iter()
        .map(|rate| {
            let applicable = (rate.applicability * n as f64).round() as usize;
            let passed = (rate.pass_rate * applicable as f64).round() as usize;
            (rate.rubric_id.clone(), applicable, passed)
        })
        .collect();
    let answer_passes = counts
        .iter()
        .find(|(id, _, _)| id == "Cand_20")
        .map(|(_, _, passed)| *passed)
        .unwrap_or(0);

    (0..n)
        .map(|i| JudgeRecord {
            sample_id: format!("sample-{i:04}"),
            verdicts: counts
                .iter()
                .map(|(rubric_id, applicable, passed)| {
                    let is_applicable = i < *applicable;
                    JudgeVerdict {
                        rubric_id: rubric_id.clone(),
                        applicable: is_applicable,
                        score: is_applicable.then(|| u8::from(i < *passed)),
                    }
                })
                .collect(),
            answer_correct: Some(u8::from(i < answer_passes)),
        })
        .collect()
}

/// Synthesizes a single-rubric corpus with exact counts. Used by tests that
/// pin specific applicability and pass counts.
pub fn synthesize_records_for(
    n: usize,
    rubric_id: &str,
    applicable: usize,
    passed: usize,
) -> Vec<JudgeRecord> {
    assert!(passed <= applicable && applicable <= n);
    (0..n)
        .map(|i| JudgeRecord {
            sample_id: format!("sample-{i:04}"),
            verdicts: vec![JudgeVerdict {
                rubric_id: rubric_id.to_string(),
                applicable: i < applicable,
                score: (i < applicable).then(|| u8::from(i < passed)),
            }],
            answer_correct: None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_data_parses_and_lines_up() {
        let pool = bundled_pool();
        let rates = bundled_rates();
        assert_eq!(pool.len(), 20);
        assert_eq!(rates.len(), 20);
        for (rubric, rate) in pool.iter().zip(&rates) {
            assert_eq!(rubric.id, rate.rubric_id);
            assert!((0.0..=1.0).contains(&rate.applicability));
            assert!((0.0..=1.0).contains(&rate.pass_rate));
        }
    }

    #[test]
    fn default_sim_config_is_valid() {
        let config = default_sim_config();
        config.validate().unwrap();
        assert_eq!(config.environment.easy_rubric_count, 4);
        assert_eq!(config.environment.hard_rubric_count, 2);
        assert_eq!(config.grpo.group_size, 8);
    }

    #[test]
    fn synthesized_records_reproduce_the_rates() {
        let records = synthesize_bundled_records(1000);
        assert_eq!(records.len(), 1000);
        let stats = crate::stats::compute_stats(&records, "Cand_01").unwrap();
        assert_eq!(stats.applicable_count, 991);
        assert_eq!(stats.pass_count, 974);
    }
}
