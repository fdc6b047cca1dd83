//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A record carries more than one verdict for the same rubric.
    #[error("duplicate verdict for rubric `{rubric_id}` in sample `{sample_id}`")]
    DuplicateVerdict { sample_id: String, rubric_id: String },

    /// A score field held something other than 0 or 1.
    #[error("score {value} for rubric `{rubric_id}` in sample `{sample_id}` is not binary (expected 0 or 1)")]
    NonBinaryScore {
        sample_id: String,
        rubric_id: String,
        value: i64,
    },

    /// A verdict claims applicability but carries no score; there is no
    /// sound repair for this direction.
    #[error("verdict for rubric `{rubric_id}` in sample `{sample_id}` is applicable but has no score")]
    MissingScore { sample_id: String, rubric_id: String },

    /// A rubric pool contains the same id twice.
    #[error("rubric id `{0}` appears more than once in the pool")]
    DuplicateRubricId(String),

    /// An operation that needs at least one record was given none.
    #[error("operation requires a nonempty record list")]
    EmptyRecords,

    /// Statistics reference a rubric that is missing from the pool.
    #[error("stats entry references rubric `{0}` which is not in the pool")]
    UnknownRubric(String),

    /// A pass rate outside the domain of the coefficient of variation.
    #[error("pass rate {0} is outside (0, 1]; coefficient of variation is undefined")]
    PassRateOutOfDomain(f64),

    /// Stratification was handed a stats entry without a pass rate.
    #[error("rubric `{0}` has no pass rate; filter before stratifying")]
    MissingPassRate(String),

    /// A batch mean fed to the scheduler was outside [0, 1].
    #[error("batch mean {0} is outside [0, 1]")]
    MeanOutOfRange(f64),

    /// Sigmoid ramp configured with a non-positive steepness.
    #[error("sigmoid steepness must be positive, got {0}")]
    NonPositiveSteepness(f64),

    /// A configuration value violates its documented range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A tier-mean request with an empty tier.
    #[error("tier id set is empty")]
    EmptyTier,

    /// Weighted combination called with mismatched or invalid inputs.
    #[error("invalid weighted combination: {0}")]
    InvalidCombination(String),

    /// Weights do not sum to one within tolerance.
    #[error("weights sum to {sum}, deviating from 1 by {deviation:e} (tolerance 1e-9)")]
    WeightSum { sum: f64, deviation: f64 },

    /// A record needed answer correctness but did not carry it.
    #[error("sample `{0}` has no answer_correct field; cannot compose a total reward")]
    MissingAnswer(String),

    /// Group statistics need at least two samples.
    #[error("group size must be at least 2, got {0}")]
    GroupTooSmall(usize),

    /// A rollout group does not match the configured group size.
    #[error("group has {actual} entries but the configuration expects {expected}")]
    GroupSizeMismatch { expected: usize, actual: usize },

    /// The reference policy assigns zero probability where the policy does not.
    #[error("KL divergence diverges: reference probability underflows to zero at action {0}")]
    DivergentKl(usize),

    /// Policy and reference logits differ in length, or the action set is empty.
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    /// Environment and policy disagree on the action count.
    #[error("environment has {env} actions but policy has {policy}")]
    ActionCountMismatch { env: usize, policy: usize },

    /// A probability parameter is outside [0, 1].
    #[error("probability {value} for `{name}` is outside [0, 1]")]
    ProbabilityOutOfRange { name: &'static str, value: f64 },

    /// Monte Carlo estimate degenerated to a zero mean.
    #[error("no successes in {0} samples; empirical CV undefined — raise the sample count")]
    ResampleNeeded(usize),

    /// Malformed JSON input.
    #[error("JSON parse error at byte {offset} (line {line}, column {column}): {message}")]
    Json {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },

    /// Structurally valid JSON that is missing a required field.
    #[error("schema error in record {record_index}, verdict {verdict_index}: missing field `{field}`")]
    Schema {
        record_index: usize,
        verdict_index: usize,
        field: &'static str,
    },

    /// A record-level required field is absent.
    #[error("schema error in record {record_index}: missing field `{field}`")]
    RecordSchema {
        record_index: usize,
        field: &'static str,
    },

    /// A checkpoint was written by an incompatible version of this crate.
    #[error("checkpoint version {found} is incompatible with this build (expected {expected})")]
    CheckpointVersion { expected: u32, found: u32 },

    /// Malformed simulator configuration.
    #[error("config error: {0}")]
    ConfigParse(String),

    /// Filesystem failure.
    #[error("io error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
