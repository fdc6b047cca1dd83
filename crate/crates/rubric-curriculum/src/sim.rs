//! Synthetic rubric environment and experiment runner.
//!
//! The environment is a bandit over a handful of actions. Each action has a
//! per-rubric success probability for the easy tier, a conditional success
//! probability for the hard tier, and an answer-correctness probability.
//! Hard rubrics are hierarchical: they can only fire when every easy rubric
//! fired in the same episode. That dependency is what makes the hard reward
//! sparse and noisy until easy skills are mastered, which is exactly the
//! regime the curriculum scheduler is built for.
//!
//! Every stochastic operation is a pure function of its inputs and the
//! supplied RNG, so identical seeds reproduce identical runs bit for bit.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grpo::{self, GrpoConfig, StepDiagnostics, ToyPolicy};
use crate::scheduler::CurriculumState;
use crate::types::{CurriculumConfig, Phase, RampKind, RewardConfig};

/// Per-action generative parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionParams {
    /// Probability that each easy rubric is satisfied.
    pub easy_prob: f64,
    /// Probability that each hard rubric is satisfied, conditional on every
    /// easy rubric being satisfied in the same episode.
    pub hard_given_easy: f64,
    /// Probability that the final answer is correct.
    pub answer_prob: f64,
}

/// The synthetic environment: action parameters plus tier sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEnvironment {
    pub easy_rubric_count: usize,
    pub hard_rubric_count: usize,
    pub actions: Vec<ActionParams>,
}

impl SimEnvironment {
    pub fn validate(&self) -> Result<()> {
        if self.actions.is_empty() {
            return Err(Error::InvalidConfig("environment has no actions".into()));
        }
        if self.easy_rubric_count == 0 || self.hard_rubric_count == 0 {
            return Err(Error::InvalidConfig(
                "easy_rubric_count and hard_rubric_count must be >= 1".into(),
            ));
        }
        for params in &self.actions {
            for (name, value) in [
                ("easy_prob", params.easy_prob),
                ("hard_given_easy", params.hard_given_easy),
                ("answer_prob", params.answer_prob),
            ] {
                if !(0.0..=1.0).contains(&value) || value.is_nan() {
                    return Err(Error::ProbabilityOutOfRange { name, value });
                }
            }
        }
        Ok(())
    }

    pub fn action_count(&self) -> usize {
        self.actions.len()
    }

    /// Unconditional probability that one hard rubric fires under an
    /// action: `easy_prob^easy_count * hard_given_easy`. Never exceeds the
    /// easy probability — the hierarchy guarantees it.
    pub fn unconditional_hard_prob(&self, action: usize) -> f64 {
        let p = &self.actions[action];
        p.easy_prob.powi(self.easy_rubric_count as i32) * p.hard_given_easy
    }
}

/// One sampled episode: the chosen action and its binary outcomes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub action: usize,
    pub easy_outcomes: Vec<u8>,
    pub hard_outcomes: Vec<u8>,
    pub answer: u8,
}

impl Episode {
    pub fn easy_mean(&self) -> f64 {
        mean_of_bits(&self.easy_outcomes)
    }

    pub fn hard_mean(&self) -> f64 {
        mean_of_bits(&self.hard_outcomes)
    }

    /// Unweighted mean over every rubric outcome, easy and hard together.
    pub fn uniform_mean(&self) -> f64 {
        let total = self.easy_outcomes.len() + self.hard_outcomes.len();
        let sum: u32 = self
            .easy_outcomes
            .iter()
            .chain(&self.hard_outcomes)
            .map(|b| u32::from(*b))
            .sum();
        f64::from(sum) / total as f64
    }
}

fn mean_of_bits(bits: &[u8]) -> f64 {
    let sum: u32 = bits.iter().map(|b| u32::from(*b)).sum();
    f64::from(sum) / bits.len() as f64
}

/// Samples one episode: action from the policy's softmax, easy outcomes as
/// independent Bernoulli draws, hard outcomes gated on a clean easy sweep,
/// answer as an independent Bernoulli draw.
pub fn sample_episode(
    env: &SimEnvironment,
    policy: &ToyPolicy,
    rng: &mut impl Rng,
) -> Result<Episode> {
    if env.action_count() != policy.action_count() {
        return Err(Error::ActionCountMismatch {
            env: env.action_count(),
            policy: policy.action_count(),
        });
    }
    let action = policy.sample(rng);
    let params = &env.actions[action];
    let easy_outcomes: Vec<u8> = (0..env.easy_rubric_count)
        .map(|_| u8::from(rng.gen::<f64>() < params.easy_prob))
        .collect();
    let all_easy = easy_outcomes.iter().all(|b| *b == 1);
    let hard_outcomes: Vec<u8> = (0..env.hard_rubric_count)
        .map(|_| {
            if all_easy {
                u8::from(rng.gen::<f64>() < params.hard_given_easy)
            } else {
                0
            }
        })
        .collect();
    let answer = u8::from(rng.gen::<f64>() < params.answer_prob);
    Ok(Episode {
        action,
        easy_outcomes,
        hard_outcomes,
        answer,
    })
}

/// Empirical decomposition of the mixed gradient estimator's variance.
///
/// All quantities are trace-of-covariance measurements from one shared
/// sample set, so `composed` and `direct` agree up to floating-point
/// rounding — the decomposition is an algebraic identity, and measuring
/// both sides is the check that the estimator plumbing is faithful.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    /// Trace variance of the easy-tier score-function gradient.
    pub v_easy: f64,
    /// Trace variance of the hard-tier score-function gradient.
    pub v_hard: f64,
    /// Trace cross-covariance between the two gradient components.
    pub cross_trace: f64,
    /// `(1-l)^2 v_easy + l^2 v_hard + 2 l (1-l) cross_trace`.
    pub composed: f64,
    /// Trace variance of the mixed gradient measured directly.
    pub direct: f64,
    pub sample_count: usize,
}

/// Draws episodes and measures the variance decomposition of the
/// score-function gradient at the given mixing weight. The estimator is the
/// plain score-function form without baselines or advantage normalization,
/// which keeps the measurement aligned with the quantity the decomposition
/// is stated for.
pub fn estimate_gradient_variance(
    env: &SimEnvironment,
    policy: &ToyPolicy,
    lambda: f64,
    sample_count: usize,
    rng: &mut impl Rng,
) -> Result<VarianceReport> {
    if sample_count < 2 {
        return Err(Error::GroupTooSmall(sample_count));
    }
    env.validate()?;
    let n = policy.action_count();
    let probs = policy.probabilities();

    let mut g_easy: Vec<Vec<f64>> = Vec::with_capacity(sample_count);
    let mut g_hard: Vec<Vec<f64>> = Vec::with_capacity(sample_count);
    for _ in 0..sample_count {
        let episode = sample_episode(env, policy, rng)?;
        // Score function for a softmax policy: indicator(action) - probs.
        let mut easy = Vec::with_capacity(n);
        let mut hard = Vec::with_capacity(n);
        let (re, rh) = (episode.easy_mean(), episode.hard_mean());
        for k in 0..n {
            let score = (if k == episode.action { 1.0 } else { 0.0 }) - probs[k];
            easy.push(score * re);
            hard.push(score * rh);
        }
        g_easy.push(easy);
        g_hard.push(hard);
    }

    let mean_easy = mean_vectors(&g_easy);
    let mean_hard = mean_vectors(&g_hard);
    let count = sample_count as f64;

    let mut v_easy = 0.0;
    let mut v_hard = 0.0;
    let mut cross = 0.0;
    let mut direct = 0.0;
    for i in 0..sample_count {
        for k in 0..n {
            let de = g_easy[i][k] - mean_easy[k];
            let dh = g_hard[i][k] - mean_hard[k];
            v_easy += de * de;
            v_hard += dh * dh;
            cross += de * dh;
            let dm = (1.0 - lambda) * de + lambda * dh;
            direct += dm * dm;
        }
    }
    v_easy /= count;
    v_hard /= count;
    cross /= count;
    direct /= count;

    let composed = (1.0 - lambda).powi(2) * v_easy
        + lambda.powi(2) * v_hard
        + 2.0 * lambda * (1.0 - lambda) * cross;
    Ok(VarianceReport {
        v_easy,
        v_hard,
        cross_trace: cross,
        composed,
        direct,
        sample_count,
    })
}

fn mean_vectors(vectors: &[Vec<f64>]) -> Vec<f64> {
    let n = vectors[0].len();
    let mut mean = vec![0.0; n];
    for v in vectors {
        for k in 0..n {
            mean[k] += v[k];
        }
    }
    for m in mean.iter_mut() {
        *m /= vectors.len() as f64;
    }
    mean
}

/// Draws Bernoulli rewards and returns `(empirical CV, analytic CV)` where
/// the analytic value is `sqrt(1/p - 1)`. Errors when no draw succeeds,
/// since the empirical CV is then undefined.
pub fn empirical_cv_check(
    pass_prob: f64,
    sample_count: usize,
    rng: &mut impl Rng,
) -> Result<(f64, f64)> {
    if !(pass_prob > 0.0 && pass_prob < 1.0) {
        return Err(Error::ProbabilityOutOfRange {
            name: "pass_prob",
            value: pass_prob,
        });
    }
    if sample_count < 2 {
        return Err(Error::GroupTooSmall(sample_count));
    }
    let mut successes = 0usize;
    for _ in 0..sample_count {
        if rng.gen::<f64>() < pass_prob {
            successes += 1;
        }
    }
    if successes == 0 {
        return Err(Error::ResampleNeeded(sample_count));
    }
    let mean = successes as f64 / sample_count as f64;
    // Bernoulli population variance from the sufficient statistic.
    let std = (mean * (1.0 - mean)).sqrt();
    let analytic = (1.0 / pass_prob - 1.0).sqrt();
    Ok((std / mean, analytic))
}

/// How episode rewards are aggregated during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    /// Answer reward only; rubrics ignored.
    Vanilla,
    /// Unweighted mean over every retained rubric, no stratification.
    Uniform,
    /// Two-tier reward with the linear ramp schedule.
    LinearCurriculum,
    /// Two-tier reward with the sigmoid ramp schedule.
    SigmoidCurriculum,
    /// Two-tier reward pinned at `lambda_max` from step 0 — the no-warmup
    /// control the curriculum is compared against.
    FixedLambdaMax,
}

impl ScheduleMode {
    pub fn all() -> [ScheduleMode; 5] {
        [
            ScheduleMode::Vanilla,
            ScheduleMode::Uniform,
            ScheduleMode::LinearCurriculum,
            ScheduleMode::SigmoidCurriculum,
            ScheduleMode::FixedLambdaMax,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScheduleMode::Vanilla => "vanilla",
            ScheduleMode::Uniform => "uniform",
            ScheduleMode::LinearCurriculum => "linear_curriculum",
            ScheduleMode::SigmoidCurriculum => "sigmoid_curriculum",
            ScheduleMode::FixedLambdaMax => "fixed_lambda_max",
        }
    }
}

impl std::str::FromStr for ScheduleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vanilla" => Ok(ScheduleMode::Vanilla),
            "uniform" => Ok(ScheduleMode::Uniform),
            "linear_curriculum" => Ok(ScheduleMode::LinearCurriculum),
            "sigmoid_curriculum" => Ok(ScheduleMode::SigmoidCurriculum),
            "fixed_lambda_max" => Ok(ScheduleMode::FixedLambdaMax),
            other => Err(Error::InvalidConfig(format!(
                "unknown mode `{other}`; expected one of vanilla, uniform, \
                 linear_curriculum, sigmoid_curriculum, fixed_lambda_max"
            ))),
        }
    }
}

/// Bundle of all configuration needed by a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub environment: SimEnvironment,
    pub curriculum: CurriculumConfig,
    pub reward: RewardConfig,
    pub grpo: GrpoConfig,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.environment.validate()?;
        self.curriculum.validate()?;
        self.reward.validate()?;
        self.grpo.validate()
    }
}

/// One row of the learning curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub mu_easy: f64,
    pub mu_hard: f64,
    pub answer_rate: f64,
    pub lambda: f64,
    pub objective: f64,
}

/// Output of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRun {
    pub curves: Vec<CurvePoint>,
    /// Step at which the curriculum triggered, when it did.
    pub t_start: Option<usize>,
    pub final_policy: ToyPolicy,
}

/// Runs the full loop: sample a group of episodes, aggregate rewards per
/// the mode, feed the batch easy mean to the scheduler (curriculum modes
/// only), and apply one group-relative update per step.
pub fn run_training(
    env: &SimEnvironment,
    config: &SimConfig,
    mode: ScheduleMode,
    steps: usize,
    rng: &mut impl Rng,
) -> Result<TrainingRun> {
    if steps == 0 {
        return Err(Error::InvalidConfig("steps must be >= 1".into()));
    }
    env.validate()?;
    config.validate()?;

    let curriculum = match mode {
        ScheduleMode::LinearCurriculum => CurriculumConfig {
            ramp_kind: RampKind::Linear,
            ..config.curriculum.clone()
        },
        ScheduleMode::SigmoidCurriculum => CurriculumConfig {
            ramp_kind: RampKind::Sigmoid,
            ..config.curriculum.clone()
        },
        _ => config.curriculum.clone(),
    };

    let mut policy = ToyPolicy::uniform(env.action_count())?;
    let mut state = CurriculumState::new();
    let mut curves = Vec::with_capacity(steps);
    let group_size = config.grpo.group_size;
    let alpha = config.reward.alpha;

    for step in 0..steps {
        let lambda = match mode {
            ScheduleMode::Vanilla | ScheduleMode::Uniform => 0.0,
            ScheduleMode::FixedLambdaMax => curriculum.lambda_max,
            ScheduleMode::LinearCurriculum | ScheduleMode::SigmoidCurriculum => {
                state.current_lambda
            }
        };

        let mut group = Vec::with_capacity(group_size);
        let mut mu_easy = 0.0;
        let mut mu_hard = 0.0;
        let mut answer_rate = 0.0;
        for _ in 0..group_size {
            let episode = sample_episode(env, &policy, rng)?;
            let reward = match mode {
                ScheduleMode::Vanilla => f64::from(episode.answer),
                ScheduleMode::Uniform => {
                    alpha * f64::from(episode.answer) + (1.0 - alpha) * episode.uniform_mean()
                }
                _ => {
                    let rubric =
                        (1.0 - lambda) * episode.easy_mean() + lambda * episode.hard_mean();
                    alpha * f64::from(episode.answer) + (1.0 - alpha) * rubric
                }
            };
            mu_easy += episode.easy_mean();
            mu_hard += episode.hard_mean();
            answer_rate += f64::from(episode.answer);
            group.push((episode.action, reward));
        }
        mu_easy /= group_size as f64;
        mu_hard /= group_size as f64;
        answer_rate /= group_size as f64;

        if matches!(
            mode,
            ScheduleMode::LinearCurriculum | ScheduleMode::SigmoidCurriculum
        ) {
            state.observe(&curriculum, mu_easy)?;
        }

        let (updated, diagnostics): (ToyPolicy, StepDiagnostics) =
            grpo::grpo_step(&policy, &group, &config.grpo)?;
        policy = updated;

        curves.push(CurvePoint {
            step,
            mu_easy,
            mu_hard,
            answer_rate,
            lambda,
            objective: diagnostics.objective,
        });
    }

    Ok(TrainingRun {
        curves,
        t_start: state.t_start,
        final_policy: policy,
    })
}

/// Per-mode ablation aggregates across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub mode: ScheduleMode,
    pub per_seed_final_mu_hard: Vec<f64>,
    pub per_seed_final_answer_rate: Vec<f64>,
    pub trigger_steps: Vec<Option<usize>>,
    pub mean_final_mu_hard: f64,
    pub mean_final_answer_rate: f64,
}

/// Mean of the last tenth of a curve (at least one point): a smoothed
/// "final" value that is robust to single-batch noise.
pub fn tail_mean(curves: &[CurvePoint], metric: impl Fn(&CurvePoint) -> f64) -> f64 {
    let tail = (curves.len() / 10).max(1);
    let slice = &curves[curves.len() - tail..];
    slice.iter().map(&metric).sum::<f64>() / slice.len() as f64
}

/// Runs every mode on every seed and tabulates final hard-tier pass rates,
/// final answer rates, and trigger steps. Fully deterministic for a fixed
/// seed list.
pub fn compare_schedules(
    env: &SimEnvironment,
    config: &SimConfig,
    seeds: &[u64],
    steps: usize,
) -> Result<Vec<AblationRow>> {
    if seeds.len() < 2 {
        return Err(Error::InvalidConfig(
            "compare_schedules needs at least 2 seeds".into(),
        ));
    }
    let mut rows = Vec::new();
    for mode in ScheduleMode::all() {
        let mut mu_hards = Vec::with_capacity(seeds.len());
        let mut answers = Vec::with_capacity(seeds.len());
        let mut triggers = Vec::with_capacity(seeds.len());
        for seed in seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let run = run_training(env, config, mode, steps, &mut rng)?;
            mu_hards.push(tail_mean(&run.curves, |c| c.mu_hard));
            answers.push(tail_mean(&run.curves, |c| c.answer_rate));
            triggers.push(run.t_start);
        }
        let mean_mu = mu_hards.iter().sum::<f64>() / mu_hards.len() as f64;
        let mean_answer = answers.iter().sum::<f64>() / answers.len() as f64;
        rows.push(AblationRow {
            mode,
            per_seed_final_mu_hard: mu_hards,
            per_seed_final_answer_rate: answers,
            trigger_steps: triggers,
            mean_final_mu_hard: mean_mu,
            mean_final_answer_rate: mean_answer,
        });
    }
    Ok(rows)
}
