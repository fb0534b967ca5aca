//! Experiment harness: paired baseline/attentive runs with a decision-error
//! audit, the random-walk Monte Carlo check of the stopping rule, and
//! parameter sweeps.

use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::perceptron::{predict, train_epoch_with, TrainState};
use crate::scalar::Scalar;
use crate::sequential::{scan_terms, StoppingThreshold};
use crate::types::{full_margin, EvalOrder, FilterConfig, Label, LabeledExample, LinearModel, ScanOutcome};

/// SplitMix64 finalizer; used to derive independent sub-seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// True iff a filtered example's full margin, under the model that made
/// the decision, is at most `theta`.
pub fn decision_error<T: Scalar>(
    model_at_decision: &LinearModel<T>,
    example: &LabeledExample<T>,
    theta: T,
    outcome: &ScanOutcome<T>,
) -> Result<bool> {
    match outcome {
        ScanOutcome::Filtered { .. } => Ok(full_margin(model_at_decision, example)? <= theta),
        ScanOutcome::Completed { .. } => {
            Err(Error::contract("decision error is only defined for filtered outcomes"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub algorithm: String,
    pub delta: f64,
    pub predict_delta: f64,
    pub theta: f64,
    pub stride: usize,
    pub warmup: u64,
    pub decay: f64,
    pub min_std: f64,
    pub order: EvalOrder,
    pub order_seed: u64,
    pub filtering: bool,
    pub epochs: usize,
    pub seed: u64,
}

impl ConfigEcho {
    fn new<T: Scalar>(algorithm: &str, c: &FilterConfig<T>, epochs: usize, seed: u64) -> Self {
        ConfigEcho {
            algorithm: algorithm.to_string(),
            delta: c.delta.as_f64(),
            predict_delta: c.prediction_delta().as_f64(),
            theta: c.theta.as_f64(),
            stride: c.stride,
            warmup: c.warmup,
            decay: c.decay.as_f64(),
            min_std: c.min_std.as_f64(),
            order: c.order,
            order_seed: c.seed,
            filtering: c.enabled,
            epochs,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataEcho {
    pub train: String,
    pub test: String,
    pub n_train: usize,
    pub n_test: usize,
    pub dimension: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub updates: u64,
    pub filtered: u64,
    pub decision_errors: u64,
    pub features_evaluated: u64,
    pub features_available: u64,
    pub train_mistakes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinalStats {
    /// Accuracy of the trained model under full evaluation.
    pub test_accuracy: f64,
    /// Accuracy of [`predict`] with the run's filter settings.
    pub filtered_test_accuracy: f64,
    /// Features read by [`predict`] over the test set.
    pub test_features_evaluated: u64,
    pub test_features_available: u64,
    pub updates: u64,
    pub train_mistakes: u64,
    pub filtered: u64,
    pub decision_errors: u64,
    pub features_evaluated: u64,
    pub features_available: u64,
    pub mean_features_per_example: f64,
    /// Training examples seen while the filter was active.
    pub post_warmup_examples: u64,
    pub post_warmup_mean_features: f64,
    /// `features_available / features_evaluated`.
    pub speedup_ratio: f64,
    /// `decision_errors / filtered`, 0 when nothing was filtered.
    pub realized_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub config: ConfigEcho,
    pub data: DataEcho,
    pub epochs: Vec<EpochStats>,
    #[serde(rename = "final")]
    pub summary: FinalStats,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub baseline: RunReport,
    pub attentive: RunReport,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Trains one model for `epochs` passes and evaluates it on `test`.
///
/// Every filtered training example is audited against a full evaluation
/// under the model that filtered it; that audit is not counted in
/// `features_evaluated`. Epoch `e` visits the training set in the order
/// given by `derive_seed(seed, e)`.
pub fn run_training<T: Scalar>(
    algorithm: &str,
    train: &Dataset<T>,
    test: &Dataset<T>,
    config: &FilterConfig<T>,
    epochs: usize,
    seed: u64,
) -> Result<RunReport> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if epochs == 0 {
        return Err(Error::domain("at least one epoch is required"));
    }
    let start = Instant::now();
    let dimension = train.dimension.max(test.dimension);
    let mut state = TrainState::new(dimension, config)?;
    let mut epoch_stats = Vec::with_capacity(epochs);
    let mut post_warmup = (0u64, 0u64);
    let mut total_errors = 0u64;

    for epoch in 0..epochs {
        let mut errors = 0u64;
        let report = train_epoch_with(
            &mut state,
            &train.examples,
            config,
            Some(derive_seed(seed, epoch as u64)),
            |st, ex, rec| {
                if rec.filter_active() {
                    post_warmup.0 += 1;
                    post_warmup.1 += rec.outcome.evaluated() as u64;
                }
                if rec.outcome.is_filtered() && decision_error(&st.model, ex, config.theta, &rec.outcome)? {
                    errors += 1;
                }
                Ok(())
            },
        )?;
        total_errors += errors;
        epoch_stats.push(EpochStats {
            epoch,
            updates: report.updates,
            filtered: report.filtered,
            decision_errors: errors,
            features_evaluated: report.features_evaluated,
            features_available: report.features_available,
            train_mistakes: report.train_mistakes,
        });
    }

    let (mut correct, mut correct_filtered, mut test_used) = (0u64, 0u64, 0u64);
    for ex in &test.examples {
        correct += u64::from(Label::of_score(state.model.score(ex)?) == ex.label());
        let p = predict(&state.model, ex, config, &state.score_moments)?;
        correct_filtered += u64::from(p.label == ex.label());
        test_used += p.features_used as u64;
    }

    let summary = FinalStats {
        test_accuracy: ratio(correct, test.len() as u64),
        filtered_test_accuracy: ratio(correct_filtered, test.len() as u64),
        test_features_evaluated: test_used,
        test_features_available: test.total_features(),
        updates: state.updates,
        train_mistakes: state.train_mistakes,
        filtered: state.filtered,
        decision_errors: total_errors,
        features_evaluated: state.features_evaluated,
        features_available: state.features_available,
        mean_features_per_example: ratio(state.features_evaluated, state.examples_seen),
        post_warmup_examples: post_warmup.0,
        post_warmup_mean_features: ratio(post_warmup.1, post_warmup.0),
        speedup_ratio: ratio(state.features_available, state.features_evaluated),
        realized_delta: ratio(total_errors, state.filtered),
    };
    Ok(RunReport {
        config: ConfigEcho::new(algorithm, config, epochs, seed),
        data: DataEcho {
            train: train.name.clone(),
            test: test.name.clone(),
            n_train: train.len(),
            n_test: test.len(),
            dimension,
        },
        epochs: epoch_stats,
        summary,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Runs the baseline (filter off) and the attentive trainer from the same
/// initial state over the same example order.
pub fn run_benchmark<T: Scalar>(
    train: &Dataset<T>,
    test: &Dataset<T>,
    config: &FilterConfig<T>,
    epochs: usize,
    seed: u64,
) -> Result<BenchReport> {
    let baseline_cfg = FilterConfig { enabled: false, ..*config };
    Ok(BenchReport {
        baseline: run_training("baseline", train, test, &baseline_cfg, epochs, seed)?,
        attentive: run_training("attentive", train, test, config, epochs, seed)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionParams {
    pub steps: usize,
    pub walks: usize,
    pub delta: f64,
    pub theta: f64,
    pub seed: u64,
    pub filtering: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReflectionReport {
    pub steps: usize,
    pub walks: usize,
    pub delta: f64,
    pub theta: f64,
    pub mean: f64,
    pub std: f64,
    pub tau: f64,
    pub filtered: u64,
    pub decision_errors: u64,
    /// Fraction of walks that were stopped and still ended below theta.
    pub empirical_error: f64,
    pub mc_stderr: f64,
}

/// Monte Carlo check of the stopping rule on symmetric ±1 random walks,
/// using the walk's exact moments (mean 0, std √steps).
pub fn run_reflection_mc(params: &ReflectionParams) -> Result<ReflectionReport> {
    if params.steps < 2 {
        return Err(Error::domain("random walks need at least 2 steps"));
    }
    if params.walks < 1000 {
        return Err(Error::domain("at least 1000 walks are required"));
    }
    let std = (params.steps as f64).sqrt();
    let threshold = StoppingThreshold::new(params.theta, 0.0, std, params.delta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut steps = vec![0.0f64; params.steps];
    let (mut filtered, mut errors) = (0u64, 0u64);
    for _ in 0..params.walks {
        for s in steps.iter_mut() {
            *s = if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
        let outcome = scan_terms(steps.iter().copied(), steps.len(), threshold.tau, 1, params.filtering);
        if outcome.is_filtered() {
            filtered += 1;
            let final_sum: f64 = steps.iter().sum();
            if final_sum < params.theta {
                errors += 1;
            }
        }
    }
    let p = errors as f64 / params.walks as f64;
    Ok(ReflectionReport {
        steps: params.steps,
        walks: params.walks,
        delta: params.delta,
        theta: params.theta,
        mean: 0.0,
        std,
        tau: threshold.tau,
        filtered,
        decision_errors: errors,
        empirical_error: p,
        mc_stderr: (p * (1.0 - p) / params.walks as f64).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Delta,
    Stride,
    Order,
    Warmup,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Delta => "delta",
            SweepParam::Stride => "stride",
            SweepParam::Order => "order",
            SweepParam::Warmup => "warmup",
        }
    }

    /// Returns `base` with this parameter set to `value`.
    pub fn apply<T: Scalar>(self, base: &FilterConfig<T>, value: &str) -> Result<FilterConfig<T>> {
        let bad = || Error::domain(format!("invalid {} value {value:?}", self.as_str()));
        let mut cfg = *base;
        match self {
            SweepParam::Delta => cfg.delta = value.parse().map_err(|_| bad())?,
            SweepParam::Stride => cfg.stride = value.parse().map_err(|_| bad())?,
            SweepParam::Order => cfg.order = value.parse()?,
            SweepParam::Warmup => cfg.warmup = value.parse().map_err(|_| bad())?,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta" => Ok(SweepParam::Delta),
            "stride" => Ok(SweepParam::Stride),
            "order" => Ok(SweepParam::Order),
            "warmup" => Ok(SweepParam::Warmup),
            other => Err(Error::domain(format!("unknown sweep parameter {other:?}"))),
        }
    }
}

/// One sweep cell. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: String,
    pub updates: u64,
    pub filtered: u64,
    pub decision_errors: u64,
    pub features_evaluated: u64,
    pub features_available: u64,
    pub train_mistakes: u64,
    pub test_accuracy: f64,
    pub filtered_test_accuracy: f64,
    pub mean_features_per_example: f64,
    pub speedup_ratio: f64,
    pub realized_delta: f64,
    pub baseline_updates: u64,
    pub baseline_features_evaluated: u64,
    pub baseline_test_accuracy: f64,
}

impl SweepRow {
    pub const COLUMNS: [&'static str; 16] = [
        "param",
        "value",
        "updates",
        "filtered",
        "decision_errors",
        "features_evaluated",
        "features_available",
        "train_mistakes",
        "test_accuracy",
        "filtered_test_accuracy",
        "mean_features_per_example",
        "speedup_ratio",
        "realized_delta",
        "baseline_updates",
        "baseline_features_evaluated",
        "baseline_test_accuracy",
    ];
}

/// One [`run_benchmark`] per value, run in parallel. Every cell uses the
/// same `seed`, so cells differ only in the swept parameter.
pub fn sweep<T: Scalar>(
    param: SweepParam,
    values: &[String],
    base: &FilterConfig<T>,
    train: &Dataset<T>,
    test: &Dataset<T>,
    epochs: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::domain("sweep needs at least one value"));
    }
    let configs = values.iter().map(|v| param.apply(base, v)).collect::<Result<Vec<_>>>()?;
    configs
        .par_iter()
        .zip(values.par_iter())
        .map(|(cfg, value)| {
            let pair = run_benchmark(train, test, cfg, epochs, seed)?;
            let a = &pair.attentive.summary;
            let b = &pair.baseline.summary;
            Ok(SweepRow {
                param,
                value: value.clone(),
                updates: a.updates,
                filtered: a.filtered,
                decision_errors: a.decision_errors,
                features_evaluated: a.features_evaluated,
                features_available: a.features_available,
                train_mistakes: a.train_mistakes,
                test_accuracy: a.test_accuracy,
                filtered_test_accuracy: a.filtered_test_accuracy,
                mean_features_per_example: a.mean_features_per_example,
                speedup_ratio: a.speedup_ratio,
                realized_delta: a.realized_delta,
                baseline_updates: b.updates,
                baseline_features_evaluated: b.features_evaluated,
                baseline_test_accuracy: b.test_accuracy,
            })
        })
        .collect()
}
