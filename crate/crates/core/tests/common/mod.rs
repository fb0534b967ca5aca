#![allow(dead_code)]

pub mod oracle;

use attentive::{evaluation_order, Dataset, Feature, FilterConfig, Label, LabeledExample, ScanOutcome, TrainState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sparse dataset with a noisy linear teacher: `n` examples over `d`
/// features, each feature present with probability `density`.
pub fn random_sparse_dataset(seed: u64, n: usize, d: usize, density: f64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let teacher: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let examples = (0..n as u64)
        .map(|id| {
            let mut feats: Vec<Feature<f64>> = Vec::new();
            for index in 1..=d {
                if rng.random_bool(density) {
                    feats.push(Feature { index, value: rng.random_range(-2.0..2.0) });
                }
            }
            let s: f64 = feats.iter().map(|f| teacher[f.index - 1] * f.value).sum();
            let mut label = Label::of_score(s);
            if rng.random_bool(0.05) {
                label = label.flipped();
            }
            LabeledExample::with_bias(id, label, feats).unwrap()
        })
        .collect();
    let mut ds = Dataset::new("random", examples);
    ds.dimension = d + 1;
    ds
}

/// Replays one attentive step with an instrumented brute-force scan and
/// returns the number of features it should have read. `before` is the
/// state prior to the step.
pub fn instrumented_evaluated(before: &TrainState, example: &LabeledExample, cfg: &FilterConfig) -> usize {
    let n = example.len();
    if !cfg.enabled || before.moments.count() < cfg.warmup {
        return n;
    }
    let (mean, std) = before.moments.mean_std(cfg.min_std);
    let tau = oracle::tau_oracle(cfg.theta, mean, std, cfg.delta);
    let order = evaluation_order(example, &before.model, cfg.order, cfg.seed, example.id());
    let w = before.model.weights();
    let y: f64 = example.label().sign();
    let terms: Vec<f64> = order
        .iter()
        .map(|&p| {
            let f = example.features()[p];
            y * (w[f.index] * f.value)
        })
        .collect();
    oracle::brute_force_evaluated(&terms, tau, cfg.stride)
}

pub fn filtered_step(outcome: &ScanOutcome<f64>) -> Option<usize> {
    match *outcome {
        ScanOutcome::Filtered { step, .. } => Some(step),
        ScanOutcome::Completed { .. } => None,
    }
}
