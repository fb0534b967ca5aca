//! Baseline and attentive Perceptron trainers sharing one update rule.

use crate::data::shuffled_indices;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sequential::{evaluation_order, partial_margin_scan, score_scan, StoppingThreshold};
use crate::stats::MarginMoments;
use crate::types::{full_margin, FilterConfig, Label, LabeledExample, LinearModel, ScanOutcome};

/// `w ← w + y·x` over the example's stored features.
pub fn perceptron_update<T: Scalar>(model: &mut LinearModel<T>, example: &LabeledExample<T>) -> Result<()> {
    model.check_fits(example)?;
    let sign = example.label().sign::<T>();
    let w = model.weights_mut();
    for f in example.features() {
        w[f.index] += sign * f.value;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState<T> {
    pub model: LinearModel<T>,
    /// Moments of the signed margin `y·(w·x)` over fully evaluated examples.
    pub moments: MarginMoments<T>,
    /// Moments of the unsigned score `w·x`, used by filtered prediction.
    pub score_moments: MarginMoments<T>,
    pub examples_seen: u64,
    pub updates: u64,
    pub filtered: u64,
    pub features_evaluated: u64,
    pub features_available: u64,
    /// Fully evaluated examples whose margin was ≤ 0.
    pub train_mistakes: u64,
}

/// What happened to one training example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord<T> {
    pub outcome: ScanOutcome<T>,
    pub updated: bool,
    /// Threshold in force, `None` when the filter was inactive.
    pub threshold: Option<StoppingThreshold<T>>,
}

impl<T> StepRecord<T> {
    pub fn filter_active(&self) -> bool {
        self.threshold.is_some()
    }
}

impl<T: Scalar> TrainState<T> {
    pub fn new(dimension: usize, config: &FilterConfig<T>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::domain("model dimension must be positive"));
        }
        config.validate()?;
        let moments = MarginMoments::new(config.decay, config.warmup)?;
        Ok(TrainState {
            model: LinearModel::zeros(dimension),
            moments,
            score_moments: moments,
            examples_seen: 0,
            updates: 0,
            filtered: 0,
            features_evaluated: 0,
            features_available: 0,
            train_mistakes: 0,
        })
    }

    /// Shared tail of a fully evaluated example: update iff `margin ≤ theta`
    /// and feed both moment estimators.
    fn finish_completed(&mut self, example: &LabeledExample<T>, margin: T, theta: T) -> Result<bool> {
        let moments = self.moments.update(margin)?;
        let score_moments = self.score_moments.update(example.label().sign::<T>() * margin)?;
        let update = margin <= theta;
        if update {
            perceptron_update(&mut self.model, example)?;
            self.updates += 1;
        }
        if margin <= T::zero() {
            self.train_mistakes += 1;
        }
        self.moments = moments;
        self.score_moments = score_moments;
        Ok(update)
    }

    /// Classic Perceptron step: full evaluation, update when the margin is
    /// at most `theta`.
    pub fn baseline_train_step(&mut self, example: &LabeledExample<T>, theta: T) -> Result<StepRecord<T>> {
        let margin = full_margin(&self.model, example)?;
        let n = example.len();
        let updated = self.finish_completed(example, margin, theta)?;
        self.examples_seen += 1;
        self.features_evaluated += n as u64;
        self.features_available += n as u64;
        Ok(StepRecord { outcome: ScanOutcome::Completed { margin, terms: n }, updated, threshold: None })
    }

    /// Attentive step. Falls back to [`Self::baseline_train_step`] while
    /// the filter is disabled or warming up; otherwise scans the margin
    /// against the current stopping threshold and skips the example when
    /// the scan is filtered.
    pub fn attentive_train_step(
        &mut self,
        example: &LabeledExample<T>,
        config: &FilterConfig<T>,
    ) -> Result<StepRecord<T>> {
        if !config.enabled || self.moments.count() < config.warmup {
            return self.baseline_train_step(example, config.theta);
        }
        let (mean, std) = self.moments.mean_std(config.min_std);
        let threshold = StoppingThreshold::new(config.theta, mean, std, config.delta)?;
        let order = evaluation_order(example, &self.model, config.order, config.seed, example.id());
        let outcome = partial_margin_scan(&self.model, example, &threshold, &order, config.stride, true)?;
        let n = example.len() as u64;
        let updated = match outcome {
            ScanOutcome::Filtered { step, .. } => {
                self.filtered += 1;
                self.features_evaluated += step as u64;
                false
            }
            ScanOutcome::Completed { margin, .. } => {
                let updated = self.finish_completed(example, margin, config.theta)?;
                self.features_evaluated += n;
                updated
            }
        };
        self.examples_seen += 1;
        self.features_available += n;
        Ok(StepRecord { outcome, updated, threshold: Some(threshold) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Prediction {
    pub label: Label,
    pub features_used: usize,
}

/// Predicts a label, optionally stopping early.
///
/// The label is unknown here, so the scan runs over the unsigned score
/// with a two-sided rule: emit `+1` once the partial score exceeds
/// `tau`, `-1` once it drops below `-tau`, where `tau` comes from the score
/// moments with `theta = 0` and is floored at zero. Otherwise the sign of
/// the full score is returned, with `sign(0) = +1`.
pub fn predict<T: Scalar>(
    model: &LinearModel<T>,
    example: &LabeledExample<T>,
    config: &FilterConfig<T>,
    score_moments: &MarginMoments<T>,
) -> Result<Prediction> {
    let n = example.len();
    if !config.enabled || score_moments.count() < config.warmup.max(1) {
        let score = model.score(example)?;
        return Ok(Prediction { label: Label::of_score(score), features_used: n });
    }
    let (mean, std) = score_moments.mean_std(config.min_std);
    let threshold = StoppingThreshold::new(T::zero(), mean, std, config.prediction_delta())?;
    let tau = threshold.tau.max(T::zero());
    let order = evaluation_order(example, model, config.order, config.seed, example.id());
    let scan = score_scan(model, example, tau, &order, config.stride, true)?;
    Ok(Prediction { label: Label::of_score(scan.score), features_used: scan.steps })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EpochReport {
    pub examples: u64,
    pub updates: u64,
    pub filtered: u64,
    pub features_evaluated: u64,
    pub features_available: u64,
    pub train_mistakes: u64,
}

impl EpochReport {
    fn between<T>(before: &TrainState<T>, after: &TrainState<T>) -> Self {
        EpochReport {
            examples: after.examples_seen - before.examples_seen,
            updates: after.updates - before.updates,
            filtered: after.filtered - before.filtered,
            features_evaluated: after.features_evaluated - before.features_evaluated,
            features_available: after.features_available - before.features_available,
            train_mistakes: after.train_mistakes - before.train_mistakes,
        }
    }
}

/// One pass over `examples`, shuffled by `shuffle_seed` when given.
pub fn train_epoch<T: Scalar>(
    state: &mut TrainState<T>,
    examples: &[LabeledExample<T>],
    config: &FilterConfig<T>,
    shuffle_seed: Option<u64>,
) -> Result<EpochReport> {
    train_epoch_with(state, examples, config, shuffle_seed, |_, _, _| Ok(()))
}

/// Like [`train_epoch`], calling `observe` after every step with the
/// post-step state. Filtered steps leave the model untouched, so the
/// observed model is also the one that made the decision.
pub fn train_epoch_with<T, F>(
    state: &mut TrainState<T>,
    examples: &[LabeledExample<T>],
    config: &FilterConfig<T>,
    shuffle_seed: Option<u64>,
    mut observe: F,
) -> Result<EpochReport>
where
    T: Scalar,
    F: FnMut(&TrainState<T>, &LabeledExample<T>, &StepRecord<T>) -> Result<()>,
{
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    config.validate()?;
    let before = state.clone();
    let order: Vec<usize> = match shuffle_seed {
        Some(seed) => shuffled_indices(examples.len(), seed),
        None => (0..examples.len()).collect(),
    };
    for i in order {
        let example = &examples[i];
        let record = state.attentive_train_step(example, config)?;
        observe(state, example, &record)?;
    }
    Ok(EpochReport::between(&before, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::EvalOrder;

    fn ex(id: u64, label: Label, pairs: &[(usize, f64)]) -> LabeledExample<f64> {
        LabeledExample::from_pairs(id, label, pairs).unwrap()
    }

    fn state_with(weights: Vec<f64>) -> TrainState<f64> {
        let mut s = TrainState::new(weights.len(), &FilterConfig::default()).unwrap();
        s.model = LinearModel::from_weights(weights).unwrap();
        s
    }

    #[test]
    fn update_examples() {
        let mut m = LinearModel::from_weights(vec![0.0, 0.0]).unwrap();
        perceptron_update(&mut m, &ex(0, Label::Pos, &[(0, 1.0), (1, 1.0)])).unwrap();
        assert_eq!(m.weights(), &[1.0, 1.0]);
        perceptron_update(&mut m, &ex(0, Label::Neg, &[(0, 1.0), (1, 1.0)])).unwrap();
        assert_eq!(m.weights(), &[0.0, 0.0]);
        let mut m = LinearModel::from_weights(vec![2.0, 0.0, 0.0]).unwrap();
        perceptron_update(&mut m, &ex(0, Label::Pos, &[(0, 1.0), (2, 3.0)])).unwrap();
        assert_eq!(m.weights(), &[3.0, 0.0, 3.0]);
        let mut small = LinearModel::<f64>::zeros(1);
        assert!(perceptron_update(&mut small, &ex(0, Label::Pos, &[(3, 1.0)])).is_err());
    }

    #[test]
    fn baseline_updates_on_tie() {
        let mut s = state_with(vec![0.0, 0.0]);
        let e = ex(0, Label::Pos, &[(0, 1.0), (1, 1.0)]);
        let r = s.baseline_train_step(&e, 0.0).unwrap();
        assert!(r.updated);
        assert_eq!(s.model.weights(), &[1.0, 1.0]);
        assert_eq!((s.updates, s.features_evaluated, s.features_available), (1, 2, 2));

        let mut s = state_with(vec![5.0, 5.0]);
        let r = s.baseline_train_step(&e, 0.0).unwrap();
        assert!(!r.updated);
        assert_eq!(s.model.weights(), &[5.0, 5.0]);
        assert_eq!(s.features_evaluated, 2);
        assert_eq!(s.moments.count(), 1);
    }

    #[test]
    fn warmup_gate_forces_full_evaluation() {
        let cfg = FilterConfig { warmup: 100, delta: 0.4, order: EvalOrder::NaturalIndex, ..Default::default() };
        let mut s = TrainState::new(3, &cfg).unwrap();
        s.model = LinearModel::from_weights(vec![50.0, 1.0, 1.0]).unwrap();
        for id in 0..50 {
            s.attentive_train_step(&ex(id, Label::Pos, &[(0, 1.0), (1, 1.0), (2, 1.0)]), &cfg).unwrap();
        }
        assert_eq!(s.moments.count(), 50);
        let r = s.attentive_train_step(&ex(50, Label::Pos, &[(0, 1.0), (1, 1.0), (2, 1.0)]), &cfg).unwrap();
        assert!(!r.filter_active());
        assert!(!r.outcome.is_filtered());
        assert_eq!(s.filtered, 0);
    }

    #[test]
    fn filters_when_first_term_crosses_negative_tau() {
        let cfg = FilterConfig { warmup: 0, delta: 0.05, order: EvalOrder::NaturalIndex, ..Default::default() };
        let mut s = TrainState::new(3, &cfg).unwrap();
        s.moments = MarginMoments::from_parts(10.0, 4.0, 500, 0.99).unwrap();
        s.model = LinearModel::from_weights(vec![1.0, -4.0, -4.0]).unwrap();
        let e = ex(0, Label::Pos, &[(0, 1.0), (1, 1.0), (2, 1.0)]);
        let r = s.attentive_train_step(&e, &cfg).unwrap();
        let tau = r.threshold.unwrap().tau;
        assert!((tau - (-3.355_146_373_048_527)).abs() < 1e-9);
        assert_eq!(r.outcome, ScanOutcome::Filtered { step: 1, partial_sum: 1.0, tau });
        assert_eq!(s.model.weights(), &[1.0, -4.0, -4.0]);
        assert_eq!((s.filtered, s.features_evaluated, s.features_available), (1, 1, 3));
        assert_eq!(s.moments.count(), 500);
        assert_eq!(s.examples_seen, 1);
    }

    #[test]
    fn predict_without_filter() {
        let cfg = FilterConfig::<f64>::baseline();
        let m0 = MarginMoments::new(0.99, 0).unwrap();
        let e = ex(0, Label::Pos, &[(0, 1.0)]);
        let p = |w: f64| predict(&LinearModel::from_weights(vec![w]).unwrap(), &e, &cfg, &m0).unwrap();
        assert_eq!(p(3.0), Prediction { label: Label::Pos, features_used: 1 });
        assert_eq!(p(-3.0), Prediction { label: Label::Neg, features_used: 1 });
        assert_eq!(p(0.0).label, Label::Pos);
    }

    #[test]
    fn predict_two_sided_stop() {
        let cfg = FilterConfig { warmup: 0, delta: 0.3, order: EvalOrder::NaturalIndex, ..Default::default() };
        let sm = MarginMoments::from_parts(0.0, 1.0, 100, 0.99).unwrap();
        let e = ex(0, Label::Pos, &[(0, 1.0), (1, 1.0), (2, 1.0)]);
        let m = LinearModel::from_weights(vec![-5.0, 1.0, 1.0]).unwrap();
        assert_eq!(predict(&m, &e, &cfg, &sm).unwrap(), Prediction { label: Label::Neg, features_used: 1 });
        let m = LinearModel::from_weights(vec![5.0, -9.0, 1.0]).unwrap();
        assert_eq!(predict(&m, &e, &cfg, &sm).unwrap(), Prediction { label: Label::Pos, features_used: 1 });
        let m = LinearModel::from_weights(vec![0.1, -0.1, -0.1]).unwrap();
        assert_eq!(predict(&m, &e, &cfg, &sm).unwrap(), Prediction { label: Label::Neg, features_used: 3 });
    }

    #[test]
    fn epoch_basics() {
        let cfg = FilterConfig::<f64>::baseline();
        let mut s = TrainState::new(2, &cfg).unwrap();
        let data = vec![ex(0, Label::Pos, &[(0, 1.0), (1, 1.0)])];
        let r = train_epoch(&mut s, &data, &cfg, Some(3)).unwrap();
        assert_eq!(r.examples, 1);
        assert_eq!(s.examples_seen, 1);
        assert!(matches!(train_epoch(&mut s, &[], &cfg, None), Err(Error::EmptyDataset)));
    }
}
