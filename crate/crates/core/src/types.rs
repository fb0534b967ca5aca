//! Domain types shared by the trainers: examples, models, scan state and
//! filter configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Index reserved for the implicit bias feature.
pub const BIAS_INDEX: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    pub fn from_sign(v: i64) -> Result<Self> {
        match v {
            1 => Ok(Label::Pos),
            -1 => Ok(Label::Neg),
            other => Err(Error::InvalidExample(format!("label {other} is not +1 or -1"))),
        }
    }

    /// Label of a score, with `sign(0) = +1`.
    pub fn of_score<T: Scalar>(score: T) -> Self {
        if score < T::zero() {
            Label::Neg
        } else {
            Label::Pos
        }
    }

    #[inline]
    pub fn sign<T: Scalar>(self) -> T {
        match self {
            Label::Pos => T::one(),
            Label::Neg => -T::one(),
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Pos => 1,
            Label::Neg => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feature<T> {
    pub index: usize,
    pub value: T,
}

/// A sparse example with a ±1 label.
///
/// Feature indices are strictly increasing and every value is finite.
/// Examples built through [`LabeledExample::with_bias`] carry the bias
/// feature `(0, 1.0)` as their first stored feature.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample<T> {
    id: u64,
    label: Label,
    features: Vec<Feature<T>>,
}

impl<T: Scalar> LabeledExample<T> {
    /// Builds an example from already-ordered features, validating the
    /// ordering and finiteness invariants. No bias is inserted.
    pub fn new(id: u64, label: Label, features: Vec<Feature<T>>) -> Result<Self> {
        for (pos, f) in features.iter().enumerate() {
            if !f.value.is_finite() {
                return Err(Error::InvalidExample(format!(
                    "non-finite value at feature {}",
                    f.index
                )));
            }
            if pos > 0 && features[pos - 1].index >= f.index {
                return Err(Error::InvalidExample(format!(
                    "feature indices not strictly increasing ({} then {})",
                    features[pos - 1].index,
                    f.index
                )));
            }
        }
        Ok(LabeledExample { id, label, features })
    }

    /// Builds an example from non-bias features (indices ≥ 1) and prepends
    /// the bias feature with value 1.
    pub fn with_bias(id: u64, label: Label, features: Vec<Feature<T>>) -> Result<Self> {
        if let Some(f) = features.first() {
            if f.index == BIAS_INDEX {
                return Err(Error::InvalidExample("index 0 is reserved for the bias".into()));
            }
        }
        let mut all = Vec::with_capacity(features.len() + 1);
        all.push(Feature { index: BIAS_INDEX, value: T::one() });
        all.extend(features);
        Self::new(id, label, all)
    }

    /// Convenience constructor from `(index, value)` pairs.
    pub fn from_pairs(id: u64, label: Label, pairs: &[(usize, T)]) -> Result<Self> {
        Self::new(
            id,
            label,
            pairs.iter().map(|&(index, value)| Feature { index, value }).collect(),
        )
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn features(&self) -> &[Feature<T>] {
        &self.features
    }

    /// Number of stored features, bias included.
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.features.last().map(|f| f.index)
    }

    pub fn has_bias(&self) -> bool {
        self.features.first().is_some_and(|f| f.index == BIAS_INDEX)
    }

    pub fn with_label(&self, label: Label) -> Self {
        LabeledExample { id: self.id, label, features: self.features.clone() }
    }

    pub fn with_id(mut self, id: u64) -> Self {
        self.id = id;
        self
    }

    /// Scales the non-bias features to unit Euclidean norm. All-zero
    /// examples are left alone.
    pub fn l2_normalized(&self) -> Self {
        let norm = self
            .features
            .iter()
            .filter(|f| f.index != BIAS_INDEX)
            .map(|f| f.value * f.value)
            .sum::<T>()
            .sqrt();
        let mut out = self.clone();
        if norm > T::zero() {
            for f in out.features.iter_mut().filter(|f| f.index != BIAS_INDEX) {
                f.value /= norm;
            }
        }
        out
    }
}

/// Dense weight vector; the bias weight lives at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel<T> {
    weights: Vec<T>,
}

impl<T: Scalar> LinearModel<T> {
    pub fn zeros(dimension: usize) -> Self {
        assert!(dimension > 0, "model dimension must be positive");
        LinearModel { weights: vec![T::zero(); dimension] }
    }

    pub fn from_weights(weights: Vec<T>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::domain("model dimension must be positive"));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::domain("model weights must be finite"));
        }
        Ok(LinearModel { weights })
    }

    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    #[inline]
    pub(crate) fn weight_checked(&self, index: usize) -> Result<T> {
        self.weights.get(index).copied().ok_or(Error::DimensionMismatch {
            what: "feature index outside model",
            index,
            dimension: self.weights.len(),
        })
    }

    pub(crate) fn check_fits(&self, example: &LabeledExample<T>) -> Result<()> {
        match example.max_index() {
            Some(i) if i >= self.dimension() => Err(Error::DimensionMismatch {
                what: "feature index outside model",
                index: i,
                dimension: self.dimension(),
            }),
            _ => Ok(()),
        }
    }

    /// Unsigned score `w·x` in natural index order.
    pub fn score(&self, example: &LabeledExample<T>) -> Result<T> {
        self.check_fits(example)?;
        let mut s = T::zero();
        for f in example.features() {
            s += self.weights[f.index] * f.value;
        }
        Ok(s)
    }
}

/// One feature's contribution `y · w_j · x_j` to the margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginTerm<T> {
    pub value: T,
}

#[inline]
pub(crate) fn term_value<T: Scalar>(sign: T, weight: T, value: T) -> T {
    sign * (weight * value)
}

/// Margin term of the feature stored at `position`.
pub fn margin_term<T: Scalar>(
    model: &LinearModel<T>,
    example: &LabeledExample<T>,
    position: usize,
) -> Result<MarginTerm<T>> {
    let f = example.features().get(position).ok_or(Error::DimensionMismatch {
        what: "feature position outside example",
        index: position,
        dimension: example.len(),
    })?;
    let w = model.weight_checked(f.index)?;
    Ok(MarginTerm { value: term_value(example.label().sign(), w, f.value) })
}

/// Full margin `y · (w·x)`, accumulated term by term in natural index order.
pub fn full_margin<T: Scalar>(model: &LinearModel<T>, example: &LabeledExample<T>) -> Result<T> {
    model.check_fits(example)?;
    let sign = example.label().sign();
    let w = model.weights();
    let mut sum = T::zero();
    for f in example.features() {
        sum += term_value(sign, w[f.index], f.value);
    }
    Ok(sum)
}

/// Running prefix sum of margin terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialScanState<T> {
    pub partial_sum: T,
    pub steps_taken: usize,
    pub total_terms: usize,
}

impl<T: Scalar> PartialScanState<T> {
    pub fn new(total_terms: usize) -> Self {
        PartialScanState { partial_sum: T::zero(), steps_taken: 0, total_terms }
    }

    #[inline]
    pub fn push(&mut self, term: T) {
        debug_assert!(self.steps_taken < self.total_terms);
        self.partial_sum += term;
        self.steps_taken += 1;
    }

    pub fn is_complete(&self) -> bool {
        self.steps_taken == self.total_terms
    }
}

/// Result of scanning one example's margin terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScanOutcome<T> {
    /// Evaluation stopped after `step` terms because the partial sum
    /// crossed `tau`.
    Filtered { step: usize, partial_sum: T, tau: T },
    /// Every term was evaluated; `margin` is the exact full sum.
    Completed { margin: T, terms: usize },
}

impl<T: Scalar> ScanOutcome<T> {
    pub fn is_filtered(&self) -> bool {
        matches!(self, ScanOutcome::Filtered { .. })
    }

    /// Terms actually evaluated.
    pub fn evaluated(&self) -> usize {
        match *self {
            ScanOutcome::Filtered { step, .. } => step,
            ScanOutcome::Completed { terms, .. } => terms,
        }
    }
}

/// Order in which an example's margin terms are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalOrder {
    NaturalIndex,
    SeededShuffle,
    WeightMagnitudeDesc,
}

impl EvalOrder {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalOrder::NaturalIndex => "natural",
            EvalOrder::SeededShuffle => "shuffle",
            EvalOrder::WeightMagnitudeDesc => "wmag",
        }
    }
}

impl std::str::FromStr for EvalOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "natural" => Ok(EvalOrder::NaturalIndex),
            "shuffle" => Ok(EvalOrder::SeededShuffle),
            "wmag" => Ok(EvalOrder::WeightMagnitudeDesc),
            other => Err(Error::domain(format!("unknown order {other:?}"))),
        }
    }
}

/// Knobs of the attentive filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig<T> {
    /// Permitted decision-error rate, in (0, 1).
    pub delta: T,
    /// Importance threshold: the model updates when the margin is ≤ theta.
    pub theta: T,
    /// Check the stopping rule after every `stride`-th term.
    pub stride: usize,
    /// Fully evaluated examples required before filtering starts.
    pub warmup: u64,
    /// EMA decay of the margin moment estimator, in (0, 1).
    pub decay: T,
    /// Floor applied to the estimated margin standard deviation.
    pub min_std: T,
    pub order: EvalOrder,
    pub seed: u64,
    pub enabled: bool,
    /// Delta used at prediction time; `None` reuses `delta`.
    pub predict_delta: Option<T>,
}

impl<T: Scalar> Default for FilterConfig<T> {
    fn default() -> Self {
        FilterConfig {
            delta: T::lit(0.1),
            theta: T::zero(),
            stride: 1,
            warmup: 100,
            decay: T::lit(0.99),
            min_std: T::lit(1e-9),
            order: EvalOrder::SeededShuffle,
            seed: 0,
            enabled: true,
            predict_delta: None,
        }
    }
}

impl<T: Scalar> FilterConfig<T> {
    pub fn baseline() -> Self {
        FilterConfig { enabled: false, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: T| v > T::zero() && v < T::one();
        if !unit(self.delta) {
            return Err(Error::domain(format!("delta must lie in (0,1), got {}", self.delta)));
        }
        if let Some(d) = self.predict_delta {
            if !unit(d) {
                return Err(Error::domain(format!("predict delta must lie in (0,1), got {d}")));
            }
        }
        if !unit(self.decay) {
            return Err(Error::domain(format!("decay must lie in (0,1), got {}", self.decay)));
        }
        if !(self.min_std > T::zero() && self.min_std.is_finite()) {
            return Err(Error::domain("min_std must be positive"));
        }
        if !self.theta.is_finite() {
            return Err(Error::domain("theta must be finite"));
        }
        if self.stride == 0 {
            return Err(Error::domain("stride must be at least 1"));
        }
        Ok(())
    }

    pub fn prediction_delta(&self) -> T {
        self.predict_delta.unwrap_or(self.delta)
    }
}
