//! The sequential stopping rule: a constant threshold on the partial margin
//! and the scan that applies it.
//!
//! With `S_i` the sum of the first `i` margin terms and `S_n` the full
//! margin, the scan stops at the first checkpoint where `S_i > tau`, with
//!
//! ```text
//! tau = (theta - E[S_n] + std(S_n) * quantile(1 - delta)) / 2
//! ```
//!
//! so that stopping while `S_n < theta` has probability about `delta`
//! under a Gaussian approximation of `S_n` and a reflection argument at the
//! first hitting time of `tau`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::inverse_normal_cdf;
use crate::types::{
    term_value, EvalOrder, LabeledExample, LinearModel, PartialScanState, ScanOutcome, BIAS_INDEX,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingThreshold<T> {
    pub tau: T,
    pub theta: T,
    pub delta: T,
    pub mean_used: T,
    pub std_used: T,
    /// Standard normal quantile at `1 - delta`.
    pub quantile: T,
}

impl<T: Scalar> StoppingThreshold<T> {
    pub fn new(theta: T, mean: T, std: T, delta: T) -> Result<Self> {
        if !(std > T::zero()) || !std.is_finite() {
            return Err(Error::domain(format!("std must be positive, got {std}")));
        }
        if !(delta > T::zero() && delta < T::one()) {
            return Err(Error::domain(format!("delta must lie in (0,1), got {delta}")));
        }
        if !theta.is_finite() || !mean.is_finite() {
            return Err(Error::domain("theta and mean must be finite"));
        }
        // quantile(1 - delta) == -quantile(delta), without rounding 1 - delta.
        let quantile = -inverse_normal_cdf(delta)?;
        let tau = Self::formula(theta, mean, std, quantile);
        Ok(StoppingThreshold { tau, theta, delta, mean_used: mean, std_used: std, quantile })
    }

    fn formula(theta: T, mean: T, std: T, quantile: T) -> T {
        T::lit(0.5) * (theta - mean + std * quantile)
    }

    /// Recomputes tau from the stored fields.
    pub fn recompute(&self) -> T {
        Self::formula(self.theta, self.mean_used, self.std_used, self.quantile)
    }
}

/// Scans a sequence of `total` terms, checking `partial > tau` after every
/// `stride`-th term except the last.
pub fn scan_terms<T, I>(terms: I, total: usize, tau: T, stride: usize, filtering: bool) -> ScanOutcome<T>
where
    T: Scalar,
    I: IntoIterator<Item = T>,
{
    let stride = stride.max(1);
    let mut state = PartialScanState::new(total);
    for term in terms.into_iter().take(total) {
        state.push(term);
        let step = state.steps_taken;
        if filtering && step < total && step % stride == 0 && state.partial_sum > tau {
            return ScanOutcome::Filtered { step, partial_sum: state.partial_sum, tau };
        }
    }
    ScanOutcome::Completed { margin: state.partial_sum, terms: state.steps_taken }
}

fn check_order(order: &[usize], n: usize) -> Result<()> {
    if order.len() != n {
        return Err(Error::contract(format!(
            "evaluation order has {} entries for an example with {n} features",
            order.len()
        )));
    }
    if let Some(&p) = order.iter().find(|&&p| p >= n) {
        return Err(Error::contract(format!("evaluation order position {p} out of range")));
    }
    Ok(())
}

/// Accumulates the example's margin terms in `order`, stopping early when
/// the partial margin crosses `threshold.tau`.
pub fn partial_margin_scan<T: Scalar>(
    model: &LinearModel<T>,
    example: &LabeledExample<T>,
    threshold: &StoppingThreshold<T>,
    order: &[usize],
    stride: usize,
    filtering: bool,
) -> Result<ScanOutcome<T>> {
    model.check_fits(example)?;
    check_order(order, example.len())?;
    let sign = example.label().sign();
    let w = model.weights();
    let feats = example.features();
    let terms = order.iter().map(|&p| {
        let f = feats[p];
        term_value(sign, w[f.index], f.value)
    });
    Ok(scan_terms(terms, feats.len(), threshold.tau, stride, filtering))
}

/// Outcome of a two-sided scan over the unsigned score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreScan<T> {
    pub score: T,
    pub steps: usize,
    pub stopped_early: bool,
}

/// Two-sided variant used at prediction time: stops when the partial score
/// leaves `[-tau, tau]`.
pub(crate) fn score_scan<T: Scalar>(
    model: &LinearModel<T>,
    example: &LabeledExample<T>,
    tau: T,
    order: &[usize],
    stride: usize,
    filtering: bool,
) -> Result<ScoreScan<T>> {
    model.check_fits(example)?;
    check_order(order, example.len())?;
    let stride = stride.max(1);
    let w = model.weights();
    let feats = example.features();
    let n = feats.len();
    let mut state = PartialScanState::new(n);
    for &p in order {
        let f = feats[p];
        state.push(w[f.index] * f.value);
        let step = state.steps_taken;
        if filtering && step < n && step % stride == 0 && (state.partial_sum > tau || state.partial_sum < -tau) {
            return Ok(ScoreScan { score: state.partial_sum, steps: step, stopped_early: true });
        }
    }
    Ok(ScoreScan { score: state.partial_sum, steps: n, stopped_early: false })
}

/// Permutation of the example's stored-feature positions to evaluate in.
pub fn evaluation_order<T: Scalar>(
    example: &LabeledExample<T>,
    model: &LinearModel<T>,
    policy: EvalOrder,
    seed: u64,
    example_id: u64,
) -> Vec<usize> {
    let n = example.len();
    let mut order: Vec<usize> = (0..n).collect();
    match policy {
        EvalOrder::NaturalIndex => {}
        EvalOrder::SeededShuffle => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(example_id);
            order.shuffle(&mut rng);
        }
        EvalOrder::WeightMagnitudeDesc => {
            let feats = example.features();
            let w = model.weights();
            let magnitude = |p: usize| w.get(feats[p].index).map_or(T::zero(), |x| x.abs());
            let start = usize::from(example.features().first().is_some_and(|f| f.index == BIAS_INDEX));
            order[start..].sort_by(|&a, &b| {
                magnitude(b)
                    .partial_cmp(&magnitude(a))
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(feats[a].index.cmp(&feats[b].index))
            });
        }
    }
    order
}
