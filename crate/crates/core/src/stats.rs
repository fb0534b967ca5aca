//! Standard normal quantile function and a streaming estimator of the
//! full-margin mean and standard deviation.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Standard normal CDF, `Φ(z) = erfc(-z/√2) / 2`.
pub fn normal_cdf<T: Scalar>(z: T) -> T {
    T::lit(0.5) * (-z * T::FRAC_1_SQRT_2()).erfc()
}

/// Standard normal density.
pub fn normal_pdf<T: Scalar>(z: T) -> T {
    let inv_sqrt_2pi = T::FRAC_1_SQRT_2() * T::FRAC_2_SQRT_PI() * T::lit(0.5);
    inv_sqrt_2pi * (-T::lit(0.5) * z * z).exp()
}

// Acklam's rational approximation (relative error ~1.2e-9).
const A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549671010229902e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];
const P_LOW: f64 = 0.02425;

fn horner<T: Scalar>(x: T, coeffs: &[f64]) -> T {
    coeffs.iter().fold(T::zero(), |acc, &c| acc * x + T::lit(c))
}

/// Initial guess for `p ≤ 0.5`.
fn acklam_lower<T: Scalar>(p: T) -> T {
    if p < T::lit(P_LOW) {
        let q = (-T::lit(2.0) * p.ln()).sqrt();
        horner(q, &C) / (horner(q, &D) * q + T::one())
    } else {
        let q = p - T::lit(0.5);
        let r = q * q;
        horner(r, &A) * q / (horner(r, &B) * r + T::one())
    }
}

/// Inverse of the standard normal CDF.
///
/// A rational initial guess is polished with two Newton steps against the
/// erfc-based CDF. The upper half is evaluated through `1 - p`, which is
/// exact for `p ≥ 0.5`, so the result is antisymmetric about 0.5.
pub fn inverse_normal_cdf<T: Scalar>(p: T) -> Result<T> {
    if p.is_nan() || p <= T::zero() || p >= T::one() {
        return Err(Error::domain(format!("quantile argument must lie in (0,1), got {p}")));
    }
    let half = T::lit(0.5);
    if p == half {
        return Ok(T::zero());
    }
    let (tail, upper) = if p > half { (T::one() - p, true) } else { (p, false) };

    let mut x = acklam_lower(tail);
    for _ in 0..2 {
        let density = normal_pdf(x);
        if density <= T::zero() {
            break;
        }
        x -= (normal_cdf(x) - tail) / density;
    }
    Ok(if upper { -x } else { x })
}

/// Streaming estimate of the mean and spread of fully evaluated margins.
///
/// The first `warmup` observations use Welford's exact recurrence (sample
/// variance); afterwards the estimate becomes an exponential moving
/// average so it can follow a drifting margin distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginMoments<T> {
    mean: T,
    second_moment: T,
    sum_sq_dev: T,
    count: u64,
    decay: T,
    warmup: u64,
}

impl<T: Scalar> MarginMoments<T> {
    pub fn new(decay: T, warmup: u64) -> Result<Self> {
        if !(decay > T::zero() && decay < T::one()) {
            return Err(Error::domain(format!("decay must lie in (0,1), got {decay}")));
        }
        Ok(MarginMoments {
            mean: T::zero(),
            second_moment: T::zero(),
            sum_sq_dev: T::zero(),
            count: 0,
            decay,
            warmup,
        })
    }

    /// Rebuilds an estimator from raw fields; it is treated as past warmup.
    pub fn from_parts(mean: T, second_moment: T, count: u64, decay: T) -> Result<Self> {
        if !(second_moment >= T::zero()) || !mean.is_finite() || !second_moment.is_finite() {
            return Err(Error::domain("moments must be finite with nonnegative second moment"));
        }
        let mut m = Self::new(decay, 0)?;
        m.mean = mean;
        m.second_moment = second_moment;
        m.count = count;
        Ok(m)
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    pub fn second_moment(&self) -> T {
        self.second_moment
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn decay(&self) -> T {
        self.decay
    }

    pub fn warmup(&self) -> u64 {
        self.warmup
    }

    /// Whether the next update still uses the exact (Welford) recurrence.
    /// The very first observation always does, so the EMA never starts from
    /// an arbitrary zero mean.
    pub fn in_warmup(&self) -> bool {
        self.count < self.warmup.max(1)
    }

    pub fn update(self, observed: T) -> Result<Self> {
        if !observed.is_finite() {
            return Err(Error::domain(format!("observed margin must be finite, got {observed}")));
        }
        let mut next = self;
        if self.in_warmup() {
            next.count += 1;
            let n = T::from_u64(next.count).unwrap_or_else(T::max_value);
            let delta = observed - self.mean;
            next.mean = self.mean + delta / n;
            next.sum_sq_dev = self.sum_sq_dev + delta * (observed - next.mean);
            if next.sum_sq_dev < T::zero() {
                next.sum_sq_dev = T::zero();
            }
            next.second_moment = if next.count > 1 {
                next.sum_sq_dev / (n - T::one())
            } else {
                T::zero()
            };
        } else {
            let keep = self.decay;
            let blend = T::one() - keep;
            next.mean = keep * self.mean + blend * observed;
            let dev = observed - next.mean;
            next.second_moment = keep * self.second_moment + blend * dev * dev;
            next.count += 1;
        }
        if !next.mean.is_finite() || !next.second_moment.is_finite() {
            return Err(Error::domain("moment estimate overflowed"));
        }
        Ok(next)
    }

    /// `(mean, max(sqrt(second_moment), min_std))`.
    pub fn mean_std(&self, min_std: T) -> (T, T) {
        (self.mean, self.second_moment.sqrt().max(min_std))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn quantile_frozen_values() {
        assert_eq!(inverse_normal_cdf(0.5f64).unwrap(), 0.0);
        // Reference values from a bisection on a series-evaluated CDF.
        assert!((inverse_normal_cdf(0.975f64).unwrap() - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((inverse_normal_cdf(0.95f64).unwrap() - 1.644_853_626_951_472_7).abs() < 1e-12);
        assert!((inverse_normal_cdf(1.0 - 1e-12f64).unwrap() - 7.034_483_825_301_132).abs() < 1e-3);
    }

    #[test]
    fn quantile_domain() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(inverse_normal_cdf(p), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn quantile_extreme_tails_finite() {
        let z = inverse_normal_cdf(1e-300f64).unwrap();
        assert!(z.is_finite() && z < -37.0);
        assert!(inverse_normal_cdf(f64::MIN_POSITIVE).unwrap().is_finite());
    }

    #[test]
    fn quantile_single_precision() {
        let z = inverse_normal_cdf(0.975f32).unwrap();
        assert!((z - 1.959_964).abs() < 1e-5);
    }

    #[test]
    fn quantile_is_strictly_increasing() {
        let mut prev = f64::NEG_INFINITY;
        for k in 1..1000 {
            let z = inverse_normal_cdf(k as f64 / 1000.0).unwrap();
            assert!(z > prev, "not increasing at {k}");
            prev = z;
        }
    }

    #[test]
    fn quantile_antisymmetric() {
        for k in 1..500 {
            let p = k as f64 / 1000.0;
            let a = inverse_normal_cdf(p).unwrap();
            let b = inverse_normal_cdf(1.0 - p).unwrap();
            assert!((a + b).abs() <= 1e-12, "p={p}: {a} vs {b}");
        }
    }

    fn feed(m: MarginMoments<f64>, xs: &[f64]) -> MarginMoments<f64> {
        xs.iter().fold(m, |m, &x| m.update(x).unwrap())
    }

    #[test]
    fn welford_warmup_hand_values() {
        let m = feed(MarginMoments::new(0.99, 10).unwrap(), &[1.0, 2.0, 3.0]);
        assert_eq!(m.mean(), 2.0);
        assert_eq!(m.second_moment(), 1.0);
        assert_eq!(m.count(), 3);
        assert_eq!(m.mean_std(1e-9), (2.0, 1.0));
    }

    #[test]
    fn constant_stream_has_zero_variance() {
        let mut m = MarginMoments::new(0.9, 5).unwrap();
        for _ in 0..50 {
            m = m.update(5.0).unwrap();
            assert_eq!(m.mean(), 5.0);
            assert_eq!(m.second_moment(), 0.0);
        }
    }

    #[test]
    fn fresh_and_clamped() {
        let m = MarginMoments::<f64>::new(0.99, 0).unwrap();
        assert_eq!(m.mean_std(1e-9), (0.0, 1e-9));
        let m = MarginMoments::from_parts(0.0, 1e-30, 10, 0.99).unwrap();
        assert_eq!(m.mean_std(1e-9).1, 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        let m = MarginMoments::<f64>::new(0.99, 0).unwrap();
        assert!(m.update(f64::NAN).is_err());
        assert!(m.update(f64::INFINITY).is_err());
        assert!(MarginMoments::<f64>::new(1.0, 0).is_err());
        assert!(MarginMoments::<f64>::new(0.0, 0).is_err());
    }

    #[test]
    fn zero_warmup_seeds_from_first_observation() {
        let m = feed(MarginMoments::new(0.5, 0).unwrap(), &[4.0]);
        assert_eq!(m.mean(), 4.0);
        let m = m.update(6.0).unwrap();
        assert_eq!(m.mean(), 5.0);
        assert_eq!(m.second_moment(), 0.5);
    }

    #[test]
    fn ema_tracks_gaussian_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let normal = Normal::new(3.0f64, 2.0).unwrap();
        let mut m = MarginMoments::<f64>::new(0.999, 100).unwrap();
        for _ in 0..100_000 {
            m = m.update(normal.sample(&mut rng)).unwrap();
        }
        let (mean, std) = m.mean_std(1e-9);
        assert!((mean - 3.0).abs() < 0.1, "mean {mean}");
        assert!((std - 2.0).abs() < 0.15, "std {std}");
    }

    proptest! {
        #[test]
        fn welford_matches_two_pass(xs in prop::collection::vec(-1e3f64..1e3, 2..200)) {
            let m = feed(MarginMoments::new(0.99, xs.len() as u64).unwrap(), &xs);
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
            prop_assert!((m.mean() - mean).abs() <= 1e-10 * mean.abs().max(1.0));
            prop_assert!((m.second_moment() - var).abs() <= 1e-10 * var.max(1.0));
        }

        #[test]
        fn second_moment_never_negative(
            xs in prop::collection::vec(-1e6f64..1e6, 1..300),
            warmup in 0u64..50,
            decay in 0.01f64..0.999,
        ) {
            let mut m = MarginMoments::new(decay, warmup).unwrap();
            for x in xs {
                m = m.update(x).unwrap();
                prop_assert!(m.second_moment() >= 0.0);
                prop_assert!(m.mean().is_finite() && m.second_moment().is_finite());
            }
        }
    }
}
