//! Reference computations that share no code with the library.

/// Standard normal CDF from the positive-term series
/// `erf(x) = 2/√π · e^{-x²} · Σ 2ⁿ x^{2n+1} / (1·3·…·(2n+1))`.
pub fn phi(z: f64) -> f64 {
    let x = z.abs() / std::f64::consts::SQRT_2;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    while term > 1e-18 * sum {
        n += 1.0;
        term *= 2.0 * x * x / (2.0 * n + 1.0);
        sum += term;
    }
    let erf = 2.0 / std::f64::consts::PI.sqrt() * (-x * x).exp() * sum;
    if z >= 0.0 {
        0.5 * (1.0 + erf)
    } else {
        0.5 * (1.0 - erf)
    }
}

/// Quantile by bisection on [`phi`].
pub fn quantile_bisect(p: f64) -> f64 {
    let (mut lo, mut hi) = (-10.0f64, 10.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `tau` straight from the closed form, with the bisection quantile.
pub fn tau_oracle(theta: f64, mean: f64, std: f64, delta: f64) -> f64 {
    0.5 * (theta - mean + std * quantile_bisect(1.0 - delta))
}

/// Naive left-to-right dot product `y · Σ w[i]·x`.
pub fn naive_margin(weights: &[f64], pairs: &[(usize, f64)], label: f64) -> f64 {
    let mut s = 0.0;
    for &(i, v) in pairs {
        s += label * (weights[i] * v);
    }
    s
}

/// Number of terms a stride-checked first-crossing scan reads, found by
/// summing every checked prefix from scratch.
pub fn brute_force_evaluated(terms: &[f64], tau: f64, stride: usize) -> usize {
    let n = terms.len();
    for i in (stride..n).step_by(stride) {
        let s: f64 = terms[..i].iter().fold(0.0, |a, b| a + b);
        if s > tau {
            return i;
        }
    }
    n
}
