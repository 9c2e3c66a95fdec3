//! One-sample Kolmogorov-Smirnov test against the standard normal law.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct KsResult {
    pub d: f64,
    pub p_value: f64,
}

/// `Q_KS(lambda) = 2 sum_k (-1)^(k-1) exp(-2 k^2 lambda^2)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// KS statistic of `xs` against N(0, 1), with the Stephens small-sample correction.
pub fn ks_standard_normal(xs: &[f64]) -> KsResult {
    let n = xs.len();
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let norm = Normal::new(0.0, 1.0).expect("valid normal");
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, x) in v.iter().enumerate() {
        let f = norm.cdf(*x);
        d = d.max((i as f64 + 1.0) / nf - f).max(f - i as f64 / nf);
    }
    let sq = nf.sqrt();
    KsResult {
        d,
        p_value: kolmogorov_q((sq + 0.12 + 0.11 / sq) * d),
    }
}
