//! Sample moments with compensated sums taken in trial order.

use serde::Serialize;

use crate::par::kahan_sum;

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    /// Unbiased variance.
    pub var: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

impl Moments {
    pub fn std_err(&self) -> f64 {
        (self.var / self.n as f64).sqrt()
    }
}

pub fn moments(xs: &[f64]) -> Moments {
    let n = xs.len();
    if n == 0 {
        return Moments {
            n,
            mean: f64::NAN,
            var: f64::NAN,
            skewness: f64::NAN,
            excess_kurtosis: f64::NAN,
        };
    }
    let nf = n as f64;
    let mean = kahan_sum(xs.iter().copied()) / nf;
    let m2 = kahan_sum(xs.iter().map(|x| (x - mean).powi(2))) / nf;
    let m3 = kahan_sum(xs.iter().map(|x| (x - mean).powi(3))) / nf;
    let m4 = kahan_sum(xs.iter().map(|x| (x - mean).powi(4))) / nf;
    let var = if n > 1 { m2 * nf / (nf - 1.0) } else { 0.0 };
    let (skewness, excess_kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (f64::NAN, f64::NAN)
    };
    Moments {
        n,
        mean,
        var,
        skewness,
        excess_kurtosis,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        let m = moments(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.var - 5.0 / 3.0).abs() < 1e-15);
        assert!(m.skewness.abs() < 1e-15);
        assert!((m.excess_kurtosis - (-1.36)).abs() < 1e-12);
    }

    #[test]
    fn order_of_equal_values_is_irrelevant() {
        let a: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = a.clone();
        b.reverse();
        let (ma, mb) = (moments(&a), moments(&b));
        assert!((ma.mean - mb.mean).abs() < 1e-16);
        assert!((ma.var - mb.var).abs() < 1e-15);
    }
}
