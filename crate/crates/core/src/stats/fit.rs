//! Least-squares exponent fits and the hole-probability fit.

use serde::Serialize;

use crate::error::{GafError, Result};

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    /// Weighted coefficient of determination.
    pub r2: f64,
    pub n: usize,
}

pub fn ols(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    wls(x, y, &vec![1.0; x.len()])
}

/// Weighted least squares `y = intercept + slope x` with weights `w` (inverse variances).
pub fn wls(x: &[f64], y: &[f64], w: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n || w.len() != n {
        return None;
    }
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        sxx += w[i] * (x[i] - xm).powi(2);
        sxy += w[i] * (x[i] - xm) * (y[i] - ym);
        syy += w[i] * (y[i] - ym).powi(2);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let sse: f64 = (0..n)
        .map(|i| w[i] * (y[i] - intercept - slope * x[i]).powi(2))
        .sum();
    let dof = (n as f64 - 2.0).max(1.0);
    let s2 = sse / dof;
    let slope_se = (s2 / sxx).sqrt();
    let intercept_se = (s2 * (1.0 / sw + xm * xm / sxx)).sqrt();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Some(LinearFit {
        slope,
        intercept,
        slope_se,
        intercept_se,
        r2,
        n,
    })
}

/// Fit of `log p(L) = b - c L^2` to hole counts.
#[derive(Clone, Debug, Serialize)]
pub struct HoleFit {
    /// Weighted least squares estimate of `c`.
    pub c_hat: f64,
    pub c_se: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Maximum-likelihood `c` under the binomial model.
    pub c_mle: f64,
    /// 95% profile-likelihood interval for `c`.
    pub ci_low: f64,
    pub ci_high: f64,
    pub used_l: Vec<f64>,
    pub dropped_l: Vec<f64>,
}

/// Grid points with fewer hole events than this are left out of the fit.
pub const MIN_EVENTS: u64 = 10;

pub fn fit_hole(ls: &[f64], events: &[u64], trials: &[u64]) -> Result<HoleFit> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut w = Vec::new();
    let mut k = Vec::new();
    let mut nn = Vec::new();
    let mut used = Vec::new();
    let mut dropped = Vec::new();
    for i in 0..ls.len() {
        if events[i] < MIN_EVENTS || events[i] == trials[i] {
            dropped.push(ls[i]);
            continue;
        }
        let n = trials[i] as f64;
        let p = events[i] as f64 / n;
        x.push(ls[i] * ls[i]);
        y.push(p.ln());
        w.push(n * p / (1.0 - p));
        k.push(events[i] as f64);
        nn.push(n);
        used.push(ls[i]);
    }
    let fit = wls(&x, &y, &w).ok_or_else(|| {
        GafError::InsufficientEvents(format!(
            "{} grid point(s) with at least {MIN_EVENTS} events",
            used.len()
        ))
    })?;
    let c_hat = -fit.slope;

    let loglik = |c: f64, b: f64| -> f64 {
        let mut s = 0.0;
        for i in 0..x.len() {
            let lp = (b - c * x[i]).min(-1e-12);
            s += k[i] * lp + (nn[i] - k[i]) * (-lp.exp()).ln_1p();
        }
        s
    };
    let profile = |c: f64| -> f64 {
        let hi = x
            .iter()
            .map(|xi| c * xi)
            .fold(f64::INFINITY, f64::min)
            - 1e-12;
        let lo = hi - 60.0;
        golden_max(|b| loglik(c, b), lo, hi)
    };
    let span = 10.0 * fit.slope_se.max(0.05 * c_hat.abs()).max(1e-6);
    let c_mle = golden_argmax(profile, c_hat - span, c_hat + span);
    let top = profile(c_mle);
    let crit = 0.5 * 3.841_458_820_694_124;
    let below = |c: f64| top - profile(c) - crit;
    let ci_low = bisect_root(&below, c_mle, span);
    let ci_high = bisect_root(&below, c_mle, -span);
    Ok(HoleFit {
        c_hat,
        c_se: fit.slope_se,
        intercept: fit.intercept,
        r2: fit.r2,
        c_mle,
        ci_low: ci_low.min(ci_high),
        ci_high: ci_low.max(ci_high),
        used_l: used,
        dropped_l: dropped,
    })
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

fn golden_argmax<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-12 * (1.0 + a.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

fn golden_max<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let x = golden_argmax(&f, a, b);
    f(x)
}

/// Root of `g` between `x0` (where `g < 0`) and `x0 - step * k` for growing `k`.
fn bisect_root<G: Fn(f64) -> f64>(g: &G, x0: f64, step: f64) -> f64 {
    let mut inner = x0;
    let mut outer = x0 - step;
    let mut tries = 0;
    while g(outer) < 0.0 && tries < 40 {
        inner = outer;
        outer -= step;
        tries += 1;
    }
    for _ in 0..100 {
        let m = 0.5 * (inner + outer);
        if g(m) < 0.0 {
            inner = m;
        } else {
            outer = m;
        }
    }
    0.5 * (inner + outer)
}
