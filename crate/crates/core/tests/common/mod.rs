#![allow(dead_code)]

use gafsim::fock::{BasisModel, Gauge};
use gafsim::Complex64;
use nalgebra::DMatrix;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Roots of `sum_n s_n z^n / nu_n` with `|z| <= model.domain_radius()`, from the
/// eigenvalues of the companion matrix in the variable `v = z / zeta`, polished by
/// Newton's method on the full series.
pub fn companion_roots(model: &BasisModel, series: &[Complex64], zeta: f64) -> Vec<Complex64> {
    assert_eq!(model.gauge(), Gauge::Identity);
    let n = series.len().min(model.n_terms());
    let ln_zeta = zeta.ln();
    let log_mod: Vec<f64> = (0..n)
        .map(|k| series[k].norm().ln() + k as f64 * ln_zeta - model.log_norm(k))
        .collect();
    let top = log_mod.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // keep every term that matters on |v| <= 1.5
    let degree = (0..n)
        .rev()
        .find(|&k| log_mod[k] + k as f64 * 1.5f64.ln() - top > -40.0)
        .unwrap_or(0);
    if degree == 0 {
        return Vec::new();
    }
    let coeff = |k: usize| -> Complex64 {
        let phase = series[k] / series[k].norm();
        phase * (log_mod[k] - top).exp()
    };
    let lead = coeff(degree);
    let mut m = DMatrix::<Complex64>::zeros(degree, degree);
    for j in 0..degree {
        m[(0, j)] = -coeff(degree - 1 - j) / lead;
    }
    for i in 1..degree {
        m[(i, i - 1)] = c(1.0, 0.0);
    }
    let eig = m.schur().eigenvalues().expect("complex Schur form");
    let mut roots = Vec::new();
    for v in eig.iter() {
        let mut z = *v * zeta;
        if z.norm() > 1.2 * model.domain_radius() {
            continue;
        }
        for _ in 0..50 {
            if z.norm() > model.domain_radius() {
                break;
            }
            let (f, df) = model.eval_series(series, z);
            let step = f / df;
            z -= step;
            if step.norm() < 1e-15 * zeta {
                break;
            }
        }
        if z.norm() <= model.domain_radius() {
            roots.push(z);
        }
    }
    roots
}
