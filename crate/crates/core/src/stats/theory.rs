//! Deterministic predictions: Edelman-Kostlan mean, the variance double integral and
//! the normality-condition quantities.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{GafError, Result};
use crate::fock::KernelModel;
use crate::geometry::Disc;
use crate::measure::{RhoField, Weight};
use crate::par::{kahan_sum, map_indexed, Execution};
use crate::quad::GaussLegendre;
use crate::stats::testfn::TestFunction;

/// Polar product rule on a disc: Gauss-Legendre in the radius, midpoint in the angle.
/// Returns `(node, weight)` pairs whose weights sum to the disc area.
pub fn disc_nodes(disc: &Disc, n_r: usize, n_theta: usize) -> Vec<(Complex64, f64)> {
    let gl = GaussLegendre::new(n_r);
    let dt = 2.0 * PI / n_theta as f64;
    let mut out = Vec::with_capacity(n_r * n_theta);
    for (r, wr) in gl.mapped(0.0, disc.radius) {
        for k in 0..n_theta {
            let t = (k as f64 + 0.5) * dt;
            out.push((disc.center + Complex64::from_polar(r, t), wr * r * dt));
        }
    }
    out
}

/// `int_disc f dmu`. Radial weights whose disc contains the origin are integrated in
/// polar coordinates about 0 with `v = |z|^alpha`, which absorbs the density singularity.
pub fn integrate_mu<F: Fn(Complex64) -> f64>(weight: &Weight, disc: &Disc, f: F) -> f64 {
    if let Some(alpha) = weight.radial_alpha() {
        if disc.center.norm() < disc.radius && alpha != 2.0 {
            let gl = GaussLegendre::new(48);
            let n_theta = 96;
            let dt = 2.0 * PI / n_theta as f64;
            let zero = Complex64::new(0.0, 0.0);
            let mut sum = 0.0;
            for k in 0..n_theta {
                let u = Complex64::from_polar(1.0, (k as f64 + 0.5) * dt);
                let top = disc.ray_exit(zero, u).powf(alpha);
                // dmu = (alpha^2/2) s^(alpha-1) ds dtheta = (alpha/2) dv dtheta
                sum += gl.integrate(|v| f(u * v.powf(1.0 / alpha)), 0.0, top) * 0.5 * alpha * dt;
            }
            return sum;
        }
    }
    disc_nodes(disc, 48, 96)
        .into_iter()
        .map(|(z, w)| f(z) * weight.density(z) * w)
        .sum()
}

/// Limit of the mean, `(1/2pi) int psi dmu`.
pub fn limit_mean(weight: &Weight, psi: &TestFunction) -> f64 {
    integrate_mu(weight, &psi.support(), |z| psi.value(z)) / (2.0 * PI)
}

/// `int psi^2 dmu`.
pub fn psi_sq_mass(weight: &Weight, psi: &TestFunction) -> f64 {
    integrate_mu(weight, &psi.support(), |z| psi.value(z).powi(2))
}

/// Mean and variance of `(1/L) sum psi` over a Poisson process of intensity `s L dmu`.
pub fn poisson_moments(weight: &Weight, psi: &TestFunction, l: f64, s: f64) -> (f64, f64) {
    let mean = s * integrate_mu(weight, &psi.support(), |z| psi.value(z));
    (mean, s * psi_sq_mass(weight, psi) / l)
}

/// `E n(psi, L) = (1/4 pi L) int psi Delta log K(z, z) dm`.
///
/// Split as `2L density + Delta log K~` and integrated by parts on the second term,
/// so that no finite differences enter.
pub fn ek_expected(model: &KernelModel, psi: &TestFunction) -> Result<f64> {
    let l = model.l();
    let support = psi.support();
    let main = limit_mean(model.weight(), psi);
    let nodes = disc_nodes(&support, 32, 48);
    let parts = map_indexed(Execution::Parallel, nodes.len(), |i| {
        let (z, w) = nodes[i];
        let lap = psi.laplacian(z);
        if lap == 0.0 {
            return Ok(0.0);
        }
        Ok(lap * model.log_weighted_diag(z)? * w)
    });
    let corr = kahan_sum(collect(parts)?);
    Ok(main + corr / (4.0 * PI * l))
}

/// `(1/4 pi L) int |Delta psi| |log K~(z, z)| dm`, which bounds `|E n(psi, L) - limit|`.
pub fn ek_error_bound(model: &KernelModel, psi: &TestFunction) -> Result<f64> {
    let nodes = disc_nodes(&psi.support(), 32, 48);
    let parts = map_indexed(Execution::Parallel, nodes.len(), |i| {
        let (z, w) = nodes[i];
        let lap = psi.laplacian(z).abs();
        if lap == 0.0 {
            return Ok(0.0);
        }
        Ok(lap * model.log_weighted_diag(z)?.abs() * w)
    });
    Ok(kahan_sum(collect(parts)?) / (4.0 * PI * model.l()))
}

/// Expected zero count in a disc: `(1/2pi) L mu(D)` plus the boundary flux of `log K~`.
pub fn expected_count(model: &KernelModel, disc: &Disc) -> Result<f64> {
    let l = model.l();
    let main = l * model.weight().mu_disc_unit(disc.center, disc.radius)? / (2.0 * PI);
    let n = 128;
    let dt = 2.0 * PI / n as f64;
    let mut flux = 0.0;
    for k in 0..n {
        let u = Complex64::from_polar(1.0, (k as f64 + 0.5) * dt);
        let z = disc.center + u * disc.radius;
        let h = 1e-3 * model.rho_field().rho(z)?;
        let dn = (model.log_weighted_diag(z + u * h)? - model.log_weighted_diag(z - u * h)?) / (2.0 * h);
        flux += dn * disc.radius * dt;
    }
    Ok(main + flux / (4.0 * PI))
}

/// `Li_2(x)` for `0 <= x <= 1`.
pub fn dilog(x: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&x));
    if x <= 0.0 {
        return 0.0;
    }
    if x > 0.5 {
        if x >= 1.0 {
            return PI * PI / 6.0;
        }
        return PI * PI / 6.0 - x.ln() * (-x).ln_1p() - dilog(1.0 - x);
    }
    let mut term = x;
    let mut sum: f64 = 0.0;
    let mut k = 1.0;
    while term > 1e-17 * sum.max(1e-300) {
        sum += term / (k * k);
        term *= x;
        k += 1.0;
    }
    sum
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct VarianceTheory {
    /// `int int Delta psi(z) Delta psi(w) J_L(z, w) dm dm / L^2`.
    pub exact: f64,
    /// `(1/L^2) int (Delta psi)^2 rho_L^2 dm`.
    pub surrogate: f64,
}

impl VarianceTheory {
    pub fn ratio(&self) -> f64 {
        self.exact / self.surrogate
    }
}

/// Node counts for the nested polar rules.
#[derive(Clone, Copy, Debug)]
pub struct NestedRule {
    pub outer_r: usize,
    pub outer_theta: usize,
    pub inner_theta: usize,
    pub inner_gl: usize,
    /// Inner integrals stop at `cut * rho_L(z)`.
    pub cut: f64,
}

impl Default for NestedRule {
    fn default() -> Self {
        NestedRule {
            outer_r: 24,
            outer_theta: 40,
            inner_theta: 48,
            inner_gl: 16,
            cut: 12.0,
        }
    }
}

/// Polar integral of `f` about `z` over `support`, truncated at distance `cut`.
/// The radial range is split at `split` so the Gaussian core gets its own panel.
fn inner_polar<F: FnMut(Complex64) -> Result<f64>>(
    z: Complex64,
    support: &Disc,
    cut: f64,
    split: f64,
    n_theta: usize,
    gl: &GaussLegendre,
    mut f: F,
) -> Result<f64> {
    let dt = 2.0 * PI / n_theta as f64;
    let mut total = 0.0;
    for k in 0..n_theta {
        let u = Complex64::from_polar(1.0, (k as f64 + 0.5) * dt);
        let top = support.ray_exit(z, u).min(cut);
        if top <= 0.0 {
            continue;
        }
        let mid = split.min(top);
        let mut ray = 0.0;
        for (a, b) in [(0.0, mid), (mid, top)] {
            if b <= a {
                continue;
            }
            for (s, ws) in gl.mapped(a, b) {
                ray += f(z + u * s)? * s * ws;
            }
        }
        total += ray * dt;
    }
    Ok(total)
}

fn collect(parts: Vec<Result<f64>>) -> Result<Vec<f64>> {
    parts.into_iter().collect()
}

pub fn variance_theoretical(model: &KernelModel, psi: &TestFunction) -> Result<VarianceTheory> {
    variance_theoretical_with(model, psi, NestedRule::default())
}

pub fn variance_theoretical_with(
    model: &KernelModel,
    psi: &TestFunction,
    rule: NestedRule,
) -> Result<VarianceTheory> {
    let l = model.l();
    let support = psi.support();
    let field = model.rho_field();
    let nodes = disc_nodes(&support, rule.outer_r, rule.outer_theta);
    let gl = GaussLegendre::new(rule.inner_gl);
    let parts = map_indexed(Execution::Parallel, nodes.len(), |i| -> Result<(f64, f64)> {
        let (z, wz) = nodes[i];
        let dz = psi.laplacian(z);
        if dz == 0.0 {
            return Ok((0.0, 0.0));
        }
        let rho = field.rho(z)?;
        let log_dz = model.log_weighted_diag(z)?;
        let inner = inner_polar(z, &support, rule.cut * rho, 3.0 * rho, rule.inner_theta, &gl, |w| {
            let dw = psi.laplacian(w);
            if dw == 0.0 {
                return Ok(0.0);
            }
            let k = model.kernel_weighted(z, w)?;
            let q = (k.norm_sqr().ln() - log_dz - model.log_weighted_diag(w)?).exp();
            if q.is_nan() || q > 1.0 + 1e-9 {
                return Err(GafError::QuadratureFailure(format!(
                    "normalized kernel {q} exceeds 1 at {z}, {w}"
                )));
            }
            Ok(dw * dilog(q.min(1.0)))
        })?;
        Ok((wz * dz * inner, wz * dz * dz * rho * rho))
    });
    let mut exact = Vec::with_capacity(parts.len());
    let mut surr = Vec::with_capacity(parts.len());
    for p in parts {
        let (a, b) = p?;
        exact.push(a);
        surr.push(b);
    }
    let l2 = l * l;
    Ok(VarianceTheory {
        exact: kahan_sum(exact) / (16.0 * PI * PI * l2),
        surrogate: kahan_sum(surr) / l2,
    })
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct NormalityConditions {
    /// `int int |Xi|^2 Theta Theta dnu dnu / sup_z int |Xi|^2 dnu`.
    pub ratio_liminf_proxy: f64,
    /// `sup_z int |Xi(z, w)| dnu(w)`.
    pub sup_integral: f64,
    /// `sup_z int |Xi(z, w)|^2 dnu(w)`.
    pub sup_sq_integral: f64,
    /// `int int |Xi|^2 Theta Theta dnu dnu`.
    pub double_integral: f64,
}

/// Normality-condition quantities for `nu = (1/c) chi_supp dm / rho^2`, where `rho` is
/// the unscaled radius and `c` makes `nu` a probability measure, and `Theta dnu =
/// Delta psi dm / 2pi`.
pub fn normality_conditions(model: &KernelModel, psi: &TestFunction) -> Result<NormalityConditions> {
    let rule = NestedRule {
        cut: 20.0,
        ..NestedRule::default()
    };
    let support = psi.support();
    let field = model.rho_field();
    let unit = RhoField::new(model.weight().clone(), 1.0);
    let gl = GaussLegendre::new(rule.inner_gl);

    let mass_nodes = disc_nodes(&support, rule.outer_r, rule.outer_theta);
    let mut c = 0.0;
    for (z, w) in &mass_nodes {
        c += w / unit.rho(*z)?.powi(2);
    }

    let mut probes = vec![support.center];
    for frac in [0.3, 0.6, 0.9] {
        for k in 0..8 {
            probes.push(support.center + Complex64::from_polar(frac * support.radius, k as f64 * PI / 4.0));
        }
    }
    let sups = map_indexed(Execution::Parallel, probes.len(), |i| -> Result<(f64, f64)> {
        let z = probes[i];
        let rho = field.rho(z)?;
        let log_dz = model.log_weighted_diag(z)?;
        let sq = inner_polar(z, &support, rule.cut * rho, 3.0 * rho, rule.inner_theta, &gl, |w| {
            let k = model.kernel_weighted(z, w)?;
            let q = (k.norm_sqr().ln() - log_dz - model.log_weighted_diag(w)?).exp().min(1.0);
            Ok(q / (c * unit.rho(w)?.powi(2)))
        })?;
        let abs = inner_polar(z, &support, rule.cut * rho, 3.0 * rho, rule.inner_theta, &gl, |w| {
            let k = model.kernel_weighted(z, w)?;
            let q = (k.norm_sqr().ln() - log_dz - model.log_weighted_diag(w)?).exp().min(1.0);
            Ok(q.sqrt() / (c * unit.rho(w)?.powi(2)))
        })?;
        Ok((abs, sq))
    });
    let mut sup_integral: f64 = 0.0;
    let mut sup_sq: f64 = 0.0;
    for s in sups {
        let (a, q) = s?;
        sup_integral = sup_integral.max(a);
        sup_sq = sup_sq.max(q);
    }

    let nodes = disc_nodes(&support, rule.outer_r, rule.outer_theta);
    let parts = map_indexed(Execution::Parallel, nodes.len(), |i| -> Result<f64> {
        let (z, wz) = nodes[i];
        let dz = psi.laplacian(z);
        if dz == 0.0 {
            return Ok(0.0);
        }
        let rho = field.rho(z)?;
        let log_dz = model.log_weighted_diag(z)?;
        let inner = inner_polar(z, &support, rule.cut * rho, 3.0 * rho, rule.inner_theta, &gl, |w| {
            let dw = psi.laplacian(w);
            if dw == 0.0 {
                return Ok(0.0);
            }
            let k = model.kernel_weighted(z, w)?;
            let q = (k.norm_sqr().ln() - log_dz - model.log_weighted_diag(w)?).exp().min(1.0);
            Ok(dw * q)
        })?;
        Ok(wz * dz * inner)
    });
    let double = kahan_sum(collect(parts)?) / (4.0 * PI * PI);
    Ok(NormalityConditions {
        ratio_liminf_proxy: double / sup_sq,
        sup_integral,
        sup_sq_integral: sup_sq,
        double_integral: double,
    })
}
