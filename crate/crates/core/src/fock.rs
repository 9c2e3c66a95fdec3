//! Reproducing kernels of the weighted Fock space `F_L`.
//!
//! For radial weights the monomials are orthogonal, so the kernel is the series
//! `sum (z conj(w))^n / |z^n|^2`. The norms obey `|z^n| = L^(-n/alpha) c_n`, with
//! `c_n` independent of `L`, so they are computed once at `L = 1`. For
//! `phi = (Re z)^2` the identity `(Re z)^2 = |z|^2/2 + Re(z^2)/2` turns the flat
//! basis multiplied by `exp(L z^2 / 2)` into an orthonormal basis.
//!
//! Large magnitudes are carried as `mantissa * exp(log_scale)`.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{GafError, Result};
use crate::measure::{RhoField, Weight};
use crate::pointprocess::SamplingSequence;
use crate::quad::{log_sum_exp, GaussLegendre};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    Identity,
    /// Basis functions carry the factor `exp(L z^2 / 2)`.
    HalfSquare,
}

#[derive(Clone, Copy, Debug)]
pub struct BasisOptions {
    /// Certified bound on the relative truncation tail of `K(z, z)`.
    pub tail_target: f64,
    pub max_terms: usize,
}

impl Default for BasisOptions {
    fn default() -> Self {
        BasisOptions {
            tail_target: 1e-10,
            max_terms: 20_000,
        }
    }
}

/// `log c_n` for a radial profile, grown on demand.
#[derive(Clone, Debug)]
pub struct UnitNorms {
    alpha: f64,
    flat: bool,
    log_c: Vec<f64>,
}

impl UnitNorms {
    pub fn new(weight: &Weight) -> Result<Self> {
        let (alpha, flat) = match weight {
            Weight::RadialPower { alpha } => (*alpha, *alpha == 2.0),
            Weight::RealPartSquare => (2.0, true),
            Weight::Tabulated(_) => {
                return Err(GafError::UnsupportedWeight {
                    weight: weight.label(),
                    reason: "no orthonormal basis is available for tabulated densities".into(),
                })
            }
        };
        Ok(UnitNorms {
            alpha,
            flat,
            log_c: Vec::new(),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.log_c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_c.is_empty()
    }

    pub fn log_c(&self) -> &[f64] {
        &self.log_c
    }

    /// Makes `log c_n` available for `n < count`.
    pub fn ensure(&mut self, count: usize) -> Result<()> {
        if self.log_c.len() >= count {
            return Ok(());
        }
        self.log_c = if self.flat {
            flat_log_c(count)
        } else {
            radial_log_c(self.alpha, count)?
        };
        Ok(())
    }
}

/// `c_n = pi sqrt(2) sqrt(n!)` when `mu` is twice area measure.
fn flat_log_c(count: usize) -> Vec<f64> {
    let base = PI.ln() + 0.5 * 2f64.ln();
    (0..count)
        .map(|n| base + 0.5 * statrs::function::gamma::ln_gamma(n as f64 + 1.0))
        .collect()
}

/// `c_n^2 = 2 pi int_0^inf t^(2n+1) exp(-t^alpha) / rho_1(t)^2 dt` by composite
/// Gauss-Legendre in log space; panels are narrower than every peak width.
fn radial_log_c(alpha: f64, count: usize) -> Result<Vec<f64>> {
    let field = RhoField::new(Weight::radial_power(alpha)?, 1.0);
    let n_top = (count - 1) as f64;
    let t_star = |n: f64| ((2.0 * n + 1.0) / alpha).powf(1.0 / alpha);
    let sigma = |n: f64| t_star(n) / (alpha * (2.0 * n + 1.0)).sqrt();
    let dt = 0.5 * sigma(0.0).min(sigma(n_top));
    let g = |t: f64| (2.0 * n_top + 1.0) * t.ln() - t.powf(alpha);
    let peak = g(t_star(n_top));
    let mut t_end = t_star(n_top);
    while g(t_end) > peak - 80.0 {
        t_end += sigma(n_top);
    }
    let panels = (t_end / dt).ceil() as usize;
    let h = t_end / panels as f64;
    let gl = GaussLegendre::new(20);
    let mut ln_t = Vec::with_capacity(panels * 20);
    let mut t_alpha = Vec::with_capacity(panels * 20);
    let mut base = Vec::with_capacity(panels * 20);
    for p in 0..panels {
        for (t, w) in gl.mapped(p as f64 * h, (p + 1) as f64 * h) {
            let rho = field.rho(Complex64::new(t, 0.0))?;
            ln_t.push(t.ln());
            t_alpha.push(t.powf(alpha));
            base.push(w.ln() - 2.0 * rho.ln());
        }
    }
    let mut buf = vec![0.0; base.len()];
    let ln_2pi = (2.0 * PI).ln();
    let mut out = Vec::with_capacity(count);
    for n in 0..count {
        let k = (2 * n + 1) as f64;
        for j in 0..base.len() {
            buf[j] = base[j] + k * ln_t[j] - t_alpha[j];
        }
        out.push(0.5 * (ln_2pi + log_sum_exp(&buf)));
    }
    Ok(out)
}

/// Truncated orthonormal basis of `F_L` certified on `|z| <= domain_radius`.
#[derive(Clone, Debug)]
pub struct BasisModel {
    weight: Weight,
    rho: Arc<RhoField>,
    l: f64,
    alpha: f64,
    gauge: Gauge,
    domain_radius: f64,
    tail_bound: f64,
    log_norms: Vec<f64>,
    /// `ratio[n] = |z^(n-1)| / |z^n|`, `ratio[0] = 0`.
    ratio: Vec<f64>,
}

impl BasisModel {
    pub fn build(weight: &Weight, l: f64, domain_radius: f64, opts: BasisOptions) -> Result<Self> {
        let mut unit = UnitNorms::new(weight)?;
        Self::from_unit(&mut unit, weight, l, domain_radius, opts)
    }

    /// Builds the basis at `L` from unit norms, extending them when needed.
    pub fn from_unit(
        unit: &mut UnitNorms,
        weight: &Weight,
        l: f64,
        domain_radius: f64,
        opts: BasisOptions,
    ) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(GafError::InvalidArgument(format!("L must be positive, got {l}")));
        }
        if !(domain_radius >= 0.0 && domain_radius.is_finite()) {
            return Err(GafError::InvalidArgument(format!(
                "domain radius must be finite, got {domain_radius}"
            )));
        }
        let alpha = unit.alpha();
        let gauge = match weight {
            Weight::RealPartSquare => Gauge::HalfSquare,
            _ => Gauge::Identity,
        };
        let x = l.powf(1.0 / alpha) * domain_radius;
        let guess = (0.75 * alpha * x.powf(alpha)).ceil() as usize + 64;
        let mut avail = guess.min(opts.max_terms + 3);
        let (n_max, tail) = loop {
            unit.ensure(avail)?;
            match certify(&unit.log_c()[..avail], x, opts.tail_target) {
                Some(found) => break found,
                None if avail >= opts.max_terms + 3 => {
                    return Err(GafError::TruncationBudgetExceeded {
                        cap: opts.max_terms,
                    })
                }
                None => avail = (avail * 2).min(opts.max_terms + 3),
            }
        };
        if n_max + 1 > opts.max_terms {
            return Err(GafError::TruncationBudgetExceeded {
                cap: opts.max_terms,
            });
        }
        let ln_l = l.ln();
        let log_norms: Vec<f64> = unit.log_c()[..=n_max]
            .iter()
            .enumerate()
            .map(|(n, c)| c - n as f64 / alpha * ln_l)
            .collect();
        let mut ratio = vec![0.0; n_max + 1];
        for n in 1..=n_max {
            ratio[n] = (log_norms[n - 1] - log_norms[n]).exp();
        }
        Ok(BasisModel {
            weight: weight.clone(),
            rho: Arc::new(RhoField::new(weight.clone(), l)),
            l,
            alpha,
            gauge,
            domain_radius,
            tail_bound: tail,
            log_norms,
            ratio,
        })
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn rho_field(&self) -> &RhoField {
        &self.rho
    }

    /// Growth exponent of the radial profile (2 for the gauged flat basis).
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    /// Certified relative tail of the diagonal kernel on the domain.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// Number of basis functions kept.
    pub fn n_terms(&self) -> usize {
        self.log_norms.len()
    }

    pub fn log_norm(&self, n: usize) -> f64 {
        self.log_norms[n]
    }

    fn check(&self, z: Complex64) -> Result<()> {
        if z.norm() > self.domain_radius * (1.0 + 1e-12) + 1e-300 {
            return Err(GafError::OutOfCertifiedDomain {
                z,
                radius: self.domain_radius,
            });
        }
        Ok(())
    }

    /// `L phi(z)`.
    pub fn potential_l(&self, z: Complex64) -> f64 {
        match self.weight {
            Weight::RadialPower { alpha } => 0.5 * self.l * z.norm().powf(alpha),
            Weight::RealPartSquare => self.l * z.re * z.re,
            Weight::Tabulated(_) => unreachable!("tabulated weights have no basis"),
        }
    }

    /// Gauge factor as `(log modulus, phase)`.
    fn gauge_parts(&self, z: Complex64) -> (f64, f64) {
        match self.gauge {
            Gauge::Identity => (0.0, 0.0),
            Gauge::HalfSquare => {
                let q = z * z * (0.5 * self.l);
                (q.re, q.im)
            }
        }
    }

    /// `sum_n v^n / |z^n|^2` as `(mantissa, log_scale)`.
    fn series(&self, v: Complex64) -> (Complex64, f64) {
        let n_top = self.log_norms.len() - 1;
        if v == Complex64::new(0.0, 0.0) {
            return (Complex64::new(1.0, 0.0), -2.0 * self.log_norms[0]);
        }
        let lv = v.norm().ln();
        let log_term = |n: usize| n as f64 * lv - 2.0 * self.log_norms[n];
        let mut m = f64::NEG_INFINITY;
        let mut peak = 0;
        for n in 0..=n_top {
            let t = log_term(n);
            if t > m {
                m = t;
                peak = n;
            }
        }
        let mut n0 = peak;
        while n0 > 0 && log_term(n0 - 1) - m > -700.0 {
            n0 -= 1;
        }
        let mut term = Complex64::from_polar((log_term(n0) - m).exp(), n0 as f64 * v.arg());
        let mut sum = term;
        for n in n0 + 1..=n_top {
            let r = self.ratio[n];
            term *= v * (r * r);
            sum += term;
            if n > peak && term.norm() < 1e-18 {
                break;
            }
        }
        (sum, m)
    }

    /// `K(z, w)` as `(mantissa, log_scale)`.
    pub fn kernel_scaled(&self, z: Complex64, w: Complex64) -> Result<(Complex64, f64)> {
        self.check(z)?;
        self.check(w)?;
        let (m, s) = self.series(z * w.conj());
        let (gz, pz) = self.gauge_parts(z);
        let (gw, pw) = self.gauge_parts(w);
        Ok((m * Complex64::from_polar(1.0, pz - pw), s + gz + gw))
    }

    /// `K(z, w)`; overflows to infinity for large `L |z|^alpha`.
    pub fn kernel_eval(&self, z: Complex64, w: Complex64) -> Result<Complex64> {
        let (m, s) = self.kernel_scaled(z, w)?;
        Ok(m * s.exp())
    }

    /// `K(z, w) exp(-L phi(z) - L phi(w))`, bounded by the diagonal values.
    pub fn kernel_weighted(&self, z: Complex64, w: Complex64) -> Result<Complex64> {
        let (m, s) = self.kernel_scaled(z, w)?;
        Ok(m * (s - self.potential_l(z) - self.potential_l(w)).exp())
    }

    pub fn log_kernel_diag(&self, z: Complex64) -> Result<f64> {
        let (m, s) = self.kernel_scaled(z, z)?;
        Ok(m.re.ln() + s)
    }

    /// `log K(z, z) - 2 L phi(z)`.
    pub fn log_weighted_diag(&self, z: Complex64) -> Result<f64> {
        Ok(self.log_kernel_diag(z)? - 2.0 * self.potential_l(z))
    }

    /// `Laplacian log K(z, z)`: `2 L Laplacian(phi)` plus a five-point stencil on the
    /// weighted diagonal, with step `1e-3 rho_L(z)`.
    pub fn kernel_log_laplacian(&self, z: Complex64) -> Result<f64> {
        let h = 1e-3 * self.rho.rho(z)?;
        let fd = five_point_laplacian(|p| self.log_weighted_diag(p), z, h)?;
        Ok(2.0 * self.l * self.weight.density(z) + fd)
    }

    /// `e_n(z)` for `n` in `0..n_terms()`.
    pub fn basis_element(&self, n: usize, z: Complex64) -> Result<Complex64> {
        self.check(z)?;
        let (g, p) = self.gauge_parts(z);
        if z == Complex64::new(0.0, 0.0) {
            return Ok(if n == 0 {
                Complex64::from_polar((g - self.log_norms[0]).exp(), p)
            } else {
                Complex64::new(0.0, 0.0)
            });
        }
        let lm = n as f64 * z.norm().ln() - self.log_norms[n] + g;
        Ok(Complex64::from_polar(lm.exp(), n as f64 * z.arg() + p))
    }

    /// `e_n(z) exp(-L phi(z))` for every kept `n`.
    #[allow(clippy::needless_range_loop)]
    pub fn weighted_basis_vector(&self, z: Complex64, out: &mut Vec<Complex64>) -> Result<()> {
        self.check(z)?;
        let n_top = self.log_norms.len() - 1;
        out.clear();
        out.resize(n_top + 1, Complex64::new(0.0, 0.0));
        let (g, p) = self.gauge_parts(z);
        let shift = g - self.potential_l(z);
        if z == Complex64::new(0.0, 0.0) {
            out[0] = Complex64::from_polar((shift - self.log_norms[0]).exp(), p);
            return Ok(());
        }
        let lz = z.norm().ln();
        let log_mag = |n: usize| n as f64 * lz - self.log_norms[n] + shift;
        let mut peak = 0;
        let mut best = f64::NEG_INFINITY;
        for n in 0..=n_top {
            let v = log_mag(n);
            if v > best {
                best = v;
                peak = n;
            }
        }
        let mut n0 = peak;
        while n0 > 0 && log_mag(n0 - 1) > -700.0 {
            n0 -= 1;
        }
        let mut term = Complex64::from_polar(log_mag(n0).exp(), n0 as f64 * z.arg() + p);
        out[n0] = term;
        for n in n0 + 1..=n_top {
            term *= z * self.ratio[n];
            out[n] = term;
            if n > peak && term.norm() < 1e-300 {
                break;
            }
        }
        Ok(())
    }

    /// `sum_n s_n e_n(z)` and its derivative, by Horner's rule on the ratios.
    pub fn eval_series(&self, s: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
        let n_top = s.len().min(self.log_norms.len()) - 1;
        let mut b = s[n_top];
        let mut d = Complex64::new(0.0, 0.0);
        for n in (0..n_top).rev() {
            let r = self.ratio[n + 1];
            d = (b + z * d) * r;
            b = s[n] + z * r * b;
        }
        let inv = (-self.log_norms[0]).exp();
        let (p, dp) = (b * inv, d * inv);
        match self.gauge {
            Gauge::Identity => (p, dp),
            Gauge::HalfSquare => {
                let e = (z * z * (0.5 * self.l)).exp();
                (e * p, e * (z * self.l * p + dp))
            }
        }
    }
}

/// Smallest `N` whose geometric tail bound is below `target`, using the
/// log-convexity of the moment sequence. Returns `(N, bound)`.
fn certify(log_c: &[f64], x: f64, target: f64) -> Option<(usize, f64)> {
    if x == 0.0 {
        return Some((0, 0.0));
    }
    let lx = x.ln();
    let lt = |n: usize| 2.0 * n as f64 * lx - 2.0 * log_c[n];
    let mut acc = f64::NEG_INFINITY;
    for n in 0..log_c.len().saturating_sub(2) {
        let t = lt(n);
        acc = if acc == f64::NEG_INFINITY {
            t
        } else {
            acc.max(t) + (-(acc - t).abs()).exp().ln_1p()
        };
        let next = lt(n + 1);
        let q = (lt(n + 2) - next).exp();
        if next < t && q < 1.0 {
            let tail = next - (1.0 - q).ln() - acc;
            if tail < target.ln() {
                return Some((n, tail.exp()));
            }
        }
    }
    None
}

pub(crate) fn five_point_laplacian<F>(mut f: F, z: Complex64, h: f64) -> Result<f64>
where
    F: FnMut(Complex64) -> Result<f64>,
{
    let c = f(z)?;
    let mut acc = -60.0 * c;
    for dir in [Complex64::new(h, 0.0), Complex64::new(0.0, h)] {
        acc += 16.0 * (f(z + dir)? + f(z - dir)?);
        acc -= f(z + 2.0 * dir)? + f(z - 2.0 * dir)?;
    }
    Ok(acc / (12.0 * h * h))
}

/// Kernel of the frame GAF `sum_lambda a_lambda k_lambda`, whose covariance is
/// `sum_lambda K(z, lambda) K(lambda, w) / K(lambda, lambda)`.
#[derive(Debug)]
pub struct FrameModel {
    basis: BasisModel,
    seq: SamplingSequence,
    /// `log` of the weighted diagonal at every sequence point.
    lambda_log_diag: Vec<f64>,
    gram: OnceLock<Vec<Complex64>>,
}

impl FrameModel {
    /// `basis` must be certified on the whole generation window.
    pub fn new(basis: BasisModel, seq: SamplingSequence) -> Result<Self> {
        let radius = seq.window().max_abs();
        if radius > basis.domain_radius() * (1.0 + 1e-12) {
            return Err(GafError::OutOfCertifiedDomain {
                z: Complex64::new(radius, 0.0),
                radius: basis.domain_radius(),
            });
        }
        let lambda_log_diag = seq
            .points()
            .iter()
            .map(|&p| basis.log_weighted_diag(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(FrameModel {
            basis,
            seq,
            lambda_log_diag,
            gram: OnceLock::new(),
        })
    }

    pub fn basis(&self) -> &BasisModel {
        &self.basis
    }

    pub fn sequence(&self) -> &SamplingSequence {
        &self.seq
    }

    pub fn lambda_log_diag(&self) -> &[f64] {
        &self.lambda_log_diag
    }

    /// `sum_lambda conj(e~_n(lambda)) e~_m(lambda) / K~(lambda, lambda)` (weighted).
    fn gram(&self) -> &[Complex64] {
        self.gram.get_or_init(|| {
            let n = self.basis.n_terms();
            let mut g = vec![Complex64::new(0.0, 0.0); n * n];
            let mut v = Vec::new();
            for (p, ld) in self.seq.points().iter().zip(&self.lambda_log_diag) {
                self.basis
                    .weighted_basis_vector(*p, &mut v)
                    .expect("window is inside the certified domain");
                let s = (-ld).exp();
                let lo = v.iter().position(|c| c.norm() > 1e-160).unwrap_or(n);
                let hi = v.iter().rposition(|c| c.norm() > 1e-160).map_or(0, |i| i + 1);
                for i in lo..hi {
                    let a = v[i].conj() * s;
                    let row = &mut g[i * n..(i + 1) * n];
                    for j in lo..hi {
                        row[j] += a * v[j];
                    }
                }
            }
            g
        })
    }

    pub fn kernel_weighted(&self, z: Complex64, w: Complex64) -> Result<Complex64> {
        let mut vz = Vec::new();
        let mut vw = Vec::new();
        self.basis.weighted_basis_vector(z, &mut vz)?;
        self.basis.weighted_basis_vector(w, &mut vw)?;
        let g = self.gram();
        let n = vz.len();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            if vz[i].norm_sqr() == 0.0 {
                continue;
            }
            let row = &g[i * n..(i + 1) * n];
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..n {
                s += row[j] * vw[j].conj();
            }
            acc += vz[i] * s;
        }
        Ok(acc)
    }

    /// Direct sum over the sequence, kept for cross-checks.
    pub fn kernel_weighted_direct(&self, z: Complex64, w: Complex64) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for (p, ld) in self.seq.points().iter().zip(&self.lambda_log_diag) {
            let a = self.basis.kernel_weighted(z, *p)?;
            let b = self.basis.kernel_weighted(*p, w)?;
            acc += a * b * (-ld).exp();
        }
        Ok(acc)
    }

    pub fn log_weighted_diag(&self, z: Complex64) -> Result<f64> {
        Ok(self.kernel_weighted(z, z)?.re.ln())
    }

    pub fn kernel_log_laplacian(&self, z: Complex64) -> Result<f64> {
        let h = 1e-3 * self.basis.rho_field().rho(z)?;
        let fd = five_point_laplacian(|p| self.log_weighted_diag(p), z, h)?;
        Ok(2.0 * self.basis.l() * self.basis.weight().density(z) + fd)
    }
}

/// Covariance kernel of either GAF form.
#[derive(Debug)]
pub enum KernelModel {
    Basis(BasisModel),
    Frame(FrameModel),
}

impl KernelModel {
    pub fn basis(&self) -> &BasisModel {
        match self {
            KernelModel::Basis(b) => b,
            KernelModel::Frame(f) => f.basis(),
        }
    }

    pub fn l(&self) -> f64 {
        self.basis().l()
    }

    pub fn weight(&self) -> &Weight {
        self.basis().weight()
    }

    pub fn rho_field(&self) -> &RhoField {
        self.basis().rho_field()
    }

    pub fn kernel_weighted(&self, z: Complex64, w: Complex64) -> Result<Complex64> {
        match self {
            KernelModel::Basis(b) => b.kernel_weighted(z, w),
            KernelModel::Frame(f) => f.kernel_weighted(z, w),
        }
    }

    pub fn log_weighted_diag(&self, z: Complex64) -> Result<f64> {
        match self {
            KernelModel::Basis(b) => b.log_weighted_diag(z),
            KernelModel::Frame(f) => f.log_weighted_diag(z),
        }
    }

    pub fn kernel_log_laplacian(&self, z: Complex64) -> Result<f64> {
        match self {
            KernelModel::Basis(b) => b.kernel_log_laplacian(z),
            KernelModel::Frame(f) => f.kernel_log_laplacian(z),
        }
    }

    /// `|K(z, w)|^2 / (K(z, z) K(w, w))`.
    pub fn normalized_sq(&self, z: Complex64, w: Complex64) -> Result<f64> {
        let k = self.kernel_weighted(z, w)?;
        let dz = self.log_weighted_diag(z)?;
        let dw = self.log_weighted_diag(w)?;
        Ok((k.norm_sqr().ln() - dz - dw).exp().min(1.0))
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FastDecay {
    pub value: f64,
    pub at: Complex64,
}

/// `sup_{z in D(z0, r rho(z0))} int_{|w - z0| > R rho(z0)} |K~_L(z, w)|^2 dm(w) / rho_L(w)^2`
/// with `rho` the unscaled radius and `K~` the weighted kernel.
pub fn fast_decay_integral(
    model: &BasisModel,
    z0: Complex64,
    r: f64,
    big_r: f64,
) -> Result<FastDecay> {
    let unit = RhoField::new(model.weight().clone(), 1.0);
    let rho0 = unit.rho(z0)?;
    let inner = r * rho0;
    let start = big_r * rho0;
    let mut probes = vec![z0];
    for ring in [0.5, 1.0] {
        for k in 0..8 {
            probes.push(z0 + Complex64::from_polar(ring * inner, k as f64 * PI / 4.0));
        }
    }
    let field = model.rho_field();
    let gl = GaussLegendre::new(16);
    let mut best = FastDecay {
        value: 0.0,
        at: z0,
    };
    for z in probes {
        let rho_z = field.rho(z)?;
        let step = rho_z;
        let n_theta = 96;
        let mut total = 0.0;
        let mut s0 = start;
        loop {
            let s1 = s0 + step;
            let mut panel = 0.0;
            for (s, ws) in gl.mapped(s0, s1) {
                let mut ring = 0.0;
                for k in 0..n_theta {
                    let th = 2.0 * PI * (k as f64 + 0.5) / n_theta as f64;
                    let w = z0 + Complex64::from_polar(s, th);
                    let kw = model.kernel_weighted(z, w)?;
                    let rw = field.rho(w)?;
                    ring += kw.norm_sqr() / (rw * rw);
                }
                panel += ws * s * ring * 2.0 * PI / n_theta as f64;
            }
            total += panel;
            let reach = s1 - (z - z0).norm();
            if reach > 4.0 * rho_z && panel <= 1e-14 * total {
                break;
            }
            if panel == 0.0 && reach > 4.0 * rho_z {
                break;
            }
            s0 = s1;
        }
        if total > best.value {
            best = FastDecay { value: total, at: z };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, Tolerance};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn flat(l: f64, r: f64) -> BasisModel {
        BasisModel::build(&Weight::radial_power(2.0).unwrap(), l, r, BasisOptions::default())
            .unwrap()
    }

    #[test]
    fn flat_kernel_closed_form() {
        let l = 9.0;
        let b = flat(l, 1.5);
        for (z, w) in [(c(0.3, 0.2), c(-0.4, 0.9)), (c(1.0, -0.5), c(1.1, -0.4))] {
            let k = b.kernel_eval(z, w).unwrap();
            let exact = (z * w.conj() * l).exp() / (2.0 * PI * PI);
            assert!((k - exact).norm() / exact.norm() < 1e-10, "{k} vs {exact}");
        }
    }

    #[test]
    fn flat_norms_closed_form() {
        let b = flat(4.0, 1.0);
        for n in [0usize, 3, 10] {
            let exact = PI.ln()
                + 0.5 * 2f64.ln()
                + 0.5 * statrs::function::gamma::ln_gamma(n as f64 + 1.0)
                - n as f64 / 2.0 * 4f64.ln();
            assert!((b.log_norm(n) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn radial_norms_by_independent_quadrature() {
        // |z^n|^2 at L = 1 through an adaptive radial integral with its own rho solves
        let alpha = 3.0;
        let w = Weight::radial_power(alpha).unwrap();
        let b = BasisModel::build(&w, 1.0, 1.0, BasisOptions::default()).unwrap();
        let field = RhoField::new(w, 1.0);
        for n in [0usize, 2, 7] {
            let v = integrate(
                |s| {
                    let r = field.rho(c(s, 0.0)).unwrap();
                    2.0 * PI * s.powi(2 * n as i32 + 1) * (-s.powf(alpha)).exp() / (r * r)
                },
                0.0,
                12.0,
                Tolerance::rel(1e-12),
            )
            .unwrap();
            assert!((0.5 * v.ln() - b.log_norm(n)).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn rescaled_norms_follow_power_law() {
        let w = Weight::radial_power(4.0).unwrap();
        let b1 = BasisModel::build(&w, 1.0, 2.0, BasisOptions::default()).unwrap();
        let b5 = BasisModel::build(&w, 5.0, 1.0, BasisOptions::default()).unwrap();
        for n in [0usize, 5, 12] {
            let expected = b1.log_norm(n) - n as f64 / 4.0 * 5f64.ln();
            assert!((b5.log_norm(n) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_domain_is_refused() {
        let b = flat(4.0, 1.0);
        assert!(matches!(
            b.kernel_eval(c(1.2, 0.0), c(0.0, 0.0)),
            Err(GafError::OutOfCertifiedDomain { .. })
        ));
    }

    #[test]
    fn tail_certificate_holds() {
        let b = flat(20.0, 1.2);
        assert!(b.tail_bound() <= 1e-10);
        let z = c(1.2, 0.0);
        let n = b.n_terms();
        let kept = b.log_kernel_diag(z).unwrap().exp();
        let exact = (20.0 * 1.44f64).exp() / (2.0 * PI * PI);
        let rel_tail = (exact - kept) / exact;
        assert!(rel_tail >= -1e-13 && rel_tail <= b.tail_bound() * 1.01, "{rel_tail} n={n}");
    }

    #[test]
    fn real_part_square_kernel_is_gauged_flat() {
        let l = 6.0;
        let b = BasisModel::build(&Weight::RealPartSquare, l, 1.2, BasisOptions::default())
            .unwrap();
        let z = c(0.3, -0.5);
        let w = c(-0.2, 0.7);
        let exact = (l * z * w.conj() + 0.5 * l * z * z + 0.5 * l * w.conj() * w.conj()).exp()
            / (2.0 * PI * PI);
        let k = b.kernel_eval(z, w).unwrap();
        assert!((k - exact).norm() / exact.norm() < 1e-10);
        // the weighted diagonal of an invariant kernel is constant
        let d0 = b.log_weighted_diag(c(0.0, 0.0)).unwrap();
        let d1 = b.log_weighted_diag(c(0.8, 0.3)).unwrap();
        assert!((d0 - d1).abs() < 1e-10);
    }

    #[test]
    fn log_laplacian_flat() {
        let l = 10.0;
        let b = flat(l, 1.0);
        let v = b.kernel_log_laplacian(c(0.2, 0.1)).unwrap();
        assert!((v - 4.0 * l).abs() < 1e-5 * l, "{v}");
    }

    #[test]
    fn horner_matches_direct_sum() {
        let b = BasisModel::build(&Weight::radial_power(3.0).unwrap(), 7.0, 1.0, BasisOptions::default())
            .unwrap();
        let s: Vec<Complex64> = (0..b.n_terms())
            .map(|n| c((n as f64).sin(), (0.5 * n as f64).cos()))
            .collect();
        let z = c(0.6, -0.4);
        let (f, df) = b.eval_series(&s, z);
        let mut direct = c(0.0, 0.0);
        for (n, sn) in s.iter().enumerate() {
            direct += sn * b.basis_element(n, z).unwrap();
        }
        assert!((f - direct).norm() < 1e-9 * direct.norm().max(1.0));
        let h = 1e-6;
        let fd = (b.eval_series(&s, z + h).0 - b.eval_series(&s, z - h).0) / (2.0 * h);
        assert!((df - fd).norm() < 1e-5 * df.norm().max(1.0));
    }

    #[test]
    fn weighted_vector_matches_kernel() {
        let b = BasisModel::build(&Weight::radial_power(3.0).unwrap(), 12.0, 1.0, BasisOptions::default())
            .unwrap();
        let z = c(0.5, 0.2);
        let w = c(0.45, 0.3);
        let mut vz = Vec::new();
        let mut vw = Vec::new();
        b.weighted_basis_vector(z, &mut vz).unwrap();
        b.weighted_basis_vector(w, &mut vw).unwrap();
        let k: Complex64 = vz.iter().zip(&vw).map(|(a, b)| a * b.conj()).sum();
        let expected = b.kernel_weighted(z, w).unwrap();
        assert!((k - expected).norm() < 1e-12 * expected.norm().max(1e-3));
    }

    #[test]
    fn fast_decay_flat_against_polar_oracle() {
        let l = 10.0;
        let b = flat(l, 3.5);
        let r = 1.0;
        let big_r = 3.0;
        let got = fast_decay_integral(&b, c(0.0, 0.0), r, big_r).unwrap();
        // closed-form kernel, polar coordinates about the origin
        let rho1 = (2.0 * PI).powf(-0.5);
        let a = big_r * rho1;
        let z = got.at;
        let zr = z.norm();
        let oracle = integrate(
            |s| {
                let ang = integrate(
                    |th| (2.0 * l * zr * s * th.cos() - 2.0 * l * zr * s).exp(),
                    0.0,
                    2.0 * PI,
                    Tolerance::rel(1e-13),
                )
                .unwrap();
                s * (-l * (s - zr).powi(2)).exp() * ang
            },
            a,
            a + 4.0,
            Tolerance::rel(1e-12).with_abs(1e-300),
        )
        .unwrap()
            * 2.0
            * PI
            * l
            / (4.0 * PI.powi(4));
        assert!((got.value / oracle - 1.0).abs() < 1e-6, "{} vs {oracle}", got.value);
    }
}
