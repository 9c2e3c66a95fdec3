//! Subharmonic weights, their Laplacian measures and the radius function `rho_L`.
//!
//! A weight `phi` induces `mu = Laplacian(phi) dm`. At parameter `L` the radius
//! `rho_L(z)` is the unique `r` with `L * mu(D(z, r)) = 1`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::{Arc, RwLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GafError, Result};
use crate::geometry::Rect;
use crate::quad::{integrate, Tolerance};

/// Bilinearly interpolated density on a regular grid, constant outside it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedDensity {
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major values, `values[iy * nx + ix]` sits at `(x0 + ix dx, y0 + iy dy)`.
    pub values: Vec<f64>,
}

impl TabulatedDensity {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let t: TabulatedDensity = serde_json::from_str(&text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(GafError::InvalidWeight("grid needs at least 2x2 nodes".into()));
        }
        if !(self.dx > 0.0 && self.dy > 0.0) || !self.x0.is_finite() || !self.y0.is_finite() {
            return Err(GafError::InvalidWeight("grid spacing must be positive".into()));
        }
        if self.values.len() != self.nx * self.ny {
            return Err(GafError::InvalidWeight(format!(
                "expected {} values, found {}",
                self.nx * self.ny,
                self.values.len()
            )));
        }
        if let Some(v) = self.values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(GafError::InvalidWeight(format!(
                "density values must be positive and finite, found {v}"
            )));
        }
        Ok(())
    }

    fn x_max(&self) -> f64 {
        self.x0 + self.dx * (self.nx - 1) as f64
    }

    fn y_max(&self) -> f64 {
        self.y0 + self.dy * (self.ny - 1) as f64
    }

    pub fn eval(&self, z: Complex64) -> f64 {
        let x = z.re.clamp(self.x0, self.x_max());
        let y = z.im.clamp(self.y0, self.y_max());
        let fx = (x - self.x0) / self.dx;
        let fy = (y - self.y0) / self.dy;
        let ix = (fx.floor() as usize).min(self.nx - 2);
        let iy = (fy.floor() as usize).min(self.ny - 2);
        let tx = fx - ix as f64;
        let ty = fy - iy as f64;
        let v = |i: usize, j: usize| self.values[j * self.nx + i];
        (1.0 - ty) * ((1.0 - tx) * v(ix, iy) + tx * v(ix + 1, iy))
            + ty * ((1.0 - tx) * v(ix, iy + 1) + tx * v(ix + 1, iy + 1))
    }

    /// Exact maximum over `rect`: bilinear pieces peak at grid lines or rect corners.
    pub fn sup_on(&self, rect: &Rect) -> f64 {
        let mut xs = vec![rect.x_min, rect.x_max];
        let mut ys = vec![rect.y_min, rect.y_max];
        for i in 0..self.nx {
            let x = self.x0 + self.dx * i as f64;
            if x > rect.x_min && x < rect.x_max {
                xs.push(x);
            }
        }
        for j in 0..self.ny {
            let y = self.y0 + self.dy * j as f64;
            if y > rect.y_min && y < rect.y_max {
                ys.push(y);
            }
        }
        let mut m: f64 = 0.0;
        for &x in &xs {
            for &y in &ys {
                m = m.max(self.eval(Complex64::new(x, y)));
            }
        }
        m
    }
}

#[derive(Clone, Debug)]
pub enum Weight {
    /// `phi(z) = |z|^alpha / 2`.
    RadialPower { alpha: f64 },
    /// `phi(z) = (Re z)^2`.
    RealPartSquare,
    /// Density given directly on a grid; `phi` itself is not stored.
    Tabulated(Arc<TabulatedDensity>),
}

impl Weight {
    pub fn radial_power(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(GafError::InvalidWeight(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        Ok(Weight::RadialPower { alpha })
    }

    pub fn label(&self) -> String {
        match self {
            Weight::RadialPower { alpha } => format!("radial_power(alpha={alpha})"),
            Weight::RealPartSquare => "real_part_square".into(),
            Weight::Tabulated(t) => format!("tabulated({}x{})", t.nx, t.ny),
        }
    }

    /// Exponent governing the growth of `phi` when the weight is radial.
    pub fn radial_alpha(&self) -> Option<f64> {
        match self {
            Weight::RadialPower { alpha } => Some(*alpha),
            _ => None,
        }
    }

    pub fn is_radial(&self) -> bool {
        matches!(self, Weight::RadialPower { .. })
    }

    /// Density of `mu` when it is a constant multiple of Lebesgue measure.
    pub fn constant_density(&self) -> Option<f64> {
        match self {
            Weight::RadialPower { alpha } if *alpha == 2.0 => Some(2.0),
            Weight::RealPartSquare => Some(2.0),
            _ => None,
        }
    }

    /// `phi(z)`.
    pub fn potential(&self, z: Complex64) -> Result<f64> {
        match self {
            Weight::RadialPower { alpha } => Ok(0.5 * z.norm().powf(*alpha)),
            Weight::RealPartSquare => Ok(z.re * z.re),
            Weight::Tabulated(_) => Err(GafError::UnsupportedWeight {
                weight: self.label(),
                reason: "the potential is not available for tabulated densities".into(),
            }),
        }
    }

    /// Density of `mu` with respect to area measure.
    pub fn density(&self, z: Complex64) -> f64 {
        match self {
            Weight::RadialPower { alpha } => {
                let r = z.norm();
                if *alpha == 2.0 {
                    2.0
                } else if r == 0.0 {
                    if *alpha > 2.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    0.5 * alpha * alpha * r.powf(alpha - 2.0)
                }
            }
            Weight::RealPartSquare => 2.0,
            Weight::Tabulated(t) => t.eval(z),
        }
    }

    /// Supremum of the density on `rect` (may be infinite).
    pub fn density_sup(&self, rect: &Rect) -> f64 {
        match self {
            Weight::RadialPower { alpha } => {
                if *alpha >= 2.0 {
                    self.density(Complex64::new(rect.max_abs(), 0.0))
                } else {
                    self.density(Complex64::new(rect.min_abs(), 0.0))
                }
            }
            Weight::RealPartSquare => 2.0,
            Weight::Tabulated(t) => t.sup_on(rect),
        }
    }

    /// `mu(D(z, r))` with `mu` unscaled.
    pub fn mu_disc_unit(&self, z: Complex64, r: f64) -> Result<f64> {
        if r <= 0.0 {
            return Ok(0.0);
        }
        if let Some(c) = self.constant_density() {
            return Ok(c * PI * r * r);
        }
        match self {
            Weight::RadialPower { alpha } => radial_disc_mass(*alpha, z.norm(), r),
            Weight::Tabulated(t) => tabulated_disc_mass(t, z, r),
            Weight::RealPartSquare => unreachable!("constant density"),
        }
    }

    /// `mu_L(D(z, r)) = L mu(D(z, r))`.
    pub fn mu_disc(&self, z: Complex64, r: f64, l: f64) -> Result<f64> {
        Ok(l * self.mu_disc_unit(z, r)?)
    }
}

/// Mass of `D(d, r)` (centre at distance `d` from 0) for `phi = |z|^alpha / 2`.
///
/// Circles `|w| = s` meet the disc in an arc of half-angle `theta(s)`, which turns the
/// area integral into a one-dimensional one over `s`.
fn radial_disc_mass(alpha: f64, d: f64, r: f64) -> Result<f64> {
    let inner = (r - d).max(0.0);
    let full = PI * alpha * inner.powf(alpha);
    if d <= 1e-15 * r {
        return Ok(full);
    }
    let a = (r - d).abs();
    let b = r + d;
    let h = b - a;
    // half-angle form of theta(s): 1 - cos and 1 + cos are built from exact differences
    let g = |t: f64| {
        let (sh, ch) = (0.5 * t).sin_cos();
        let u = h * sh * sh;
        let v = h * ch * ch;
        let s = a + u;
        if s <= 0.0 {
            return 0.0;
        }
        let (x, y) = if r >= d { (u + 2.0 * a, u) } else { (u, u + 2.0 * a) };
        let theta = 2.0 * (v * x).sqrt().atan2((y * (s + b)).sqrt());
        alpha * alpha * s.powf(alpha - 1.0) * theta * 0.5 * h * t.sin()
    };
    let tol = Tolerance::rel(1e-12).with_abs(1e-300);
    let partial = integrate(g, 0.0, PI, tol)?;
    Ok(full + partial)
}

fn tabulated_disc_mass(t: &TabulatedDensity, z: Complex64, r: f64) -> Result<f64> {
    let inner_tol = Tolerance::rel(1e-12);
    let mut failure = None;
    let outer = |s: f64| {
        if s == 0.0 {
            return 0.0;
        }
        let ring = integrate(
            |th: f64| t.eval(z + Complex64::from_polar(s, th)),
            0.0,
            2.0 * PI,
            inner_tol,
        );
        match ring {
            Ok(v) => s * v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    };
    let v = integrate(outer, 0.0, r, Tolerance::rel(1e-11));
    match failure {
        Some(e) => Err(e),
        None => v,
    }
}

/// Key resolution of the `rho` cache; values are computed at the quantized point.
const RHO_QUANTUM: f64 = 1e-12;

/// `rho_L` for one weight and one `L`, memoized and safe to share across threads.
#[derive(Debug)]
pub struct RhoField {
    weight: Weight,
    l: f64,
    tol_rel: f64,
    cache: RwLock<HashMap<(i64, i64), f64>>,
}

impl Clone for RhoField {
    fn clone(&self) -> Self {
        RhoField::with_tolerance(self.weight.clone(), self.l, self.tol_rel)
    }
}

impl RhoField {
    pub fn new(weight: Weight, l: f64) -> Self {
        Self::with_tolerance(weight, l, 1e-10)
    }

    pub fn with_tolerance(weight: Weight, l: f64, tol_rel: f64) -> Self {
        RhoField {
            weight,
            l,
            tol_rel,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn tol_rel(&self) -> f64 {
        self.tol_rel
    }

    pub fn cache_len(&self) -> usize {
        self.cache.read().map(|c| c.len()).unwrap_or(0)
    }

    /// Cached `(point, rho)` pairs, for inspection.
    pub fn cache_entries(&self) -> Vec<(Complex64, f64)> {
        let c = self.cache.read().expect("rho cache poisoned");
        let mut v: Vec<_> = c
            .iter()
            .map(|(k, r)| {
                (
                    Complex64::new(k.0 as f64 * RHO_QUANTUM, k.1 as f64 * RHO_QUANTUM),
                    *r,
                )
            })
            .collect();
        v.sort_by(|a, b| a.0.re.total_cmp(&b.0.re).then(a.0.im.total_cmp(&b.0.im)));
        v
    }

    pub fn rho(&self, z: Complex64) -> Result<f64> {
        if let Some(c) = self.weight.constant_density() {
            return Ok((PI * self.l * c).powf(-0.5));
        }
        if let Weight::RadialPower { alpha } = self.weight {
            if z.norm() == 0.0 {
                return Ok((PI * alpha * self.l).powf(-1.0 / alpha));
            }
        }
        let key = self.key(z);
        if let Some(v) = self.cache.read().expect("rho cache poisoned").get(&key) {
            return Ok(*v);
        }
        let canonical = Complex64::new(key.0 as f64 * RHO_QUANTUM, key.1 as f64 * RHO_QUANTUM);
        let v = self.solve(canonical)?;
        self.cache
            .write()
            .expect("rho cache poisoned")
            .insert(key, v);
        Ok(v)
    }

    fn key(&self, z: Complex64) -> (i64, i64) {
        let q = |x: f64| (x / RHO_QUANTUM).round() as i64;
        if self.weight.is_radial() {
            (q(z.norm()), 0)
        } else {
            (q(z.re), q(z.im))
        }
    }

    /// Bracket then Illinois iteration on `F(r) = L mu(D(z, r)) - 1`.
    fn solve(&self, z: Complex64) -> Result<f64> {
        let f = |r: f64| -> Result<f64> { Ok(self.weight.mu_disc(z, r, self.l)? - 1.0) };
        let dens = self.weight.density(z);
        let guess = if dens.is_finite() && dens > 0.0 {
            (PI * self.l * dens).powf(-0.5)
        } else {
            1.0
        };
        let mut lo = 1e-12;
        let mut f_lo = f(lo)?;
        if f_lo >= 0.0 {
            return Err(GafError::DivisionByZeroMass { z, r: lo });
        }
        let mut hi = guess.max(lo * 2.0);
        let mut f_hi = f(hi)?;
        let mut doublings = 0;
        while f_hi < 0.0 {
            lo = hi;
            f_lo = f_hi;
            hi *= 2.0;
            f_hi = f(hi)?;
            doublings += 1;
            if doublings > 60 || !f_hi.is_finite() {
                return Err(GafError::NoBracket { z, r_max: hi });
            }
        }
        // tighten from above when the guess overshoots badly
        while hi * 0.5 > lo {
            let m = hi * 0.5;
            let fm = f(m)?;
            if fm >= 0.0 {
                hi = m;
                f_hi = fm;
            } else {
                lo = m;
                f_lo = fm;
                break;
            }
        }
        let target = 0.1 * self.tol_rel;
        let mut side = 0i8;
        for _ in 0..200 {
            let r = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
            let r = if r > lo && r < hi { r } else { 0.5 * (lo + hi) };
            let fr = f(r)?;
            if fr.abs() <= target || (hi - lo) <= 4.0 * f64::EPSILON * hi {
                return Ok(r);
            }
            if fr < 0.0 {
                lo = r;
                f_lo = fr;
                if side == -1 {
                    f_hi *= 0.5;
                }
                side = -1;
            } else {
                hi = r;
                f_hi = fr;
                if side == 1 {
                    f_lo *= 0.5;
                }
                side = 1;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Approximate `d_mu(z, w)`: the length of the segment measured in units of `rho_L`.
    pub fn dmu_approx(&self, z: Complex64, w: Complex64) -> Result<f64> {
        if z == w {
            return Ok(0.0);
        }
        // fixed endpoint order keeps the result exactly symmetric
        let (a, b) = if (z.re, z.im) <= (w.re, w.im) {
            (z, w)
        } else {
            (w, z)
        };
        let len = (b - a).norm();
        let mut failure = None;
        let v = integrate(
            |t| match self.rho(a + (b - a) * t) {
                Ok(r) => len / r,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            },
            0.0,
            1.0,
            Tolerance::rel(1e-10),
        );
        match failure {
            Some(e) => Err(e),
            None => v,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DoublingScan {
    pub max_ratio: f64,
    pub at: Complex64,
    pub radius: f64,
}

/// Largest `mu(D(z, 2r)) / mu(D(z, r))` over a grid of centres in `region`.
pub fn doubling_ratio_scan(weight: &Weight, region: &Rect, radii: &[f64]) -> Result<DoublingScan> {
    let mut best = DoublingScan {
        max_ratio: 0.0,
        at: region.center(),
        radius: f64::NAN,
    };
    for z in region.grid(9, 9) {
        for &r in radii {
            let small = weight.mu_disc_unit(z, r)?;
            if small <= 0.0 {
                return Err(GafError::DivisionByZeroMass { z, r });
            }
            let ratio = weight.mu_disc_unit(z, 2.0 * r)? / small;
            if ratio > best.max_ratio {
                best = DoublingScan {
                    max_ratio: ratio,
                    at: z,
                    radius: r,
                };
            }
        }
    }
    Ok(best)
}

/// Band width above which a measure is not treated as locally flat.
pub const FLATNESS_LIMIT: f64 = 1.5;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FlatnessScan {
    pub min_ratio: f64,
    pub max_ratio: f64,
}

impl FlatnessScan {
    pub fn band(&self) -> f64 {
        self.max_ratio - self.min_ratio
    }

    pub fn is_flat(&self) -> bool {
        self.band() <= FLATNESS_LIMIT
    }
}

/// Compares the mass of sub-discs `D'` of the unit-mass disc `D = D(z, rho_1(z))`
/// with the area-proportional share `(r(D') / r(D))^2`, across centres in `region`.
pub fn local_flatness_scan(weight: &Weight, region: &Rect) -> Result<FlatnessScan> {
    let field = RhoField::new(weight.clone(), 1.0);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for z in region.grid(5, 5) {
        let rho = field.rho(z)?;
        for frac in [0.5, 0.25, 0.125, 0.0625] {
            let r_sub = frac * rho;
            let mut centres = vec![z];
            for k in 0..8 {
                let th = k as f64 * PI / 4.0;
                centres.push(z + Complex64::from_polar((1.0 - frac) * rho, th));
            }
            for c in centres {
                let m = weight.mu_disc_unit(c, r_sub)? / (frac * frac);
                lo = lo.min(m);
                hi = hi.max(m);
            }
        }
    }
    Ok(FlatnessScan {
        min_ratio: lo,
        max_ratio: hi,
    })
}
