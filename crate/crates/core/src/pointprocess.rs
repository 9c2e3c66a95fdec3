//! Random functions and point processes: sampling sequences, basis and frame
//! GAF samples, and the inhomogeneous Poisson baseline.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand_distr::{Distribution, Poisson};

use crate::error::{GafError, Result};
use crate::fock::{BasisModel, FrameModel, KernelModel};
use crate::geometry::Rect;
use crate::measure::{RhoField, Weight};
use crate::rng::Stream;
use crate::zeros::Holomorphic;

/// Padding, in units of `rho_L`, between an experiment region and the frame window.
pub const FRAME_PAD: f64 = 16.0;

/// Separated, covering point set adapted to `rho_L`.
#[derive(Clone, Debug)]
pub struct SamplingSequence {
    points: Vec<Complex64>,
    rho: Vec<f64>,
    window: Rect,
    delta: f64,
    covering_r: f64,
    l: f64,
}

/// Minimum and maximum of `rho_L` over `rect`, sampled on a grid plus the point closest to 0.
pub fn rho_range(field: &RhoField, rect: &Rect) -> Result<(f64, f64)> {
    let mut pts = rect.grid(9, 9);
    let near = Complex64::new(
        0f64.clamp(rect.x_min, rect.x_max),
        0f64.clamp(rect.y_min, rect.y_max),
    );
    pts.push(near);
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for p in pts {
        let r = field.rho(p)?;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}

struct Grid {
    cell: f64,
    origin: Complex64,
    map: HashMap<(i64, i64), Vec<usize>>,
}

impl Grid {
    fn key(&self, z: Complex64) -> (i64, i64) {
        (
            ((z.re - self.origin.re) / self.cell).floor() as i64,
            ((z.im - self.origin.im) / self.cell).floor() as i64,
        )
    }

    fn insert(&mut self, z: Complex64, idx: usize) {
        let k = self.key(z);
        self.map.entry(k).or_default().push(idx);
    }

    fn near(&self, z: Complex64, reach: i64) -> impl Iterator<Item = usize> + '_ {
        let (kx, ky) = self.key(z);
        (-reach..=reach).flat_map(move |dx| {
            (-reach..=reach).flat_map(move |dy| {
                self.map
                    .get(&(kx + dx, ky + dy))
                    .into_iter()
                    .flatten()
                    .copied()
            })
        })
    }
}

/// Greedy separated set on a fine grid, then densified until every probe point
/// `z` has a sequence point within `covering_r * rho_L(z)`.
pub fn make_sampling_sequence(
    field: &RhoField,
    window: Rect,
    delta: f64,
    covering_r: f64,
) -> Result<SamplingSequence> {
    if !(delta > 0.0 && covering_r > delta) {
        return Err(GafError::InvalidArgument(format!(
            "need 0 < delta < covering radius, got delta={delta}, R={covering_r}"
        )));
    }
    let (rho_min, rho_max) = rho_range(field, &window)?;
    let (rho_min, rho_max) = (0.9 * rho_min, 1.1 * rho_max);
    let mut grid = Grid {
        cell: delta * rho_max,
        origin: Complex64::new(window.x_min, window.y_min),
        map: HashMap::new(),
    };
    let mut points: Vec<Complex64> = Vec::new();
    let mut rho: Vec<f64> = Vec::new();

    let try_insert = |c: Complex64,
                      points: &mut Vec<Complex64>,
                      rho: &mut Vec<f64>,
                      grid: &mut Grid|
     -> Result<bool> {
        // cheap rejection first, using only the stored radii
        if grid
            .near(c, 1)
            .any(|i| (points[i] - c).norm() < delta * rho[i])
        {
            return Ok(false);
        }
        let rc = field.rho(c)?;
        if grid
            .near(c, 1)
            .any(|i| (points[i] - c).norm() < delta * rc.max(rho[i]))
        {
            return Ok(false);
        }
        grid.insert(c, points.len());
        points.push(c);
        rho.push(rc);
        Ok(true)
    };

    let pitch = 0.25 * delta * rho_min;
    let nx = (window.width() / pitch).ceil() as usize + 1;
    let ny = (window.height() / pitch).ceil() as usize + 1;
    for j in 0..ny {
        let y = (window.y_min + j as f64 * pitch).min(window.y_max);
        for i in 0..nx {
            let x = (window.x_min + i as f64 * pitch).min(window.x_max);
            try_insert(Complex64::new(x, y), &mut points, &mut rho, &mut grid)?;
        }
    }

    let probe_pitch = 0.5 * (covering_r - delta) * rho_min;
    let reach = (covering_r / delta).ceil() as i64 + 1;
    let px = (window.width() / probe_pitch).ceil() as usize + 1;
    let py = (window.height() / probe_pitch).ceil() as usize + 1;
    let max_rounds = 8;
    for round in 0..=max_rounds {
        let mut uncovered = Vec::new();
        for j in 0..py {
            let y = (window.y_min + j as f64 * probe_pitch).min(window.y_max);
            for i in 0..px {
                let z = Complex64::new((window.x_min + i as f64 * probe_pitch).min(window.x_max), y);
                let nearest = grid
                    .near(z, reach)
                    .map(|k| (points[k] - z).norm())
                    .fold(f64::INFINITY, f64::min);
                if nearest <= covering_r * rho_min {
                    continue;
                }
                if nearest > covering_r * field.rho(z)? {
                    uncovered.push(z);
                }
            }
        }
        if uncovered.is_empty() {
            return Ok(SamplingSequence {
                points,
                rho,
                window,
                delta,
                covering_r,
                l: field.l(),
            });
        }
        if round == max_rounds {
            break;
        }
        for z in uncovered {
            try_insert(z, &mut points, &mut rho, &mut grid)?;
        }
    }
    Err(GafError::CoverageFailure { rounds: max_rounds })
}

impl SamplingSequence {
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// `rho_L` at each point.
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn window(&self) -> &Rect {
        &self.window
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn covering_r(&self) -> f64 {
        self.covering_r
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Smallest `min(|a - b| / max(rho(a), rho(b)))` over pairs, brute force.
    pub fn min_separation(&self) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.points.len() {
            for j in i + 1..self.points.len() {
                let d = (self.points[i] - self.points[j]).norm() / self.rho[i].max(self.rho[j]);
                m = m.min(d);
            }
        }
        m
    }

    /// Smallest `#(points in D) / mu_L(D)` over discs `D = D(z, r rho_L(z))` inside the window.
    pub fn lower_density_ratio(&self, field: &RhoField, r: f64) -> Result<f64> {
        let mut worst = f64::INFINITY;
        for z in self.window.grid(7, 7) {
            let rad = r * field.rho(z)?;
            let disc = crate::geometry::Disc::new(z, rad);
            if !self.window.contains_disc(&disc) {
                continue;
            }
            let count = self.points.iter().filter(|p| disc.contains(**p)).count();
            let mass = field.weight().mu_disc(z, rad, field.l())?;
            worst = worst.min(count as f64 / mass);
        }
        Ok(worst)
    }

    /// CSV with columns `re, im, rho_L`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["re", "im", "rho_L"])?;
        for (p, r) in self.points.iter().zip(&self.rho) {
            w.write_record([p.re.to_string(), p.im.to_string(), r.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One realization of a GAF, stored as coefficients in the orthonormal basis.
#[derive(Clone, Debug)]
pub struct GafSample<'a> {
    basis: &'a BasisModel,
    /// Gaussian coefficients as drawn (per basis element or per frame point).
    coeffs: Vec<Complex64>,
    /// Coefficients of `e_n`.
    series: Vec<Complex64>,
    seed: u64,
    stream: u64,
}

impl<'a> GafSample<'a> {
    /// `sum a_n e_n` with `a_n` the `n`-th Gaussian of the stream.
    pub fn basis(model: &'a BasisModel, seed: u64, stream: u64) -> Self {
        let mut s = Stream::new(seed, stream);
        let coeffs: Vec<Complex64> = (0..model.n_terms()).map(|_| s.complex_gaussian()).collect();
        GafSample {
            basis: model,
            series: coeffs.clone(),
            coeffs,
            seed,
            stream,
        }
    }

    /// Same as [`GafSample::basis`] with the `k`-th draw attached to `e_{order[k]}`.
    pub fn basis_with_order(
        model: &'a BasisModel,
        seed: u64,
        stream: u64,
        order: &[usize],
    ) -> Result<Self> {
        let n = model.n_terms();
        let mut seen = vec![false; n];
        if order.len() != n || order.iter().any(|&k| k >= n || std::mem::replace(&mut seen[k], true)) {
            return Err(GafError::InvalidArgument(
                "order must be a permutation of the basis indices".into(),
            ));
        }
        let mut s = Stream::new(seed, stream);
        let mut series = vec![Complex64::new(0.0, 0.0); n];
        let mut coeffs = Vec::with_capacity(n);
        for &k in order {
            let a = s.complex_gaussian();
            series[k] = a;
            coeffs.push(a);
        }
        Ok(GafSample {
            basis: model,
            coeffs,
            series,
            seed,
            stream,
        })
    }

    /// Deterministic function with the given basis coefficients.
    pub fn from_series(model: &'a BasisModel, series: Vec<Complex64>) -> Self {
        GafSample {
            basis: model,
            coeffs: series.clone(),
            series,
            seed: 0,
            stream: 0,
        }
    }

    /// `sum_lambda a_lambda K(z, lambda) / sqrt(K(lambda, lambda))`, projected on the basis.
    /// `region` must sit `FRAME_PAD rho_L` inside the generation window.
    pub fn frame(model: &'a FrameModel, seed: u64, stream: u64, region: &Rect) -> Result<Self> {
        let basis = model.basis();
        let (_, rho_max) = rho_range(basis.rho_field(), region)?;
        if !model
            .sequence()
            .window()
            .contains_rect(&region.padded(FRAME_PAD * rho_max))
        {
            return Err(GafError::RegionNotPadded);
        }
        let mut s = Stream::new(seed, stream);
        let pts = model.sequence().points();
        let coeffs: Vec<Complex64> = (0..pts.len()).map(|_| s.complex_gaussian()).collect();
        let mut series = vec![Complex64::new(0.0, 0.0); basis.n_terms()];
        let mut v = Vec::new();
        for ((p, a), ld) in pts.iter().zip(&coeffs).zip(model.lambda_log_diag()) {
            basis.weighted_basis_vector(*p, &mut v)?;
            let scale = *a * (-0.5 * ld).exp();
            for (b, e) in series.iter_mut().zip(&v) {
                *b += scale * e.conj();
            }
        }
        Ok(GafSample {
            basis,
            coeffs,
            series,
            seed,
            stream,
        })
    }

    /// Draws from whichever form `model` describes; `region` is only used by frames.
    pub fn sample(model: &'a KernelModel, seed: u64, stream: u64, region: &Rect) -> Result<Self> {
        match model {
            KernelModel::Basis(b) => Ok(Self::basis(b, seed, stream)),
            KernelModel::Frame(f) => Self::frame(f, seed, stream, region),
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn series(&self) -> &[Complex64] {
        &self.series
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn model(&self) -> &BasisModel {
        self.basis
    }

    pub fn value(&self, z: Complex64) -> Complex64 {
        self.basis.eval_series(&self.series, z).0
    }
}

/// Frame GAF evaluated point by point from its kernel sections; used in tests.
pub fn frame_direct_eval(model: &FrameModel, coeffs: &[Complex64], z: Complex64) -> Result<Complex64> {
    let b = model.basis();
    let mut acc = Complex64::new(0.0, 0.0);
    for ((p, a), ld) in model
        .sequence()
        .points()
        .iter()
        .zip(coeffs)
        .zip(model.lambda_log_diag())
    {
        let (m, s) = b.kernel_scaled(z, *p)?;
        let log_diag = ld + 2.0 * b.potential_l(*p);
        acc += a * m * (s - 0.5 * log_diag).exp();
    }
    Ok(acc)
}

impl Holomorphic for GafSample<'_> {
    fn eval(&self, z: Complex64) -> (Complex64, Complex64) {
        self.basis.eval_series(&self.series, z)
    }

    fn length_scale(&self, rect: &Rect) -> f64 {
        rho_range(self.basis.rho_field(), rect)
            .map(|r| r.0)
            .unwrap_or(f64::NAN)
    }

    fn log_scale(&self, z: Complex64) -> f64 {
        0.5 * self.basis.log_kernel_diag(z).unwrap_or(f64::NAN)
    }

    fn domain_contains(&self, rect: &Rect) -> bool {
        rect.max_abs() <= self.basis.domain_radius() * (1.0 + 1e-12)
    }
}

/// Poisson process with intensity `intensity_scale * L * dmu`, restricted to `region`.
///
/// Thinning from the density supremum; for `alpha < 2` the singular neighbourhood of
/// 0 is sampled exactly from its radial law instead.
pub fn sample_poisson_pp(
    field: &RhoField,
    region: &Rect,
    intensity_scale: f64,
    seed: u64,
    stream: u64,
) -> Result<Vec<Complex64>> {
    let l = field.l();
    let weight = field.weight();
    let mut rng = Stream::new(seed, stream);
    let mut out = Vec::new();
    let mut micro = 0.0;
    if let Weight::RadialPower { alpha } = *weight {
        if alpha < 2.0 && region.min_abs() == 0.0 {
            micro = 0.1 * field.rho(Complex64::new(0.0, 0.0))?;
            let mass = intensity_scale * l * PI * alpha * micro.powf(alpha);
            let n = draw_poisson(&mut rng, mass)?;
            for _ in 0..n {
                let r = micro * rng.uniform().powf(1.0 / alpha);
                let z = Complex64::from_polar(r, 2.0 * PI * rng.uniform());
                if region.contains(z) {
                    out.push(z);
                }
            }
        }
    }
    let sup = if micro > 0.0 {
        weight.density(Complex64::new(micro, 0.0))
    } else {
        weight.density_sup(region)
    };
    if !sup.is_finite() {
        return Err(GafError::UnboundedDensity);
    }
    let lam_max = intensity_scale * l * sup;
    let n = draw_poisson(&mut rng, lam_max * region.area())?;
    for _ in 0..n {
        let z = Complex64::new(
            region.x_min + region.width() * rng.uniform(),
            region.y_min + region.height() * rng.uniform(),
        );
        let u = rng.uniform();
        if z.norm() < micro {
            continue;
        }
        if u * lam_max < intensity_scale * l * weight.density(z) {
            out.push(z);
        }
    }
    Ok(out)
}

fn draw_poisson(rng: &mut Stream, mean: f64) -> Result<u64> {
    if mean <= 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(mean).map_err(|e| GafError::InvalidArgument(e.to_string()))?;
    Ok(d.sample(rng.rng_mut()) as u64)
}
