//! Zero counting by the argument principle and zero location by quadtree plus Newton.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{GafError, Result};
use crate::geometry::{Disc, Rect, Region};
use crate::stats::testfn::TestFunction;

/// An entire function together with its derivative.
pub trait Holomorphic: Sync {
    fn eval(&self, z: Complex64) -> (Complex64, Complex64);

    /// Typical zero spacing on `rect`; contours are sampled finer than this.
    fn length_scale(&self, rect: &Rect) -> f64;

    /// `log` of the natural size of `|f(z)|`, used to normalize residuals.
    fn log_scale(&self, _z: Complex64) -> f64 {
        0.0
    }

    /// Whether `f` may be evaluated on all of `rect`.
    fn domain_contains(&self, _rect: &Rect) -> bool {
        true
    }
}

/// Closure-backed [`Holomorphic`] with a fixed length scale.
pub struct AnalyticFn<F> {
    f: F,
    scale: f64,
}

impl<F> AnalyticFn<F>
where
    F: Fn(Complex64) -> (Complex64, Complex64) + Sync,
{
    pub fn new(f: F, scale: f64) -> Self {
        AnalyticFn { f, scale }
    }
}

impl<F> Holomorphic for AnalyticFn<F>
where
    F: Fn(Complex64) -> (Complex64, Complex64) + Sync,
{
    fn eval(&self, z: Complex64) -> (Complex64, Complex64) {
        (self.f)(z)
    }

    fn length_scale(&self, _rect: &Rect) -> f64 {
        self.scale
    }
}

/// Failure of a single contour, retried by the callers.
#[derive(Debug)]
struct Suspect;

/// Total change of `arg f` along a closed parametrized path, in turns.
///
/// Steps are bisected until the change is below a quarter turn and agrees with the
/// trapezoid estimate of `Im int f'/f`.
fn winding<H, P>(f: &H, path: P, n0: usize) -> std::result::Result<i64, Suspect>
where
    H: Holomorphic + ?Sized,
    P: Fn(f64) -> (Complex64, Complex64),
{
    struct Node {
        t: f64,
        f: Complex64,
        g: Complex64,
    }
    let node = |t: f64| -> std::result::Result<Node, Suspect> {
        let (z, dz) = path(t);
        let (v, dv) = f.eval(z);
        if v == Complex64::new(0.0, 0.0) || !v.norm().is_finite() {
            return Err(Suspect);
        }
        Ok(Node { t, f: v, g: dv * dz / v })
    };
    let mut total = 0.0;
    for k in 0..n0 {
        let a = node(k as f64 / n0 as f64)?;
        let b = node((k + 1) as f64 / n0 as f64)?;
        let mut stack = vec![(a, b, 0u32)];
        while let Some((a, b, depth)) = stack.pop() {
            let d = (b.f / a.f).arg();
            let pred = 0.5 * (a.g.im + b.g.im) * (b.t - a.t);
            if d.abs() < 0.5 * PI && (d - pred).abs() < 0.3 {
                total += d;
                continue;
            }
            if depth > 40 {
                return Err(Suspect);
            }
            let m = node(0.5 * (a.t + b.t))?;
            let m2 = Node { t: m.t, f: m.f, g: m.g };
            stack.push((m, b, depth + 1));
            stack.push((a, m2, depth + 1));
        }
    }
    let turns = total / (2.0 * PI);
    let k = turns.round();
    if (turns - k).abs() > 0.1 {
        return Err(Suspect);
    }
    Ok(k as i64)
}

fn samples_for(perimeter: f64, scale: f64) -> usize {
    ((perimeter / scale).ceil() as usize).clamp(8, 100_000)
}

fn circle_winding<H: Holomorphic + ?Sized>(f: &H, d: &Disc, scale: f64) -> std::result::Result<i64, Suspect> {
    let n = samples_for(2.0 * PI * d.radius, scale);
    winding(
        f,
        |t| {
            let e = Complex64::from_polar(1.0, 2.0 * PI * t);
            (d.center + e * d.radius, e * Complex64::new(0.0, 2.0 * PI * d.radius))
        },
        n,
    )
}

fn rect_winding<H: Holomorphic + ?Sized>(f: &H, r: &Rect, scale: f64) -> std::result::Result<i64, Suspect> {
    let c = r.corners();
    let lens = [r.width(), r.height(), r.width(), r.height()];
    let per: f64 = lens.iter().sum();
    let n = samples_for(per, scale).max(8);
    let n = n.div_ceil(4) * 4;
    winding(
        f,
        |t| {
            let side = ((t * 4.0).floor() as usize).min(3);
            let s = t * 4.0 - side as f64;
            let a = c[side];
            let b = c[(side + 1) % 4];
            (a + (b - a) * s, (b - a) * 4.0)
        },
        n,
    )
}

const MAX_ATTEMPTS: usize = 5;

/// Number of zeros of `f` in `disc`; the radius is nudged when a zero sits on the circle.
pub fn count_zeros_argument<H: Holomorphic + ?Sized>(f: &H, disc: &Disc) -> Result<usize> {
    let scale = f.length_scale(&disc.bounding_rect()).min(disc.radius);
    for attempt in 0..=MAX_ATTEMPTS {
        let nudge = if attempt == 0 {
            0.0
        } else {
            let s = if attempt % 2 == 0 { 1.0 } else { -1.0 };
            s * attempt as f64 * 1e-6 * scale
        };
        let d = Disc::new(disc.center, disc.radius + nudge);
        if let Ok(k) = circle_winding(f, &d, scale) {
            if k >= 0 {
                return Ok(k as usize);
            }
        }
    }
    Err(GafError::BoundaryZeroSuspected {
        radius: disc.radius,
        attempts: MAX_ATTEMPTS + 1,
    })
}

/// Zeros found inside a region.
#[derive(Clone, Debug)]
pub struct ZeroSet {
    pub zeros: Vec<Complex64>,
    /// `|f(z)|` divided by the natural scale of `f` at `z`.
    pub residuals: Vec<f64>,
    pub region: Region,
    pub tol: f64,
}

impl ZeroSet {
    pub fn len(&self) -> usize {
        self.zeros.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeros.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// CSV with columns `re, im, residual`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["re", "im", "residual"])?;
        for (z, r) in self.zeros.iter().zip(&self.residuals) {
            w.write_record([z.re.to_string(), z.im.to_string(), r.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn newton<H: Holomorphic + ?Sized>(f: &H, start: Complex64, tol: f64, cell: &Rect) -> Option<Complex64> {
    let mut z = start;
    let reach = cell.padded(0.5 * cell.width().max(cell.height()));
    for _ in 0..60 {
        let (v, dv) = f.eval(z);
        if dv == Complex64::new(0.0, 0.0) {
            return None;
        }
        let step = v / dv;
        z -= step;
        if !reach.contains(z) || !z.re.is_finite() {
            return None;
        }
        if step.norm() < tol {
            return Some(z);
        }
    }
    None
}

/// Locates every zero of `f` in `region` to absolute tolerance `tol`.
///
/// Cells of a quadtree carry zero counts from rectangle contours; a cell holding one
/// zero is finished by Newton's method, a cell holding more is split.
pub fn locate_zeros<H: Holomorphic + ?Sized>(f: &H, region: &Region, tol: f64) -> Result<ZeroSet> {
    let root = region.bounding_rect();
    if !f.domain_contains(&root) {
        return Err(GafError::OutOfCertifiedDomain {
            z: Complex64::new(root.max_abs(), 0.0),
            radius: f64::NAN,
        });
    }
    let scale = f.length_scale(&root);
    let min_cell = (1e-7 * scale).max(64.0 * tol);

    let mut root_cell = None;
    for attempt in 0..=MAX_ATTEMPTS {
        let r = root.padded(attempt as f64 * 1e-6 * scale);
        if let Ok(k) = rect_winding(f, &r, scale) {
            if k >= 0 {
                root_cell = Some((r, k as usize));
                break;
            }
        }
    }
    let (root, count) = root_cell.ok_or(GafError::BoundaryZeroSuspected {
        radius: root.diameter() / 2.0,
        attempts: MAX_ATTEMPTS + 1,
    })?;

    let mut found = Vec::with_capacity(count);
    let mut stack = vec![(root, count)];
    while let Some((cell, n)) = stack.pop() {
        if n == 0 {
            continue;
        }
        let size = cell.width().max(cell.height());
        if n == 1 {
            if let Some(z) = newton(f, cell.center(), tol, &cell) {
                if cell.padded(tol).contains(z) {
                    found.push(z);
                    continue;
                }
            }
            if size < min_cell {
                return Err(GafError::NewtonDivergence { near: cell.center() });
            }
        } else if size < min_cell {
            return Err(GafError::MultipleZero { near: cell.center() });
        }
        let mut children = None;
        for attempt in 0..=MAX_ATTEMPTS {
            // off-centre split points keep symmetric configurations off the edges
            let off = 0.0137 * (attempt as f64 + 1.0);
            let split = Complex64::new(
                cell.x_min + cell.width() * (0.5 + off),
                cell.y_min + cell.height() * (0.5 - 0.7 * off),
            );
            let quads = cell.quadrants(split);
            let counts: std::result::Result<Vec<i64>, Suspect> = quads
                .iter()
                .map(|q| rect_winding(f, q, scale.min(q.width().max(q.height()))))
                .collect();
            if let Ok(cs) = counts {
                if cs.iter().all(|&k| k >= 0) && cs.iter().sum::<i64>() == n as i64 {
                    children = Some((quads, cs));
                    break;
                }
            }
        }
        let Some((quads, counts)) = children else {
            // contours this close to a cluster lose the phase to rounding
            if size < 1e-5 * scale {
                return Err(GafError::MultipleZero { near: cell.center() });
            }
            return Err(GafError::BoundaryZeroSuspected {
                radius: size,
                attempts: MAX_ATTEMPTS + 1,
            });
        };
        for (q, k) in quads.into_iter().zip(counts).rev() {
            stack.push((q, k as usize));
        }
    }

    found.retain(|z| region.contains(*z));
    found.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    for i in 0..found.len() {
        for j in i + 1..found.len() {
            if (found[i] - found[j]).norm() < 10.0 * tol {
                return Err(GafError::MultipleZero { near: found[i] });
            }
        }
    }
    let residuals = found
        .iter()
        .map(|&z| f.eval(z).0.norm().ln() - f.log_scale(z))
        .map(f64::exp)
        .collect();
    Ok(ZeroSet {
        zeros: found,
        residuals,
        region: *region,
        tol,
    })
}

/// `n(psi, L) = (1/L) sum_k psi(z_k)`.
pub fn linear_statistic(zs: &ZeroSet, psi: &TestFunction, l: f64) -> Result<f64> {
    if !zs.region.contains_disc(&psi.support()) {
        return Err(GafError::SupportEscapesRegion);
    }
    Ok(zs.zeros.iter().map(|z| psi.value(*z)).sum::<f64>() / l)
}
