//! Rectangles and discs in the complex plane.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Rect {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    /// Square of half-width `h` centred at `c`.
    pub fn square(c: Complex64, h: f64) -> Self {
        Rect::new(c.re - h, c.re + h, c.im - h, c.im + h)
    }

    pub fn is_valid(&self) -> bool {
        [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite())
            && self.x_max > self.x_min
            && self.y_max > self.y_min
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.x_min && z.re <= self.x_max && z.im >= self.y_min && z.im <= self.y_max
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x_min >= self.x_min
            && other.x_max <= self.x_max
            && other.y_min >= self.y_min
            && other.y_max <= self.y_max
    }

    pub fn contains_disc(&self, d: &Disc) -> bool {
        self.contains_rect(&d.bounding_rect())
    }

    pub fn padded(&self, pad: f64) -> Rect {
        Rect::new(
            self.x_min - pad,
            self.x_max + pad,
            self.y_min - pad,
            self.y_max + pad,
        )
    }

    pub fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.x_min, self.y_min),
            Complex64::new(self.x_max, self.y_min),
            Complex64::new(self.x_max, self.y_max),
            Complex64::new(self.x_min, self.y_max),
        ]
    }

    /// Largest modulus attained on the rectangle.
    pub fn max_abs(&self) -> f64 {
        self.corners()
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// Smallest modulus attained on the rectangle.
    pub fn min_abs(&self) -> f64 {
        let x = if self.x_min > 0.0 {
            self.x_min
        } else if self.x_max < 0.0 {
            self.x_max
        } else {
            0.0
        };
        let y = if self.y_min > 0.0 {
            self.y_min
        } else if self.y_max < 0.0 {
            self.y_max
        } else {
            0.0
        };
        x.hypot(y)
    }

    /// `n x m` grid of points including the boundary.
    pub fn grid(&self, nx: usize, ny: usize) -> Vec<Complex64> {
        let mut pts = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            let y = if ny == 1 {
                0.5 * (self.y_min + self.y_max)
            } else {
                self.y_min + self.height() * j as f64 / (ny - 1) as f64
            };
            for i in 0..nx {
                let x = if nx == 1 {
                    0.5 * (self.x_min + self.x_max)
                } else {
                    self.x_min + self.width() * i as f64 / (nx - 1) as f64
                };
                pts.push(Complex64::new(x, y));
            }
        }
        pts
    }

    /// Split into four quadrants at `split`.
    pub fn quadrants(&self, split: Complex64) -> [Rect; 4] {
        [
            Rect::new(self.x_min, split.re, self.y_min, split.im),
            Rect::new(split.re, self.x_max, self.y_min, split.im),
            Rect::new(self.x_min, split.re, split.im, self.y_max),
            Rect::new(split.re, self.x_max, split.im, self.y_max),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disc {
    pub center: Complex64,
    pub radius: f64,
}

impl Disc {
    pub fn new(center: Complex64, radius: f64) -> Self {
        Disc { center, radius }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.center).norm() < self.radius
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius
    }

    pub fn bounding_rect(&self) -> Rect {
        Rect::square(self.center, self.radius)
    }

    pub fn is_valid(&self) -> bool {
        self.center.re.is_finite() && self.center.im.is_finite() && self.radius > 0.0
    }

    /// Distance from `z` (inside the disc) to the boundary along direction `u` (|u| = 1).
    pub fn ray_exit(&self, z: Complex64, u: Complex64) -> f64 {
        let d = z - self.center;
        let b = d.re * u.re + d.im * u.im;
        let c = d.norm_sqr() - self.radius * self.radius;
        let disc = b * b - c;
        if disc <= 0.0 {
            return 0.0;
        }
        (-b + disc.sqrt()).max(0.0)
    }
}

/// Region on which zeros are located.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Rect(Rect),
    Disc(Disc),
}

impl Region {
    pub fn bounding_rect(&self) -> Rect {
        match self {
            Region::Rect(r) => *r,
            Region::Disc(d) => d.bounding_rect(),
        }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        match self {
            Region::Rect(r) => r.contains(z),
            Region::Disc(d) => d.contains(z),
        }
    }

    pub fn contains_disc(&self, other: &Disc) -> bool {
        match self {
            Region::Rect(r) => r.contains_disc(other),
            Region::Disc(d) => {
                (other.center - d.center).norm() + other.radius <= d.radius * (1.0 + 1e-12)
            }
        }
    }

    pub fn center(&self) -> Complex64 {
        match self {
            Region::Rect(r) => r.center(),
            Region::Disc(d) => d.center,
        }
    }
}
