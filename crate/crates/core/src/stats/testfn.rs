//! Smooth test functions with analytic Laplacians.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::geometry::Disc;

/// Level below which a Gaussian bump is treated as zero.
const GAUSSIAN_CUTOFF: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    /// `height * (1 - |z - center|^2 / radius^2)^3` inside the disc, 0 outside. C^2.
    PolynomialBump {
        center: Complex64,
        radius: f64,
        height: f64,
    },
    /// `height * exp(-|z - center|^2 / width^2)`, cut where it drops below `1e-14 height`.
    GaussianBump {
        center: Complex64,
        width: f64,
        height: f64,
    },
}

impl TestFunction {
    pub fn center(&self) -> Complex64 {
        match *self {
            TestFunction::PolynomialBump { center, .. } | TestFunction::GaussianBump { center, .. } => {
                center
            }
        }
    }

    pub fn is_valid(&self) -> bool {
        let (c, s, h) = match *self {
            TestFunction::PolynomialBump {
                center,
                radius,
                height,
            } => (center, radius, height),
            TestFunction::GaussianBump {
                center,
                width,
                height,
            } => (center, width, height),
        };
        c.re.is_finite() && c.im.is_finite() && s > 0.0 && s.is_finite() && h.is_finite()
    }

    /// Disc outside which the function vanishes (or is below the cutoff).
    pub fn support(&self) -> Disc {
        match *self {
            TestFunction::PolynomialBump { center, radius, .. } => Disc::new(center, radius),
            TestFunction::GaussianBump { center, width, .. } => {
                Disc::new(center, width * (-GAUSSIAN_CUTOFF.ln()).sqrt())
            }
        }
    }

    pub fn value(&self, z: Complex64) -> f64 {
        match *self {
            TestFunction::PolynomialBump {
                center,
                radius,
                height,
            } => {
                let s = (z - center).norm_sqr() / (radius * radius);
                if s >= 1.0 {
                    0.0
                } else {
                    height * (1.0 - s).powi(3)
                }
            }
            TestFunction::GaussianBump {
                center,
                width,
                height,
            } => {
                let d2 = (z - center).norm_sqr();
                if d2 >= self.support().radius.powi(2) {
                    0.0
                } else {
                    height * (-d2 / (width * width)).exp()
                }
            }
        }
    }

    pub fn laplacian(&self, z: Complex64) -> f64 {
        match *self {
            TestFunction::PolynomialBump {
                center,
                radius,
                height,
            } => {
                let s = (z - center).norm_sqr() / (radius * radius);
                if s >= 1.0 {
                    0.0
                } else {
                    12.0 * height * (1.0 - s) * (3.0 * s - 1.0) / (radius * radius)
                }
            }
            TestFunction::GaussianBump { center, width, .. } => {
                let d2 = (z - center).norm_sqr();
                let w2 = width * width;
                (4.0 * d2 / (w2 * w2) - 4.0 / w2) * self.value(z)
            }
        }
    }

    /// `int psi dm`.
    pub fn integral(&self) -> f64 {
        match *self {
            TestFunction::PolynomialBump { radius, height, .. } => PI * radius * radius * height / 4.0,
            TestFunction::GaussianBump { width, height, .. } => {
                PI * width * width * height * (1.0 - GAUSSIAN_CUTOFF)
            }
        }
    }

    pub fn scaled(&self, k: f64) -> TestFunction {
        match *self {
            TestFunction::PolynomialBump {
                center,
                radius,
                height,
            } => TestFunction::PolynomialBump {
                center,
                radius,
                height: height * k,
            },
            TestFunction::GaussianBump {
                center,
                width,
                height,
            } => TestFunction::GaussianBump {
                center,
                width,
                height: height * k,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;

    fn fd_laplacian(f: &TestFunction, z: Complex64, h: f64) -> f64 {
        let mut acc = -4.0 * f.value(z);
        for d in [Complex64::new(h, 0.0), Complex64::new(0.0, h)] {
            acc += f.value(z + d) + f.value(z - d);
        }
        acc / (h * h)
    }

    #[test]
    fn laplacians_match_finite_differences() {
        let fns = [
            TestFunction::PolynomialBump {
                center: Complex64::new(0.1, -0.2),
                radius: 0.5,
                height: 2.0,
            },
            TestFunction::GaussianBump {
                center: Complex64::new(0.0, 0.3),
                width: 0.2,
                height: 1.5,
            },
        ];
        for f in fns {
            for z in Rect::square(f.center(), 0.3).grid(7, 7) {
                let a = f.laplacian(z);
                let n = fd_laplacian(&f, z, 1e-4);
                let scale = f.laplacian(f.center()).abs();
                assert!((a - n).abs() <= 1e-6 * scale, "{f:?} at {z}: {a} vs {n}");
            }
        }
    }

    #[test]
    fn polynomial_bump_integral() {
        let f = TestFunction::PolynomialBump {
            center: Complex64::new(0.0, 0.0),
            radius: 0.7,
            height: 1.0,
        };
        let gl = crate::quad::GaussLegendre::new(20);
        let v = 2.0 * PI * gl.integrate(|r| r * f.value(Complex64::new(r, 0.0)), 0.0, 0.7);
        assert!((v - f.integral()).abs() < 1e-14);
        assert_eq!(f.scaled(2.0).value(Complex64::new(0.1, 0.0)), 2.0 * f.value(Complex64::new(0.1, 0.0)));
    }

    #[test]
    fn serde_round_trip() {
        let f = TestFunction::GaussianBump {
            center: Complex64::new(0.5, -0.5),
            width: 0.1,
            height: 1.0,
        };
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains("\"kind\":\"gaussian_bump\""));
        assert_eq!(serde_json::from_str::<TestFunction>(&s).unwrap(), f);
    }
}
