//! Analytic building blocks for phantoms: 1D longitudinal profiles and
//! radial bumps in two or three variables, all with closed-form derivatives
//! so that oracles can evaluate fields off the grid.
//!
//! Polynomial bumps `(1 - u^2)^p` are `C^{p-1}` at the support edge; the
//! mollified indicator glues its plateau to zero with a degree-7 smoothstep,
//! which is `C^3` and therefore comfortably inside `H^4` / `W^{2,inf}`.

use serde::{Deserialize, Serialize};

/// `C^3` smoothstep: 0 at 0, 1 at 1, three vanishing derivatives at both ends.
pub fn smoothstep7(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let t4 = t * t * t * t;
        t4 * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t * t * t)
    }
}

/// Derivative of [`smoothstep7`].
pub fn smoothstep7_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        let t3 = t * t * t;
        t3 * (140.0 - 420.0 * t + 420.0 * t * t - 140.0 * t3)
    }
}

/// One-dimensional profile on a support interval `[a, b]`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile1D {
    /// Identically zero.
    Zero,
    /// Constant 1 on all of `[-pi, pi]` (no compact support; background use).
    One,
    /// `amplitude * (1 - u^2)^power` with `u = (s - center)/radius`.
    PolyBump {
        center: f64,
        radius: f64,
        amplitude: f64,
        power: u32,
    },
    /// 1 on `[a + edge, b - edge]`, smoothstep ramps down to 0 at `a` and `b`.
    MollifiedIndicator { a: f64, b: f64, edge: f64 },
}

impl Profile1D {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Profile1D::Zero => 0.0,
            Profile1D::One => 1.0,
            Profile1D::PolyBump {
                center,
                radius,
                amplitude,
                power,
            } => {
                let u = (s - center) / radius;
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    amplitude * (1.0 - u * u).powi(*power as i32)
                }
            }
            Profile1D::MollifiedIndicator { a, b, edge } => {
                if s <= *a || s >= *b {
                    0.0
                } else if s < a + edge {
                    smoothstep7((s - a) / edge)
                } else if s > b - edge {
                    smoothstep7((b - s) / edge)
                } else {
                    1.0
                }
            }
        }
    }

    pub fn deriv(&self, s: f64) -> f64 {
        match self {
            Profile1D::Zero | Profile1D::One => 0.0,
            Profile1D::PolyBump {
                center,
                radius,
                amplitude,
                power,
            } => {
                let u = (s - center) / radius;
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    let p = *power as i32;
                    -amplitude * 2.0 * u * p as f64 * (1.0 - u * u).powi(p - 1) / radius
                }
            }
            Profile1D::MollifiedIndicator { a, b, edge } => {
                if s <= *a || s >= *b {
                    0.0
                } else if s < a + edge {
                    smoothstep7_deriv((s - a) / edge) / edge
                } else if s > b - edge {
                    -smoothstep7_deriv((b - s) / edge) / edge
                } else {
                    0.0
                }
            }
        }
    }

    /// Support interval (clamped to `[-pi, pi]` for the background profiles).
    pub fn support(&self) -> [f64; 2] {
        use std::f64::consts::PI;
        match self {
            Profile1D::Zero | Profile1D::One => [-PI, PI],
            Profile1D::PolyBump { center, radius, .. } => [center - radius, center + radius],
            Profile1D::MollifiedIndicator { a, b, .. } => [*a, *b],
        }
    }

    /// Uniform samples over `[lo, hi]`.
    pub fn sample(&self, lo: f64, hi: f64, n: usize) -> Vec<f64> {
        let ds = (hi - lo) / (n - 1) as f64;
        (0..n).map(|i| self.eval(lo + i as f64 * ds)).collect()
    }
}

/// Radial shape of a bump: polynomial `(1 - u^2)^power` or a Gaussian of
/// width `radius / 3.5` blended to zero near the support edge.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum BumpShape {
    Poly { power: u32 },
    Gaussian,
}

/// Compactly supported radial bump around a center in `dim` leading
/// coordinates (dim = 2 acts on `(x1, x2)`, dim = 3 on all). The support is
/// the ball `r < radius`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct RadialBump {
    pub dim: u8,
    pub center: [f64; 3],
    pub radius: f64,
    pub amplitude: f64,
    pub shape: BumpShape,
}

impl RadialBump {
    fn r2(&self, x: f64, y: f64, z: f64) -> f64 {
        let dx = x - self.center[0];
        let dy = y - self.center[1];
        let dz = z - self.center[2];
        match self.dim {
            2 => dx * dx + dy * dy,
            _ => dx * dx + dy * dy + dz * dz,
        }
    }

    /// Profile value and radial derivative as functions of `u = r / radius`.
    fn radial(&self, u: f64) -> (f64, f64) {
        if u >= 1.0 {
            return (0.0, 0.0);
        }
        match self.shape {
            BumpShape::Poly { power } => {
                let p = power as i32;
                let q = 1.0 - u * u;
                (q.powi(p), -2.0 * u * p as f64 * q.powi(p - 1))
            }
            BumpShape::Gaussian => {
                // sigma = radius / 3.5, cut to zero over u in (0.75, 1)
                let s = 3.5 * u;
                let g = (-0.5 * s * s).exp();
                let dg = -3.5 * s * g;
                if u <= 0.75 {
                    (g, dg)
                } else {
                    let t = (1.0 - u) / 0.25;
                    let cut = smoothstep7(t);
                    let dcut = -smoothstep7_deriv(t) / 0.25;
                    (g * cut, dg * cut + g * dcut)
                }
            }
        }
    }

    pub fn eval(&self, x: f64, y: f64, z: f64) -> f64 {
        let u = (self.r2(x, y, z)).sqrt() / self.radius;
        self.amplitude * self.radial(u).0
    }

    pub fn grad(&self, x: f64, y: f64, z: f64) -> [f64; 3] {
        let r = self.r2(x, y, z).sqrt();
        let u = r / self.radius;
        if u >= 1.0 || r < 1e-14 {
            return [0.0; 3];
        }
        let (_, dv) = self.radial(u);
        let common = self.amplitude * dv / (self.radius * r);
        let dx = x - self.center[0];
        let dy = y - self.center[1];
        let dz = z - self.center[2];
        match self.dim {
            2 => [common * dx, common * dy, 0.0],
            _ => [common * dx, common * dy, common * dz],
        }
    }

    /// Support bounding box (per-axis intervals); the third interval is the
    /// full line for 2D bumps.
    pub fn support_box(&self) -> [[f64; 2]; 3] {
        use std::f64::consts::PI;
        let mut out = [[0.0; 2]; 3];
        for d in 0..3 {
            if d == 2 && self.dim == 2 {
                out[d] = [-PI, PI];
            } else {
                out[d] = [self.center[d] - self.radius, self.center[d] + self.radius];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothstep_endpoints() {
        assert_eq!(smoothstep7(0.0), 0.0);
        assert_eq!(smoothstep7(1.0), 1.0);
        assert!((smoothstep7(0.5) - 0.5).abs() < 1e-12);
        // C^3: derivative vanishes to high order near the ends
        assert!(smoothstep7_deriv(1e-3) < 1e-6);
        assert!(smoothstep7_deriv(1.0 - 1e-3) < 1e-6);
    }

    #[test]
    fn profile_derivative_matches_finite_difference() {
        let profiles = [
            Profile1D::PolyBump {
                center: 0.1,
                radius: 0.8,
                amplitude: 1.3,
                power: 4,
            },
            Profile1D::MollifiedIndicator {
                a: -0.9,
                b: 0.9,
                edge: 0.25,
            },
        ];
        let eps = 1e-6;
        for p in &profiles {
            for i in 0..40 {
                let s = -1.0 + i as f64 * 0.05;
                let fd = (p.eval(s + eps) - p.eval(s - eps)) / (2.0 * eps);
                assert!(
                    (p.deriv(s) - fd).abs() < 1e-6,
                    "{p:?} at {s}: {} vs {fd}",
                    p.deriv(s)
                );
            }
        }
    }

    #[test]
    fn bump_gradient_matches_fd() {
        for shape in [BumpShape::Poly { power: 4 }, BumpShape::Gaussian] {
            let b = RadialBump {
                dim: 3,
                center: [0.2, -0.1, 0.0],
                radius: 0.9,
                amplitude: 0.7,
                shape,
            };
            let eps = 1e-6;
            for (x, y, z) in [(0.4, 0.1, -0.3), (0.9, 0.1, 0.05), (0.21, -0.09, 0.01)] {
                let g = b.grad(x, y, z);
                let fdx = (b.eval(x + eps, y, z) - b.eval(x - eps, y, z)) / (2.0 * eps);
                let fdz = (b.eval(x, y, z + eps) - b.eval(x, y, z - eps)) / (2.0 * eps);
                assert!((g[0] - fdx).abs() < 1e-6, "{shape:?} grad_x {} vs {fdx}", g[0]);
                assert!((g[2] - fdz).abs() < 1e-6, "{shape:?} grad_z {} vs {fdz}", g[2]);
            }
        }
    }

    #[test]
    fn bump_2d_ignores_third_coordinate() {
        let b = RadialBump {
            dim: 2,
            center: [0.0, 0.0, 0.0],
            radius: 1.0,
            amplitude: 1.0,
            shape: BumpShape::Poly { power: 3 },
        };
        assert_eq!(b.eval(0.3, 0.2, -2.0), b.eval(0.3, 0.2, 1.4));
        assert_eq!(b.grad(0.3, 0.2, 0.9)[2], 0.0);
    }

    #[test]
    fn bump_vanishes_outside_support() {
        for shape in [BumpShape::Poly { power: 3 }, BumpShape::Gaussian] {
            let b = RadialBump {
                dim: 3,
                center: [0.0; 3],
                radius: 0.8,
                amplitude: 2.0,
                shape,
            };
            assert_eq!(b.eval(0.81, 0.0, 0.0), 0.0);
            assert_eq!(b.grad(0.0, 0.85, 0.0), [0.0; 3]);
        }
    }
}
