//! Independent verification oracles: free-space closed-form solutions
//! evaluated by quadrature on the analytic phantom terms. These never touch
//! the solver paths they are used to check.

use num_complex::Complex64;

use crate::config::AnalyticPhantom;
use crate::quad::sphere_quadrature;

/// Free-space wave field at one point via the spherical-means solution
/// `u = d/dt (t M_t f) + t M_t h` in three dimensions. Valid for `c = sigma
/// = 1`; the phantom is evaluated analytically at the sphere nodes.
pub fn kirchhoff_point(
    phantom: &AnalyticPhantom,
    x: [f64; 3],
    t: f64,
    n_polar: usize,
    n_azimuth: usize,
) -> f64 {
    if t == 0.0 {
        return phantom.f(x[0], x[1], x[2]);
    }
    let (dirs, w) = sphere_quadrature(n_polar, n_azimuth);
    let mut mean_f = 0.0;
    let mut mean_df = 0.0;
    let mut mean_h = 0.0;
    for (d, wi) in dirs.iter().zip(w.iter()) {
        let p = [x[0] + t * d[0], x[1] + t * d[1], x[2] + t * d[2]];
        mean_f += wi * phantom.f(p[0], p[1], p[2]);
        let g = phantom.grad_f(p[0], p[1], p[2]);
        mean_df += wi * (g[0] * d[0] + g[1] * d[1] + g[2] * d[2]);
        mean_h += wi * phantom.h(p[0], p[1], p[2]);
    }
    let norm = 1.0 / (4.0 * std::f64::consts::PI);
    norm * (mean_f + t * mean_df + t * mean_h)
}

/// Outgoing free-space frequency-domain field at one point:
/// `u_hat(x) = int G_k(x - y) (i k f(y) + h(y)) dy`,
/// `G_k = e^{i k r} / (4 pi r)`, by a refined midpoint rule over the source
/// support. The probe must stay a few cells away from the support.
pub fn helmholtz_green_point(
    phantom: &AnalyticPhantom,
    support_box: [[f64; 2]; 3],
    k: f64,
    x: [f64; 3],
    n_sub: usize,
) -> Complex64 {
    let ik = Complex64::new(0.0, k);
    let steps = [
        (support_box[0][1] - support_box[0][0]) / n_sub as f64,
        (support_box[1][1] - support_box[1][0]) / n_sub as f64,
        (support_box[2][1] - support_box[2][0]) / n_sub as f64,
    ];
    let dv = steps[0] * steps[1] * steps[2];
    let mut acc = Complex64::default();
    for a in 0..n_sub {
        let ya = support_box[0][0] + (a as f64 + 0.5) * steps[0];
        for b in 0..n_sub {
            let yb = support_box[1][0] + (b as f64 + 0.5) * steps[1];
            for c in 0..n_sub {
                let yc = support_box[2][0] + (c as f64 + 0.5) * steps[2];
                let src = ik * phantom.f(ya, yb, yc) + phantom.h(ya, yb, yc);
                if src == Complex64::default() {
                    continue;
                }
                let r = ((x[0] - ya).powi(2) + (x[1] - yb).powi(2) + (x[2] - yc).powi(2)).sqrt();
                let green = Complex64::from_polar(1.0 / (4.0 * std::f64::consts::PI * r), k * r);
                acc += green * src;
            }
        }
    }
    acc * dv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{FieldTerm, SourceForm};
    use crate::profile::{BumpShape, RadialBump};

    fn free_space_bump() -> AnalyticPhantom {
        AnalyticPhantom {
            f_form: SourceForm::Terms(vec![FieldTerm::Radial(RadialBump {
                dim: 3,
                center: [0.0; 3],
                radius: 0.6,
                amplitude: 1.0,
                shape: BumpShape::Poly { power: 4 },
            })]),
            h_terms: vec![],
            c_terms: vec![],
            sigma_terms: vec![],
        }
    }

    #[test]
    fn kirchhoff_at_time_zero_is_f() {
        let p = free_space_bump();
        let u = kirchhoff_point(&p, [0.1, 0.0, 0.2], 0.0, 16, 32);
        assert_eq!(u, p.f(0.1, 0.0, 0.2));
    }

    /// Huygens: after the front passes, the field at the origin is exactly 0.
    #[test]
    fn kirchhoff_sharp_rear_front() {
        let p = free_space_bump();
        let before = kirchhoff_point(&p, [0.0; 3], 0.3, 24, 48);
        let after = kirchhoff_point(&p, [0.0; 3], 0.8, 24, 48);
        assert!(before.abs() > 1e-4, "field should be active at t=0.3");
        assert!(after.abs() < 1e-12, "field must vanish after the front");
    }

    /// The spherical-mean solution of the 3D wave equation conserves the
    /// value along the characteristic cone for a radial pulse; check the
    /// classic `u(0, t) = f(t)`-type identity against a second quadrature
    /// resolution for convergence.
    #[test]
    fn kirchhoff_quadrature_converges() {
        let p = free_space_bump();
        let coarse = kirchhoff_point(&p, [0.25, -0.1, 0.05], 0.4, 12, 24);
        let fine = kirchhoff_point(&p, [0.25, -0.1, 0.05], 0.4, 32, 64);
        assert!((coarse - fine).abs() < 1e-6, "{coarse} vs {fine}");
    }
}
