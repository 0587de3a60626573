//! Quadrature rules and extrapolation helpers shared across the crate:
//! end-corrected trapezoid (Gregory) weights for uniform samples, Gauss
//! quadrature on the sphere, small-parameter Richardson extrapolation, and
//! log-log slope fits.

use num_complex::Complex64;

/// Unit weights of the fourth-order end-corrected trapezoid rule on `n`
/// uniform samples spanning `n - 1` intervals; multiply by the spacing.
/// Falls back to plain trapezoid below 8 samples.
pub fn gregory_weights(n: usize) -> Vec<f64> {
    assert!(n >= 2, "need at least two samples");
    let mut w = vec![1.0; n];
    if n >= 8 {
        let edge = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
        for (i, e) in edge.iter().enumerate() {
            w[i] = *e;
            w[n - 1 - i] = *e;
        }
    } else {
        w[0] = 0.5;
        w[n - 1] = 0.5;
    }
    w
}

/// Integrate uniformly sampled real values with spacing `dx`.
pub fn integrate_uniform(values: &[f64], dx: f64) -> f64 {
    let w = gregory_weights(values.len());
    dx * values.iter().zip(w.iter()).map(|(v, w)| v * w).sum::<f64>()
}

/// Integrate uniformly sampled complex values with spacing `dx`.
pub fn integrate_uniform_complex(values: &[Complex64], dx: f64) -> Complex64 {
    let w = gregory_weights(values.len());
    dx * values
        .iter()
        .zip(w.iter())
        .map(|(v, w)| v * w)
        .sum::<Complex64>()
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Newton iteration from the Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Product quadrature on the unit sphere: Gauss-Legendre in `cos(theta)`
/// times a uniform azimuthal grid. Returns direction vectors and weights
/// summing to `4 pi`.
pub fn sphere_quadrature(n_polar: usize, n_azimuth: usize) -> (Vec<[f64; 3]>, Vec<f64>) {
    let (ct, wt) = gauss_legendre(n_polar);
    let dphi = 2.0 * std::f64::consts::PI / n_azimuth as f64;
    let mut dirs = Vec::with_capacity(n_polar * n_azimuth);
    let mut weights = Vec::with_capacity(n_polar * n_azimuth);
    for (c, w) in ct.iter().zip(wt.iter()) {
        let s = (1.0 - c * c).sqrt();
        for a in 0..n_azimuth {
            let phi = a as f64 * dphi;
            dirs.push([s * phi.cos(), s * phi.sin(), *c]);
            weights.push(w * dphi);
        }
    }
    (dirs, weights)
}

/// Value at zero of the polynomial in `t^2` through all nodes `(t_i, v_i)`
/// (Lagrange form). Two nodes give classical Richardson elimination of the
/// leading `t^2` term.
pub fn richardson_t2(nodes: &[(f64, Complex64)]) -> Complex64 {
    assert!(nodes.len() >= 2);
    let mut out = Complex64::default();
    for (i, (ti, vi)) in nodes.iter().enumerate() {
        let ti2 = ti * ti;
        let mut l = 1.0;
        for (j, (tj, _)) in nodes.iter().enumerate() {
            if i != j {
                let tj2 = tj * tj;
                l *= tj2 / (tj2 - ti2);
            }
        }
        out += vi * l;
    }
    out
}

/// Least-squares fit of `v = a + b / k^2` over samples `(k_i, v_i)`;
/// returns `(a, b)`.
pub fn fit_inverse_k2(samples: &[(f64, Complex64)]) -> (Complex64, Complex64) {
    assert!(samples.len() >= 2);
    let n = samples.len() as f64;
    let (mut sx, mut sxx) = (0.0, 0.0);
    let (mut sy, mut sxy) = (Complex64::default(), Complex64::default());
    for (k, v) in samples {
        let x = 1.0 / (k * k);
        sx += x;
        sxx += x * x;
        sy += v;
        sxy += v * x;
    }
    let det = n * sxx - sx * sx;
    let b = (sxy * n - sy * sx) / det;
    let a = (sy - b * sx) / n;
    (a, b)
}

/// Least-squares line through `(ln x, ln y)`. Returns slope, intercept and a
/// residual-based half-width (two standard errors of the slope).
pub fn fit_loglog(samples: &[(f64, f64)]) -> (f64, f64, f64) {
    assert!(samples.len() >= 2);
    let pts: Vec<(f64, f64)> = samples.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let det = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / n;
    let half_width = if pts.len() > 2 {
        let ss_res: f64 = pts
            .iter()
            .map(|(x, y)| {
                let r = y - (intercept + slope * x);
                r * r
            })
            .sum();
        let var_slope = ss_res / (n - 2.0) * n / det;
        2.0 * var_slope.sqrt()
    } else {
        0.0
    };
    (slope, intercept, half_width)
}

/// Observed convergence order from three successive errors at refinement
/// ratio `r` (error halving sequence: coarse, mid, fine).
pub fn observed_order(e_coarse: f64, e_fine: f64, r: f64) -> f64 {
    (e_coarse / e_fine).ln() / r.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gregory_integrates_cubics_exactly() {
        // x^3 on [0, 1]: the order-4 end correction must be exact.
        let n = 33;
        let dx = 1.0 / (n - 1) as f64;
        let vals: Vec<f64> = (0..n).map(|i| (i as f64 * dx).powi(3)).collect();
        let q = integrate_uniform(&vals, dx);
        assert!((q - 0.25).abs() < 1e-14, "got {q}");
    }

    #[test]
    fn gregory_fourth_order_on_oscillation() {
        let f = |x: f64| (3.0 * x).sin();
        let exact = (1.0 - (3.0f64).cos()) / 3.0;
        let err_at = |n: usize| {
            let dx = 1.0 / (n - 1) as f64;
            let vals: Vec<f64> = (0..n).map(|i| f(i as f64 * dx)).collect();
            (integrate_uniform(&vals, dx) - exact).abs()
        };
        let order = observed_order(err_at(17), err_at(33), 2.0);
        assert!(order > 3.5, "observed order {order}");
    }

    #[test]
    fn sphere_quadrature_integrates_harmonics() {
        let (dirs, w) = sphere_quadrature(16, 32);
        let total: f64 = w.iter().sum();
        assert!((total - 4.0 * PI).abs() < 1e-12);
        // integral of z^2 over the sphere is 4 pi / 3
        let z2: f64 = dirs
            .iter()
            .zip(w.iter())
            .map(|(d, w)| d[2] * d[2] * w)
            .sum();
        assert!((z2 - 4.0 * PI / 3.0).abs() < 1e-12, "z2 {z2}");
    }

    #[test]
    fn richardson_kills_quadratic_term() {
        let truth = Complex64::new(2.0, -1.0);
        let v = |t: f64| truth + Complex64::new(3.0, 0.5) * t * t;
        let nodes = [(0.05, v(0.05)), (0.1, v(0.1))];
        let ex = richardson_t2(&nodes);
        assert!((ex - truth).norm() < 1e-13);
    }

    #[test]
    fn inverse_k2_fit_recovers_constant() {
        let truth = Complex64::new(0.7, 0.2);
        let b = Complex64::new(5.0, -3.0);
        let samples: Vec<(f64, Complex64)> = [8.0, 12.0, 16.0, 24.0, 32.0]
            .iter()
            .map(|&k| (k, truth + b / (k * k)))
            .collect();
        let (a, bee) = fit_inverse_k2(&samples);
        assert!((a - truth).norm() < 1e-12);
        assert!((bee - b).norm() < 1e-9);
    }

    #[test]
    fn loglog_fit_exact_power() {
        let samples: Vec<(f64, f64)> = [8.0, 12.0, 16.0, 24.0, 32.0]
            .iter()
            .map(|&k: &f64| (k, 5.0 * k.powf(-3.0)))
            .collect();
        let (slope, intercept, hw) = fit_loglog(&samples);
        assert!((slope + 3.0).abs() < 1e-12, "slope {slope}");
        assert!((intercept - 5.0f64.ln()).abs() < 1e-12);
        assert!(hw < 1e-12);
    }
}
