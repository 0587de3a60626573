//! Shared discrete-operator pieces: face-averaged `sigma`, the periodic
//! divergence-gradient stencil in real and complex arithmetic, fourth-order
//! gradients, and boundary-trace extraction for complex fields.

use ndarray::Array3;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::dataset::BoundaryLayout;
use crate::grid::Grid;

/// `sigma` averaged onto the three positive face directions.
#[derive(Debug, Clone)]
pub struct FaceSigma {
    pub sx: Array3<f64>,
    pub sy: Array3<f64>,
    pub sz: Array3<f64>,
}

pub fn build_face_sigma(grid: &Grid, sigma: &Array3<f64>) -> FaceSigma {
    let n = grid.n();
    let mut sx = grid.zeros();
    let mut sy = grid.zeros();
    let mut sz = grid.zeros();
    for i in 0..n {
        let ip = (i + 1) % n;
        for j in 0..n {
            let jp = (j + 1) % n;
            for k in 0..n {
                let kp = (k + 1) % n;
                sx[[i, j, k]] = 0.5 * (sigma[[i, j, k]] + sigma[[ip, j, k]]);
                sy[[i, j, k]] = 0.5 * (sigma[[i, j, k]] + sigma[[i, jp, k]]);
                sz[[i, j, k]] = 0.5 * (sigma[[i, j, k]] + sigma[[i, j, kp]]);
            }
        }
    }
    FaceSigma { sx, sy, sz }
}

macro_rules! div_sigma_grad_impl {
    ($name:ident, $t:ty) => {
        /// `div_h(sigma grad_h u)` with periodic wrap (per `h^2`: divide by
        /// `h*h` is already applied).
        pub fn $name(grid: &Grid, fs: &FaceSigma, u: &Array3<$t>) -> Array3<$t> {
            let n = grid.n();
            let nn = n * n;
            let h2 = grid.h() * grid.h();
            let us = u.as_slice().unwrap();
            let sx = fs.sx.as_slice().unwrap();
            let sy = fs.sy.as_slice().unwrap();
            let sz = fs.sz.as_slice().unwrap();
            let mut out: Array3<$t> = Array3::default((n, n, n));
            out.as_slice_mut()
                .unwrap()
                .par_chunks_mut(nn)
                .enumerate()
                .for_each(|(i, slab)| {
                    let im = (i + n - 1) % n;
                    let ip = (i + 1) % n;
                    for j in 0..n {
                        let jm = (j + n - 1) % n;
                        let jp = (j + 1) % n;
                        for k in 0..n {
                            let km = (k + n - 1) % n;
                            let kp = (k + 1) % n;
                            let c = i * nn + j * n + k;
                            let div = (us[ip * nn + j * n + k] - us[c]) * sx[c]
                                - (us[c] - us[im * nn + j * n + k]) * sx[im * nn + j * n + k]
                                + (us[i * nn + jp * n + k] - us[c]) * sy[c]
                                - (us[c] - us[i * nn + jm * n + k]) * sy[i * nn + jm * n + k]
                                + (us[i * nn + j * n + kp] - us[c]) * sz[c]
                                - (us[c] - us[i * nn + j * n + km]) * sz[i * nn + j * n + km];
                            slab[j * n + k] = div / h2;
                        }
                    }
                });
            out
        }
    };
}

div_sigma_grad_impl!(div_sigma_grad, f64);
div_sigma_grad_impl!(div_sigma_grad_c, Complex64);

/// Fourth-order centered gradient (periodic) of a complex field.
pub fn gradient4_c(grid: &Grid, u: &Array3<Complex64>) -> [Array3<Complex64>; 3] {
    let n = grid.n();
    let nn = n * n;
    let us = u.as_slice().unwrap();
    let inv12h = 1.0 / (12.0 * grid.h());
    let mut out: [Array3<Complex64>; 3] = [
        Array3::default((n, n, n)),
        Array3::default((n, n, n)),
        Array3::default((n, n, n)),
    ];
    for (d, arr) in out.iter_mut().enumerate() {
        arr.as_slice_mut()
            .unwrap()
            .par_chunks_mut(nn)
            .enumerate()
            .for_each(|(i, slab)| {
                for j in 0..n {
                    for k in 0..n {
                        let at = |off: i64| -> Complex64 {
                            let mut idx = [i, j, k];
                            idx[d] = (idx[d] as i64 + off).rem_euclid(n as i64) as usize;
                            us[idx[0] * nn + idx[1] * n + idx[2]]
                        };
                        slab[j * n + k] =
                            (-at(2) + at(1) * 8.0 - at(-1) * 8.0 + at(-2)) * inv12h;
                    }
                }
            });
    }
    out
}

/// Complex boundary Cauchy pair `[node][u, flux]` with the same
/// face-centered conservative flux used for the time-domain dataset.
pub fn extract_boundary_c(
    grid: &Grid,
    sigma: &Array3<f64>,
    layout: &BoundaryLayout,
    u: &Array3<Complex64>,
    out: &mut [Complex64],
) {
    let n = grid.n();
    let h = grid.h();
    let nn = n * n;
    let us = u.as_slice().unwrap();
    let fs = build_face_sigma(grid, sigma);
    out.par_chunks_mut(2)
        .zip(layout.nodes.par_iter())
        .for_each(|(pair, node)| {
            let [i, j, k] = node.idx;
            let c = i * nn + j * n + k;
            let mut outside = node.idx;
            outside[node.axis] =
                (outside[node.axis] as i64 + node.side as i64).rem_euclid(n as i64) as usize;
            let mut face = node.idx;
            if node.side < 0 {
                face[node.axis] = outside[node.axis];
            }
            let face_sigma = match node.axis {
                0 => &fs.sx,
                1 => &fs.sy,
                _ => &fs.sz,
            };
            let sf = face_sigma.as_slice().unwrap()[face[0] * nn + face[1] * n + face[2]];
            pair[0] = us[c];
            pair[1] = (us[outside[0] * nn + outside[1] * n + outside[2]] - us[c]) * (sf / h);
        });
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn laplacian_eigenmode_is_exact() {
        let g = Grid::new(16).unwrap();
        let sigma = g.sample(|_, _, _| 1.0);
        let fs = build_face_sigma(&g, &sigma);
        let u = g.sample(|x, _, _| (3.0 * x).sin());
        let lu = div_sigma_grad(&g, &fs, &u);
        let h = g.h();
        let lambda = -4.0 / (h * h) * (3.0 * h / 2.0).sin().powi(2);
        for (a, b) in lu.iter().zip(u.iter()) {
            assert!((a - lambda * b).abs() < 1e-11, "{a} vs {}", lambda * b);
        }
    }

    #[test]
    fn gradient4_matches_analytic_mode() {
        let g = Grid::new(32).unwrap();
        let mut u = g.zeros_complex();
        for i in 0..32 {
            for j in 0..32 {
                for k in 0..32 {
                    u[[i, j, k]] =
                        Complex64::from_polar(1.0, 2.0 * g.x(i) - 1.0 * g.x(k));
                }
            }
        }
        let grad = gradient4_c(&g, &u);
        // 4th-order derivative of e^{imx}: i m_eff u with m_eff = m(1 + O((mh)^4))
        let h = g.h();
        let m_eff = |m: f64| (8.0 * (m * h).sin() - (2.0 * m * h).sin()) / (6.0 * h);
        let (e0, e2) = (m_eff(2.0), m_eff(-1.0));
        for idx in [[0usize, 0, 0], [5, 7, 9], [31, 1, 16]] {
            let v = u[idx];
            let i = Complex64::new(0.0, 1.0);
            assert!((grad[0][idx] - i * e0 * v).norm() < 1e-12);
            assert!(grad[1][idx].norm() < 1e-12);
            assert!((grad[2][idx] - i * e2 * v).norm() < 1e-12);
        }
        assert!((e0 - 2.0).abs() < 2.0 * (2.0f64 * h).powi(4) / 30.0 + 1e-9);
        let _ = PI;
    }
}
