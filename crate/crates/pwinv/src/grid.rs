//! Uniform periodic grid on the reference cube `Q = [-pi, pi]^3` and the
//! axis-aligned observation box embedded in it.
//!
//! All fields live on the nodes `x_i = -pi + i*h`, `h = 2*pi/n`, with periodic
//! topology (the node at `+pi` is identified with `-pi`). Reductions over the
//! grid are slab-decomposed with a fixed sequential fold so that results do not
//! depend on the number of worker threads.

use ndarray::Array3;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::ConfigError;

/// Uniform grid resolution descriptor for the cube `Q = [-pi, pi]^3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    n: usize,
}

impl Grid {
    /// A grid with `n` nodes per axis. `n` must be even and at least 16.
    pub fn new(n: usize) -> Result<Self, ConfigError> {
        if n < 16 || n % 2 != 0 {
            return Err(ConfigError::BadGrid { n });
        }
        Ok(Grid { n })
    }

    /// Nodes per axis.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Grid spacing `2*pi/n`.
    #[inline]
    pub fn h(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    /// Coordinate of node `i`.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        -PI + i as f64 * self.h()
    }

    /// Cell volume `h^3`.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        let h = self.h();
        h * h * h
    }

    /// Total nodes `n^3`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Zero-filled real field.
    pub fn zeros(&self) -> Array3<f64> {
        Array3::zeros((self.n, self.n, self.n))
    }

    /// Zero-filled complex field.
    pub fn zeros_complex(&self) -> Array3<Complex64> {
        Array3::zeros((self.n, self.n, self.n))
    }

    /// Evaluate an analytic function at every node.
    pub fn sample(&self, f: impl Fn(f64, f64, f64) -> f64 + Sync) -> Array3<f64> {
        let n = self.n;
        let h = self.h();
        let mut out = self.zeros();
        out.as_slice_mut()
            .unwrap()
            .par_chunks_mut(n * n)
            .enumerate()
            .for_each(|(i, slab)| {
                let x = -PI + i as f64 * h;
                for j in 0..n {
                    let y = -PI + j as f64 * h;
                    for k in 0..n {
                        let z = -PI + k as f64 * h;
                        slab[j * n + k] = f(x, y, z);
                    }
                }
            });
        out
    }
}

/// Deterministic parallel sum: slabs are reduced in parallel, partials are
/// folded in index order, so the result is independent of thread count.
pub fn sum_slabs(n_slabs: usize, slab_sum: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
    let partials: Vec<f64> = (0..n_slabs).into_par_iter().map(slab_sum).collect();
    partials.iter().sum()
}

/// Complex variant of [`sum_slabs`].
pub fn sum_slabs_complex(
    n_slabs: usize,
    slab_sum: impl Fn(usize) -> Complex64 + Sync + Send,
) -> Complex64 {
    let partials: Vec<Complex64> = (0..n_slabs).into_par_iter().map(slab_sum).collect();
    partials.iter().sum()
}

/// `L^2(Q)` norm of a real field (`sqrt(h^3 * sum f^2)`).
pub fn norm_l2(grid: &Grid, f: &Array3<f64>) -> f64 {
    let n = grid.n();
    let s = f.as_slice().unwrap();
    let total = sum_slabs(n, |i| {
        s[i * n * n..(i + 1) * n * n].iter().map(|v| v * v).sum()
    });
    (total * grid.cell_volume()).sqrt()
}

/// `L^2(Q)` norm of a complex field.
pub fn norm_l2_complex(grid: &Grid, f: &Array3<Complex64>) -> f64 {
    let n = grid.n();
    let s = f.as_slice().unwrap();
    let total = sum_slabs(n, |i| {
        s[i * n * n..(i + 1) * n * n]
            .iter()
            .map(|v| v.norm_sqr())
            .sum()
    });
    (total * grid.cell_volume()).sqrt()
}

/// Max absolute value of a real field.
pub fn norm_max(f: &Array3<f64>) -> f64 {
    f.as_slice()
        .unwrap()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Max modulus of a complex field.
pub fn norm_max_complex(f: &Array3<Complex64>) -> f64 {
    f.as_slice()
        .unwrap()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.norm()))
}

/// Axis-aligned observation box with faces on grid planes.
///
/// `lo`/`hi` are inclusive node indices of the box faces per axis; the box
/// interior is `x(lo_d) < x_d < x(hi_d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OmegaBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl OmegaBox {
    /// Centered cube with half-width `a`, snapped to the nearest grid plane.
    /// Errors if `a` is not grid-aligned or leaves no margin to `dQ`.
    pub fn centered(grid: &Grid, a: f64) -> Result<Self, ConfigError> {
        let h = grid.h();
        let cells = a / h;
        let c = cells.round() as i64;
        if (cells - c as f64).abs() > 1e-9 {
            return Err(ConfigError::UnalignedOmega { a, h });
        }
        let c = c as usize;
        let mid = grid.n() / 2;
        if c == 0 || c >= mid {
            return Err(ConfigError::UnalignedOmega { a, h });
        }
        Ok(OmegaBox {
            lo: [mid - c; 3],
            hi: [mid + c; 3],
        })
    }

    /// Half-widths in physical units.
    pub fn half_widths(&self, grid: &Grid) -> [f64; 3] {
        let mut out = [0.0; 3];
        for d in 0..3 {
            out[d] = 0.5 * (grid.x(self.hi[d]) - grid.x(self.lo[d]));
        }
        out
    }

    /// Diameter of the box.
    pub fn diameter(&self, grid: &Grid) -> f64 {
        let w = self.half_widths(grid);
        2.0 * (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt()
    }

    /// True if the node `(i, j, k)` lies inside or on the box.
    #[inline]
    pub fn contains(&self, i: usize, j: usize, k: usize) -> bool {
        i >= self.lo[0]
            && i <= self.hi[0]
            && j >= self.lo[1]
            && j <= self.hi[1]
            && k >= self.lo[2]
            && k <= self.hi[2]
    }

    /// Node counts per axis (inclusive).
    pub fn node_counts(&self) -> [usize; 3] {
        [
            self.hi[0] - self.lo[0] + 1,
            self.hi[1] - self.lo[1] + 1,
            self.hi[2] - self.lo[2] + 1,
        ]
    }
}

/// `L^2` norm restricted to the box (trapezoid-weighted nodal sum).
pub fn norm_l2_box(grid: &Grid, omega: &OmegaBox, f: &Array3<f64>) -> f64 {
    let n = grid.n();
    let s = f.as_slice().unwrap();
    let (lo, hi) = (omega.lo, omega.hi);
    let total = sum_slabs(hi[0] - lo[0] + 1, |ii| {
        let i = lo[0] + ii;
        let wi = if i == lo[0] || i == hi[0] { 0.5 } else { 1.0 };
        let mut acc = 0.0;
        for j in lo[1]..=hi[1] {
            let wj = if j == lo[1] || j == hi[1] { 0.5 } else { 1.0 };
            let base = (i * n + j) * n;
            let mut row = 0.0;
            for k in lo[2]..=hi[2] {
                let wk = if k == lo[2] || k == hi[2] { 0.5 } else { 1.0 };
                let v = s[base + k];
                row += wk * v * v;
            }
            acc += wi * wj * row;
        }
        acc
    });
    (total * grid.cell_volume()).sqrt()
}

/// Complex variant of [`norm_l2_box`].
pub fn norm_l2_box_complex(grid: &Grid, omega: &OmegaBox, f: &Array3<Complex64>) -> f64 {
    let n = grid.n();
    let s = f.as_slice().unwrap();
    let (lo, hi) = (omega.lo, omega.hi);
    let total = sum_slabs(hi[0] - lo[0] + 1, |ii| {
        let i = lo[0] + ii;
        let wi = if i == lo[0] || i == hi[0] { 0.5 } else { 1.0 };
        let mut acc = 0.0;
        for j in lo[1]..=hi[1] {
            let wj = if j == lo[1] || j == hi[1] { 0.5 } else { 1.0 };
            let base = (i * n + j) * n;
            let mut row = 0.0;
            for k in lo[2]..=hi[2] {
                let wk = if k == lo[2] || k == hi[2] { 0.5 } else { 1.0 };
                row += wk * s[base + k].norm_sqr();
            }
            acc += wi * wj * row;
        }
        acc
    });
    (total * grid.cell_volume()).sqrt()
}

/// Max modulus restricted to the box.
pub fn norm_max_box_complex(grid: &Grid, omega: &OmegaBox, f: &Array3<Complex64>) -> f64 {
    let n = grid.n();
    let s = f.as_slice().unwrap();
    let mut m = 0.0f64;
    for i in omega.lo[0]..=omega.hi[0] {
        for j in omega.lo[1]..=omega.hi[1] {
            let base = (i * n + j) * n;
            for k in omega.lo[2]..=omega.hi[2] {
                m = m.max(s[base + k].norm());
            }
        }
    }
    m
}

/// Tiny deterministic RNG (xorshift64*) for synthetic test data and noise
/// injection; keeps runs reproducible without external dependencies.
#[derive(Debug, Clone)]
pub struct XorShift64 {
    state: u64,
}

impl XorShift64 {
    pub fn new(seed: u64) -> Self {
        XorShift64 { state: seed.max(1) }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545F4914F6CDD1D)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in [-1, 1).
    pub fn next_sym(&mut self) -> f64 {
        2.0 * self.next_f64() - 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_small_or_odd() {
        assert!(Grid::new(8).is_err());
        assert!(Grid::new(17).is_err());
        assert!(Grid::new(16).is_ok());
    }

    #[test]
    fn node_coordinates_span_q() {
        let g = Grid::new(16).unwrap();
        assert!((g.x(0) + PI).abs() < 1e-15);
        assert!(g.x(8).abs() < 1e-15);
        assert!((g.x(16) - PI).abs() < 1e-15);
    }

    #[test]
    fn l2_norm_of_constant() {
        let g = Grid::new(16).unwrap();
        let f = g.sample(|_, _, _| 2.0);
        let expect = (4.0 * (2.0 * PI).powi(3)).sqrt();
        assert!((norm_l2(&g, &f) - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn omega_box_alignment() {
        let g = Grid::new(64).unwrap();
        let b = OmegaBox::centered(&g, 14.0 * g.h()).unwrap();
        assert_eq!(b.lo, [18; 3]);
        assert_eq!(b.hi, [46; 3]);
        assert!(OmegaBox::centered(&g, 1.0).is_err());
    }

    #[test]
    fn deterministic_sum_matches_serial() {
        let vals: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let serial: f64 = vals.chunks(10).map(|c| c.iter().sum::<f64>()).sum();
        let par = sum_slabs(100, |i| vals[i * 10..(i + 1) * 10].iter().sum());
        assert_eq!(serial, par);
    }
}
