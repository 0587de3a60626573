//! 3D complex FFT passes over `ndarray` fields, plus the shifted Fourier
//! basis `e_alpha(x) = (2 pi)^{-3/2} e^{i alpha . x}` with half-integer third
//! component `alpha_3 = m_3 - 1/2`.
//!
//! The half-cell shift is realized by pre/post-multiplying with the phase ramp
//! `e^{i l h / 2}` along the third axis so that ordinary integer-lattice
//! transforms can be reused. Coefficients are normalized so that Parseval is
//! exact: `sum |coef|^2 = h^3 sum |f|^2 = ||f||^2_{L^2(Q)}`.

use ndarray::Array3;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

/// Signed frequency of FFT bin `b` on an `n`-grid, with the Nyquist bin
/// mapped to `+n/2` so the shifted third-axis set is symmetric.
#[inline]
pub fn bin_freq(b: usize, n: usize) -> i64 {
    if b <= n / 2 {
        b as i64
    } else {
        b as i64 - n as i64
    }
}

/// Cached forward/inverse FFT plans for one cube size.
pub struct Fft3 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft3 {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Unnormalized forward DFT along all three axes, in place.
    pub fn forward(&self, field: &mut Array3<Complex64>) {
        self.pass_axis2(field, &self.fwd);
        self.pass_axis1(field, &self.fwd);
        self.pass_axis0(field, &self.fwd);
    }

    /// Inverse DFT along all three axes with the `1/n^3` normalization.
    pub fn inverse(&self, field: &mut Array3<Complex64>) {
        self.pass_axis2(field, &self.inv);
        self.pass_axis1(field, &self.inv);
        self.pass_axis0(field, &self.inv);
        let scale = 1.0 / (self.n * self.n * self.n) as f64;
        field.as_slice_mut().unwrap().par_iter_mut().for_each(|v| {
            *v *= scale;
        });
    }

    fn pass_axis2(&self, field: &mut Array3<Complex64>, plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        field
            .as_slice_mut()
            .unwrap()
            .par_chunks_mut(n)
            .for_each_init(
                || vec![Complex64::default(); plan.get_inplace_scratch_len()],
                |scratch, line| plan.process_with_scratch(line, scratch),
            );
    }

    fn pass_axis1(&self, field: &mut Array3<Complex64>, plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        field
            .as_slice_mut()
            .unwrap()
            .par_chunks_mut(n * n)
            .for_each_init(
                || {
                    (
                        vec![Complex64::default(); n],
                        vec![Complex64::default(); plan.get_outofplace_scratch_len()],
                    )
                },
                |(buf, scratch), plane| {
                    for k in 0..n {
                        for j in 0..n {
                            buf[j] = plane[j * n + k];
                        }
                        let mut out = vec![Complex64::default(); n];
                        plan.process_outofplace_with_scratch(buf, &mut out, scratch);
                        for j in 0..n {
                            plane[j * n + k] = out[j];
                        }
                    }
                },
            );
    }

    fn pass_axis0(&self, field: &mut Array3<Complex64>, plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let nn = n * n;
        let slice = field.as_slice_mut().unwrap();
        let ptr = SendPtr(slice.as_mut_ptr());
        (0..nn).into_par_iter().for_each_init(
            || {
                (
                    vec![Complex64::default(); n],
                    vec![Complex64::default(); plan.get_inplace_scratch_len()],
                )
            },
            |(buf, scratch), jk| {
                let p = ptr;
                for i in 0..n {
                    buf[i] = unsafe { *p.0.add(i * nn + jk) };
                }
                plan.process_with_scratch(buf, scratch);
                for i in 0..n {
                    unsafe { *p.0.add(i * nn + jk) = buf[i] };
                }
            },
        );
    }
}

#[derive(Clone, Copy)]
struct SendPtr(*mut Complex64);
// Each parallel task touches a disjoint stride class of the buffer.
unsafe impl Send for SendPtr {}
unsafe impl Sync for SendPtr {}

/// Transform between nodal values and coefficients in the shifted basis.
pub struct ShiftedBasis {
    fft: Fft3,
}

impl ShiftedBasis {
    pub fn new(n: usize) -> Self {
        ShiftedBasis { fft: Fft3::new(n) }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.fft.n()
    }

    /// Lattice vector `alpha` stored at bin `(b1, b2, b3)`.
    #[inline]
    pub fn alpha(&self, b1: usize, b2: usize, b3: usize) -> [f64; 3] {
        let n = self.n();
        [
            bin_freq(b1, n) as f64,
            bin_freq(b2, n) as f64,
            bin_freq(b3, n) as f64 - 0.5,
        ]
    }

    /// Nodal field -> coefficients `f_hat_alpha` (same array layout, bins).
    pub fn to_coeffs(&self, field: &Array3<Complex64>) -> Array3<Complex64> {
        let n = self.n();
        let h = 2.0 * PI / n as f64;
        let mut g = field.clone();
        // ramp e^{i l h / 2} along axis 2 folds the half-integer shift into
        // integer-lattice transforms
        g.as_slice_mut()
            .unwrap()
            .par_chunks_mut(n)
            .for_each(|line| {
                for (l, v) in line.iter_mut().enumerate() {
                    *v *= Complex64::from_polar(1.0, 0.5 * l as f64 * h);
                }
            });
        self.fft.forward(&mut g);
        let scale = (2.0 * PI).powf(1.5) / (n * n * n) as f64;
        let gs = g.as_slice_mut().unwrap();
        let nn = n * n;
        gs.par_chunks_mut(nn).enumerate().for_each(|(b1, plane)| {
            let m1 = bin_freq(b1, n);
            for b2 in 0..n {
                let m2 = bin_freq(b2, n);
                for b3 in 0..n {
                    let m3 = bin_freq(b3, n);
                    // e^{i pi (m1 + m2 + m3 - 1/2)} = (-1)^{m1+m2+m3} * (-i)
                    let sign = if (m1 + m2 + m3).rem_euclid(2) == 0 {
                        1.0
                    } else {
                        -1.0
                    };
                    let p = Complex64::new(0.0, -sign * scale);
                    plane[b2 * n + b3] *= p;
                }
            }
        });
        g
    }

    /// Coefficients -> nodal field.
    pub fn from_coeffs(&self, coeffs: &Array3<Complex64>) -> Array3<Complex64> {
        let n = self.n();
        let h = 2.0 * PI / n as f64;
        let mut g = coeffs.clone();
        let scale = (n * n * n) as f64 / (2.0 * PI).powf(1.5);
        let nn = n * n;
        g.as_slice_mut()
            .unwrap()
            .par_chunks_mut(nn)
            .enumerate()
            .for_each(|(b1, plane)| {
                let m1 = bin_freq(b1, n);
                for b2 in 0..n {
                    let m2 = bin_freq(b2, n);
                    for b3 in 0..n {
                        let m3 = bin_freq(b3, n);
                        let sign = if (m1 + m2 + m3).rem_euclid(2) == 0 {
                            1.0
                        } else {
                            -1.0
                        };
                        // conjugate of the forward phase, inverse scale
                        let p = Complex64::new(0.0, sign * scale);
                        plane[b2 * n + b3] *= p;
                    }
                }
            });
        self.fft.inverse(&mut g);
        g.as_slice_mut()
            .unwrap()
            .par_chunks_mut(n)
            .for_each(|line| {
                for (l, v) in line.iter_mut().enumerate() {
                    *v *= Complex64::from_polar(1.0, -0.5 * l as f64 * h);
                }
            });
        g
    }

    /// Sample `e_alpha` on the grid for one lattice vector.
    pub fn basis_function(&self, alpha: [f64; 3]) -> Array3<Complex64> {
        let n = self.n();
        let h = 2.0 * PI / n as f64;
        let norm = (2.0 * PI).powf(-1.5);
        let mut out = Array3::zeros((n, n, n));
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
                        let phase = alpha[0] * x + alpha[1] * y + alpha[2] * z;
                        slab[j * n + k] = Complex64::from_polar(norm, phase);
                    }
                }
            });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{norm_l2_complex, norm_max_complex, Grid, XorShift64};

    fn random_field(n: usize, seed: u64) -> Array3<Complex64> {
        let mut rng = XorShift64::new(seed);
        let mut f = Array3::zeros((n, n, n));
        for v in f.iter_mut() {
            *v = Complex64::new(rng.next_sym(), rng.next_sym());
        }
        f
    }

    #[test]
    fn dft_roundtrip() {
        let n = 16;
        let fft = Fft3::new(n);
        let f0 = random_field(n, 7);
        let mut f = f0.clone();
        fft.forward(&mut f);
        fft.inverse(&mut f);
        let err = f
            .iter()
            .zip(f0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-12, "roundtrip error {err}");
    }

    #[test]
    fn shifted_single_mode_readoff() {
        let n = 16;
        let basis = ShiftedBasis::new(n);
        let alpha = [3.0, -2.0, 1.5]; // m3 = 2 -> alpha3 = 1.5
        let e = basis.basis_function(alpha);
        let coeffs = basis.to_coeffs(&e);
        let mut found = 0;
        for b1 in 0..n {
            for b2 in 0..n {
                for b3 in 0..n {
                    let a = basis.alpha(b1, b2, b3);
                    let c = coeffs[[b1, b2, b3]];
                    if a == alpha {
                        assert!((c - Complex64::new(1.0, 0.0)).norm() < 1e-12, "coef {c}");
                        found += 1;
                    } else {
                        assert!(c.norm() < 1e-12, "leak at {a:?}: {c}");
                    }
                }
            }
        }
        assert_eq!(found, 1);
    }

    #[test]
    fn shifted_roundtrip_and_parseval() {
        let n = 16;
        let g = Grid::new(n).unwrap();
        let basis = ShiftedBasis::new(n);
        let f = random_field(n, 11);
        let coeffs = basis.to_coeffs(&f);
        let back = basis.from_coeffs(&coeffs);
        let diff = f
            .iter()
            .zip(back.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(diff < 1e-12 * norm_max_complex(&f), "roundtrip {diff}");

        let parseval: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        let l2 = norm_l2_complex(&g, &f);
        assert!(
            (parseval.sqrt() - l2).abs() < 1e-10 * l2,
            "parseval {} vs {}",
            parseval.sqrt(),
            l2
        );
    }

    #[test]
    fn shifted_alpha3_set_is_symmetric_half_integers() {
        let n = 16;
        let basis = ShiftedBasis::new(n);
        let mut a3: Vec<f64> = (0..n).map(|b| basis.alpha(0, 0, b)[2]).collect();
        a3.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(a3[0], -(n as f64) / 2.0 + 0.5);
        assert_eq!(a3[n - 1], n as f64 / 2.0 - 0.5);
        for v in &a3 {
            assert!((v - v.round()).abs() == 0.5, "alpha3 {v} not half-integer");
            assert!(v.abs() >= 0.5);
        }
    }

    /// Discrete orthonormality of the sampled shifted exponentials: the Gram
    /// matrix of a random subset equals the identity to 1e-12.
    #[test]
    fn gram_matrix_is_identity() {
        let n = 16;
        let g = Grid::new(n).unwrap();
        let basis = ShiftedBasis::new(n);
        let mut rng = XorShift64::new(3);
        let picks: Vec<[f64; 3]> = (0..12)
            .map(|_| {
                let m1 = (rng.next_u64() % n as u64) as usize;
                let m2 = (rng.next_u64() % n as u64) as usize;
                let m3 = (rng.next_u64() % n as u64) as usize;
                basis.alpha(m1, m2, m3)
            })
            .collect();
        let h3 = g.cell_volume();
        for (i, a) in picks.iter().enumerate() {
            let ea = basis.basis_function(*a);
            for (j, b) in picks.iter().enumerate() {
                let eb = basis.basis_function(*b);
                let mut ip = Complex64::default();
                for (u, v) in ea.iter().zip(eb.iter()) {
                    ip += u * v.conj();
                }
                ip *= h3;
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!(
                    (ip - expect).norm() < 1e-12,
                    "gram[{i}][{j}] = {ip} for {a:?}, {b:?}"
                );
            }
        }
    }
}
