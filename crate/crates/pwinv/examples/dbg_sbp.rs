// debug: staggered cross-flux pairing reconstructed from the Cauchy pair
use num_complex::Complex64;
use pwinv::config::*;
use pwinv::dataset::transverse_axes;
use pwinv::inversion::{frequency_for_effective, transverse_mode_truth};
use pwinv::spectral::{helmholtz_solve, HelmholtzOptions};
use std::f64::consts::PI;

fn main() {
    let n: usize = 128;
    let h = 2.0 * PI / n as f64;
    let a_cells = 36;
    let spec = PhantomSpec {
        grid_n: n,
        omega_box: a_cells as f64 * h,
        sponge_cells: Some(24),
        bumps: vec![
            BumpSpec { field: "q0".into(), kind: "poly4".into(), center: vec![0.0, 0.0], radius: 1.6, amplitude: 1.0, plateau: None, edge: None },
            BumpSpec { field: "c".into(), kind: "cyl_poly3".into(), center: vec![0.9, 0.9], radius: 0.6, amplitude: 0.12, plateau: Some([-1.45, 1.45]), edge: Some(0.21) },
        ],
        profile: Some(ProfileSpec { axis: 2, longitudinal_kind: "mollified_indicator".into(), a: -1.45, b: 1.45, edge: Some(0.3) }),
        c_bounds: None, sigma_bounds: None,
    };
    let cfg = build_separated_phantom(&spec).unwrap();
    let grid = cfg.domain.grid;
    let om = cfg.domain.omega;
    let fp = cfg.profiles.f.clone().unwrap();
    let phi_samples = fp.longitudinal.sample(fp.support[0], fp.support[1], 2049);

    for xi3 in [8.38f64, 15.65, 22.89, 30.13] {
        for (m1, m2) in [(0.0, 0.0), (2.0, 1.0)] {
            let k = frequency_for_effective(&grid, m1, m2, xi3, None);
            let freq = helmholtz_solve(&cfg, k, &HelmholtzOptions::default()).unwrap();
            let u = &freq.values;
            let d = phi_weighted_integral(&phi_samples, fp.support, Complex64::new(0.0, xi3)).unwrap();
            let xi = [m1, m2, xi3];
            let v_at = |i: i64, j: i64, l: i64| -> Complex64 {
                Complex64::from_polar(1.0, xi[0] * (-PI + i as f64 * h) + xi[1] * (-PI + j as f64 * h) + xi[2] * (-PI + l as f64 * h))
            };
            // exact SBP cross-flux pairing from the full field, and the same
            // pairing with u_outside reconstructed from the Cauchy pair
            let mut b_exact = Complex64::default();
            let mut b_rec = Complex64::default();
            for axis in 0..3 {
                let (t1, t2) = transverse_axes(axis);
                for a in om.lo[t1]..=om.hi[t1] {
                    for bb in om.lo[t2]..=om.hi[t2] {
                        for (side, face) in [(-1i64, om.lo[axis]), (1, om.hi[axis])] {
                            let mut idx = [0usize; 3];
                            idx[t1] = a;
                            idx[t2] = bb;
                            idx[axis] = face;
                            let mut out = [idx[0] as i64, idx[1] as i64, idx[2] as i64];
                            out[axis] += side;
                            let u_in = u[idx];
                            let u_out = u[[out[0] as usize, out[1] as usize, out[2] as usize]];
                            let v_in = v_at(idx[0] as i64, idx[1] as i64, idx[2] as i64);
                            let v_out = v_at(out[0], out[1], out[2]);
                            // G = (u_in v_out - v_in u_out)/h * h^2  (sigma = 1 here)
                            let g_exact = (u_in * v_out - v_in * u_out) / h * (h * h);
                            b_exact += g_exact;
                            // reconstruct u_out from the Cauchy pair using the
                            // exterior Helmholtz relation for normal derivatives
                            let flux = {
                                // 4th-order one-axis derivative (as recorded)
                                let at = |off: i64| -> Complex64 {
                                    let mut ii = [idx[0] as i64, idx[1] as i64, idx[2] as i64];
                                    ii[axis] += off * side;
                                    u[[ii[0] as usize, ii[1] as usize, ii[2] as usize]]
                                };
                                (-at(2) + at(1) * 8.0 - at(-1) * 8.0 + at(-2)) / (12.0 * h) * side as f64
                            };
                            // tangential Laplacian of u and flux on the face
                            let lap_tan = |field: &dyn Fn(i64, i64) -> Complex64| -> Complex64 {
                                (field(1, 0) + field(-1, 0) + field(0, 1) + field(0, -1) - field(0, 0) * 4.0) / (h * h)
                            };
                            let u_tan = |da: i64, db: i64| -> Complex64 {
                                let mut ii = idx;
                                ii[t1] = (ii[t1] as i64 + da) as usize;
                                ii[t2] = (ii[t2] as i64 + db) as usize;
                                u[ii]
                            };
                            let fl_tan = |da: i64, db: i64| -> Complex64 {
                                let mut ii = [idx[0] as i64, idx[1] as i64, idx[2] as i64];
                                ii[t1] += da;
                                ii[t2] += db;
                                let at = |off: i64| -> Complex64 {
                                    let mut jj = ii;
                                    jj[axis] += off * side;
                                    u[[jj[0] as usize, jj[1] as usize, jj[2] as usize]]
                                };
                                (-at(2) + at(1) * 8.0 - at(-1) * 8.0 + at(-2)) / (12.0 * h) * side as f64
                            };
                            let ltu = lap_tan(&|a, b| u_tan(a, b));
                            let ltf = lap_tan(&|a, b| fl_tan(a, b));
                            let k2 = k * k;
                            let d2 = -k2 * u_in - ltu; // normal second derivative
                            let d3 = -k2 * flux - ltf; // normal third derivative
                            let u_out_rec = u_in + h * flux + h * h / 2.0 * d2 + h * h * h / 6.0 * d3;
                            let g_rec = (u_in * v_out - v_in * u_out_rec) / h * (h * h);
                            b_rec += g_rec;
                        }
                    }
                }
            }
            let truth = transverse_mode_truth(&grid, &fp.transverse, m1, m2);
            let est_exact = b_exact / Complex64::new(0.0, k) / d;
            let est_rec = b_rec / Complex64::new(0.0, k) / d;
            println!("xi3={xi3:.2} m=({m1},{m2}) k={k:.2}: exactSBP err={:.3e} reconSBP err={:.3e} truth={:.2e}",
                (est_exact - truth).norm(), (est_rec - truth).norm(), truth.norm());
        }
    }
}
