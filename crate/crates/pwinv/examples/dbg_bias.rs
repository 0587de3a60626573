// debug: clean-path (frequency-solver) error floor vs k with calibrated waves
use num_complex::Complex64;
use pwinv::cgo::make_plane_wave;
use pwinv::config::*;
use pwinv::identities::boundary_pairing_freq;
use pwinv::inversion::{frequency_for_effective, transverse_mode_truth};
use pwinv::spectral::{helmholtz_solve, HelmholtzOptions};
use std::f64::consts::PI;

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(128);
    let h = 2.0 * PI / n as f64;
    let a_cells = 18 * n / 64;
    let spec = PhantomSpec {
        grid_n: n,
        omega_box: a_cells as f64 * h,
        sponge_cells: Some(12 * n / 64),
        bumps: vec![
            BumpSpec { field: "q0".into(), kind: "poly4".into(), center: vec![0.0, 0.0], radius: 1.6, amplitude: 1.0, plateau: None, edge: None },
            BumpSpec { field: "c".into(), kind: "cyl_poly3".into(), center: vec![0.9, 0.9], radius: 0.6, amplitude: 0.12, plateau: Some([-1.45, 1.45]), edge: Some(0.21) },
        ],
        profile: Some(ProfileSpec { axis: 2, longitudinal_kind: "mollified_indicator".into(), a: -1.45, b: 1.45, edge: Some(0.3) }),
        c_bounds: None, sigma_bounds: None,
    };
    let cfg = build_separated_phantom(&spec).unwrap();
    let grid = cfg.domain.grid;
    let fp = cfg.profiles.f.clone().unwrap();
    let phi_samples = fp.longitudinal.sample(fp.support[0], fp.support[1], 2049);
    // effective-space sweep nodes at divisor maxima
    let dmag = |xi: f64| -> f64 {
        phi_weighted_integral(&phi_samples, fp.support, Complex64::new(0.0, xi)).unwrap().norm()
    };
    for xi3_t in [8.4f64, 12.1, 16.2, 23.4, 30.3] {
        // snap to a local max of |d| within +-1
        let mut best = (xi3_t, 0.0);
        let mut s = xi3_t - 1.0;
        while s < xi3_t + 1.0 {
            let v = dmag(s);
            if v > best.1 { best = (s, v); }
            s += 0.01;
        }
        let xi3 = best.0;
        for (m1, m2) in [(0.0, 0.0), (2.0, 1.0)] {
            let k = frequency_for_effective(&grid, m1, m2, xi3, None);
            let freq = helmholtz_solve(&cfg, k, &HelmholtzOptions::default()).unwrap();
            let d = phi_weighted_integral(&phi_samples, fp.support, Complex64::new(0.0, xi3)).unwrap();
            let wave = make_plane_wave([m1, m2, xi3]);
            let b = boundary_pairing_freq(&grid, &freq.layout, &freq.traces, &wave).unwrap();
            let est = b.value / Complex64::new(0.0, k) / d;
            let truth = transverse_mode_truth(&grid, &fp.transverse, m1, m2);
            println!("xi3={xi3:.2} m=({m1},{m2}) k={k:.2}: |est-truth|={:.3e} (|truth|={:.2e}, iters={})",
                (est - truth).norm(), truth.norm(), freq.iterations);
        }
    }
}
