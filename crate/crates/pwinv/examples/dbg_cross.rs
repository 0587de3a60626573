// debug: temporal-transform traces vs Helmholtz traces at one frequency
use num_complex::Complex64;
use pwinv::cgo::make_plane_wave;
use pwinv::config::*;
use pwinv::forward::{simulate_with, SimulateOptions, StepperParams};
use pwinv::identities::boundary_pairing_freq;
use pwinv::spectral::{helmholtz_solve, temporal_fourier_traces, HelmholtzOptions, Window};
use std::f64::consts::PI;

fn main() {
    let n = 64usize;
    let h = 2.0 * PI / n as f64;
    let spec = PhantomSpec {
        grid_n: n,
        omega_box: 18.0 * h,
        sponge_cells: Some(12),
        bumps: vec![
            BumpSpec { field: "q0".into(), kind: "poly4".into(), center: vec![0.0, 0.0], radius: 1.6, amplitude: 1.0, plateau: None, edge: None },
            BumpSpec { field: "c".into(), kind: "cyl_poly3".into(), center: vec![0.45, 0.0], radius: 0.8, amplitude: 0.12, plateau: Some([-1.45, 1.45]), edge: Some(0.21) },
        ],
        profile: Some(ProfileSpec { axis: 2, longitudinal_kind: "mollified_indicator".into(), a: -1.45, b: 1.45, edge: Some(0.3) }),
        c_bounds: None, sigma_bounds: None,
    };
    let cfg = build_separated_phantom(&spec).unwrap();
    let grid = cfg.domain.grid;

    let mut opts = SimulateOptions::new(40.0);
    opts.params = StepperParams { dt_override: Some(0.0155), ..Default::default() };
    let out = simulate_with(&cfg, &opts, |_| {}).unwrap();
    let ds = out.dataset.unwrap();

    for k in [6.0f64, 9.0, 12.0] {
        let (traces_t, _) = temporal_fourier_traces(&ds, &[k], Window::HardCut).unwrap();
        let freq = helmholtz_solve(&cfg, k, &HelmholtzOptions::default()).unwrap();
        // trace agreement
        let (mut du, mut dflux, mut su, mut sflux) = (0.0, 0.0, 0.0, 0.0);
        for j in 0..ds.layout.len() {
            du += (traces_t.at(0)[2 * j] - freq.traces[2 * j]).norm_sqr();
            su += freq.traces[2 * j].norm_sqr();
            dflux += (traces_t.at(0)[2 * j + 1] - freq.traces[2 * j + 1]).norm_sqr();
            sflux += freq.traces[2 * j + 1].norm_sqr();
        }
        println!("k={k}: trace rel err u={:.3e} flux={:.3e}", (du / su).sqrt(), (dflux / sflux).sqrt());

        // pairing vs ik int f v for a mid mode
        let xi3 = (k * k - 1.0f64).sqrt();
        let wave = make_plane_wave([1.0, 0.0, xi3]);
        let b_t = boundary_pairing_freq(&grid, &ds.layout, traces_t.at(0), &wave).unwrap();
        let b_h = boundary_pairing_freq(&grid, &freq.layout, &freq.traces, &wave).unwrap();
        let mut fv = Complex64::default();
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let v = cfg.f[[i, j, l]];
                    if v != 0.0 {
                        fv += Complex64::from_polar(v, grid.x(i) + xi3 * grid.x(l));
                    }
                }
            }
        }
        fv *= grid.cell_volume();
        let ikfv = Complex64::new(0.0, k) * fv;
        println!("  B_temporal={:.4e} B_helmholtz={:.4e} ik*intfv={:.4e}", b_t.value, b_h.value, ikfv);
        println!("  |B_t - ikfv|/|ikfv| = {:.3e}, |B_h - ikfv|/|ikfv| = {:.3e}, |B_t - B_h|/|B_h| = {:.3e}",
            (b_t.value - ikfv).norm() / ikfv.norm(),
            (b_h.value - ikfv).norm() / ikfv.norm(),
            (b_t.value - b_h.value).norm() / b_h.value.norm());
    }
}
