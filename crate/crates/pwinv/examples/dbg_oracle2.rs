// debug: isolate the identity discretization floor vs tau, N, kappa
use pwinv::config::*;
use pwinv::dataset::BoundaryLayout;
use pwinv::forward::{simulate_with, SimulateOptions};
use pwinv::identities::TauReducer;
use pwinv::inversion::oracle_mode_check;
use std::f64::consts::PI;

fn main() {
    for n in [64usize, 96] {
        let h = 2.0 * PI / n as f64;
        let a_cells = 18 * n / 64;
        let spec = PhantomSpec {
            grid_n: n,
            omega_box: a_cells as f64 * h,
            sponge_cells: Some(12 * n / 64),
            bumps: vec![
                BumpSpec { field: "q0".into(), kind: "poly4".into(), center: vec![0.0, 0.0], radius: 1.6, amplitude: 1.0, plateau: None, edge: None },
                BumpSpec { field: "c".into(), kind: "cyl_poly3".into(), center: vec![0.15, 0.0], radius: 1.3, amplitude: 0.25, plateau: Some([-1.47, 1.47]), edge: Some(0.19) },
            ],
            profile: Some(ProfileSpec { axis: 2, longitudinal_kind: "mollified_indicator".into(), a: -1.45, b: 1.45, edge: Some(0.28) }),
            c_bounds: None,
            sigma_bounds: None,
        };
        let cfg = build_separated_phantom(&spec).unwrap();
        let grid = cfg.domain.grid;
        let t_final = 170.0;
        let layout = BoundaryLayout::build(&grid, &cfg.domain.omega);
        let taus = [0.05f64, 0.2, 0.45];
        let mut reducers: Vec<TauReducer> = taus.iter().map(|&t| TauReducer::new(t, layout.len(), t_final)).collect();
        let mut opts = SimulateOptions::new(t_final);
        opts.record_boundary = false;
        simulate_with(&cfg, &opts, |v| { for r in reducers.iter_mut() { r.observe(v); } }).unwrap();
        let reduced: Vec<_> = reducers.into_iter().map(|r| r.finish()).collect();
        for (rho1, rho2) in [(0.0, 0.5), (3.0, 0.5), (0.0, -5.5), (4.0, -3.5)] {
            for (i, &tau) in taus.iter().enumerate() {
                let chk = oracle_mode_check(&cfg, &reduced[i], rho1, rho2).unwrap();
                println!("N={n} mode=({rho1},{rho2}) tau={tau}: bare_err={:.3e} oracle_err={:.3e} ratio={:.1} scale={:.2e}",
                    chk.bare_err, chk.oracle_err, chk.bare_err / chk.oracle_err, chk.target_scale);
            }
        }
    }
}
