// debug: corrected-CGO (oracle) vs bare-exponential mode agreement
use pwinv::config::*;
use pwinv::dataset::BoundaryLayout;
use pwinv::forward::{simulate_with, SimulateOptions};
use pwinv::identities::TauReducer;
use pwinv::inversion::*;
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
            BumpSpec { field: "c".into(), kind: "cyl_poly3".into(), center: vec![0.15, 0.0], radius: 1.3, amplitude: 0.25, plateau: Some([-1.47, 1.47]), edge: Some(0.19) },
        ],
        profile: Some(ProfileSpec { axis: 2, longitudinal_kind: "mollified_indicator".into(), a: -1.45, b: 1.45, edge: Some(0.28) }),
        c_bounds: None,
        sigma_bounds: None,
    };
    let cfg = build_separated_phantom(&spec).unwrap();
    let grid = cfg.domain.grid;
    let t_final = 160.0;
    let layout = BoundaryLayout::build(&grid, &cfg.domain.omega);
    let tau: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.4);
    let mut reducer = TauReducer::new(tau, layout.len(), t_final);
    let mut opts = SimulateOptions::new(t_final);
    opts.record_boundary = false;
    simulate_with(&cfg, &opts, |view| reducer.observe(view)).unwrap();
    let reduced = reducer.finish();

    let t0 = std::time::Instant::now();
    let mut worst_ratio = f64::MAX;
    let mut worst_mode = (0.0, 0.0);
    let mut ratios = vec![];
    for (rho1, rho2) in shifted_mode_disk(6.0) {
        let chk = oracle_mode_check(&cfg, &reduced, rho1, rho2).unwrap();
        let ratio = chk.bare_err / chk.oracle_err.max(1e-300);
        ratios.push(ratio);
        if ratio < worst_ratio {
            worst_ratio = ratio;
            worst_mode = (rho1, rho2);
        }
    }
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!("oracle check over {} modes in {:?}", ratios.len(), t0.elapsed());
    println!("improvement ratios: min={:.1} (at {:?}) p25={:.1} median={:.1}",
        worst_ratio, worst_mode, ratios[ratios.len()/4], ratios[ratios.len()/2]);
}
