// debug: end-to-end blind quotient reconstruction at criterion-6 scale
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
    let qp = cfg.profiles.quotient.clone().unwrap();

    // spectral tail of the truth transverse factor beyond the mode disk
    let mut tail2 = 0.0;
    let mut total2 = 0.0;
    for (r1, r2) in shifted_mode_disk(20.0) {
        let m = transverse_mode_truth(&grid, &qp.transverse, r1, r2).norm_sqr();
        total2 += m;
        if (r1 * r1 + r2 * r2).sqrt() > 6.0 {
            tail2 += m;
        }
    }
    println!("q0 spectral tail beyond |rho|=6: {:.3e}", (tail2 / total2).sqrt());

    let t_final = 160.0;
    let layout = BoundaryLayout::build(&grid, &cfg.domain.omega);
    let taus = [0.05f64, 0.1];
    let mut reducers: Vec<TauReducer> = taus
        .iter()
        .map(|&t| TauReducer::new(t, layout.len(), t_final))
        .collect();

    let t0 = std::time::Instant::now();
    let mut opts = SimulateOptions::new(t_final);
    opts.record_boundary = false;
    let out = simulate_with(&cfg, &opts, |view| {
        for r in reducers.iter_mut() {
            r.observe(view);
        }
    })
    .unwrap();
    println!("simulate: {} steps dt={:.4} in {:?}", out.n_steps, out.dt, t0.elapsed());
    println!("decay: eta(T)={:.2e} integral={:.3}", out.decay.eta.last().unwrap(), out.decay.eta_integral);

    let reduced: Vec<_> = reducers.into_iter().map(|r| r.finish()).collect();
    let samples = qp.longitudinal.sample(qp.support[0], qp.support[1], 2049);

    let t1 = std::time::Instant::now();
    let rec = recover_q0_from_reduced(&grid, &layout, &reduced, &samples, qp.support, 6.0).unwrap();
    println!("recover_q0: {} modes in {:?}", rec.table.entries.len(), t1.elapsed());

    let err = rel_l2_2d(&rec.q0, &qp.transverse);
    println!("q0 relative L2 error: {:.4e}", err);

    // worst per-mode errors
    let mut rows: Vec<(f64, f64, f64, f64)> = rec
        .table
        .entries
        .iter()
        .map(|e| {
            let truth = transverse_mode_truth(&grid, &qp.transverse, e.index[0], e.index[1]);
            let err = (e.extrapolated * e.divisor - truth * e.divisor).norm(); // pre-divisor scale
            let rel = (e.extrapolated - truth / 1.0).norm();
            (e.kappa, e.index[0], err, (e.extrapolated - truth).norm())
        })
        .collect();
    rows.sort_by(|a, b| b.3.partial_cmp(&a.3).unwrap());
    println!("worst modes by |extrap - truth| (kappa, rho1, _, abs err):");
    for r in rows.iter().take(6) {
        println!("  kappa={:.2} rho1={} err={:.3e}", r.0, r.1, r.3);
    }
    let truth_scale: f64 = rec.table.entries.iter().map(|e| {
        transverse_mode_truth(&grid, &qp.transverse, e.index[0], e.index[1]).norm_sqr()
    }).sum::<f64>().sqrt();
    let err_scale: f64 = rec.table.entries.iter().map(|e| {
        (e.extrapolated - transverse_mode_truth(&grid, &qp.transverse, e.index[0], e.index[1])).norm_sqr()
    }).sum::<f64>().sqrt();
    println!("mode-space rel error: {:.4e}", err_scale / truth_scale);
}
