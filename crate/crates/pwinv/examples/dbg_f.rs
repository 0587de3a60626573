// debug: source reconstruction from the high-frequency plane-wave sweep
use pwinv::config::*;
use pwinv::forward::{simulate_with, SimulateOptions, StepperParams};
use pwinv::inversion::*;
#[allow(unused_imports)]
use pwinv::quad::fit_loglog;
use pwinv::spectral::{temporal_fourier_traces, Window};
use std::f64::consts::PI;

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(64);
    let edge: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(0.28);
    // style "quotient": doubly-separated with a transverse c-cylinder;
    // style "direct": f = p phi directly, 3D c-bump inside the plateau
    let style = std::env::args().nth(3).unwrap_or_else(|| "quotient".into());
    let amp: f64 = std::env::args().nth(4).and_then(|s| s.parse().ok()).unwrap_or(0.12);
    let h = 2.0 * PI / n as f64;
    let a_cells = 18 * n / 64;
    let bumps = if style == "quotient" {
        vec![
            BumpSpec { field: "q0".into(), kind: "poly4".into(), center: vec![0.0, 0.0], radius: 1.6, amplitude: 1.0, plateau: None, edge: None },
            BumpSpec { field: "c".into(), kind: "cyl_poly3".into(), center: vec![0.9, 0.9], radius: 0.6, amplitude: amp, plateau: Some([-1.45, 1.45]), edge: Some(0.21) },
        ]
    } else {
        vec![
            BumpSpec { field: "p".into(), kind: "poly4".into(), center: vec![0.0, 0.0], radius: 1.6, amplitude: 1.0, plateau: None, edge: None },
            BumpSpec { field: "c".into(), kind: "poly3".into(), center: vec![0.45, 0.0, 0.0], radius: 0.8, amplitude: amp, plateau: None, edge: None },
        ]
    };
    let spec = PhantomSpec {
        grid_n: n,
        omega_box: a_cells as f64 * h,
        sponge_cells: Some(12 * n / 64),
        bumps,
        profile: Some(ProfileSpec { axis: 2, longitudinal_kind: "mollified_indicator".into(), a: -1.45, b: 1.45, edge: Some(edge) }),
        c_bounds: None, sigma_bounds: None,
    };
    let cfg = build_separated_phantom(&spec).unwrap();
    let grid = cfg.domain.grid;
    let fp = cfg.profiles.f.clone().expect("f must separate exactly");
    let phi_samples = fp.longitudinal.sample(fp.support[0], fp.support[1], 2049);

    // scan |d~| to select xi3 nodes at local maxima within k in [8, 32]
    let dmag = |xi: f64| -> f64 {
        phi_weighted_integral(&phi_samples, fp.support, num_complex::Complex64::new(0.0, xi))
            .unwrap().norm()
    };
    let mut xi3_list = vec![];
    let mut xi = 8.0;
    while xi < 31.2 {
        // local max of |d| on [xi, xi+2.4]
        let mut best = (xi, dmag(xi));
        let mut s = xi;
        while s < xi + 2.4 {
            let v = dmag(s);
            if v > best.1 { best = (s, v); }
            s += 0.02;
        }
        xi3_list.push(best.0);
        xi += 2.4;
    }
    println!("xi3 list: {:?}", xi3_list.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>());
    println!("divisors: {:?}", xi3_list.iter().map(|&x| format!("{:.2e}", dmag(x))).collect::<Vec<_>>());

    // simulate with dt small enough for k = 32
    let dt = 0.0155;
    let modes = integer_mode_disk(6.0);
    let ks = required_frequencies(&grid, &modes, &xi3_list, Some(dt));
    println!("{} modes, {} distinct k in [{:.2}, {:.2}]", modes.len(), ks.len(), ks[0], ks[ks.len()-1]);
    let mut opts = SimulateOptions::new(40.0);
    opts.params = StepperParams { dt_override: Some(0.0155), ..Default::default() };
    opts.record_boundary = true;
    let t0 = std::time::Instant::now();
    let out = simulate_with(&cfg, &opts, |_| {}).unwrap();
    let ds = out.dataset.unwrap();
    println!("simulate: {} steps in {:?}; dataset {} MB", out.n_steps, t0.elapsed(), ds.frames.len() * 8 / 1_000_000);

    let t1 = std::time::Instant::now();
    let (traces, _) = temporal_fourier_traces(&ds, &ks, Window::HardCut).unwrap();
    println!("transforms in {:?}", t1.elapsed());

    let phi_axis: Vec<f64> = (0..n).map(|k| fp.longitudinal_samples[k]).collect();
    let rec = recover_f(&grid, &traces, &phi_samples, fp.support, &phi_axis, 6.0, &xi3_list, Some(dt), false).unwrap();
    let err = rel_l2_3d(&rec.f, &cfg.f);
    println!("f relative L2 error: {:.4e}", err);

    // per-k aggregate error of the raw divisor-normalized estimates against
    // the 3D volume-quadrature truth of int f e^{i x xi} / divisor
    let om = cfg.domain.omega;
    let truth3d = |m1: f64, m2: f64, xi3: f64| -> num_complex::Complex64 {
        let mut acc = num_complex::Complex64::default();
        for i in om.lo[0]..=om.hi[0] {
            for j in om.lo[1]..=om.hi[1] {
                for k in om.lo[2]..=om.hi[2] {
                    let fv = cfg.f[[i, j, k]];
                    if fv != 0.0 {
                        let ph = m1 * grid.x(i) + m2 * grid.x(j) + xi3 * grid.x(k);
                        acc += num_complex::Complex64::from_polar(fv, ph);
                    }
                }
            }
        }
        acc * grid.cell_volume()
    };
    let divisors: Vec<num_complex::Complex64> = xi3_list.iter().map(|&x| {
        phi_weighted_integral(&phi_samples, fp.support, num_complex::Complex64::new(0.0, x)).unwrap()
    }).collect();
    let mut per_k: Vec<(f64, f64, f64)> = vec![];
    for (j, &xi3) in xi3_list.iter().enumerate() {
        let mut err2 = 0.0;
        let mut scale2 = 0.0;
        let mut kmean = 0.0;
        for e in &rec.table.entries {
            let (m1, m2) = (e.index[0], e.index[1]);
            kmean += pwinv::inversion::frequency_for_effective(&grid, m1, m2, xi3, Some(dt));
            let truth = truth3d(m1, m2, xi3) / divisors[j];
            let raw = e.raw[j].1;
            err2 += (raw - truth).norm_sqr();
            scale2 += truth.norm_sqr();
        }
        per_k.push((kmean / rec.table.entries.len() as f64, (err2 / scale2).sqrt(), err2.sqrt()));
    }
    println!("per-xi3 aggregate raw-mode error (k, rel, abs):");
    for (k, rel, abs) in &per_k {
        println!("  k~{k:.1}: rel={rel:.3e} abs={abs:.3e}");
    }
    let fit: Vec<(f64, f64)> = per_k.iter().map(|(k, _, abs)| (*k, *abs)).collect();
    let (slope, _, _) = pwinv::quad::fit_loglog(&fit);
    println!("aggregate error slope vs k: {slope:.2}");
}
