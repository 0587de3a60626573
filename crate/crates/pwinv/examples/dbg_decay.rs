// debug: long-time junk decay across sponge/friction settings
use pwinv::config::*;
use pwinv::forward::{simulate_with, SimulateOptions, StepperParams};
use std::f64::consts::PI;

fn main() {
    let n = 64usize;
    let h = 2.0 * PI / n as f64;
    for (s, ext) in [(8.0f64, 0.0f64), (8.0, 0.3), (8.0, 0.8), (12.0, 0.3), (5.0, 0.3)] {
        let spec = PhantomSpec {
            grid_n: n,
            omega_box: 18.0 * h,
            sponge_cells: Some(12),
            bumps: vec![BumpSpec { field: "f".into(), kind: "poly4".into(), center: vec![0.0, 0.0, 0.0], radius: 1.6, amplitude: 1.0, plateau: None, edge: None }],
            profile: None, c_bounds: None, sigma_bounds: None,
        };
        let cfg = build_separated_phantom(&spec).unwrap();
        let mut opts = SimulateOptions::new(100.0);
        opts.record_boundary = false;
        opts.allow_short_horizon = true;
        opts.params = StepperParams { sponge_strength: s, exterior_damping: ext, ..Default::default() };
        let om = cfg.domain.omega;
        let mut log = vec![];
        simulate_with(&cfg, &opts, |view| {
            if view.step % 300 == 0 {
                let mut m = 0.0f64;
                for i in om.lo[0]..=om.hi[0] {
                    for j in om.lo[1]..=om.hi[1] {
                        for k in om.lo[2]..=om.hi[2] {
                            m = m.max(view.u[[i, j, k]].abs());
                        }
                    }
                }
                log.push((view.t, m));
            }
        })
        .unwrap();
        print!("s={s} ext={ext}:");
        for (t, m) in &log {
            if *t > 5.0 { print!(" {t:.0}:{m:.0e}"); }
        }
        println!();
    }
}
