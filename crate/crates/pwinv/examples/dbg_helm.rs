use pwinv::cgo::make_plane_wave;
use pwinv::config::*;
use pwinv::identities::*;
use pwinv::spectral::*;
use std::f64::consts::PI;

fn main() {
    let n = 64usize;
    let cfg = build_separated_phantom(&PhantomSpec {
        grid_n: n,
        omega_box: (3 * n / 16) as f64 * 2.0 * PI / n as f64,
        sponge_cells: Some(n / 8),
        bumps: vec![
            BumpSpec { field: "f".into(), kind: "poly4".into(), center: vec![0.1, 0.0, 0.0], radius: 0.55, amplitude: 1.0, plateau: None, edge: None },
            BumpSpec { field: "c".into(), kind: "poly3".into(), center: vec![0.0, 0.1, 0.0], radius: 0.5, amplitude: 0.2, plateau: None, edge: None },
        ],
        profile: None, c_bounds: None, sigma_bounds: None,
    }).unwrap();
    for k in [2.5f64, 3.0, 5.0] {
        for strength in [4.0f64, 6.0, 10.0] {
            let mut o = HelmholtzOptions::default();
            o.stretch_strength = Some(strength);
            let t0 = std::time::Instant::now();
            match helmholtz_solve(&cfg, k, &o) {
                Ok(freq) => {
                    let xi = [k / 3.0f64.sqrt(); 3];
                    let (res, _) = freq_identity_residual(&cfg, &freq, &make_plane_wave(xi)).unwrap();
                    println!("k={k} s={strength}: iters={} {:?} trace_res={res:.3e}", freq.iterations, t0.elapsed());
                }
                Err(e) => println!("k={k} s={strength}: {e}"),
            }
        }
    }
}
