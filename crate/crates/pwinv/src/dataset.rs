//! The passive boundary observation: node layout on the observation-box
//! surface, the time-sampled Cauchy dataset `(u, sigma du/dnu)`, and the
//! binary container formats.
//!
//! The recorded flux is `sigma du/dnu` at the node by the fourth-order
//! centered one-axis stencil. Time-domain pairings integrate the continuum
//! Green form with end-corrected tensor weights; frequency-domain pairings
//! rebuild the staggered cross-flux from the Cauchy pair and the known
//! exterior Helmholtz relation, which keeps them coherent at high
//! frequencies.
//!
//! Dataset container layout (version `PWBD1`):
//! magic `PWBD1\n`, little-endian u64 header length, JSON header, then one
//! frame per time step of little-endian f64 pairs `[node][u, flux]` in node
//! order. Frequency traces (`PWFT1`) follow the same scheme with per-k frames
//! of complex pairs `[node][re u, im u, re flux, im flux]`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::Error;
use crate::grid::{Grid, OmegaBox};

/// One quadrature node on the observation surface.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryNode {
    /// Grid indices of the node.
    pub idx: [usize; 3],
    pub position: [f64; 3],
    /// Outward unit normal (axis-aligned).
    pub normal: [f64; 3],
    /// Face axis (0..3).
    pub axis: usize,
    /// +1 for the high face, -1 for the low face.
    pub side: i8,
    /// Plain surface weight `h^2` (staggered pairings telescope with these).
    pub weight: f64,
    /// End-corrected tensor weight for continuum-form quadrature.
    pub smooth_weight: f64,
}

/// Deterministically ordered node table for the six faces of the box.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryLayout {
    pub grid_n: usize,
    pub omega_lo: [usize; 3],
    pub omega_hi: [usize; 3],
    pub nodes: Vec<BoundaryNode>,
}

impl BoundaryLayout {
    /// Nodes face by face (axis 0..3, low side then high side), transverse
    /// indices in lexicographic order.
    pub fn build(grid: &Grid, omega: &OmegaBox) -> Self {
        let h = grid.h();
        let mut nodes = Vec::new();
        for axis in 0..3 {
            let (t1, t2) = transverse_axes(axis);
            let n1 = omega.hi[t1] - omega.lo[t1] + 1;
            let n2 = omega.hi[t2] - omega.lo[t2] + 1;
            let w1 = crate::quad::gregory_weights(n1);
            let w2 = crate::quad::gregory_weights(n2);
            for side in [-1i8, 1i8] {
                let face_idx = if side < 0 { omega.lo[axis] } else { omega.hi[axis] };
                for a in 0..n1 {
                    for b in 0..n2 {
                        let mut idx = [0usize; 3];
                        idx[axis] = face_idx;
                        idx[t1] = omega.lo[t1] + a;
                        idx[t2] = omega.lo[t2] + b;
                        let mut normal = [0.0; 3];
                        normal[axis] = side as f64;
                        nodes.push(BoundaryNode {
                            idx,
                            position: [grid.x(idx[0]), grid.x(idx[1]), grid.x(idx[2])],
                            normal,
                            axis,
                            side,
                            weight: h * h,
                            smooth_weight: w1[a] * w2[b] * h * h,
                        });
                    }
                }
            }
        }
        BoundaryLayout {
            grid_n: grid.n(),
            omega_lo: omega.lo,
            omega_hi: omega.hi,
            nodes,
        }
    }

    /// Node index of the `(da, db)` tangential neighbor on the same face,
    /// when it exists.
    pub fn face_neighbor(&self, j: usize, da: i64, db: i64) -> Option<usize> {
        let node = &self.nodes[j];
        let (t1, t2) = transverse_axes(node.axis);
        let n1 = (self.omega_hi[t1] - self.omega_lo[t1] + 1) as i64;
        let n2 = (self.omega_hi[t2] - self.omega_lo[t2] + 1) as i64;
        let a = node.idx[t1] as i64 - self.omega_lo[t1] as i64 + da;
        let b = node.idx[t2] as i64 - self.omega_lo[t2] as i64 + db;
        if a < 0 || a >= n1 || b < 0 || b >= n2 {
            return None;
        }
        let face_start = j as i64 - ((node.idx[t1] as i64 - self.omega_lo[t1] as i64) * n2
            + (node.idx[t2] as i64 - self.omega_lo[t2] as i64));
        Some((face_start + a * n2 + b) as usize)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn omega(&self) -> OmegaBox {
        OmegaBox {
            lo: self.omega_lo,
            hi: self.omega_hi,
        }
    }
}

/// Face axes transverse to `axis`, in fixed order.
pub fn transverse_axes(axis: usize) -> (usize, usize) {
    match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Container metadata serialized into the JSON header.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub version: String,
    pub solver_version: String,
    pub grid_n: usize,
    pub dt: f64,
    pub t_final: f64,
    pub n_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_hash: Option<String>,
}

/// Time samples of the boundary Cauchy pair on the node table: the single
/// passive observation everything downstream consumes.
#[derive(Debug, Clone)]
pub struct BoundaryDataset {
    pub layout: BoundaryLayout,
    pub meta: DatasetMeta,
    /// Frame-major storage: `frames[step * 2 * nodes + 2 * node + {0: u, 1: flux}]`.
    pub frames: Vec<f64>,
}

impl BoundaryDataset {
    pub fn n_steps(&self) -> usize {
        self.meta.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.meta.dt
    }

    #[inline]
    pub fn frame(&self, step: usize) -> &[f64] {
        let w = 2 * self.layout.len();
        &self.frames[step * w..(step + 1) * w]
    }

    /// Max |value| over the whole dataset.
    pub fn max_abs(&self) -> f64 {
        self.frames.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.frames.iter().all(|v| v.is_finite())
    }

    /// Scale all samples (used by linearity checks).
    pub fn scaled(&self, alpha: f64) -> BoundaryDataset {
        let mut out = self.clone();
        for v in &mut out.frames {
            *v *= alpha;
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), Error> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        w.write_all(b"PWBD1\n")?;
        let header = serde_json::to_vec(&(&self.meta, &self.layout))
            .map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        for v in &self.frames {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, Error> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 6];
        r.read_exact(&mut magic)?;
        if &magic != b"PWBD1\n" {
            return Err(Error::Format("bad dataset magic".into()));
        }
        let mut len8 = [0u8; 8];
        r.read_exact(&mut len8)?;
        let hlen = u64::from_le_bytes(len8) as usize;
        let mut hbuf = vec![0u8; hlen];
        r.read_exact(&mut hbuf)?;
        let (meta, layout): (DatasetMeta, BoundaryLayout) =
            serde_json::from_slice(&hbuf).map_err(|e| Error::Format(e.to_string()))?;
        let count = meta.n_steps * 2 * layout.len();
        let mut frames = vec![0.0f64; count];
        let mut buf = [0u8; 8];
        for v in &mut frames {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        Ok(BoundaryDataset {
            layout,
            meta,
            frames,
        })
    }

    /// Plain CSV export for inspection: `step,t,node,u,flux`.
    pub fn export_csv(&self, path: &Path, every: usize) -> Result<(), Error> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "step,t,node,u,flux")?;
        let nn = self.layout.len();
        for s in (0..self.meta.n_steps).step_by(every.max(1)) {
            let f = self.frame(s);
            let t = s as f64 * self.meta.dt;
            for j in 0..nn {
                writeln!(
                    w,
                    "{s},{t:.9},{j},{:.17e},{:.17e}",
                    f[2 * j],
                    f[2 * j + 1]
                )?;
            }
        }
        Ok(())
    }
}

/// Frequency-domain Cauchy traces at a list of frequencies, same node table.
#[derive(Debug, Clone)]
pub struct FrequencyTraces {
    pub layout: BoundaryLayout,
    pub ks: Vec<f64>,
    /// `values[k_index * 2 * nodes + 2 * node + {0: u_hat, 1: flux_hat}]`.
    pub values: Vec<Complex64>,
    pub meta: DatasetMeta,
}

impl FrequencyTraces {
    #[inline]
    pub fn at(&self, k_index: usize) -> &[Complex64] {
        let w = 2 * self.layout.len();
        &self.values[k_index * w..(k_index + 1) * w]
    }

    pub fn k_index(&self, k: f64) -> Option<usize> {
        self.ks.iter().position(|v| (v - k).abs() < 1e-12)
    }

    pub fn write(&self, path: &Path) -> Result<(), Error> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        w.write_all(b"PWFT1\n")?;
        let header = serde_json::to_vec(&(&self.meta, &self.ks, &self.layout))
            .map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        for v in &self.values {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, Error> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 6];
        r.read_exact(&mut magic)?;
        if &magic != b"PWFT1\n" {
            return Err(Error::Format("bad traces magic".into()));
        }
        let mut len8 = [0u8; 8];
        r.read_exact(&mut len8)?;
        let hlen = u64::from_le_bytes(len8) as usize;
        let mut hbuf = vec![0u8; hlen];
        r.read_exact(&mut hbuf)?;
        let (meta, ks, layout): (DatasetMeta, Vec<f64>, BoundaryLayout) =
            serde_json::from_slice(&hbuf).map_err(|e| Error::Format(e.to_string()))?;
        let count = ks.len() * 2 * layout.len();
        let mut values = vec![Complex64::default(); count];
        let mut buf = [0u8; 8];
        for v in &mut values {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf);
            r.read_exact(&mut buf)?;
            let im = f64::from_le_bytes(buf);
            *v = Complex64::new(re, im);
        }
        Ok(FrequencyTraces {
            layout,
            ks,
            values,
            meta,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_counts_and_weights() {
        let g = Grid::new(32).unwrap();
        let om = OmegaBox::centered(&g, 6.0 * g.h()).unwrap();
        let layout = BoundaryLayout::build(&g, &om);
        assert_eq!(layout.len(), 6 * 13 * 13);
        // plain weights: each node owns one staggered surface cell
        let area: f64 = layout.nodes.iter().map(|n| n.weight).sum();
        assert!((area - 6.0 * 169.0 * g.h() * g.h()).abs() < 1e-12 * area);
    }

    /// The staggered cross-flux pairing telescopes the volume commutator
    /// exactly: sum over the box of `u lap(v) - v lap(u)` equals the node
    /// pairing built from `(u, conservative flux)` and the wave values at
    /// the node and its outward neighbor.
    #[test]
    fn staggered_pairing_telescopes_volume_commutator() {
        use crate::grid::XorShift64;
        let g = Grid::new(16).unwrap();
        let om = OmegaBox::centered(&g, 4.0 * g.h()).unwrap();
        let layout = BoundaryLayout::build(&g, &om);
        let n = g.n();
        let h = g.h();
        let mut rng = XorShift64::new(11);
        let mut u = g.zeros_complex();
        let mut v = g.zeros_complex();
        for w in u.iter_mut().chain(v.iter_mut()) {
            *w = Complex64::new(rng.next_sym(), rng.next_sym());
        }
        let lap = |f: &ndarray::Array3<Complex64>, i: usize, j: usize, k: usize| -> Complex64 {
            let (ip, im) = ((i + 1) % n, (i + n - 1) % n);
            let (jp, jm) = ((j + 1) % n, (j + n - 1) % n);
            let (kp, km) = ((k + 1) % n, (k + n - 1) % n);
            (f[[ip, j, k]] + f[[im, j, k]] + f[[i, jp, k]] + f[[i, jm, k]] + f[[i, j, kp]]
                + f[[i, j, km]]
                - f[[i, j, k]] * 6.0)
                / (h * h)
        };
        let mut volume = Complex64::default();
        for i in om.lo[0]..=om.hi[0] {
            for j in om.lo[1]..=om.hi[1] {
                for k in om.lo[2]..=om.hi[2] {
                    volume += (u[[i, j, k]] * lap(&v, i, j, k)
                        - v[[i, j, k]] * lap(&u, i, j, k))
                        * g.cell_volume();
                }
            }
        }
        let mut pairing = Complex64::default();
        for node in &layout.nodes {
            let idx = node.idx;
            let mut out = idx;
            out[node.axis] = (out[node.axis] as i64 + node.side as i64) as usize;
            let flux = (u[[out[0], out[1], out[2]]] - u[idx]) / h;
            let dn = (v[[out[0], out[1], out[2]]] - v[idx]) / h;
            pairing += (u[idx] * dn - flux * v[idx]) * node.weight;
        }
        assert!(
            (volume - pairing).norm() <= 1e-12 * volume.norm().max(1.0),
            "{volume} vs {pairing}"
        );
    }

    #[test]
    fn dataset_roundtrip_through_file() {
        let g = Grid::new(16).unwrap();
        let om = OmegaBox::centered(&g, 4.0 * g.h()).unwrap();
        let layout = BoundaryLayout::build(&g, &om);
        let nn = layout.len();
        let meta = DatasetMeta {
            version: "PWBD1".into(),
            solver_version: env!("CARGO_PKG_VERSION").into(),
            grid_n: 16,
            dt: 0.01,
            t_final: 0.03,
            n_steps: 4,
            scenario_hash: None,
        };
        let frames: Vec<f64> = (0..4 * 2 * nn).map(|i| (i as f64).sin()).collect();
        let ds = BoundaryDataset {
            layout,
            meta,
            frames,
        };
        let dir = std::env::temp_dir().join("pwinv_ds_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ds.bin");
        ds.write(&path).unwrap();
        let back = BoundaryDataset::read(&path).unwrap();
        assert_eq!(back.frames, ds.frames);
        assert_eq!(back.meta.n_steps, 4);
        assert_eq!(back.layout.len(), nn);
    }
}
