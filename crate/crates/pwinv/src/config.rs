//! Domains, media and sources: separated-variable phantom construction from a
//! declarative descriptor, admissibility checks, and weighted profile
//! integrals.
//!
//! A `Configuration` holds the four coefficient/source grids `(f, h, c,
//! sigma)` on the cube together with optional separated-profile metadata and
//! the analytic form the phantom was built from. Media are identically
//! homogeneous (`c = sigma = 1`) and sources vanish outside the observation
//! box, which the builder enforces by constructing every term from compactly
//! supported bumps.

use ndarray::{Array2, Array3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::ConfigError;
use crate::grid::{norm_max, Grid, OmegaBox};
use crate::profile::{BumpShape, Profile1D, RadialBump};
use crate::quad::gregory_weights;

/// Reference cube, observation box, and exterior absorbing-layer extent.
#[derive(Debug, Clone, Copy)]
pub struct Domain {
    pub grid: Grid,
    pub omega: OmegaBox,
    pub sponge_cells: usize,
}

impl Domain {
    /// Validates the support margin: every face of the box keeps at least two
    /// cells clear of the absorbing layer.
    pub fn new(grid: Grid, omega: OmegaBox, sponge_cells: usize) -> Result<Self, ConfigError> {
        let n = grid.n();
        for d in 0..3 {
            if omega.lo[d] < sponge_cells + 2 || omega.hi[d] + sponge_cells + 2 > n {
                return Err(ConfigError::SupportViolation {
                    field: "omega".into(),
                    detail: format!(
                        "box face at cells [{}, {}] is within 2 cells of the {}-cell absorbing layer",
                        omega.lo[d], omega.hi[d], sponge_cells
                    ),
                });
            }
        }
        Ok(Domain {
            grid,
            omega,
            sponge_cells,
        })
    }

    /// Default layer thickness: 3/16 of the axis (physical width 3 pi / 8).
    pub fn default_sponge(n: usize) -> usize {
        (3 * n) / 16
    }
}

/// Sum of compactly supported analytic terms; media perturbations and plain
/// sources are built from these.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum FieldTerm {
    Radial(RadialBump),
    /// Product of a 2D transverse bump and a longitudinal profile.
    Cylinder {
        transverse: RadialBump,
        longitudinal: Profile1D,
    },
}

impl FieldTerm {
    pub fn eval(&self, x: f64, y: f64, z: f64) -> f64 {
        match self {
            FieldTerm::Radial(b) => b.eval(x, y, z),
            FieldTerm::Cylinder {
                transverse,
                longitudinal,
            } => transverse.eval(x, y, 0.0) * longitudinal.eval(z),
        }
    }

    pub fn grad(&self, x: f64, y: f64, z: f64) -> [f64; 3] {
        match self {
            FieldTerm::Radial(b) => b.grad(x, y, z),
            FieldTerm::Cylinder {
                transverse,
                longitudinal,
            } => {
                let t = transverse.eval(x, y, 0.0);
                let gt = transverse.grad(x, y, 0.0);
                let l = longitudinal.eval(z);
                [gt[0] * l, gt[1] * l, t * longitudinal.deriv(z)]
            }
        }
    }

    pub fn support_box(&self) -> [[f64; 2]; 3] {
        match self {
            FieldTerm::Radial(b) => b.support_box(),
            FieldTerm::Cylinder {
                transverse,
                longitudinal,
            } => {
                let mut sb = transverse.support_box();
                sb[2] = longitudinal.support();
                sb
            }
        }
    }
}

/// Structural form of the initial displacement.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum SourceForm {
    /// No initial displacement.
    Zero,
    /// `f = q0(x') phi(x3) c(x)^2`, so the quotient `f / c^2` separates.
    Quotient { q0: RadialBump, phi: Profile1D },
    /// `f = p(x') phi_tilde(x3)` directly.
    Direct { p: RadialBump, phi_tilde: Profile1D },
    /// Plain sum of bumps.
    Terms(Vec<FieldTerm>),
}

/// Closed-form description of a phantom; every grid in the `Configuration`
/// is a sampling of these terms, so oracles can evaluate fields anywhere.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AnalyticPhantom {
    pub f_form: SourceForm,
    pub h_terms: Vec<FieldTerm>,
    pub c_terms: Vec<FieldTerm>,
    pub sigma_terms: Vec<FieldTerm>,
}

impl AnalyticPhantom {
    pub fn c(&self, x: f64, y: f64, z: f64) -> f64 {
        1.0 + self.c_terms.iter().map(|t| t.eval(x, y, z)).sum::<f64>()
    }

    pub fn sigma(&self, x: f64, y: f64, z: f64) -> f64 {
        1.0 + self
            .sigma_terms
            .iter()
            .map(|t| t.eval(x, y, z))
            .sum::<f64>()
    }

    pub fn h(&self, x: f64, y: f64, z: f64) -> f64 {
        self.h_terms.iter().map(|t| t.eval(x, y, z)).sum()
    }

    pub fn f(&self, x: f64, y: f64, z: f64) -> f64 {
        match &self.f_form {
            SourceForm::Zero => 0.0,
            SourceForm::Quotient { q0, phi } => {
                let g = q0.eval(x, y, 0.0) * phi.eval(z);
                if g == 0.0 {
                    0.0
                } else {
                    let c = self.c(x, y, z);
                    g * c * c
                }
            }
            SourceForm::Direct { p, phi_tilde } => p.eval(x, y, 0.0) * phi_tilde.eval(z),
            SourceForm::Terms(terms) => terms.iter().map(|t| t.eval(x, y, z)).sum(),
        }
    }

    /// Gradient of `f`, available in closed form for every source style.
    pub fn grad_f(&self, x: f64, y: f64, z: f64) -> [f64; 3] {
        match &self.f_form {
            SourceForm::Zero => [0.0; 3],
            SourceForm::Direct { p, phi_tilde } => {
                let t = p.eval(x, y, 0.0);
                let gt = p.grad(x, y, 0.0);
                let l = phi_tilde.eval(z);
                [gt[0] * l, gt[1] * l, t * phi_tilde.deriv(z)]
            }
            SourceForm::Terms(terms) => {
                let mut g = [0.0; 3];
                for t in terms {
                    let gt = t.grad(x, y, z);
                    for d in 0..3 {
                        g[d] += gt[d];
                    }
                }
                g
            }
            SourceForm::Quotient { q0, phi } => {
                let q = q0.eval(x, y, 0.0);
                let gq = q0.grad(x, y, 0.0);
                let l = phi.eval(z);
                let dl = phi.deriv(z);
                if q == 0.0 && gq == [0.0; 3] {
                    return [0.0; 3];
                }
                let c = self.c(x, y, z);
                let mut gc = [0.0; 3];
                for t in &self.c_terms {
                    let g = t.grad(x, y, z);
                    for d in 0..3 {
                        gc[d] += g[d];
                    }
                }
                [
                    gq[0] * l * c * c + q * l * 2.0 * c * gc[0],
                    gq[1] * l * c * c + q * l * 2.0 * c * gc[1],
                    q * dl * c * c + q * l * 2.0 * c * gc[2],
                ]
            }
        }
    }
}

/// Separated-variable metadata for one stored field: the field equals
/// `transverse (x) longitudinal` on the grid.
#[derive(Debug, Clone)]
pub struct SeparatedProfile {
    /// Separated coordinate; the builder fixes the reference frame so this is
    /// always axis 2 (the third coordinate).
    pub axis: usize,
    /// Transverse factor sampled on the `(x1, x2)` grid.
    pub transverse: Array2<f64>,
    /// Longitudinal factor in analytic form.
    pub longitudinal: Profile1D,
    /// Longitudinal factor sampled at the axis nodes.
    pub longitudinal_samples: Vec<f64>,
    /// Support interval of the longitudinal factor.
    pub support: [f64; 2],
}

impl SeparatedProfile {
    /// Max relative deviation of `field` from the stored product.
    pub fn product_deviation(&self, grid: &Grid, field: &Array3<f64>) -> f64 {
        let n = grid.n();
        let scale = norm_max(field).max(1e-300);
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let t = self.transverse[[i, j]];
                for k in 0..n {
                    let p = t * self.longitudinal_samples[k];
                    let d = (field[[i, j, k]] - p).abs();
                    worst = worst.max(d);
                }
            }
        }
        worst / scale
    }
}

/// Separated metadata attached to a configuration.
#[derive(Debug, Clone, Default)]
pub struct ProfileSet {
    /// Factorization of the quotient `f / c^2`.
    pub quotient: Option<SeparatedProfile>,
    /// Factorization of `f` itself.
    pub f: Option<SeparatedProfile>,
}

/// A complete medium/source configuration on the cube.
#[derive(Debug, Clone)]
pub struct Configuration {
    pub domain: Domain,
    pub f: Array3<f64>,
    pub h: Array3<f64>,
    pub c: Array3<f64>,
    pub sigma: Array3<f64>,
    pub profiles: ProfileSet,
    pub analytic: Option<AnalyticPhantom>,
    /// Admissible band for `c` used in validation.
    pub c_bounds: (f64, f64),
    /// Admissible band for `sigma` used in validation.
    pub sigma_bounds: (f64, f64),
}

impl Configuration {
    /// Homogeneous background: `f = h = 0`, `c = sigma = 1`.
    pub fn homogeneous(domain: Domain) -> Self {
        let g = domain.grid;
        Configuration {
            domain,
            f: g.zeros(),
            h: g.zeros(),
            c: g.sample(|_, _, _| 1.0),
            sigma: g.sample(|_, _, _| 1.0),
            profiles: ProfileSet::default(),
            analytic: Some(AnalyticPhantom {
                f_form: SourceForm::Zero,
                h_terms: vec![],
                c_terms: vec![],
                sigma_terms: vec![],
            }),
            c_bounds: (0.5, 2.0),
            sigma_bounds: (0.5, 2.0),
        }
    }

    /// Quotient field `f / c^2` on the grid.
    pub fn quotient_field(&self) -> Array3<f64> {
        let mut g = self.f.clone();
        g.zip_mut_with(&self.c, |v, c| *v /= c * c);
        g
    }

    /// Measured range of `c` over the whole cube.
    pub fn c_range(&self) -> (f64, f64) {
        field_range(&self.c)
    }

    /// Measured range of `sigma` over the whole cube.
    pub fn sigma_range(&self) -> (f64, f64) {
        field_range(&self.sigma)
    }

    /// Largest wave speed, for stability bounds (`sqrt(sigma) c` pointwise).
    pub fn max_signal_speed(&self) -> f64 {
        self.c
            .iter()
            .zip(self.sigma.iter())
            .map(|(c, s)| c * s.sqrt())
            .fold(0.0f64, f64::max)
    }
}

fn field_range(f: &Array3<f64>) -> (f64, f64) {
    f.iter().fold((f64::MAX, f64::MIN), |(lo, hi), v| {
        (lo.min(*v), hi.max(*v))
    })
}

// ---------------------------------------------------------------------------
// Phantom descriptor (external interface)
// ---------------------------------------------------------------------------

/// One bump entry of the phantom descriptor file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BumpSpec {
    /// Target field: "f", "h", "c", "sigma", "q0" or "p".
    pub field: String,
    /// "gaussian", "poly3", "poly4", "poly6", or "cyl_poly3" (2D bump times
    /// a longitudinal plateau given by `plateau`/`edge`).
    pub kind: String,
    /// Center; 2 components for "q0"/"p", 3 otherwise.
    pub center: Vec<f64>,
    pub radius: f64,
    pub amplitude: f64,
    /// Longitudinal plateau `[lo, hi]` for cylindrical kinds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plateau: Option<[f64; 2]>,
    /// Ramp width for cylindrical kinds and mollified profiles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge: Option<f64>,
}

/// Longitudinal profile entry of the descriptor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileSpec {
    /// Separated coordinate; must be 2 (the third coordinate) in this frame.
    pub axis: usize,
    /// "mollified_indicator" or "poly4".
    pub longitudinal_kind: String,
    pub a: f64,
    pub b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge: Option<f64>,
}

/// Declarative phantom descriptor (the documented JSON schema).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub grid_n: usize,
    /// Half-width of the observation box (grid-aligned).
    pub omega_box: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sponge_cells: Option<usize>,
    #[serde(default)]
    pub bumps: Vec<BumpSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileSpec>,
    /// Admissible `c` band, default `[0.5, 2.0]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_bounds: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_bounds: Option<[f64; 2]>,
}

fn parse_shape(kind: &str) -> Result<BumpShape, ConfigError> {
    Ok(match kind {
        "gaussian" => BumpShape::Gaussian,
        "poly3" => BumpShape::Poly { power: 3 },
        "poly4" => BumpShape::Poly { power: 4 },
        "poly6" => BumpShape::Poly { power: 6 },
        other => return Err(ConfigError::BadDescriptor(format!("bump kind `{other}`"))),
    })
}

fn bump_from_spec(b: &BumpSpec, dim: u8) -> Result<RadialBump, ConfigError> {
    let want = if dim == 2 { 2 } else { 3 };
    if b.center.len() != want {
        return Err(ConfigError::BadDescriptor(format!(
            "bump for `{}` needs {} center components, got {}",
            b.field,
            want,
            b.center.len()
        )));
    }
    let mut center = [0.0; 3];
    for (d, v) in b.center.iter().enumerate() {
        center[d] = *v;
    }
    Ok(RadialBump {
        dim,
        center,
        radius: b.radius,
        amplitude: b.amplitude,
        shape: parse_shape(b.kind.trim_start_matches("cyl_"))?,
    })
}

fn profile_from_spec(p: &ProfileSpec) -> Result<Profile1D, ConfigError> {
    if p.axis != 2 {
        return Err(ConfigError::BadDescriptor(format!(
            "separated axis must be 2 in the reference frame, got {}",
            p.axis
        )));
    }
    Ok(match p.longitudinal_kind.as_str() {
        "mollified_indicator" => Profile1D::MollifiedIndicator {
            a: p.a,
            b: p.b,
            edge: p.edge.unwrap_or(0.25 * (p.b - p.a)),
        },
        "poly4" => Profile1D::PolyBump {
            center: 0.5 * (p.a + p.b),
            radius: 0.5 * (p.b - p.a),
            amplitude: 1.0,
            power: 4,
        },
        other => {
            return Err(ConfigError::BadDescriptor(format!(
                "longitudinal kind `{other}`"
            )))
        }
    })
}

/// Builds a `Configuration` from a descriptor: assembles the analytic terms,
/// checks supports and coefficient bounds, samples the grids, and attaches
/// separated-profile metadata (with the product-consistency invariant).
pub fn build_separated_phantom(spec: &PhantomSpec) -> Result<Configuration, ConfigError> {
    let grid = Grid::new(spec.grid_n)?;
    let omega = OmegaBox::centered(&grid, spec.omega_box)?;
    let sponge = spec
        .sponge_cells
        .unwrap_or_else(|| Domain::default_sponge(spec.grid_n));
    let domain = Domain::new(grid, omega, sponge)?;

    let mut q0 = None;
    let mut p_trans = None;
    let mut f_terms = Vec::new();
    let mut h_terms = Vec::new();
    let mut c_terms = Vec::new();
    let mut sigma_terms = Vec::new();

    for b in &spec.bumps {
        let cylinder = b.kind.starts_with("cyl_");
        let term = if cylinder {
            let plateau = b.plateau.ok_or_else(|| {
                ConfigError::BadDescriptor("cylindrical bump needs `plateau`".into())
            })?;
            let edge = b.edge.unwrap_or(0.3);
            FieldTerm::Cylinder {
                transverse: bump_from_spec(b, 2)?,
                longitudinal: Profile1D::MollifiedIndicator {
                    a: plateau[0] - edge,
                    b: plateau[1] + edge,
                    edge,
                },
            }
        } else {
            FieldTerm::Radial(bump_from_spec(
                b,
                if b.field == "q0" || b.field == "p" { 2 } else { 3 },
            )?)
        };
        match b.field.as_str() {
            "q0" => q0 = Some(bump_from_spec(b, 2)?),
            "p" => p_trans = Some(bump_from_spec(b, 2)?),
            "f" => f_terms.push(term),
            "h" => h_terms.push(term),
            "c" => c_terms.push(term),
            "sigma" => sigma_terms.push(term),
            other => return Err(ConfigError::BadDescriptor(format!("field `{other}`"))),
        }
    }

    let longitudinal = spec.profile.as_ref().map(profile_from_spec).transpose()?;

    let f_form = match (q0, p_trans, f_terms.is_empty()) {
        (Some(_), Some(_), _) => {
            return Err(ConfigError::BadDescriptor(
                "give either `q0` (quotient form) or `p` (direct form), not both".into(),
            ))
        }
        (Some(q0), None, true) => SourceForm::Quotient {
            q0,
            phi: longitudinal.clone().ok_or_else(|| {
                ConfigError::BadDescriptor("`q0` requires a `profile` entry".into())
            })?,
        },
        (None, Some(p), true) => SourceForm::Direct {
            p,
            phi_tilde: longitudinal.clone().ok_or_else(|| {
                ConfigError::BadDescriptor("`p` requires a `profile` entry".into())
            })?,
        },
        (None, None, true) => SourceForm::Zero,
        (None, None, false) => SourceForm::Terms(f_terms),
        _ => {
            return Err(ConfigError::BadDescriptor(
                "mix of separated and plain `f` bumps".into(),
            ))
        }
    };

    let phantom = AnalyticPhantom {
        f_form,
        h_terms,
        c_terms,
        sigma_terms,
    };
    build_from_analytic(domain, phantom, spec)
}

fn check_support(
    grid: &Grid,
    omega: &OmegaBox,
    field: &str,
    sb: [[f64; 2]; 3],
) -> Result<(), ConfigError> {
    let h = grid.h();
    for d in 0..3 {
        let lo_wall = grid.x(omega.lo[d]);
        let hi_wall = grid.x(omega.hi[d]);
        // strict containment: one cell of clearance inside the box
        if sb[d][0] < lo_wall + h - 1e-12 || sb[d][1] > hi_wall - h + 1e-12 {
            return Err(ConfigError::SupportViolation {
                field: field.into(),
                detail: format!(
                    "axis {d}: support [{:.4}, {:.4}] vs box ({:.4}, {:.4})",
                    sb[d][0], sb[d][1], lo_wall, hi_wall
                ),
            });
        }
    }
    Ok(())
}

fn build_from_analytic(
    domain: Domain,
    phantom: AnalyticPhantom,
    spec: &PhantomSpec,
) -> Result<Configuration, ConfigError> {
    let grid = domain.grid;
    let omega = domain.omega;

    // support checks, term by term
    for (name, terms) in [
        ("h", &phantom.h_terms),
        ("c", &phantom.c_terms),
        ("sigma", &phantom.sigma_terms),
    ] {
        for t in terms {
            check_support(&grid, &omega, name, t.support_box())?;
        }
    }
    match &phantom.f_form {
        SourceForm::Zero => {}
        SourceForm::Terms(terms) => {
            for t in terms {
                check_support(&grid, &omega, "f", t.support_box())?;
            }
        }
        SourceForm::Quotient { q0, phi } => {
            let mut sb = q0.support_box();
            sb[2] = phi.support();
            check_support(&grid, &omega, "f (quotient form)", sb)?;
        }
        SourceForm::Direct { p, phi_tilde } => {
            let mut sb = p.support_box();
            sb[2] = phi_tilde.support();
            check_support(&grid, &omega, "f (direct form)", sb)?;
        }
    }

    let f = grid.sample(|x, y, z| phantom.f(x, y, z));
    let h = grid.sample(|x, y, z| phantom.h(x, y, z));
    let c = grid.sample(|x, y, z| phantom.c(x, y, z));
    let sigma = grid.sample(|x, y, z| phantom.sigma(x, y, z));

    let c_bounds = spec.c_bounds.map(|b| (b[0], b[1])).unwrap_or((0.5, 2.0));
    let sigma_bounds = spec
        .sigma_bounds
        .map(|b| (b[0], b[1]))
        .unwrap_or((0.5, 2.0));
    for (name, field, (lo, hi)) in [("c", &c, c_bounds), ("sigma", &sigma, sigma_bounds)] {
        let (min, max) = field_range(field);
        if min < lo || max > hi {
            return Err(ConfigError::BoundsViolation {
                field: name.into(),
                lo,
                hi,
                min,
                max,
            });
        }
    }

    // separated metadata
    let n = grid.n();
    let mut profiles = ProfileSet::default();
    if let SourceForm::Quotient { q0, phi } = &phantom.f_form {
        let mut transverse = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                transverse[[i, j]] = q0.eval(grid.x(i), grid.x(j), 0.0);
            }
        }
        let longitudinal_samples: Vec<f64> = (0..n).map(|k| phi.eval(grid.x(k))).collect();
        profiles.quotient = Some(SeparatedProfile {
            axis: 2,
            transverse,
            longitudinal: phi.clone(),
            longitudinal_samples,
            support: phi.support(),
        });
        // f itself also separates when the speed perturbation is cylindrical
        // and flat across the longitudinal support
        if c_is_cylindrical_on(&phantom.c_terms, phi.support()) {
            let mut ft = Array2::zeros((n, n));
            for i in 0..n {
                for j in 0..n {
                    let (x, y) = (grid.x(i), grid.x(j));
                    let cxy = phantom.c(x, y, 0.5 * (phi.support()[0] + phi.support()[1]));
                    ft[[i, j]] = q0.eval(x, y, 0.0) * cxy * cxy;
                }
            }
            let longitudinal_samples: Vec<f64> = (0..n).map(|k| phi.eval(grid.x(k))).collect();
            profiles.f = Some(SeparatedProfile {
                axis: 2,
                transverse: ft,
                longitudinal: phi.clone(),
                longitudinal_samples,
                support: phi.support(),
            });
        }
    }
    if let SourceForm::Direct { p, phi_tilde } = &phantom.f_form {
        let mut transverse = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                transverse[[i, j]] = p.eval(grid.x(i), grid.x(j), 0.0);
            }
        }
        let longitudinal_samples: Vec<f64> = (0..n).map(|k| phi_tilde.eval(grid.x(k))).collect();
        profiles.f = Some(SeparatedProfile {
            axis: 2,
            transverse,
            longitudinal: phi_tilde.clone(),
            longitudinal_samples,
            support: phi_tilde.support(),
        });
    }

    let cfg = Configuration {
        domain,
        f,
        h,
        c,
        sigma,
        profiles,
        analytic: Some(phantom),
        c_bounds,
        sigma_bounds,
    };

    // product-consistency invariant
    if let Some(qp) = &cfg.profiles.quotient {
        let dev = qp.product_deviation(&grid, &cfg.quotient_field());
        debug_assert!(dev <= 1e-12, "quotient product deviation {dev}");
    }
    if let Some(fp) = &cfg.profiles.f {
        let dev = fp.product_deviation(&grid, &cfg.f);
        debug_assert!(dev <= 1e-12, "f product deviation {dev}");
    }
    Ok(cfg)
}

/// True if every speed term is a cylinder whose longitudinal factor is
/// identically 1 across the interval (checked on a fine sampling).
fn c_is_cylindrical_on(terms: &[FieldTerm], support: [f64; 2]) -> bool {
    terms.iter().all(|t| match t {
        FieldTerm::Radial(_) => false,
        FieldTerm::Cylinder { longitudinal, .. } => (0..=200)
            .map(|i| support[0] + (support[1] - support[0]) * i as f64 / 200.0)
            .all(|s| (longitudinal.eval(s) - 1.0).abs() < 1e-13),
    })
}

// ---------------------------------------------------------------------------
// Weighted profile integral
// ---------------------------------------------------------------------------

/// `int_a^b profile(s) e^{omega s} ds` by the end-corrected composite rule.
///
/// Errors if the profile is sampled on fewer than 64 points or the oscillation
/// of the weight is unresolved (period below four sample spacings).
pub fn phi_weighted_integral(
    samples: &[f64],
    interval: [f64; 2],
    omega: Complex64,
) -> Result<Complex64, ConfigError> {
    if samples.len() < 64 {
        return Err(ConfigError::ProfileTooCoarse {
            min: 64,
            got: samples.len(),
        });
    }
    let ds = (interval[1] - interval[0]) / (samples.len() - 1) as f64;
    let osc = omega.im.abs() * ds;
    if osc > PI / 2.0 {
        return Err(ConfigError::QuadratureResolution { omega_ds: osc });
    }
    let w = gregory_weights(samples.len());
    let mut acc = Complex64::default();
    for (i, (v, wi)) in samples.iter().zip(w.iter()).enumerate() {
        let s = interval[0] + i as f64 * ds;
        acc += (omega * s).exp() * (v * wi);
    }
    Ok(acc * ds)
}

// ---------------------------------------------------------------------------
// Admissibility
// ---------------------------------------------------------------------------

/// One non-degeneracy entry: the weighted longitudinal integrals at the mode
/// `(rho1, rho2)` of the shifted transverse lattice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NondegEntry {
    pub rho1: i64,
    /// Half-integer stored as value; the companion integer-index convention
    /// is `rho2 + 1/2`.
    pub rho2: f64,
    pub kappa: f64,
    /// `int phi e^{-kappa x3}` (the divisor used in recovery).
    pub value_minus: [f64; 2],
    /// `int phi e^{+kappa x3}`.
    pub value_plus: [f64; 2],
    pub ok: bool,
}

/// Sweep entry for the oscillatory profile transform.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiTildeEntry {
    pub xi: f64,
    pub magnitude: f64,
    /// `|transform| * xi^2`; admissible profiles keep this bounded away from
    /// zero as `xi` grows.
    pub chn2_proxy: f64,
}

/// Numerical admissibility report; carries pass/fail flags and measured
/// tables, never errors on a failing condition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub bounds_ok: bool,
    pub c_range: (f64, f64),
    pub sigma_range: (f64, f64),
    /// Longitudinal divisor table over the mode box, both exponent signs.
    pub nondegeneracy: Vec<NondegEntry>,
    pub nondegenerate_ok: bool,
    /// Index conventions stored with the table: `rho2` runs over the
    /// half-integer lattice; `rho2 + 1/2` gives the equivalent integer pair.
    pub lattice_convention: String,
    pub phi_tilde_sweep: Vec<PhiTildeEntry>,
    pub nontrapping_margin: f64,
    pub sigma_nontrapping_margin: f64,
    /// Filled after a forward run.
    pub decay_integral: Option<f64>,
}

/// Degeneracy threshold relative to the L1 mass of the profile.
pub const DEGENERACY_THRESHOLD: f64 = 1e-10;

/// Evaluates the admissibility tables for a configuration: coefficient
/// bounds, the weighted-profile non-degeneracy table over `|rho| <= rho_max`,
/// the oscillatory-transform sweep, and the nontrapping margins.
pub fn check_admissibility(cfg: &Configuration, rho_max: f64) -> AdmissibilityReport {
    let (c_lo, c_hi) = cfg.c_range();
    let (s_lo, s_hi) = cfg.sigma_range();
    let bounds_ok = c_lo >= cfg.c_bounds.0
        && c_hi <= cfg.c_bounds.1
        && s_lo >= cfg.sigma_bounds.0
        && s_hi <= cfg.sigma_bounds.1
        && c_lo > 0.0
        && s_lo > 0.0;

    let mut nondeg = Vec::new();
    let mut nondeg_ok = true;
    if let Some(qp) = &cfg.profiles.quotient {
        let [a, b] = qp.support;
        let samples = qp.longitudinal.sample(a, b, 1025);
        let l1: f64 = samples.iter().map(|v| v.abs()).sum::<f64>() * (b - a) / 1024.0;
        let threshold = DEGENERACY_THRESHOLD * l1.max(1e-300);
        let r = rho_max.ceil() as i64;
        for rho1 in -r..=r {
            let mut two_rho2 = -2 * r + 1;
            while two_rho2 <= 2 * r - 1 {
                let rho2 = two_rho2 as f64 / 2.0;
                two_rho2 += 2;
                let kappa = ((rho1 * rho1) as f64 + rho2 * rho2).sqrt();
                if kappa > rho_max {
                    continue;
                }
                let vm =
                    phi_weighted_integral(&samples, [a, b], Complex64::new(-kappa, 0.0)).unwrap();
                let vp =
                    phi_weighted_integral(&samples, [a, b], Complex64::new(kappa, 0.0)).unwrap();
                let ok = vm.norm() > threshold && vp.norm() > threshold;
                nondeg_ok &= ok;
                nondeg.push(NondegEntry {
                    rho1,
                    rho2,
                    kappa,
                    value_minus: [vm.re, vm.im],
                    value_plus: [vp.re, vp.im],
                    ok,
                });
            }
        }
    }

    let mut sweep = Vec::new();
    if let Some(fp) = &cfg.profiles.f {
        let [a, b] = fp.support;
        let samples = fp.longitudinal.sample(a, b, 2049);
        for i in 1..=64 {
            let xi = i as f64 * 0.5;
            if let Ok(v) = phi_weighted_integral(&samples, [a, b], Complex64::new(0.0, xi)) {
                sweep.push(PhiTildeEntry {
                    xi,
                    magnitude: v.norm(),
                    chn2_proxy: v.norm() * xi * xi,
                });
            }
        }
    }

    let (nt_c, nt_sigma) = nontrapping_margins(cfg);

    AdmissibilityReport {
        bounds_ok,
        c_range: (c_lo, c_hi),
        sigma_range: (s_lo, s_hi),
        nondegeneracy: nondeg,
        nondegenerate_ok: nondeg_ok,
        lattice_convention: "rho1 integer, rho2 half-integer; integer-pair convention is (rho1, rho2 + 1/2)".into(),
        phi_tilde_sweep: sweep,
        nontrapping_margin: nt_c,
        sigma_nontrapping_margin: nt_sigma,
        decay_integral: None,
    }
}

/// Min over the grid of `2 c^-2 + x . grad(c^-2)` and `sigma - x . grad
/// sigma`, centered differences.
fn nontrapping_margins(cfg: &Configuration) -> (f64, f64) {
    let grid = cfg.domain.grid;
    let n = grid.n();
    let h = grid.h();
    let c = cfg.c.as_slice().unwrap();
    let sg = cfg.sigma.as_slice().unwrap();
    let nn = n * n;
    let idx = |i: usize, j: usize, k: usize| i * nn + j * n + k;
    let mut min_c = f64::MAX;
    let mut min_s = f64::MAX;
    // interior nodes only; coefficients are constant near dQ anyway
    for i in 1..n - 1 {
        let x = grid.x(i);
        for j in 1..n - 1 {
            let y = grid.x(j);
            for k in 1..n - 1 {
                let z = grid.x(k);
                let inv2 = |v: f64| 1.0 / (v * v);
                let gx = (inv2(c[idx(i + 1, j, k)]) - inv2(c[idx(i - 1, j, k)])) / (2.0 * h);
                let gy = (inv2(c[idx(i, j + 1, k)]) - inv2(c[idx(i, j - 1, k)])) / (2.0 * h);
                let gz = (inv2(c[idx(i, j, k + 1)]) - inv2(c[idx(i, j, k - 1)])) / (2.0 * h);
                let val = 2.0 * inv2(c[idx(i, j, k)]) + x * gx + y * gy + z * gz;
                min_c = min_c.min(val);

                let sx = (sg[idx(i + 1, j, k)] - sg[idx(i - 1, j, k)]) / (2.0 * h);
                let sy = (sg[idx(i, j + 1, k)] - sg[idx(i, j - 1, k)]) / (2.0 * h);
                let sz = (sg[idx(i, j, k + 1)] - sg[idx(i, j, k - 1)]) / (2.0 * h);
                let vs = sg[idx(i, j, k)] - (x * sx + y * sy + z * sz);
                min_s = min_s.min(vs);
            }
        }
    }
    (min_c, min_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::norm_l2;

    fn tatpat_spec(n: usize) -> PhantomSpec {
        PhantomSpec {
            grid_n: n,
            omega_box: 14.0 * 2.0 * PI / 64.0,
            sponge_cells: None,
            bumps: vec![
                BumpSpec {
                    field: "q0".into(),
                    kind: "poly4".into(),
                    center: vec![0.0, 0.0],
                    radius: 1.05,
                    amplitude: 1.0,
                    plateau: None,
                    edge: None,
                },
                BumpSpec {
                    field: "c".into(),
                    kind: "cyl_poly3".into(),
                    center: vec![0.1, -0.1],
                    radius: 0.85,
                    amplitude: 0.22,
                    plateau: Some([-0.95, 0.95]),
                    edge: Some(0.3),
                },
            ],
            profile: Some(ProfileSpec {
                axis: 2,
                longitudinal_kind: "mollified_indicator".into(),
                a: -0.9,
                b: 0.9,
                edge: Some(0.25),
            }),
            c_bounds: None,
            sigma_bounds: None,
        }
    }

    #[test]
    fn homogeneous_spec_builds_identity_configuration() {
        let spec = PhantomSpec {
            grid_n: 32,
            omega_box: 7.0 * 2.0 * PI / 32.0,
            sponge_cells: None,
            bumps: vec![],
            profile: None,
            c_bounds: None,
            sigma_bounds: None,
        };
        let cfg = build_separated_phantom(&spec).unwrap();
        assert_eq!(norm_l2(&cfg.domain.grid, &cfg.f), 0.0);
        assert_eq!(norm_l2(&cfg.domain.grid, &cfg.h), 0.0);
        assert_eq!(cfg.c_range(), (1.0, 1.0));
        assert_eq!(cfg.sigma_range(), (1.0, 1.0));
    }

    #[test]
    fn quotient_product_consistency() {
        let cfg = build_separated_phantom(&tatpat_spec(64)).unwrap();
        let qp = cfg.profiles.quotient.as_ref().unwrap();
        let dev = qp.product_deviation(&cfg.domain.grid, &cfg.quotient_field());
        assert!(dev <= 1e-12, "quotient deviation {dev}");
        // the speed is cylindrical, so f itself separates too
        let fp = cfg.profiles.f.as_ref().unwrap();
        let devf = fp.product_deviation(&cfg.domain.grid, &cfg.f);
        assert!(devf <= 1e-12, "f deviation {devf}");
    }

    #[test]
    fn exterior_homogeneity_is_exact() {
        let cfg = build_separated_phantom(&tatpat_spec(64)).unwrap();
        let g = cfg.domain.grid;
        let om = cfg.domain.omega;
        let n = g.n();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if !om.contains(i, j, k) {
                        assert_eq!(cfg.f[[i, j, k]], 0.0);
                        assert_eq!(cfg.h[[i, j, k]], 0.0);
                        assert_eq!(cfg.c[[i, j, k]], 1.0);
                        assert_eq!(cfg.sigma[[i, j, k]], 1.0);
                    }
                }
            }
        }
    }

    #[test]
    fn bounds_violation_is_rejected() {
        let mut spec = tatpat_spec(64);
        spec.bumps[1].amplitude = -0.6; // c dips to 0.4 < 0.5
        match build_separated_phantom(&spec) {
            Err(ConfigError::BoundsViolation { field, .. }) => assert_eq!(field, "c"),
            other => panic!("expected bounds violation, got {other:?}"),
        }
    }

    #[test]
    fn support_violation_is_rejected() {
        let mut spec = tatpat_spec(64);
        spec.bumps[0].radius = 2.0; // leaks outside the box
        match build_separated_phantom(&spec) {
            Err(ConfigError::SupportViolation { .. }) => {}
            other => panic!("expected support violation, got {other:?}"),
        }
    }

    #[test]
    fn weighted_integral_constant_profile() {
        // profile = 1 on [-1, 1], omega = 0 -> 2
        let samples = vec![1.0; 129];
        let v = phi_weighted_integral(&samples, [-1.0, 1.0], Complex64::default()).unwrap();
        assert!((v - Complex64::new(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn weighted_integral_oscillatory_closed_form() {
        // profile = 1 on [a, b], omega = i xi -> (e^{i xi b} - e^{i xi a})/(i xi)
        let (a, b) = (-0.7, 1.1);
        let xi = 3.0;
        let samples = vec![1.0; 513];
        let v = phi_weighted_integral(&samples, [a, b], Complex64::new(0.0, xi)).unwrap();
        let i_xi = Complex64::new(0.0, xi);
        let exact = ((i_xi * b).exp() - (i_xi * a).exp()) / i_xi;
        assert!((v - exact).norm() < 1e-9, "{v} vs {exact}");
    }

    #[test]
    fn weighted_integral_gaussian_against_brute_force() {
        // Riemann sum at 10^6 points is the independent oracle
        let g = |s: f64| (-0.5 * (s / 0.3f64).powi(2)).exp();
        let (a, b) = (-1.0, 1.0);
        let omega = Complex64::new(2.5, 0.0);
        let samples: Vec<f64> = (0..1025)
            .map(|i| g(a + (b - a) * i as f64 / 1024.0))
            .collect();
        let v = phi_weighted_integral(&samples, [a, b], omega).unwrap();
        let m = 1_000_000;
        let dx = (b - a) / m as f64;
        let mut brute = Complex64::default();
        for i in 0..m {
            let s = a + (i as f64 + 0.5) * dx;
            brute += (omega * s).exp() * g(s);
        }
        brute *= dx;
        assert!(
            (v - brute).norm() <= 1e-8 * brute.norm(),
            "{v} vs {brute}"
        );
    }

    #[test]
    fn weighted_integral_rejects_unresolved_oscillation() {
        let samples = vec![1.0; 64];
        let res = phi_weighted_integral(&samples, [-1.0, 1.0], Complex64::new(0.0, 200.0));
        assert!(matches!(
            res,
            Err(ConfigError::QuadratureResolution { .. })
        ));
        let res = phi_weighted_integral(&samples[..32], [-1.0, 1.0], Complex64::default());
        assert!(matches!(res, Err(ConfigError::ProfileTooCoarse { .. })));
    }

    #[test]
    fn admissibility_positive_profile_never_degenerate() {
        let cfg = build_separated_phantom(&tatpat_spec(64)).unwrap();
        let report = check_admissibility(&cfg, 6.0);
        assert!(report.bounds_ok);
        assert!(report.nondegenerate_ok);
        for e in &report.nondegeneracy {
            // positive integrand: both signs strictly positive
            assert!(e.value_minus[0] > 0.0 && e.value_plus[0] > 0.0);
            assert!(e.kappa >= 0.5);
        }
    }

    #[test]
    fn admissibility_homogeneous_margin_is_two() {
        let spec = PhantomSpec {
            grid_n: 32,
            omega_box: 7.0 * 2.0 * PI / 32.0,
            sponge_cells: None,
            bumps: vec![],
            profile: None,
            c_bounds: None,
            sigma_bounds: None,
        };
        let cfg = build_separated_phantom(&spec).unwrap();
        let report = check_admissibility(&cfg, 4.0);
        assert_eq!(report.nontrapping_margin, 2.0);
        assert_eq!(report.sigma_nontrapping_margin, 1.0);
    }

    #[test]
    fn odd_profile_degenerates_at_zero_weight() {
        // odd profile: integral at omega = 0 vanishes; verified against a
        // 4x-resolution quadrature oracle
        let odd = |s: f64| s * (-1.0 * s * s).exp();
        let (a, b) = (-1.5, 1.5);
        let coarse: Vec<f64> = (0..257).map(|i| odd(a + 3.0 * i as f64 / 256.0)).collect();
        let fine: Vec<f64> = (0..1025).map(|i| odd(a + 3.0 * i as f64 / 1024.0)).collect();
        let v = phi_weighted_integral(&coarse, [a, b], Complex64::default()).unwrap();
        let v4 = phi_weighted_integral(&fine, [a, b], Complex64::default()).unwrap();
        let l1 = 3.0 * coarse.iter().map(|v| v.abs()).sum::<f64>() / 256.0;
        assert!(v.norm() < DEGENERACY_THRESHOLD * l1.max(1.0));
        assert!((v - v4).norm() < 1e-12);
    }

    #[test]
    fn admissibility_is_deterministic() {
        let cfg = build_separated_phantom(&tatpat_spec(64)).unwrap();
        let r1 = serde_json::to_string(&check_admissibility(&cfg, 6.0)).unwrap();
        let r2 = serde_json::to_string(&check_admissibility(&cfg, 6.0)).unwrap();
        assert_eq!(r1, r2);
    }
}
