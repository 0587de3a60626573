//! Numerical machinery for passive-observation inverse boundary problems for
//! the second-order hyperbolic equation
//! `(1/c^2) u_tt - div(sigma grad u) = 0` with initial data `(f, h)`:
//!
//! * time-domain forward simulation recording the single boundary Cauchy
//!   dataset `(u, sigma du/dnu)` on the observation box;
//! * temporal Fourier reduction and an independent frequency-domain solver,
//!   with high-frequency remainder analysis;
//! * complex-geometrical-optics test waves built from an explicit Fourier
//!   multiplier inverse on a shifted lattice and a contraction-mapping
//!   corrector;
//! * numerical evaluation of the boundary/interior integral identities the
//!   uniqueness arguments rest on;
//! * reconstruction of `f/c^2`, `f` and `c` from one synthetic boundary
//!   observation.
//!
//! See the `examples/` directory for one runnable program per capability and
//! the `pwinv` binary for the scenario runner.

pub mod cgo;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fft;
pub mod forward;
pub mod grid;
pub mod identities;
pub mod inversion;
pub mod oracle;
pub mod profile;
pub mod quad;
pub mod spectral;
pub mod stencil;

pub use config::{build_separated_phantom, check_admissibility, Configuration, Domain, PhantomSpec};
pub use error::Error;
pub use grid::{Grid, OmegaBox};
