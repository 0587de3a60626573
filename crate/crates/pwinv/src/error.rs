//! Error types, one enum per subsystem plus a top-level wrapper.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("grid resolution n = {n} must be even and >= 16")]
    BadGrid { n: usize },
    #[error("observation box half-width {a} is not aligned to the grid (h = {h}) or leaves no margin")]
    UnalignedOmega { a: f64, h: f64 },
    #[error("{field} leaks outside the observation box: {detail}")]
    SupportViolation { field: String, detail: String },
    #[error("coefficient {field} leaves its admissible band [{lo}, {hi}]: measured [{min}, {max}]")]
    BoundsViolation {
        field: String,
        lo: f64,
        hi: f64,
        min: f64,
        max: f64,
    },
    #[error("weighted profile integral under-resolved: |omega| * ds = {omega_ds} exceeds pi/2")]
    QuadratureResolution { omega_ds: f64 },
    #[error("profile must be sampled on at least {min} points, got {got}")]
    ProfileTooCoarse { min: usize, got: usize },
    #[error("unknown descriptor entry: {0}")]
    BadDescriptor(String),
}

#[derive(Debug, Error)]
pub enum ForwardError {
    #[error("time step {dt} violates the stability bound {bound}")]
    CflViolation { dt: f64, bound: f64 },
    #[error("instability: max |u| = {max} exceeded 1e6 x initial max {initial} at step {step}")]
    Instability { step: usize, max: f64, initial: f64 },
    #[error("dataset storage budget exceeded: {bytes} bytes > {budget} bytes")]
    Storage { bytes: usize, budget: usize },
    #[error("time horizon {t} below the minimum 4 diam(Omega)/c_- = {min}")]
    HorizonTooShort { t: f64, min: f64 },
    #[error("decay estimate degenerate: initial local energy is zero")]
    DegenerateDecay,
    #[error("need at least {min} snapshots, got {got}")]
    TooFewSnapshots { min: usize, got: usize },
}

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("temporal sampling too coarse: dt * k = {dtk} > 0.5 aliases the transform kernel")]
    Aliasing { dtk: f64 },
    #[error("frequency k = {k} unresolved on this grid: k*h = {kh} exceeds the hard cap {cap}")]
    Pollution { k: f64, kh: f64, cap: f64 },
    #[error("iterative solve did not reach tolerance: residual {residual} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },
    #[error("decay fit needs >= 4 samples spanning a factor >= 3 in k (got {got} over factor {span})")]
    InsufficientSpan { got: usize, span: f64 },
    #[error("frequency must be positive, got {k}")]
    NonPositiveFrequency { k: f64 },
}

#[derive(Debug, Error)]
pub enum CgoError {
    #[error("smallness bound violated: ||rho0^2/c^2||_inf = {value} > 1/4")]
    SmallnessViolation { value: f64 },
    #[error("fixed point stalled: increment {increment} after {iterations} iterations")]
    NonContraction { increment: f64, iterations: usize },
    #[error("invalid phase: {0}")]
    BadPhase(String),
}

#[derive(Debug, Error)]
pub enum IdentityError {
    #[error("time-truncation tail bound {tail} exceeds 10% of pairing magnitude {value}")]
    Coverage { tail: f64, value: f64 },
    #[error("test wave kind does not match this pairing")]
    WrongWaveKind,
    #[error("dataset and wave are on different grids")]
    GridMismatch,
}

#[derive(Debug, Error)]
pub enum InversionError {
    #[error("degenerate longitudinal divisor at kappa = {kappa}: |integral| = {magnitude} below threshold {threshold}")]
    DegenerateDivisor {
        kappa: f64,
        magnitude: f64,
        threshold: f64,
    },
    #[error("mode extraction needs at least 2 parameter values, got {got}")]
    TooFewNodes { got: usize },
    #[error("tau * T = {tau_t} below the coverage requirement 8")]
    TauHorizon { tau_t: f64 },
    #[error("frequency traces missing k = {k}")]
    MissingFrequency { k: f64 },
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error(transparent)]
    Cgo(#[from] CgoError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("validation failed at `{path}`: {message}")]
    Validation { path: String, message: String },
    #[error("missing artifact `{0}`")]
    MissingArtifact(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Top-level error for CLI and pipeline plumbing.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Forward(#[from] ForwardError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Cgo(#[from] CgoError),
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error(transparent)]
    Inversion(#[from] InversionError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("format: {0}")]
    Format(String),
}
