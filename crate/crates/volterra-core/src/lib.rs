//! Numerical toolkit for the memory structure of stochastic Volterra equations.
//!
//! The crate is organized around the objects that make path-dependence
//! computable:
//!
//! - [`kernels`]: parametric Volterra kernels, their L2-increment exponents and
//!   sum-of-exponentials (Bernstein) representations;
//! - [`resolvents`]: the resolvent of the first kind, the mean propagator
//!   `E_K`, the path-dependence measure `Pi_z` and the auxiliary kernel `K_z`,
//!   plus the coefficients of the affine conditional-mean formula;
//! - [`gram`]: Gram matrices of kernel systems, smallest-eigenvalue
//!   nondegeneracy scans and the parameter balance checker;
//! - [`perturb`]: admissible perturbations (shifts, Marchaud forward
//!   fractional derivatives, fractional integrals, exponential-span
//!   projections);
//! - [`sim`]: a deterministic, parallel Volterra-Euler Monte Carlo engine with
//!   companion perturbation processes and nested branching;
//! - [`lift`]: the grid-discretized time-shift Markovian lift (forward
//!   curves, flow checks, covariance-rank estimation);
//! - [`markovtest`]: statistical falsification of the Markov property.

pub mod gram;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod lift;
pub mod markovtest;
pub mod perturb;
pub mod quad;
pub mod resolvents;
pub mod sim;
pub mod special;
pub mod stats;

pub use grid::TimeGrid;
pub use kernels::{KernelSpec, MatrixKernelSpec};
pub use sim::{DiffusionSpec, DriftSpec, InitialCurve, ModelSpec, PathEnsemble, WeightMode};

/// Error type shared by every module of the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("kernel is singular at t = 0 and cannot be evaluated there")]
    EvalAtSingularity,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("quadrature failed to reach its tolerance: {0}")]
    QuadratureFailure(String),
    #[error("kernel has no Bernstein representation in the admissible region: {0}")]
    NotCompletelyMonotone(String),
    #[error("leading kernel cell integral vanishes; deconvolution system is singular")]
    SingularSystem,
    #[error("resolvent routes disagree beyond tolerance: {0}")]
    InconsistentRoutes(String),
    #[error("kernel bound violated: {0}")]
    BoundViolation(String),
    #[error("time {0} is not a node of the grid")]
    GridMismatch(f64),
    #[error("singular integral failed its convergence estimate: {0}")]
    DivergentIntegral(String),
    #[error("order alpha = {alpha} must lie in (beta, 1) with growth bound beta = {beta}")]
    InvalidOrder { alpha: f64, beta: f64 },
    #[error("kernel has no limit at infinity")]
    NoLimitAtInfinity,
    #[error("projection system is ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),
    #[error("kernel rows are linearly dependent (lambda_min/lambda_max = {0:.3e} at the largest h)")]
    DegenerateSystem(f64),
    #[error("simulated state exceeded the bound {0:.3e}; dt is too coarse for these parameters")]
    NumericalBlowup(f64),
    #[error("ensemble was built without history retention")]
    MissingHistory,
    #[error("need at least {need} paths, got {got}")]
    TooFewPaths { need: usize, got: usize },
    #[error("fewer than 50 paths per bin ({paths} paths / {bins} bins)")]
    EmptyBin { paths: usize, bins: usize },
    #[error("evaluation outside table support at t = {0}")]
    SingularEvaluation(f64),
    #[error("parameters outside the convergence region: {0}")]
    OutOfRegion(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
