//! Error types shared across the crate.

use thiserror::Error;

use crate::operator::DensityDiagnostics;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operands have incompatible or unsupported dimensions.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A matrix expected to be Hermitian was not, within tolerance.
    #[error("matrix is not Hermitian (max deviation {dev:.3e})")]
    NotHermitian { dev: f64 },

    /// A matrix expected to be unitary was not, within tolerance.
    #[error("matrix is not unitary (max |UU† - 1| = {dev:.3e})")]
    NotUnitary { dev: f64 },

    /// A matrix failed the density-matrix physicality checks.
    #[error("not a physical density matrix: {0}")]
    Unphysical(#[from] DensityDiagnostics),

    /// Generic invalid argument (preconditions violated).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A candidate generator has nonvanishing diagonal elements.
    #[error("off-diagonal generator rejected: max |G_jj| = {max_diag:.3e} exceeds {tol:.1e}")]
    GeneratorDiagonal { max_diag: f64, tol: f64 },

    /// No decomposition candidates to select from.
    #[error("no decomposition candidates")]
    EmptyCandidates,

    /// Perturbation theory hit an (almost) exactly resonant denominator.
    #[error(
        "drive resonant with transition {j}-{k} (|ω_d - ω_jk| = {detuning:.3e} rad/s); \
         perturbative shifts are invalid there"
    )]
    Resonant { j: usize, k: usize, detuning: f64 },

    /// The dressed-level photon truncation cannot hold the resonant manifold.
    #[error("dressed-state truncation too small: need at least {needed} photon blocks, got {got}")]
    BlocksTooSmall { needed: usize, got: usize },

    /// Adiabatic eigenstate tracking lost its state near an anticrossing.
    #[error(
        "dressed-level tracking ambiguous at amplitude {amplitude:.4e} \
         (best eigenvector overlap {overlap:.3}); refusing to guess"
    )]
    TrackingAmbiguity { amplitude: f64, overlap: f64 },

    /// The ODE integrator could not meet its tolerances.
    #[error("integration failure at t = {t:.6e} s: {reason}")]
    IntegrationFailure { t: f64, reason: String },

    /// The likelihood optimizer exhausted its restart budget.
    #[error(
        "maximum-likelihood optimizer did not converge after {restarts} restarts \
         (best objective {objective:.3e})"
    )]
    MleNonConvergence {
        objective: f64,
        restarts: usize,
        /// Best reconstruction found so far (row-major entries).
        best: Box<ndarray::Array2<num_complex::Complex64>>,
    },

    /// The tomography design matrix cannot resolve all parameters.
    #[error("rank-deficient tomography design: rank {rank} < {needed} ({what})")]
    RankDeficientDesign { rank: usize, needed: usize, what: String },

    /// A linear calibration system is singular.
    #[error("singular calibration system: {0}")]
    SingularSystem(String),

    /// Low-level linear algebra failure (LAPACK).
    #[error("linear algebra failure: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
