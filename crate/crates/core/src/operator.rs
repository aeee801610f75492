//! States, unitaries, fidelity metrics, and physicality validation.

use std::fmt;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;

/// Elementwise tolerance for the `U·U† = 1` unitarity invariant.
pub const UNITARITY_TOL: f64 = 1e-10;
/// Elementwise tolerance for Hermiticity checks on inputs.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Tolerance on `Tr ρ = 1` for strict density-matrix validation.
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalue floor for strict density-matrix validation.
pub const EIGENVALUE_FLOOR: f64 = -1e-10;

/// A dense unitary operator. Construction checks `U·U† = 1` elementwise to
/// [`UNITARITY_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator {
    dim: usize,
    entries: Array2<C64>,
}

impl UnitaryOperator {
    pub fn new(entries: Array2<C64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c || r == 0 {
            return Err(Error::Dimension(format!("unitary must be square, got {r}×{c}")));
        }
        let dev = linalg::unitarity_deviation(&entries);
        if dev > UNITARITY_TOL {
            return Err(Error::NotUnitary { dev });
        }
        Ok(Self { dim: r, entries })
    }

    /// Construct without re-validating; for internal products of already
    /// validated unitaries.
    pub(crate) fn from_validated(entries: Array2<C64>) -> Self {
        let dim = entries.nrows();
        Self { dim, entries }
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, entries: Array2::eye(dim) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn dagger(&self) -> Self {
        Self { dim: self.dim, entries: linalg::dagger(&self.entries) }
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::Dimension(format!(
                "compose: dims {} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(Self::from_validated(self.entries.dot(&other.entries)))
    }

    pub fn apply_state(&self, psi: &Array1<C64>) -> Result<Array1<C64>> {
        if psi.len() != self.dim {
            return Err(Error::Dimension(format!(
                "apply_state: dim {} vs state {}",
                self.dim,
                psi.len()
            )));
        }
        Ok(self.entries.dot(psi))
    }

    /// Conjugation `U ρ U†`.
    pub fn apply_density(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.dim {
            return Err(Error::Dimension(format!(
                "apply_density: dim {} vs state {}",
                self.dim,
                rho.dim()
            )));
        }
        let m = self.entries.dot(rho.entries()).dot(&linalg::dagger(&self.entries));
        Ok(DensityMatrix::from_evolved_unchecked(m))
    }
}

/// A physical density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    entries: Array2<C64>,
}

impl DensityMatrix {
    /// Validate and wrap; see [`validate_density`].
    pub fn new(entries: Array2<C64>) -> Result<Self> {
        validate_density(&entries).map_err(Error::from)
    }

    /// Wrap a matrix produced by an internal CP map without re-running the
    /// strict validator (integration output is checked separately with the
    /// looser evolution tolerances).
    pub(crate) fn from_evolved_unchecked(entries: Array2<C64>) -> Self {
        let dim = entries.nrows();
        Self { dim, entries }
    }

    /// Pure state `|ψ⟩⟨ψ|`; the input vector is normalized first.
    pub fn pure(psi: &Array1<C64>) -> Result<Self> {
        let n2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if n2 <= 0.0 {
            return Err(Error::InvalidInput("pure state from zero vector".into()));
        }
        let n = psi.len();
        let mut m = Array2::<C64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                m[[i, j]] = psi[i] * psi[j].conj() / n2;
            }
        }
        Ok(Self { dim: n, entries: m })
    }

    /// Basis state `|k⟩⟨k|`.
    pub fn basis_state(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::Dimension(format!("basis state {k} of dim {dim}")));
        }
        let mut m = Array2::<C64>::zeros((dim, dim));
        m[[k, k]] = C64::new(1.0, 0.0);
        Ok(Self { dim, entries: m })
    }

    /// Thermal qutrit `diag(p0, 1-p0, 0)`.
    pub fn thermal_qutrit(p0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p0) {
            return Err(Error::InvalidInput(format!("thermal population p0 = {p0}")));
        }
        let mut m = Array2::<C64>::zeros((3, 3));
        m[[0, 0]] = C64::new(p0, 0.0);
        m[[1, 1]] = C64::new(1.0 - p0, 0.0);
        Ok(Self { dim: 3, entries: m })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let m = Array2::<C64>::eye(dim).mapv(|z| z / dim as f64);
        Self { dim, entries: m }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    /// Real diagonal (level populations).
    pub fn populations(&self) -> Vec<f64> {
        self.entries.diag().iter().map(|z| z.re).collect()
    }
}

/// One violated density-matrix invariant with its magnitude.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityViolation {
    NotSquare { rows: usize, cols: usize },
    NonHermitian { dev: f64 },
    TraceDeviation { dev: f64 },
    NegativeEigenvalue { value: f64 },
}

impl fmt::Display for DensityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NotSquare { rows, cols } => write!(f, "not square ({rows}×{cols})"),
            Self::NonHermitian { dev } => write!(f, "non-Hermitian (max deviation {dev:.3e})"),
            Self::TraceDeviation { dev } => write!(f, "trace off unity by {dev:.3e}"),
            Self::NegativeEigenvalue { value } => write!(f, "negative eigenvalue {value:.3e}"),
        }
    }
}

/// Structured report of every violated invariant; never silently repaired.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityDiagnostics {
    pub violations: Vec<DensityViolation>,
}

impl fmt::Display for DensityDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

impl std::error::Error for DensityDiagnostics {}

/// Check a matrix against explicit physicality tolerances and report every
/// violation. `eig_floor` is the most negative admissible eigenvalue.
pub fn check_physicality(
    m: &Array2<C64>,
    trace_tol: f64,
    herm_tol: f64,
    eig_floor: f64,
) -> std::result::Result<(), DensityDiagnostics> {
    let mut violations = Vec::new();
    let (r, c) = m.dim();
    if r != c || r == 0 {
        violations.push(DensityViolation::NotSquare { rows: r, cols: c });
        return Err(DensityDiagnostics { violations });
    }
    let herm_dev = linalg::hermiticity_deviation(m);
    if herm_dev > herm_tol {
        violations.push(DensityViolation::NonHermitian { dev: herm_dev });
    }
    let tr = linalg::trace(m);
    let tr_dev = (tr - C64::new(1.0, 0.0)).norm();
    if tr_dev > trace_tol {
        violations.push(DensityViolation::TraceDeviation { dev: tr_dev });
    }
    // eigenvalues of the Hermitian part (equals m when m is Hermitian)
    let hpart = (m + &linalg::dagger(m)).mapv(|z| z * 0.5);
    if let Ok((vals, _)) = linalg::eigh(&hpart) {
        for &v in vals.iter() {
            if v < eig_floor {
                violations.push(DensityViolation::NegativeEigenvalue { value: v });
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(DensityDiagnostics { violations })
    }
}

/// Accept a matrix as a [`DensityMatrix`] iff it is Hermitian (1e-10), unit
/// trace (1e-10), and positive semidefinite (eigenvalues ≥ −1e-10); otherwise
/// return diagnostics naming each violated invariant and its magnitude.
pub fn validate_density(
    m: &Array2<C64>,
) -> std::result::Result<DensityMatrix, DensityDiagnostics> {
    check_physicality(m, TRACE_TOL, HERMITICITY_TOL, EIGENVALUE_FLOOR)?;
    Ok(DensityMatrix { dim: m.nrows(), entries: m.clone() })
}

/// `exp(-i·H·t)` for a Hermitian generator, validated on both ends.
pub fn expm_skew(generator: &Array2<C64>, scale: f64) -> Result<UnitaryOperator> {
    let dev = linalg::hermiticity_deviation(generator);
    if dev > HERMITICITY_TOL {
        return Err(Error::NotHermitian { dev });
    }
    let u = linalg::expm_hermitian(generator, scale)?;
    UnitaryOperator::new(u)
}

fn fidelity_root_inner(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Dimension(format!(
            "state_fidelity: dims {} vs {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    let s = linalg::hermitian_sqrt(rho.entries())?;
    let inner = s.dot(sigma.entries()).dot(&s);
    // Hermitize against roundoff before the final eigensolve
    let inner = (&inner + &linalg::dagger(&inner)).mapv(|z| z * 0.5);
    let (vals, _) = linalg::eigh(&inner)?;
    let root: f64 = vals.iter().map(|&v| v.max(0.0).sqrt()).sum();
    Ok(root.clamp(0.0, 1.0))
}

/// Uhlmann fidelity in the squared convention,
/// `F(ρ,σ) = (Tr √(√ρ σ √ρ))²`, so pure-state overlap `|⟨ψ|φ⟩|²` is
/// recovered.
pub fn state_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    fidelity_root_inner(rho, sigma).map(|r| r * r)
}

/// Un-squared Uhlmann fidelity `Tr √(√ρ σ √ρ)` (the convention some
/// experimental reports use; exposed for comparison).
pub fn state_fidelity_root(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    fidelity_root_inner(rho, sigma)
}

/// Global-phase-invariant distance
/// `min_θ ‖U - e^{iθ}V‖_F = √(2·(d - |Tr(U†V)|))`.
pub fn unitary_distance(u: &UnitaryOperator, v: &UnitaryOperator) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::Dimension(format!(
            "unitary_distance: dims {} vs {}",
            u.dim(),
            v.dim()
        )));
    }
    let t = linalg::trace(&linalg::dagger(u.entries()).dot(v.entries())).norm();
    Ok((2.0 * (u.dim() as f64 - t)).max(0.0).sqrt())
}

/// The qutrit Walsh-Hadamard gate: the single-qutrit Fourier transform
/// `(1/√3)·[[1,1,1],[1,ω,ω̄],[1,ω̄,ω]]` with `ω = exp(i·2π/3)`.
pub fn walsh_hadamard() -> UnitaryOperator {
    let s = 1.0 / 3f64.sqrt();
    let w = C64::from_polar(1.0, linalg::TAU / 3.0);
    let wb = w.conj();
    let one = C64::new(1.0, 0.0);
    let m = ndarray::array![[one, one, one], [one, w, wb], [one, wb, w]].mapv(|z| z * s);
    UnitaryOperator::from_validated(m)
}

/// Haar-random unitary (Ginibre matrix orthonormalized by modified
/// Gram-Schmidt with phase-fixed diagonal).
pub fn random_unitary(dim: usize, rng: &mut impl Rng) -> UnitaryOperator {
    let mut cols: Vec<Array1<C64>> = (0..dim)
        .map(|_| {
            Array1::from_iter((0..dim).map(|_| {
                C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            }))
        })
        .collect();
    for k in 0..dim {
        for j in 0..k {
            let prev = cols[j].clone();
            let proj: C64 = prev.iter().zip(cols[k].iter()).map(|(a, b)| a.conj() * b).sum();
            cols[k].iter_mut().zip(prev.iter()).for_each(|(x, &p)| *x -= proj * p);
        }
        let nrm: f64 = cols[k].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        cols[k].mapv_inplace(|z| z / nrm);
    }
    let mut m = Array2::<C64>::zeros((dim, dim));
    for (j, col) in cols.iter().enumerate() {
        m.column_mut(j).assign(col);
    }
    UnitaryOperator::from_validated(m)
}

/// Random full-rank density matrix `G·G†/Tr(G·G†)` with Ginibre `G`.
pub fn random_density(dim: usize, rng: &mut impl Rng) -> DensityMatrix {
    let g = Array2::from_shape_fn((dim, dim), |_| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let m = g.dot(&linalg::dagger(&g));
    let tr = linalg::trace(&m).re;
    DensityMatrix { dim, entries: m.mapv(|z| z / tr) }
}
