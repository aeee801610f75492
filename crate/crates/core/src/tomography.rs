//! Averaged-homodyne readout modeling and tomography: the standard qutrit
//! preparation/analyzer pulse sets, analyzer phase-shifting that absorbs a
//! gate's diagonal correction, maximum-likelihood state and process
//! reconstruction, and the readout-calibration estimators.

use std::f64::consts::{FRAC_PI_2, PI};

use ndarray::{Array1, Array2};
use ndarray_linalg::{LeastSquaresSvd, SVD};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::decompose::GateDecomposition;
use crate::device::ReadoutModel;
use crate::error::{Error, Result};
use crate::linalg::{dagger, eigh, max_abs_diff, trace};
use crate::operator::{DensityMatrix, UnitaryOperator};
use crate::optim::{nelder_mead, SimplexResult};

/// Two-level subspace a tomography rotation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    ZeroOne,
    OneTwo,
}

impl Transition {
    pub fn levels(self) -> (usize, usize) {
        match self {
            Self::ZeroOne => (0, 1),
            Self::OneTwo => (1, 2),
        }
    }
}

/// Equatorial rotation axis of a tomography pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotationAxis {
    X,
    Y,
}

impl RotationAxis {
    /// In-plane angle of the axis measured from +x.
    pub fn axis_phase(self) -> f64 {
        match self {
            Self::X => 0.0,
            Self::Y => FRAC_PI_2,
        }
    }
}

/// One two-level rotation `exp(−i·θ/2·σ_α)` embedded in a qutrit, where
/// `σ_α = cos(α)σ_x + sin(α)σ_y` on the named subspace. Frame-shifted
/// analyzer pulses carry general axis angles, so the axis is stored as an
/// angle rather than an x/y label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    pub transition: Transition,
    /// Rotation angle θ, rad.
    pub angle: f64,
    /// In-plane axis angle α from +x (x = 0, y = π/2), rad.
    pub axis_phase: f64,
}

impl Rotation {
    pub fn new(transition: Transition, axis: RotationAxis, angle: f64) -> Self {
        Self { transition, angle, axis_phase: axis.axis_phase() }
    }

    pub fn with_axis_phase(transition: Transition, axis_phase: f64, angle: f64) -> Self {
        Self { transition, angle, axis_phase }
    }

    /// The embedded 3×3 unitary (identity on the uninvolved level).
    pub fn unitary(&self) -> UnitaryOperator {
        let (j, k) = self.transition.levels();
        let c = C64::new((0.5 * self.angle).cos(), 0.0);
        let s = (0.5 * self.angle).sin();
        let mut m = Array2::<C64>::eye(3);
        m[[j, j]] = c;
        m[[k, k]] = c;
        // −i·s·e^{∓iα}
        m[[j, k]] = C64::from_polar(s, -FRAC_PI_2 - self.axis_phase);
        m[[k, j]] = C64::from_polar(s, -FRAC_PI_2 + self.axis_phase);
        UnitaryOperator::from_validated(m)
    }
}

/// Standard two-level rotation `exp(−i·θ/2·σ_axis)` embedded in the named
/// subspace, identity elsewhere.
pub fn rotation(transition: Transition, axis: RotationAxis, angle: f64) -> UnitaryOperator {
    Rotation::new(transition, axis, angle).unitary()
}

/// A preparation or analysis pulse: a list of rotations in time order (the
/// first entry acts on the state first). The written operator product has the
/// rightmost factor acting first, i.e. `R_x^{01}(π)·R_x^{12}(π)` lists as
/// `[R_x^{12}(π), R_x^{01}(π)]` reversed.
#[derive(Debug, Clone, PartialEq)]
pub struct TomographyPulse {
    pub rotations: Vec<Rotation>,
}

impl TomographyPulse {
    pub fn new(rotations: Vec<Rotation>) -> Self {
        Self { rotations }
    }

    pub fn identity() -> Self {
        Self { rotations: Vec::new() }
    }

    /// Composite unitary with the first-listed rotation applied first.
    pub fn unitary(&self) -> UnitaryOperator {
        let mut u = UnitaryOperator::identity(3);
        for r in &self.rotations {
            u = r.unitary().compose(&u).expect("3×3 composition");
        }
        u
    }
}

/// The analyzer pulse set: unitaries applied before readout, with their pulse
/// realizations. Informational completeness (the nine induced measurement
/// operators `M_i = u_i†·diag(V_h)·u_i` spanning Hermitian qutrit space)
/// depends on the readout voltages and is checked by `require_complete`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzerSet {
    pulses: Vec<TomographyPulse>,
    unitaries: Vec<UnitaryOperator>,
}

impl AnalyzerSet {
    pub fn new(pulses: Vec<TomographyPulse>) -> Self {
        let unitaries = pulses.iter().map(TomographyPulse::unitary).collect();
        Self { pulses, unitaries }
    }

    pub fn len(&self) -> usize {
        self.unitaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unitaries.is_empty()
    }

    pub fn pulses(&self) -> &[TomographyPulse] {
        &self.pulses
    }

    pub fn unitaries(&self) -> &[UnitaryOperator] {
        &self.unitaries
    }

    pub fn unitary(&self, i: usize) -> &UnitaryOperator {
        &self.unitaries[i]
    }

    /// Measurement operators `M_i = u_i†·diag(V_h)·u_i`.
    pub fn measurement_operators(&self, readout: &ReadoutModel) -> Vec<Array2<C64>> {
        let mut d = Array2::<C64>::zeros((3, 3));
        for (i, &v) in readout.voltage_levels.iter().enumerate() {
            d[[i, i]] = C64::new(v, 0.0);
        }
        self.unitaries
            .iter()
            .map(|u| dagger(u.entries()).dot(&d).dot(u.entries()))
            .collect()
    }

    /// Rank of the measurement-operator Gram matrix `Tr(M_a M_b)`; a value of
    /// 9 means the set distinguishes every qutrit density matrix.
    pub fn completeness_rank(&self, readout: &ReadoutModel) -> usize {
        let ms = self.measurement_operators(readout);
        let n = ms.len();
        let mut gram = Array2::<C64>::zeros((n, n));
        for a in 0..n {
            for b in 0..n {
                gram[[a, b]] = C64::new(trace(&ms[a].dot(&ms[b])).re, 0.0);
            }
        }
        let (vals, _) = eigh(&gram).expect("symmetric Gram matrix");
        let max = vals.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
        if max == 0.0 {
            return 0;
        }
        vals.iter().filter(|&&v| v.abs() > 1e-10 * max).count()
    }

    pub fn require_complete(&self, readout: &ReadoutModel) -> Result<()> {
        let rank = self.completeness_rank(readout);
        if rank < 9 {
            return Err(Error::RankDeficientDesign {
                rank,
                needed: 9,
                what: "analyzer measurement set".into(),
            });
        }
        Ok(())
    }
}

fn x01(angle: f64) -> Rotation {
    Rotation::new(Transition::ZeroOne, RotationAxis::X, angle)
}
fn y01(angle: f64) -> Rotation {
    Rotation::new(Transition::ZeroOne, RotationAxis::Y, angle)
}
fn x12(angle: f64) -> Rotation {
    Rotation::new(Transition::OneTwo, RotationAxis::X, angle)
}
fn y12(angle: f64) -> Rotation {
    Rotation::new(Transition::OneTwo, RotationAxis::Y, angle)
}

/// The nine standard preparation pulses `p_0…p_8` (rotation lists in time
/// order).
pub fn preparation_set() -> Vec<TomographyPulse> {
    vec![
        TomographyPulse::identity(),
        TomographyPulse::new(vec![x01(PI)]),
        TomographyPulse::new(vec![x01(PI), x12(PI)]),
        TomographyPulse::new(vec![x01(FRAC_PI_2)]),
        TomographyPulse::new(vec![y01(FRAC_PI_2)]),
        TomographyPulse::new(vec![x01(PI), x12(FRAC_PI_2)]),
        TomographyPulse::new(vec![x01(PI), y12(FRAC_PI_2)]),
        TomographyPulse::new(vec![x01(FRAC_PI_2), x12(PI)]),
        TomographyPulse::new(vec![y01(FRAC_PI_2), x12(PI)]),
    ]
}

/// The nine standard analyzer pulses `u_0…u_8`.
pub fn analyzer_set() -> AnalyzerSet {
    AnalyzerSet::new(vec![
        TomographyPulse::new(vec![x01(PI)]),
        TomographyPulse::new(vec![x01(FRAC_PI_2)]),
        TomographyPulse::new(vec![y01(FRAC_PI_2)]),
        TomographyPulse::identity(),
        TomographyPulse::new(vec![x12(FRAC_PI_2), x01(PI)]),
        TomographyPulse::new(vec![y12(FRAC_PI_2), x01(PI)]),
        TomographyPulse::new(vec![x01(PI), x12(FRAC_PI_2), x01(PI)]),
        TomographyPulse::new(vec![x01(PI), y12(FRAC_PI_2), x01(PI)]),
        TomographyPulse::new(vec![x01(PI), x12(PI), x01(PI)]),
    ])
}

/// Absorb a gate's diagonal correction into the analyzers:
/// `ū_i = U_d†·u_i·U_d` with `U_d = diag(e^{−iφ0}, e^{−iφ1}, e^{−iφ2})`.
/// Each rotation's axis turns in-plane by `φ_k − φ_j` of its subspace, so the
/// returned set carries exact pulse realizations of the conjugated unitaries.
pub fn phase_shift_analyzers(set: &AnalyzerSet, d: &GateDecomposition) -> AnalyzerSet {
    let phis = [d.phi0, d.phi1, d.phi2];
    let pulses = set
        .pulses
        .iter()
        .map(|p| {
            TomographyPulse::new(
                p.rotations
                    .iter()
                    .map(|r| {
                        let (j, k) = r.transition.levels();
                        Rotation::with_axis_phase(
                            r.transition,
                            r.axis_phase + phis[k] - phis[j],
                            r.angle,
                        )
                    })
                    .collect(),
            )
        })
        .collect();
    AnalyzerSet::new(pulses)
}

/// Averaged homodyne voltage after an analyzer pulse:
/// `V = Tr(u·ρ·u†·diag(V_h))`, plus additive Gaussian noise of the readout's
/// σ when `shots_noise` is set (deterministic for a given seed).
pub fn simulate_homodyne(
    rho: &DensityMatrix,
    analyzer: &UnitaryOperator,
    readout: &ReadoutModel,
    shots_noise: bool,
    seed: u64,
) -> Result<f64> {
    let analyzed = analyzer.apply_density(rho)?;
    let mut v = readout.expected_voltage(&analyzed.populations());
    if shots_noise && readout.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: f64 = rng.sample(StandardNormal);
        v += readout.noise_sigma * x;
    }
    Ok(v)
}

/// Likelihood form for state reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MleObjective {
    /// `L = Σ_k |V_k − model_k|` — robust absolute-value sum.
    #[default]
    AbsoluteSum,
    /// `L = Σ_k (V_k − model_k)²`.
    SquaredSum,
}

/// Optimizer settings for the maximum-likelihood reconstructions.
#[derive(Debug, Clone)]
pub struct MleOptions {
    /// Objective used by state reconstruction (process reconstruction always
    /// minimizes the squared-residual sum).
    pub objective: MleObjective,
    pub restarts: usize,
    /// Simplex iteration budget per restart.
    pub max_iterations: usize,
    /// Parameter-space convergence tolerance (state reconstruction; the
    /// process optimizer terminates on objective spread alone).
    pub xtol: f64,
    /// Scale of the random perturbation applied to restart seeds.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            objective: MleObjective::AbsoluteSum,
            restarts: 20,
            max_iterations: 40_000,
            xtol: 1e-7,
            jitter: 0.05,
            seed: 0x70_60_50,
        }
    }
}

/// Outcome summary of a maximum-likelihood reconstruction.
#[derive(Debug, Clone)]
pub struct MleReport {
    /// Final objective value L at the returned optimum.
    pub objective: f64,
    /// Simplex iterations used by the winning restart.
    pub iterations: usize,
    pub restarts_converged: usize,
}

// Lower-triangular parameter packing shared by the state (3×3, 9 reals) and
// process (9×9, 81 reals) factorizations: diagonal first, then columns of
// complex sub-diagonal entries.
fn lower_tri_from_params(d: usize, p: &[f64]) -> Array2<C64> {
    debug_assert_eq!(p.len(), d * d);
    let mut t = Array2::<C64>::zeros((d, d));
    for i in 0..d {
        t[[i, i]] = C64::new(p[i], 0.0);
    }
    let mut idx = d;
    for j in 0..d {
        for i in (j + 1)..d {
            t[[i, j]] = C64::new(p[idx], p[idx + 1]);
            idx += 2;
        }
    }
    t
}

fn params_from_lower_tri(t: &Array2<C64>) -> Vec<f64> {
    let d = t.nrows();
    let mut p = Vec::with_capacity(d * d);
    for i in 0..d {
        p.push(t[[i, i]].re);
    }
    for j in 0..d {
        for i in (j + 1)..d {
            p.push(t[[i, j]].re);
            p.push(t[[i, j]].im);
        }
    }
    p
}

/// `T†T/Tr(T†T)` — automatically Hermitian, PSD, unit trace. Returns `None`
/// when the factor vanishes.
fn density_from_params(d: usize, p: &[f64]) -> Option<Array2<C64>> {
    let t = lower_tri_from_params(d, p);
    let m = dagger(&t).dot(&t);
    let tr = trace(&m).re;
    if !(tr.is_finite() && tr > 1e-300) {
        return None;
    }
    Some(m.mapv(|z| z / tr))
}

/// Lower-triangular `T` with `T†T ≈ m` for PSD `m` (a reversed-order Cholesky
/// factorization, regularized by `eps` on the diagonal).
fn anti_cholesky(m: &Array2<C64>, eps: f64) -> Array2<C64> {
    let d = m.nrows();
    // reverse both index orders, factor as L·L†, map back
    let mut mp = Array2::<C64>::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            mp[[i, j]] = m[[d - 1 - i, d - 1 - j]];
        }
        mp[[i, i]] += eps;
    }
    let mut l = Array2::<C64>::zeros((d, d));
    for i in 0..d {
        for j in 0..=i {
            let mut s = mp[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]].conj();
            }
            if i == j {
                l[[i, i]] = C64::new(s.re.max(eps * eps).sqrt(), 0.0);
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    let mut t = Array2::<C64>::zeros((d, d));
    for i in 0..d {
        for j in 0..=i {
            t[[i, j]] = l[[d - 1 - j, d - 1 - i]].conj();
        }
    }
    t
}

/// Project a Hermitian matrix onto the PSD trace-one cone (eigenvalue clamp
/// plus renormalization; falls back to the maximally mixed state when
/// everything clamps to zero).
fn project_to_state(m: &Array2<C64>) -> Array2<C64> {
    let d = m.nrows();
    let herm = (m + &dagger(m)).mapv(|z| z * 0.5);
    if let Ok((vals, vecs)) = eigh(&herm) {
        let clamped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
        let total: f64 = clamped.iter().sum();
        if total > 1e-300 {
            let mut out = Array2::<C64>::zeros((d, d));
            for (k, &lam) in clamped.iter().enumerate() {
                if lam == 0.0 {
                    continue;
                }
                let v = vecs.column(k);
                for a in 0..d {
                    for b in 0..d {
                        out[[a, b]] += v[a] * v[b].conj() * (lam / total);
                    }
                }
            }
            return out;
        }
    }
    Array2::<C64>::eye(d).mapv(|z| z / d as f64)
}

fn lex_less(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// Multi-start simplex minimization: restart 0 starts at `init`, the rest at
/// jittered copies; restarts run concurrently and reduce to the lowest
/// converged objective, tie-broken by parameter lexicographic order.
fn run_restarts<F>(
    obj: F,
    init: &[f64],
    step: f64,
    xtol: f64,
    options: &MleOptions,
) -> (Vec<f64>, f64, usize, usize)
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n_restarts = options.restarts.max(1);
    let results: Vec<SimplexResult> = (0..n_restarts)
        .into_par_iter()
        .map(|k| {
            let mut x = init.to_vec();
            if k > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(
                    options.seed.wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
                );
                for xi in &mut x {
                    let dx: f64 = rng.sample(StandardNormal);
                    *xi += options.jitter * dx;
                }
            }
            nelder_mead(|p| obj(p), &x, step, xtol, 1e-9, options.max_iterations)
        })
        .collect();

    let better = |a: &SimplexResult, b: &SimplexResult| {
        a.value.total_cmp(&b.value).then_with(|| lex_less(&a.x, &b.x))
    };
    let converged = results.iter().filter(|r| r.converged).count();
    let pool: Vec<&SimplexResult> = if converged > 0 {
        results.iter().filter(|r| r.converged).collect()
    } else {
        results.iter().collect()
    };
    let best = pool
        .into_iter()
        .min_by(|a, b| better(a, b))
        .expect("at least one restart");
    (best.x.clone(), best.value, best.iterations, converged)
}

/// Maximum-likelihood state reconstruction from measured analyzer voltages.
/// The density matrix is parameterized as `ρ = T†T/Tr(T†T)` (physical by
/// construction), initialized from the PSD-projected linear-inversion
/// estimate, and optimized by multi-start simplex descent on the configured
/// likelihood.
pub fn mle_state(
    voltages: &[f64],
    analyzers: &AnalyzerSet,
    readout: &ReadoutModel,
    options: &MleOptions,
) -> Result<(DensityMatrix, MleReport)> {
    if voltages.len() != analyzers.len() {
        return Err(Error::Dimension(format!(
            "{} voltages for {} analyzers",
            voltages.len(),
            analyzers.len()
        )));
    }
    analyzers.require_complete(readout)?;
    let ms = analyzers.measurement_operators(readout);

    // linear inversion in an orthogonal Hermitian basis, then PSD projection
    let basis = build_operator_basis();
    let n = ms.len();
    let mut a = Array2::<f64>::zeros((n, 9));
    for (k, m) in ms.iter().enumerate() {
        for (j, lam) in basis.elements().iter().enumerate() {
            a[[k, j]] = trace(&m.dot(lam)).re;
        }
    }
    let rhs = Array1::from_vec(voltages.to_vec());
    let mut rho_lin = Array2::<C64>::zeros((3, 3));
    if let Ok(sol) = a.least_squares(&rhs) {
        for (j, lam) in basis.elements().iter().enumerate() {
            let c = sol.solution[j];
            rho_lin = rho_lin + lam.mapv(|z| z * c);
        }
    } else {
        rho_lin = Array2::<C64>::eye(3).mapv(|z| z / 3.0);
    }
    let init_state = project_to_state(&rho_lin);
    let init = params_from_lower_tri(&anti_cholesky(&init_state, 1e-9));

    let objective = options.objective;
    let obj = |p: &[f64]| -> f64 {
        let Some(rho) = density_from_params(3, p) else {
            return 1e300;
        };
        let mut l = 0.0;
        for (m, &v) in ms.iter().zip(voltages.iter()) {
            let model = pair_trace_re(m, &rho);
            let r = v - model;
            l += match objective {
                MleObjective::AbsoluteSum => r.abs(),
                MleObjective::SquaredSum => r * r,
            };
        }
        l
    };

    let (x, value, iterations, restarts_converged) =
        run_restarts(obj, &init, 0.02, options.xtol, options);
    let rho = density_from_params(3, &x)
        .unwrap_or_else(|| Array2::<C64>::eye(3).mapv(|z| z / 3.0));
    if restarts_converged == 0 {
        return Err(Error::MleNonConvergence {
            objective: value,
            restarts: options.restarts.max(1),
            best: Box::new(rho),
        });
    }
    let report = MleReport { objective: value, iterations, restarts_converged };
    Ok((DensityMatrix::new(rho)?, report))
}

/// `Re Tr(a·b)` without forming the product.
fn pair_trace_re(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = a[[i, j]];
            let y = b[[j, i]];
            s += x.re * y.re - x.im * y.im;
        }
    }
    s
}

fn pair_trace(a: &Array2<C64>, b: &Array2<C64>) -> C64 {
    let n = a.nrows();
    let mut s = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            s += a[[i, j]] * b[[j, i]];
        }
    }
    s
}

/// Orthogonal Hermitian operator basis `λ_0…λ_8` with
/// `Tr(λ_m·λ_n†) = 3·δ_mn`: the identity plus the eight traceless
/// Gell-Mann-type matrices scaled by √(3/2).
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorBasis {
    elements: Vec<Array2<C64>>,
}

impl OperatorBasis {
    pub fn elements(&self) -> &[Array2<C64>] {
        &self.elements
    }

    pub fn element(&self, m: usize) -> &Array2<C64> {
        &self.elements[m]
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        3
    }
}

pub fn build_operator_basis() -> OperatorBasis {
    let s = (1.5_f64).sqrt();
    let o = C64::new(0.0, 0.0);
    let r = |x: f64| C64::new(x * s, 0.0);
    let im = |x: f64| C64::new(0.0, x * s);
    let one = C64::new(1.0, 0.0);
    let isq3 = s / 3.0_f64.sqrt();
    let elements = vec![
        ndarray::array![[one, o, o], [o, one, o], [o, o, one]],
        ndarray::array![[o, r(1.0), o], [r(1.0), o, o], [o, o, o]],
        ndarray::array![[o, im(-1.0), o], [im(1.0), o, o], [o, o, o]],
        ndarray::array![[r(1.0), o, o], [o, r(-1.0), o], [o, o, o]],
        ndarray::array![[o, o, r(1.0)], [o, o, o], [r(1.0), o, o]],
        ndarray::array![[o, o, im(-1.0)], [o, o, o], [im(1.0), o, o]],
        ndarray::array![[o, o, o], [o, o, r(1.0)], [o, r(1.0), o]],
        ndarray::array![[o, o, o], [o, o, im(-1.0)], [o, im(1.0), o]],
        ndarray::array![
            [C64::new(isq3, 0.0), o, o],
            [o, C64::new(isq3, 0.0), o],
            [o, o, C64::new(-2.0 * isq3, 0.0)]
        ],
    ];
    OperatorBasis { elements }
}

/// A process matrix χ over an operator basis: Hermitian, positive
/// semidefinite, and unit trace (all within 1e-9).
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessMatrix {
    entries: Array2<C64>,
    basis: OperatorBasis,
}

impl ProcessMatrix {
    pub fn new(entries: Array2<C64>, basis: &OperatorBasis) -> Result<Self> {
        let d = basis.len();
        if entries.dim() != (d, d) {
            return Err(Error::Dimension(format!(
                "process matrix {:?} over a {d}-element basis",
                entries.dim()
            )));
        }
        let herm_dev = max_abs_diff(&entries, &dagger(&entries));
        if herm_dev > 1e-9 {
            return Err(Error::NotHermitian { dev: herm_dev });
        }
        let tr = trace(&entries);
        if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "process matrix trace {tr} must be 1"
            )));
        }
        let (vals, _) = eigh(&entries)?;
        if let Some(&min) = vals.iter().min_by(|a, b| a.total_cmp(b)) {
            if min < -1e-9 {
                return Err(Error::InvalidInput(format!(
                    "process matrix has negative eigenvalue {min}"
                )));
            }
        }
        Ok(Self { entries, basis: basis.clone() })
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn basis(&self) -> &OperatorBasis {
        &self.basis
    }
}

/// The rank-one process matrix of a unitary: `χ = e·e†` with
/// `e_m = Tr(λ_m†·U)/3`.
pub fn ideal_chi(u: &UnitaryOperator, basis: &OperatorBasis) -> Result<ProcessMatrix> {
    if u.dim() != basis.dim() {
        return Err(Error::Dimension(format!(
            "unitary dim {} vs basis dim {}",
            u.dim(),
            basis.dim()
        )));
    }
    let d = basis.len();
    let e: Vec<C64> = basis
        .elements()
        .iter()
        .map(|lam| pair_trace(&dagger(lam), u.entries()) / 3.0)
        .collect();
    let mut chi = Array2::<C64>::zeros((d, d));
    for m in 0..d {
        for n in 0..d {
            chi[[m, n]] = e[m] * e[n].conj();
        }
    }
    ProcessMatrix::new(chi, basis)
}

/// Process fidelity `Tr√(√χ_ideal·χ·√χ_ideal)` (the un-squared form).
pub fn process_fidelity(chi: &ProcessMatrix, chi_ideal: &ProcessMatrix) -> Result<f64> {
    if chi.basis != chi_ideal.basis {
        return Err(Error::InvalidInput(
            "process matrices are expressed over different operator bases".into(),
        ));
    }
    // F = ‖X†·Y‖_tr for any factorizations χ = X·X†, χ_ideal = Y·Y†. Using
    // eigen-factors with clamped eigenvalues keeps near-null directions from
    // entering at √ε precision, unlike the matrix-sqrt form.
    let x = psd_factor(&chi.entries)?;
    let y = psd_factor(&chi_ideal.entries)?;
    let (_, sv, _) = dagger(&x).dot(&y).svd(false, false)?;
    Ok(sv.iter().sum())
}

/// Factor a PSD Hermitian matrix as `H = F·F†` with `F = V·diag(√λ_clamped)`.
/// Eigenvalues within roundoff of zero are dropped entirely so rank-deficient
/// inputs don't leak √ε-sized junk directions into the factor.
fn psd_factor(h: &Array2<C64>) -> Result<Array2<C64>> {
    let (vals, vecs) = eigh(h)?;
    let floor = vals.iter().fold(0.0f64, |m, &v| m.max(v.abs())) * 1e-12;
    let mut f = vecs;
    for (k, &lam) in vals.iter().enumerate() {
        let s = if lam > floor { lam.sqrt() } else { 0.0 };
        f.column_mut(k).iter_mut().for_each(|z| *z *= s);
    }
    Ok(f)
}

// Hermitian degrees of freedom packing for the real process design matrix:
// diagonal entries first, then (re, im) of each above-diagonal pair.
fn x_from_hermitian(chi: &Array2<C64>) -> Vec<f64> {
    let d = chi.nrows();
    let mut x = Vec::with_capacity(d * d);
    for m in 0..d {
        x.push(chi[[m, m]].re);
    }
    for m in 0..d {
        for n in (m + 1)..d {
            x.push(chi[[m, n]].re);
            x.push(chi[[m, n]].im);
        }
    }
    x
}

fn hermitian_from_x(d: usize, x: &[f64]) -> Array2<C64> {
    let mut chi = Array2::<C64>::zeros((d, d));
    for m in 0..d {
        chi[[m, m]] = C64::new(x[m], 0.0);
    }
    let mut idx = d;
    for m in 0..d {
        for n in (m + 1)..d {
            chi[[m, n]] = C64::new(x[idx], x[idx + 1]);
            chi[[n, m]] = chi[[m, n]].conj();
            idx += 2;
        }
    }
    chi
}

/// Process tomography by maximum likelihood: fits
/// `m_ij = Σ_mn χ_mn·Tr(M_i·λ_m·ρ_j·λ_n†)` to the measured voltage records
/// (`records[[j, i]]` for preparation `j`, analyzer `i`), where
/// `ρ_j = p_j·ρ_nominal·p_j†`. χ is parameterized by Cholesky factors
/// (positive, trace one) and the squared-residual objective is minimized from
/// a linear least-squares initialization. The design matrix must have full
/// rank 81 — otherwise the preparation/analyzer combination cannot identify
/// the process and the deficiency is reported.
pub fn process_mle(
    records: &Array2<f64>,
    preparations: &[UnitaryOperator],
    analyzers: &AnalyzerSet,
    readout: &ReadoutModel,
    basis: &OperatorBasis,
    nominal_input: &DensityMatrix,
    options: &MleOptions,
) -> Result<(ProcessMatrix, MleReport)> {
    let np = preparations.len();
    let na = analyzers.len();
    if records.dim() != (np, na) {
        return Err(Error::Dimension(format!(
            "record matrix {:?} for {np} preparations × {na} analyzers",
            records.dim()
        )));
    }
    if nominal_input.dim() != 3 {
        return Err(Error::Dimension("nominal input state must be 3-level".into()));
    }
    let d = basis.len();
    let n_dof = d * d;

    let ms = analyzers.measurement_operators(readout);
    let rho_in: Vec<Array2<C64>> = preparations
        .iter()
        .map(|p| Ok(p.apply_density(nominal_input)?.entries().clone()))
        .collect::<Result<_>>()?;

    // complex design d[(j,i)][(m,n)] = Tr(M_i·λ_m·ρ_j·λ_n†) via the
    // precomputed products X_jm = λ_m·ρ_j and Y_in = λ_n†·M_i
    let x_jm: Vec<Vec<Array2<C64>>> = rho_in
        .iter()
        .map(|rho| basis.elements().iter().map(|lam| lam.dot(rho)).collect())
        .collect();
    let y_in: Vec<Vec<Array2<C64>>> = ms
        .iter()
        .map(|m| basis.elements().iter().map(|lam| dagger(lam).dot(m)).collect())
        .collect();

    let n_rows = np * na;
    let mut design = Array2::<f64>::zeros((n_rows, n_dof));
    for j in 0..np {
        for i in 0..na {
            let row = j * na + i;
            // column layout mirrors x_from_hermitian
            for m in 0..d {
                design[[row, m]] = pair_trace(&y_in[i][m], &x_jm[j][m]).re;
            }
            let mut col = d;
            for m in 0..d {
                for n in (m + 1)..d {
                    let t = pair_trace(&y_in[i][n], &x_jm[j][m]);
                    design[[row, col]] = 2.0 * t.re;
                    design[[row, col + 1]] = -2.0 * t.im;
                    col += 2;
                }
            }
        }
    }

    let (_, sv, _) = design.svd(false, false)?;
    let sv_max = sv.iter().fold(0.0_f64, |m, &v| m.max(v));
    let rank = sv.iter().filter(|&&v| v > 1e-10 * sv_max).count();
    if rank < n_dof {
        return Err(Error::RankDeficientDesign {
            rank,
            needed: n_dof,
            what: "process design (preparations × analyzers vs nominal state)".into(),
        });
    }

    let rec_vec = Array1::from_iter(records.iter().copied());
    let chi_init = match design.least_squares(&rec_vec) {
        Ok(sol) => project_to_state(&hermitian_from_x(d, sol.solution.as_slice().unwrap())),
        Err(_) => Array2::<C64>::eye(d).mapv(|z| z / d as f64),
    };
    let init = params_from_lower_tri(&anti_cholesky(&chi_init, 1e-10));

    let obj = |p: &[f64]| -> f64 {
        let Some(chi) = density_from_params(d, p) else {
            return 1e300;
        };
        let x = Array1::from_vec(x_from_hermitian(&chi));
        let model = design.dot(&x);
        model
            .iter()
            .zip(rec_vec.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    };

    // the 81-parameter simplex cannot collapse its diameter within any sane
    // iteration budget; for this smooth squared-residual objective, vertex
    // agreement in function value is the meaningful convergence signal
    let (x, value, iterations, restarts_converged) =
        run_restarts(obj, &init, 0.02, f64::INFINITY, options);
    let chi = density_from_params(d, &x)
        .unwrap_or_else(|| Array2::<C64>::eye(d).mapv(|z| z / d as f64));
    if restarts_converged == 0 {
        return Err(Error::MleNonConvergence {
            objective: value,
            restarts: options.restarts.max(1),
            best: Box::new(chi),
        });
    }
    let report = MleReport { objective: value, iterations, restarts_converged };
    Ok((ProcessMatrix::new(chi, basis)?, report))
}

/// Thermal occupations from the two calibration Rabi-amplitude measurements:
/// the amplitude ratio is `P_th1/P_th0`, so `P_th0 = 1/(1+r)`.
pub fn thermal_populations(rabi_amp_swap12: f64, rabi_amp_swap02: f64) -> Result<(f64, f64)> {
    if !(rabi_amp_swap12 > 0.0) || !rabi_amp_swap12.is_finite() {
        return Err(Error::InvalidInput(format!(
            "swap-12 Rabi amplitude must be positive, got {rabi_amp_swap12}"
        )));
    }
    if rabi_amp_swap02 < 0.0 || !rabi_amp_swap02.is_finite() {
        return Err(Error::InvalidInput(format!(
            "swap-02 Rabi amplitude must be ≥ 0, got {rabi_amp_swap02}"
        )));
    }
    let r = rabi_amp_swap02 / rabi_amp_swap12;
    let p0 = 1.0 / (1.0 + r);
    Ok((p0, 1.0 - p0))
}

/// Per-level readout voltages from three calibration measurements with known
/// population patterns `(P0,P1,0)`, `(P1,P0,0)`, `(P1,0,P0)` where
/// `P0 = p_th0`, `P1 = 1−p_th0`.
pub fn solve_voltage_levels(
    v_thermal: f64,
    v_swap01: f64,
    v_swap01_12: f64,
    p_th0: f64,
) -> Result<[f64; 3]> {
    if !p_th0.is_finite() || p_th0 <= 0.5 || p_th0 > 1.0 {
        if p_th0 == 0.5 {
            return Err(Error::SingularSystem(
                "voltage-level system is singular at p_th0 = 0.5".into(),
            ));
        }
        return Err(Error::InvalidInput(format!(
            "p_th0 = {p_th0} outside the well-conditioned range (0.5, 1]"
        )));
    }
    let p0 = p_th0;
    let p1 = 1.0 - p_th0;
    let sum = v_thermal + v_swap01; // (P0+P1)(V0+V1)
    let diff = (v_thermal - v_swap01) / (p0 - p1);
    let v0 = 0.5 * (sum + diff);
    let v1 = 0.5 * (sum - diff);
    let v2 = (v_swap01_12 - p1 * v0) / p0;
    Ok([v0, v1, v2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{state_fidelity, walsh_hadamard};

    fn flux_readout() -> ReadoutModel {
        ReadoutModel::new([1.0, -1.0, 0.3], 0.01).unwrap()
    }

    fn basis_vec(k: usize) -> Array1<C64> {
        let mut v = Array1::<C64>::zeros(3);
        v[k] = C64::new(1.0, 0.0);
        v
    }

    #[test]
    fn rotation_conventions() {
        let id = rotation(Transition::ZeroOne, RotationAxis::X, 0.0);
        assert!(max_abs_diff(id.entries(), &Array2::eye(3)) < 1e-15);

        // π pulse: |0⟩ → −i|1⟩
        let pi_x = rotation(Transition::ZeroOne, RotationAxis::X, PI);
        let out = pi_x.apply_state(&basis_vec(0)).unwrap();
        assert!((out[1] - C64::new(0.0, -1.0)).norm() < 1e-15);
        assert!(out[0].norm() < 1e-15 && out[2].norm() < 1e-15);

        // R_y(π/2): |0⟩ → (|0⟩ + |1⟩)/√2
        let hy = rotation(Transition::ZeroOne, RotationAxis::Y, FRAC_PI_2);
        let out = hy.apply_state(&basis_vec(0)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((out[0] - C64::new(s, 0.0)).norm() < 1e-15);
        assert!((out[1] - C64::new(s, 0.0)).norm() < 1e-15);

        // a 1-2 rotation leaves level 0 untouched
        let r12 = rotation(Transition::OneTwo, RotationAxis::X, 1.234);
        assert!((r12.entries()[[0, 0]] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(r12.entries()[[0, 1]].norm() < 1e-15);
    }

    #[test]
    fn composite_pulse_products() {
        // the last analyzer swaps the 0 and 2 populations
        let swap = analyzer_set().unitary(8).clone();
        let out = swap.apply_state(&basis_vec(2)).unwrap();
        assert!((out[0] + C64::new(1.0, 0.0)).norm() < 1e-14, "u_8|2⟩ = {out}");
        let out = swap.apply_state(&basis_vec(0)).unwrap();
        assert!((out[2] + C64::new(1.0, 0.0)).norm() < 1e-14);
        let out = swap.apply_state(&basis_vec(1)).unwrap();
        assert!((out[1] + C64::new(1.0, 0.0)).norm() < 1e-14);

        // preparation 2 promotes the ground state to |2⟩
        let p2 = preparation_set()[2].unitary();
        let out = p2.apply_state(&basis_vec(0)).unwrap();
        assert!((out[2].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn analyzer_set_is_informationally_complete() {
        let set = analyzer_set();
        assert_eq!(set.len(), 9);
        assert_eq!(set.completeness_rank(&flux_readout()), 9);
        set.require_complete(&flux_readout()).unwrap();

        // degenerate readout voltages would break completeness — the rank
        // check must notice (equal voltages are rejected upstream, so probe
        // through a readout-like diagonal directly)
        let only_01 = AnalyzerSet::new(vec![
            TomographyPulse::identity(),
            TomographyPulse::new(vec![x01(PI)]),
        ]);
        assert!(only_01.completeness_rank(&flux_readout()) < 9);
        assert!(only_01.require_complete(&flux_readout()).is_err());
    }

    #[test]
    fn phase_shift_matches_conjugation() {
        let set = analyzer_set();
        let d = GateDecomposition {
            m01: C64::new(0.0, 0.0),
            m02: C64::new(0.0, 0.0),
            m12: C64::new(0.0, 0.0),
            phi0: 6.108652381980153,
            phi1: 4.014257279586958,
            phi2: 4.014257279586958,
            residual: 0.0,
            branch_flagged: false,
        };
        let shifted = phase_shift_analyzers(&set, &d);
        let mut u_d = Array2::<C64>::zeros((3, 3));
        for (j, &phi) in [d.phi0, d.phi1, d.phi2].iter().enumerate() {
            u_d[[j, j]] = C64::from_polar(1.0, -phi);
        }
        for (orig, new) in set.unitaries().iter().zip(shifted.unitaries()) {
            let conj = dagger(&u_d).dot(orig.entries()).dot(&u_d);
            assert!(
                max_abs_diff(new.entries(), &conj) < 1e-12,
                "pulse-realized shift disagrees with conjugation"
            );
        }
        // completeness is preserved
        assert_eq!(shifted.completeness_rank(&flux_readout()), 9);

        // equal phases only change U_d by a global phase: measurement
        // operators stay put
        let d_flat = GateDecomposition { phi0: 0.7, phi1: 0.7, phi2: 0.7, ..d };
        let flat = phase_shift_analyzers(&set, &d_flat);
        for (a, b) in set
            .measurement_operators(&flux_readout())
            .iter()
            .zip(flat.measurement_operators(&flux_readout()))
        {
            assert!(max_abs_diff(a, &b) < 1e-12);
        }
    }

    #[test]
    fn homodyne_voltages() {
        let readout = flux_readout();
        let id = UnitaryOperator::identity(3);
        let ground = DensityMatrix::basis_state(3, 0).unwrap();
        let v = simulate_homodyne(&ground, &id, &readout, false, 0).unwrap();
        assert!((v - 1.0).abs() < 1e-12);

        let thermal = DensityMatrix::thermal_qutrit(0.74).unwrap();
        let v = simulate_homodyne(&thermal, &id, &readout, false, 0).unwrap();
        assert!((v - 0.48).abs() < 1e-12);

        // the maximally mixed state reads the voltage average through any
        // analyzer
        let mixed = DensityMatrix::maximally_mixed(3);
        for u in analyzer_set().unitaries() {
            let v = simulate_homodyne(&mixed, u, &readout, false, 0).unwrap();
            assert!((v - 0.1).abs() < 1e-12);
        }

        // noise is deterministic per seed
        let a = simulate_homodyne(&ground, &id, &readout, true, 42).unwrap();
        let b = simulate_homodyne(&ground, &id, &readout, true, 42).unwrap();
        let c = simulate_homodyne(&ground, &id, &readout, true, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!((a - 1.0).abs() < 0.1, "noise far beyond 1% scale: {a}");
    }

    fn voltages_for(rho: &DensityMatrix, set: &AnalyzerSet, readout: &ReadoutModel) -> Vec<f64> {
        set.unitaries()
            .iter()
            .map(|u| simulate_homodyne(rho, u, readout, false, 0).unwrap())
            .collect()
    }

    #[test]
    fn mle_state_round_trips() {
        let readout = flux_readout();
        let set = analyzer_set();
        let options = MleOptions { restarts: 4, ..Default::default() };

        let ground = DensityMatrix::basis_state(3, 0).unwrap();
        let v = voltages_for(&ground, &set, &readout);
        let (rho, report) = mle_state(&v, &set, &readout, &options).unwrap();
        let f = state_fidelity(&rho, &ground).unwrap();
        assert!(f >= 0.9999, "ground-state fidelity {f}");
        assert!(report.objective < 1e-6);
        assert!(report.restarts_converged > 0);

        // a full-rank state with coherences
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = crate::operator::random_unitary(3, &mut rng);
        let mut diag = Array2::<C64>::zeros((3, 3));
        for (i, p) in [0.6, 0.3, 0.1].iter().enumerate() {
            diag[[i, i]] = C64::new(*p, 0.0);
        }
        let full = u
            .apply_density(&DensityMatrix::new(diag).unwrap())
            .unwrap();
        let v = voltages_for(&full, &set, &readout);
        let (rho, _) = mle_state(&v, &set, &readout, &options).unwrap();
        let f = state_fidelity(&rho, &full).unwrap();
        assert!(f >= 0.999, "full-rank fidelity {f}");
    }

    #[test]
    fn mle_state_rejects_mismatched_input() {
        let readout = flux_readout();
        let set = analyzer_set();
        let err = mle_state(&[0.0; 5], &set, &readout, &MleOptions::default());
        assert!(matches!(err, Err(Error::Dimension(_))));
    }

    #[test]
    fn operator_basis_orthogonality() {
        let basis = build_operator_basis();
        assert_eq!(basis.len(), 9);
        for m in 0..9 {
            for n in 0..9 {
                let t = pair_trace(&dagger(basis.element(m)), basis.element(n));
                let expect = if m == n { 3.0 } else { 0.0 };
                assert!(
                    (t.re - expect).abs() < 1e-12 && t.im.abs() < 1e-12,
                    "Tr(λ_{m}†λ_{n}) = {t}"
                );
            }
        }

        // identity decomposes onto the identity element alone
        let id = UnitaryOperator::identity(3);
        let e: Vec<C64> = basis
            .elements()
            .iter()
            .map(|lam| pair_trace(&dagger(lam), id.entries()) / 3.0)
            .collect();
        assert!((e[0] - C64::new(1.0, 0.0)).norm() < 1e-14);
        for em in &e[1..] {
            assert!(em.norm() < 1e-14);
        }

        // unitarity of the expansion: Σ|e_m|² = 1
        let wh = walsh_hadamard();
        let total: f64 = basis
            .elements()
            .iter()
            .map(|lam| (pair_trace(&dagger(lam), wh.entries()) / 3.0).norm_sqr())
            .sum();
        assert!((total - 1.0).abs() < 1e-12, "Parseval sum {total}");
    }

    #[test]
    fn ideal_chi_structure() {
        let basis = build_operator_basis();
        let chi_id = ideal_chi(&UnitaryOperator::identity(3), &basis).unwrap();
        assert!((chi_id.entries()[[0, 0]] - C64::new(1.0, 0.0)).norm() < 1e-14);
        let off: f64 = chi_id
            .entries()
            .indexed_iter()
            .filter(|((m, n), _)| !(*m == 0 && *n == 0))
            .map(|(_, z)| z.norm())
            .sum();
        assert!(off < 1e-12);

        let chi_wh = ideal_chi(&walsh_hadamard(), &basis).unwrap();
        let (vals, _) = eigh(chi_wh.entries()).unwrap();
        let mut sorted: Vec<f64> = vals.to_vec();
        sorted.sort_by(f64::total_cmp);
        assert!((sorted[8] - 1.0).abs() < 1e-12, "top eigenvalue {}", sorted[8]);
        for v in &sorted[..8] {
            assert!(v.abs() < 1e-12);
        }

        let f = process_fidelity(&chi_wh, &chi_wh).unwrap();
        assert!((f - 1.0).abs() < 1e-10);
    }

    #[test]
    fn process_fidelity_depolarizing_oracle() {
        let basis = build_operator_basis();
        let chi_wh = ideal_chi(&walsh_hadamard(), &basis).unwrap();
        // fully depolarizing process in this basis is χ = I/9
        let depol = Array2::<C64>::eye(9).mapv(|z| z / 9.0);
        let mixed = chi_wh.entries() * C64::new(0.9, 0.0) + &depol * C64::new(0.1, 0.0);
        let mixed = ProcessMatrix::new(mixed, &basis).unwrap();
        let f = process_fidelity(&mixed, &chi_wh).unwrap();
        let oracle = (0.9_f64 + 0.1 / 9.0).sqrt();
        assert!((f - oracle).abs() < 1e-9, "F = {f} vs {oracle}");

        // orthogonal rank-1 χ pair → 0: identity vs a basis element direction
        let mut e1 = Array2::<C64>::zeros((9, 9));
        e1[[1, 1]] = C64::new(1.0, 0.0);
        let chi_e1 = ProcessMatrix::new(e1, &basis).unwrap();
        let chi_id = ideal_chi(&UnitaryOperator::identity(3), &basis).unwrap();
        let f = process_fidelity(&chi_e1, &chi_id).unwrap();
        assert!(f.abs() < 1e-9);
    }

    #[test]
    fn process_identity_round_trip() {
        let readout = flux_readout();
        let set = analyzer_set();
        let basis = build_operator_basis();
        let preps: Vec<UnitaryOperator> =
            preparation_set().iter().map(TomographyPulse::unitary).collect();
        let nominal = DensityMatrix::thermal_qutrit(0.74).unwrap();

        // identity process: the measured record is just prep → analyze
        let mut records = Array2::<f64>::zeros((9, 9));
        for (j, p) in preps.iter().enumerate() {
            let rho = p.apply_density(&nominal).unwrap();
            for (i, u) in set.unitaries().iter().enumerate() {
                records[[j, i]] = simulate_homodyne(&rho, u, &readout, false, 0).unwrap();
            }
        }
        let options = MleOptions { restarts: 2, ..Default::default() };
        let (chi, report) =
            process_mle(&records, &preps, &set, &readout, &basis, &nominal, &options).unwrap();
        let chi_id = ideal_chi(&UnitaryOperator::identity(3), &basis).unwrap();
        let f = process_fidelity(&chi, &chi_id).unwrap();
        assert!(f >= 0.999, "identity process fidelity {f}");
        assert!(report.objective < 1e-8);
    }

    #[test]
    fn calibration_estimators() {
        let (p0, p1) = thermal_populations(7.4, 2.6).unwrap();
        assert!((p0 - 0.74).abs() < 1e-12 && (p1 - 0.26).abs() < 1e-12);
        let (p0, p1) = thermal_populations(1.0, 1.0).unwrap();
        assert!((p0 - 0.5).abs() < 1e-15 && (p1 - 0.5).abs() < 1e-15);
        let (p0, _) = thermal_populations(3.0, 0.0).unwrap();
        assert!((p0 - 1.0).abs() < 1e-15);
        assert!(thermal_populations(0.0, 1.0).is_err());

        // round trip against the flux readout levels
        let (v0, v1, v2) = (1.0, -1.0, 0.3);
        let (p0, p1) = (0.74, 0.26);
        let v_th = p0 * v0 + p1 * v1;
        let v_sw = p1 * v0 + p0 * v1;
        let v_sw2 = p1 * v0 + p0 * v2;
        let got = solve_voltage_levels(v_th, v_sw, v_sw2, p0).unwrap();
        assert!((got[0] - v0).abs() < 1e-12);
        assert!((got[1] - v1).abs() < 1e-12);
        assert!((got[2] - v2).abs() < 1e-12);

        // pure-state limit is the identity
        let got = solve_voltage_levels(0.5, 0.25, -0.125, 1.0).unwrap();
        assert_eq!(got, [0.5, 0.25, -0.125]);

        assert!(matches!(
            solve_voltage_levels(0.0, 0.0, 0.0, 0.5),
            Err(Error::SingularSystem(_))
        ));
        assert!(solve_voltage_levels(0.0, 0.0, 0.0, 0.3).is_err());
    }
}
