//! Device description: level structure, drive couplings, decoherence rates,
//! and the dispersive-readout voltage model.
//!
//! All frequencies are angular (rad/s) and all rates are plain 1/s; unit
//! conversion from GHz/MHz/kHz happens at the configuration boundary.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::TAU;

/// Shape of the off-diagonal coherence decay under free evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoherenceShape {
    /// `C_ij(τ) = exp(−Γ^R_ij·τ)` — white (short-correlation) dephasing noise.
    Exponential,
    /// `C_ij(τ) = exp(−(Γ^R_ij·τ)²)` — low-frequency-dominated noise, the
    /// better fit for flux devices.
    Gaussian,
}

/// Population transfer and coherence decay rates, all in 1/s.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoherenceRates {
    /// `gamma[[i, j]]` is the incoherent transition rate from level `i` to
    /// level `j`: relaxation for `i > j`, excitation for `i < j`.
    pub gamma: Array2<f64>,
    /// `pure_dephasing[[i, j]] = Γ^R_ij`, the pure-dephasing rate of the
    /// `(i, j)` coherence (symmetric, zero diagonal).
    pub pure_dephasing: Array2<f64>,
    pub coherence_shape: CoherenceShape,
}

impl DecoherenceRates {
    pub fn new(
        gamma: Array2<f64>,
        pure_dephasing: Array2<f64>,
        coherence_shape: CoherenceShape,
    ) -> Result<Self> {
        let n = gamma.nrows();
        if gamma.ncols() != n || pure_dephasing.dim() != (n, n) {
            return Err(Error::Dimension(format!(
                "decoherence matrices must be square and matched: gamma {:?}, dephasing {:?}",
                gamma.dim(),
                pure_dephasing.dim()
            )));
        }
        for i in 0..n {
            if gamma[[i, i]] != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "gamma[{i},{i}] must be zero, got {}",
                    gamma[[i, i]]
                )));
            }
            if pure_dephasing[[i, i]] != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "pure_dephasing[{i},{i}] must be zero"
                )));
            }
            for j in 0..n {
                if gamma[[i, j]] < 0.0 || !gamma[[i, j]].is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "gamma[{i},{j}] = {} must be a finite non-negative rate",
                        gamma[[i, j]]
                    )));
                }
                if pure_dephasing[[i, j]] < 0.0 || !pure_dephasing[[i, j]].is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "pure_dephasing[{i},{j}] must be a finite non-negative rate"
                    )));
                }
                if (pure_dephasing[[i, j]] - pure_dephasing[[j, i]]).abs() > 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "pure_dephasing must be symmetric, differs at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { gamma, pure_dephasing, coherence_shape })
    }

    /// All-zero rates (ideal closed system) for an `n`-level device.
    pub fn zero(n: usize) -> Self {
        Self {
            gamma: Array2::zeros((n, n)),
            pure_dephasing: Array2::zeros((n, n)),
            coherence_shape: CoherenceShape::Exponential,
        }
    }

    pub fn n_levels(&self) -> usize {
        self.gamma.nrows()
    }

    /// Total incoherent departure rate from level `i`, `Σ_j Γ_ij`.
    pub fn total_out(&self, i: usize) -> f64 {
        self.gamma.row(i).sum()
    }

    /// Coherence decay factor `C_ij(τ)` from pure dephasing alone.
    pub fn coherence_decay(&self, i: usize, j: usize, tau: f64) -> f64 {
        let x = self.pure_dephasing[[i, j]] * tau;
        match self.coherence_shape {
            CoherenceShape::Exponential => (-x).exp(),
            CoherenceShape::Gaussian => (-x * x).exp(),
        }
    }
}

/// Homodyne readout: each level maps to a voltage; an averaged record carries
/// additive Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutModel {
    /// `(V_h0, V_h1, V_h2)` in volts.
    pub voltage_levels: [f64; 3],
    /// Standard deviation of the additive noise per averaged record, volts.
    pub noise_sigma: f64,
}

impl ReadoutModel {
    pub fn new(voltage_levels: [f64; 3], noise_sigma: f64) -> Result<Self> {
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            if voltage_levels[a] == voltage_levels[b] {
                return Err(Error::InvalidInput(format!(
                    "readout voltage levels {a} and {b} coincide at {}",
                    voltage_levels[a]
                )));
            }
        }
        if noise_sigma < 0.0 || !noise_sigma.is_finite() {
            return Err(Error::InvalidInput(format!("noise sigma {noise_sigma}")));
        }
        Ok(Self { voltage_levels, noise_sigma })
    }

    /// Noise-free expected voltage `Σ_i P_i·V_hi` over the lowest three
    /// levels.
    pub fn expected_voltage(&self, populations: &[f64]) -> f64 {
        populations
            .iter()
            .zip(self.voltage_levels.iter())
            .map(|(p, v)| p * v)
            .sum()
    }
}

/// An N-level driven device (N ≥ 3): level frequencies, per-transition drive
/// couplings, decoherence rates, and the readout model.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSpec {
    n_levels: usize,
    /// Angular level frequencies `ω_j` (rad/s), `ω_0 = 0`, strictly
    /// increasing.
    level_freqs: Vec<f64>,
    /// Symmetric coupling matrix `g_jk` (rad/s per unit drive amplitude):
    /// a tone of amplitude `A` drives the `j↔k` transition at Rabi rate
    /// `Ω_jk = g_jk·A`.
    drive_couplings: Array2<f64>,
    pub decoherence: DecoherenceRates,
    pub readout: ReadoutModel,
}

impl DeviceSpec {
    pub fn new(
        level_freqs: Vec<f64>,
        drive_couplings: Array2<f64>,
        decoherence: DecoherenceRates,
        readout: ReadoutModel,
    ) -> Result<Self> {
        let n = level_freqs.len();
        if n < 3 {
            return Err(Error::Dimension(format!("need at least 3 levels, got {n}")));
        }
        if level_freqs[0] != 0.0 {
            return Err(Error::InvalidInput(format!(
                "level frequencies are referenced to the ground state: ω_0 must be 0, got {}",
                level_freqs[0]
            )));
        }
        for w in level_freqs.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidInput(format!(
                    "level frequencies must be strictly increasing, got {} after {}",
                    w[1], w[0]
                )));
            }
        }
        if drive_couplings.dim() != (n, n) {
            return Err(Error::Dimension(format!(
                "coupling matrix {:?} does not match {n} levels",
                drive_couplings.dim()
            )));
        }
        for i in 0..n {
            if drive_couplings[[i, i]] != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "drive coupling g_{i}{i} must be zero"
                )));
            }
            for j in 0..n {
                if drive_couplings[[i, j]] != drive_couplings[[j, i]] {
                    return Err(Error::InvalidInput(format!(
                        "drive couplings must be symmetric, differ at ({i},{j})"
                    )));
                }
                if !drive_couplings[[i, j]].is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "drive coupling g_{i}{j} is not finite"
                    )));
                }
            }
        }
        if decoherence.n_levels() != 3.min(n) && decoherence.n_levels() != n {
            return Err(Error::Dimension(format!(
                "decoherence rates cover {} levels on a {n}-level device",
                decoherence.n_levels()
            )));
        }
        Ok(Self { n_levels: n, level_freqs, drive_couplings, decoherence, readout })
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn level_freqs(&self) -> &[f64] {
        &self.level_freqs
    }

    pub fn drive_couplings(&self) -> &Array2<f64> {
        &self.drive_couplings
    }

    /// `g_jk` in rad/s per unit amplitude.
    pub fn coupling(&self, j: usize, k: usize) -> f64 {
        self.drive_couplings[[j, k]]
    }

    /// Transition frequency `ω_jk = ω_k − ω_j` (rad/s), positive for `j < k`.
    pub fn transition_freq(&self, j: usize, k: usize) -> f64 {
        self.level_freqs[k] - self.level_freqs[j]
    }

    /// The flux-qutrit device operated at its symmetry point: 0-1 and 1-2
    /// transitions at 2π×1.146 and 2π×5.693 GHz, direct 0-2 coupling
    /// forbidden (the 0-2 gate tone acts as a two-photon drive through the
    /// intermediate level), measured relaxation/excitation rates, and
    /// Gaussian coherence decay.
    pub fn flux_qutrit_3level() -> Self {
        let ghz = TAU * 1e9;
        let mhz = TAU * 1e6;
        let khz = 1e3;
        let level_freqs = vec![0.0, 1.146 * ghz, (1.146 + 5.693) * ghz];
        let mut g = Array2::zeros((3, 3));
        g[[0, 1]] = 30.0 * mhz;
        g[[1, 0]] = 30.0 * mhz;
        g[[1, 2]] = 60.0 * mhz;
        g[[2, 1]] = 60.0 * mhz;
        let mut gamma = Array2::zeros((3, 3));
        gamma[[0, 1]] = 5.5 * khz;
        gamma[[1, 0]] = 16.2 * khz;
        gamma[[2, 0]] = 21.6 * khz;
        gamma[[2, 1]] = 314.5 * khz;
        let mut dephasing = Array2::zeros((3, 3));
        for (i, j, r) in [(0, 1, 204.1), (1, 2, 238.1), (0, 2, 181.8)] {
            dephasing[[i, j]] = r * khz;
            dephasing[[j, i]] = r * khz;
        }
        let decoherence =
            DecoherenceRates::new(gamma, dephasing, CoherenceShape::Gaussian).expect("valid rates");
        let readout = ReadoutModel::new([1.0, -1.0, 0.3], 0.01).expect("valid readout");
        Self::new(level_freqs, g, decoherence, readout).expect("valid device")
    }
}
