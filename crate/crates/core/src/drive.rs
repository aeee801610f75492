//! Drive-field models: block-truncated dressed-state spectra, perturbative
//! ac-Stark and Bloch-Siegert shift sums, the two-photon Rabi rate, and
//! synthesis of shift-compensated pulse schedules.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};

use crate::decompose::GateDecomposition;
use crate::device::DeviceSpec;
use crate::error::{Error, Result};
use crate::linalg::TAU;
use crate::pulse::{
    FrequencyTrajectory, PulseEnvelope, PulseSchedule, ScheduledTone, ToneSpec,
};

/// Relative detuning below which a co-rotating denominator counts as an exact
/// single-photon resonance.
const RESONANT_REL_TOL: f64 = 1e-9;
/// Ω/Δ ratio above which a perturbative pair term is flagged as strained.
const STRAIN_RATIO: f64 = 0.3;
/// Squared eigenvector overlap below which adiabatic continuation refuses to
/// assign labels and halves the ramp step instead.
const TRACK_MIN_OVERLAP_SQ: f64 = 0.81;

/// Per-level and per-transition drive-induced frequency shifts, rad/s.
///
/// Perturbative reports split the co-rotating (`ac_stark`) and
/// counter-rotating (`bloch_siegert`) sums; numeric reports carry the full
/// nonperturbative shift in `ac_stark` with `bloch_siegert` zero, because the
/// split is not observable in a diagonalization.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftReport {
    pub ac_stark: Vec<f64>,
    pub bloch_siegert: Vec<f64>,
    /// `[[j, k]] = δ_k − δ_j` summing both contributions (antisymmetric).
    pub total_transition_shifts: Array2<f64>,
    /// Two-photon 0-2 Rabi rate for two-photon tones, 0 otherwise.
    pub two_photon_rabi: f64,
    /// Pairs whose co-rotating term had Ω/|Δ| above the perturbative comfort
    /// ratio; empty for numeric reports.
    pub strained_pairs: Vec<(usize, usize)>,
}

impl ShiftReport {
    fn from_levels(
        ac_stark: Vec<f64>,
        bloch_siegert: Vec<f64>,
        two_photon_rabi: f64,
        strained_pairs: Vec<(usize, usize)>,
    ) -> Self {
        let n = ac_stark.len();
        let mut total = Array2::zeros((n, n));
        for j in 0..n {
            for k in 0..n {
                total[[j, k]] = (ac_stark[k] + bloch_siegert[k]) - (ac_stark[j] + bloch_siegert[j]);
            }
        }
        Self {
            ac_stark,
            bloch_siegert,
            total_transition_shifts: total,
            two_photon_rabi,
            strained_pairs,
        }
    }

    pub fn zero(n_levels: usize) -> Self {
        Self::from_levels(vec![0.0; n_levels], vec![0.0; n_levels], 0.0, Vec::new())
    }

    /// Total shift of level `j`, rad/s.
    pub fn level_shift(&self, j: usize) -> f64 {
        self.ac_stark[j] + self.bloch_siegert[j]
    }

    /// Total shift of the `j→k` transition frequency, `δ_k − δ_j`.
    pub fn transition_shift(&self, j: usize, k: usize) -> f64 {
        self.total_transition_shifts[[j, k]]
    }
}

/// Eigenvalues of the block-truncated drive-dressed Hamiltonian with their
/// bare-state labels, sorted by energy.
#[derive(Debug, Clone, PartialEq)]
pub struct DressedSpectrum {
    /// Photon blocks kept on each side of the central block.
    pub truncation_blocks: usize,
    /// Dressed energies, rad/s, ascending.
    pub eigenvalues: Vec<f64>,
    /// `assignments[i] = (level j, photon number n)` labels `eigenvalues[i]`
    /// by adiabatic continuation from zero amplitude; a bijection on the kept
    /// blocks.
    pub assignments: Vec<(usize, isize)>,
}

impl DressedSpectrum {
    /// Energy of the dressed state continuing from `|level, photon⟩`.
    pub fn energy_of(&self, level: usize, photon: isize) -> Option<f64> {
        self.assignments
            .iter()
            .position(|&a| a == (level, photon))
            .map(|i| self.eigenvalues[i])
    }
}

/// Smallest per-side block count whose matrix reaches at least 49×49 (the
/// truncation scale at which shift values are converged to well below the
/// perturbative comparison tolerances).
pub fn default_blocks(n_levels: usize) -> usize {
    let mut b = 3;
    while n_levels * (2 * b + 1) < 49 {
        b += 1;
    }
    b
}

fn basis_index(blocks: usize, n_levels: usize, level: usize, photon: isize) -> usize {
    ((photon + blocks as isize) as usize) * n_levels + level
}

/// Real symmetric dressed Hamiltonian over `2·blocks + 1` photon blocks:
/// diagonal `ω_j + n·ω_d`, and every allowed pair `(j,k)` coupled between
/// adjacent photon sectors with element `g_jk·amplitude/2` (both rotating and
/// counter-rotating couplings are present by construction).
pub fn build_dressed_hamiltonian(
    device: &DeviceSpec,
    tone: &ToneSpec,
    blocks: usize,
) -> Result<Array2<f64>> {
    if blocks < 3 {
        return Err(Error::BlocksTooSmall { needed: 3, got: blocks });
    }
    let nl = device.n_levels();
    let dim = nl * (2 * blocks + 1);
    let mut h = Array2::<f64>::zeros((dim, dim));
    let b = blocks as isize;
    for n in -b..=b {
        for j in 0..nl {
            let row = basis_index(blocks, nl, j, n);
            h[[row, row]] = device.level_freqs()[j] + n as f64 * tone.carrier_freq;
        }
        if n < b {
            for j in 0..nl {
                for k in 0..nl {
                    if j == k {
                        continue;
                    }
                    let g = device.coupling(j, k);
                    if g == 0.0 {
                        continue;
                    }
                    let row = basis_index(blocks, nl, j, n);
                    let col = basis_index(blocks, nl, k, n + 1);
                    h[[row, col]] = 0.5 * g * tone.amplitude;
                    h[[col, row]] = 0.5 * g * tone.amplitude;
                }
            }
        }
    }
    Ok(h)
}

fn eigh_real(h: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    h.eigh(UPLO::Lower).map_err(Error::from)
}

/// Diagonalize with adiabatic label tracking from zero amplitude. Returns
/// `(eigenvalues, eigenvectors, labels)` in bare-basis order: entry `i`
/// continues from the bare state with basis index `i`. Eigenvectors are
/// columns.
fn tracked_eigensystem(
    device: &DeviceSpec,
    tone: &ToneSpec,
    blocks: usize,
) -> Result<(Vec<f64>, Array2<f64>, Vec<(usize, isize)>)> {
    let nl = device.n_levels();
    let dim = nl * (2 * blocks + 1);
    let labels: Vec<(usize, isize)> = (0..dim)
        .map(|i| (i % nl, (i / nl) as isize - blocks as isize))
        .collect();

    // exact diagonal at zero amplitude
    let bare = build_dressed_hamiltonian(device, &ToneSpec { amplitude: 0.0, ..*tone }, blocks)?;
    if tone.amplitude == 0.0 {
        let vals: Vec<f64> = (0..dim).map(|i| bare[[i, i]]).collect();
        return Ok((vals, Array2::eye(dim), labels));
    }

    let full = build_dressed_hamiltonian(device, tone, blocks)?;
    let coupling = &full - &bare;

    let mut prev_vecs = Array2::<f64>::eye(dim);
    let mut vals = vec![0.0; dim];
    let mut s = 0.0_f64;
    let mut ds = 0.125_f64;
    const DS_FLOOR: f64 = 1.0 / 1_048_576.0;
    while s < 1.0 {
        let s_try = (s + ds).min(1.0);
        let h = &bare + &coupling.mapv(|x| x * s_try);
        let (new_vals, new_vecs) = eigh_real(&h)?;

        // candidate matching by descending squared overlap, enforcing a
        // bijection
        let overlap = prev_vecs.t().dot(&new_vecs); // [prev, new]
        let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(dim * dim);
        for p in 0..dim {
            for c in 0..dim {
                let o = overlap[[p, c]];
                pairs.push((o * o, p, c));
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut prev_used = vec![false; dim];
        let mut new_used = vec![false; dim];
        let mut assign = vec![usize::MAX; dim]; // prev index -> new column
        let mut matched = 0;
        let mut min_matched = f64::INFINITY;
        for (o2, p, c) in pairs {
            if prev_used[p] || new_used[c] {
                continue;
            }
            prev_used[p] = true;
            new_used[c] = true;
            assign[p] = c;
            min_matched = min_matched.min(o2);
            matched += 1;
            if matched == dim {
                break;
            }
        }

        if min_matched < TRACK_MIN_OVERLAP_SQ {
            ds *= 0.5;
            if ds < DS_FLOOR {
                return Err(Error::TrackingAmbiguity {
                    amplitude: tone.amplitude * s_try,
                    overlap: min_matched.sqrt(),
                });
            }
            continue;
        }

        let mut tracked = Array2::<f64>::zeros((dim, dim));
        for p in 0..dim {
            let c = assign[p];
            let sign = if overlap[[p, c]] < 0.0 { -1.0 } else { 1.0 };
            for r in 0..dim {
                tracked[[r, p]] = sign * new_vecs[[r, c]];
            }
            vals[p] = new_vals[c];
        }
        prev_vecs = tracked;
        s = s_try;
        ds = (ds * 1.5).min(0.25);
    }
    Ok((vals, prev_vecs, labels))
}

/// Tracked dressed spectrum at the tone's amplitude, sorted by energy. At
/// zero amplitude the eigenvalues are the exact bare values `ω_j + n·ω_d`.
pub fn dressed_spectrum(
    device: &DeviceSpec,
    tone: &ToneSpec,
    blocks: usize,
) -> Result<DressedSpectrum> {
    let (vals, _, labels) = tracked_eigensystem(device, tone, blocks)?;
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    Ok(DressedSpectrum {
        truncation_blocks: blocks,
        eigenvalues: order.iter().map(|&i| vals[i]).collect(),
        assignments: order.iter().map(|&i| labels[i]).collect(),
    })
}

/// Gap between the two dressed states with the largest support on
/// `{|0,+1⟩, |2,−1⟩}` at the given carrier frequency (no tracking needed:
/// identification is by support, not continuation).
fn two_photon_pair_gap(
    device: &DeviceSpec,
    tone: &ToneSpec,
    blocks: usize,
    omega_d: f64,
) -> Result<f64> {
    let probe = ToneSpec { carrier_freq: omega_d, ..*tone };
    let h = build_dressed_hamiltonian(device, &probe, blocks)?;
    let (vals, vecs) = eigh_real(&h)?;
    let nl = device.n_levels();
    let i0 = basis_index(blocks, nl, 0, 1);
    let i2 = basis_index(blocks, nl, 2, -1);
    let dim = vals.len();
    let mut best = (0usize, -1.0f64);
    let mut second = (0usize, -1.0f64);
    for c in 0..dim {
        let s = vecs[[i0, c]].powi(2) + vecs[[i2, c]].powi(2);
        if s > best.1 {
            second = best;
            best = (c, s);
        } else if s > second.1 {
            second = (c, s);
        }
    }
    Ok((vals[best.0] - vals[second.0]).abs())
}

/// Minimum anticrossing gap between the dressed `|0,n+2⟩` and `|2,n⟩`
/// branches over a carrier sweep through two-photon resonance.
fn numeric_two_photon_rabi(device: &DeviceSpec, tone: &ToneSpec, blocks: usize) -> Result<f64> {
    let w02 = device.transition_freq(0, 2);
    // center the sweep on the perturbatively shifted resonance when available
    let center = match perturbative_level_sums(device, tone, None) {
        Ok((acs, bs, _)) => {
            let d02 = (acs[2] + bs[2]) - (acs[0] + bs[0]);
            0.5 * (w02 + d02)
        }
        Err(_) => 0.5 * w02,
    };
    let gap_est = two_photon_rabi(device, tone).unwrap_or(TAU * 10e6);
    let half_width = (4.0 * gap_est).max(TAU * 15e6);
    let n_sweep = 41usize;
    let mut best_i = 0usize;
    let mut best_gap = f64::INFINITY;
    for i in 0..n_sweep {
        let wd = center - half_width + 2.0 * half_width * i as f64 / (n_sweep - 1) as f64;
        let g = two_photon_pair_gap(device, tone, blocks, wd)?;
        if g < best_gap {
            best_gap = g;
            best_i = i;
        }
    }
    let step = 2.0 * half_width / (n_sweep - 1) as f64;
    let lo = center - half_width + step * best_i.saturating_sub(1) as f64;
    let hi = center - half_width + step * (best_i + 1).min(n_sweep - 1) as f64;
    let (_, min_gap) = crate::optim::golden_min(
        |wd| two_photon_pair_gap(device, tone, blocks, wd).unwrap_or(f64::INFINITY),
        lo,
        hi,
        step * 1e-6,
    );
    Ok(min_gap)
}

/// Level shifts from adiabatically tracked dressed eigenvalues:
/// `δ_j = E(j, 0) − ω_j` for the lowest three levels. For two-photon tones
/// the report also carries the swept minimum anticrossing gap as the numeric
/// two-photon Rabi rate. The full nonperturbative shift is reported in the
/// `ac_stark` slot (the co-/counter-rotating split is not observable here).
pub fn numeric_shifts(device: &DeviceSpec, tone: &ToneSpec, blocks: usize) -> Result<ShiftReport> {
    let nl = device.n_levels();
    if tone.amplitude == 0.0 {
        return Ok(ShiftReport::zero(nl));
    }
    let (vals, _, _) = tracked_eigensystem(device, tone, blocks)?;
    let mut totals = vec![0.0; nl];
    for (j, t) in totals.iter_mut().enumerate().take(3) {
        let idx = basis_index(blocks, nl, j, 0);
        *t = vals[idx] - device.level_freqs()[j];
    }
    let two_photon = if tone.is_two_photon {
        numeric_two_photon_rabi(device, tone, blocks)?
    } else {
        0.0
    };
    Ok(ShiftReport::from_levels(totals, vec![0.0; nl], two_photon, Vec::new()))
}

/// Second-order level shifts of a single tone. For each coupled pair
/// `(l < k)` with Rabi rate `Ω = g_lk·A`:
/// co-rotating `δ_l += Ω²/(4(ω_d − ω_lk))`, `δ_k −= …` (ac-Stark) and
/// counter-rotating `δ_l −= Ω²/(4(ω_d + ω_lk))`, `δ_k += …` (Bloch-Siegert).
/// `exclude` removes the co-rotating term of one pair — used when that pair's
/// resonant interaction is the intended drive rather than a shift.
fn perturbative_level_sums(
    device: &DeviceSpec,
    tone: &ToneSpec,
    exclude: Option<(usize, usize)>,
) -> Result<(Vec<f64>, Vec<f64>, Vec<(usize, usize)>)> {
    let n = device.n_levels();
    let mut acs = vec![0.0; n];
    let mut bs = vec![0.0; n];
    let mut strained = Vec::new();
    if tone.amplitude == 0.0 {
        return Ok((acs, bs, strained));
    }
    let wd = tone.carrier_freq;
    for l in 0..n {
        for k in (l + 1)..n {
            let g = device.coupling(l, k);
            if g == 0.0 {
                continue;
            }
            let omega = g * tone.amplitude;
            let wlk = device.transition_freq(l, k);
            let bs_term = omega * omega / (4.0 * (wd + wlk));
            bs[l] -= bs_term;
            bs[k] += bs_term;
            if exclude == Some((l, k)) {
                continue;
            }
            let det = wd - wlk;
            if det.abs() < RESONANT_REL_TOL * wlk.max(wd) {
                return Err(Error::Resonant { j: l, k, detuning: det });
            }
            let acs_term = omega * omega / (4.0 * det);
            acs[l] += acs_term;
            acs[k] -= acs_term;
            if (omega / det).abs() > STRAIN_RATIO {
                strained.push((l, k));
            }
        }
    }
    Ok((acs, bs, strained))
}

/// Perturbative shift report: the pure second-order sums over every coupled
/// pair (no term excluded). Errors on an exact single-photon resonance, where
/// the expansion is invalid; pairs with Ω/|Δ| > 0.3 are flagged as strained.
pub fn perturbative_shifts(device: &DeviceSpec, tone: &ToneSpec) -> Result<ShiftReport> {
    let (acs, bs, strained) = perturbative_level_sums(device, tone, None)?;
    let two_photon = if tone.is_two_photon && tone.amplitude > 0.0 {
        two_photon_rabi(device, tone)?
    } else {
        0.0
    };
    Ok(ShiftReport::from_levels(acs, bs, two_photon, strained))
}

/// Two-photon 0-2 Rabi rate through the intermediate level,
/// `|Ω01·Ω12 / (2(ω_d − ω01))|`.
pub fn two_photon_rabi(device: &DeviceSpec, tone: &ToneSpec) -> Result<f64> {
    let w01 = device.transition_freq(0, 1);
    let det = tone.carrier_freq - w01;
    if det.abs() < RESONANT_REL_TOL * w01.max(tone.carrier_freq) {
        return Err(Error::Resonant { j: 0, k: 1, detuning: det });
    }
    let omega01 = device.coupling(0, 1) * tone.amplitude;
    let omega12 = device.coupling(1, 2) * tone.amplitude;
    Ok((omega01 * omega12 / (2.0 * det)).abs())
}

/// Which shift model feeds carrier compensation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftModel {
    /// Closed-form second-order sums (exactly quadratic in amplitude).
    Perturbative,
    /// Tracked dressed-state diagonalization on an amplitude grid; tones
    /// resonant with their own target fall back to the perturbative model
    /// (their tracked branches hybridize with the intended drive dynamics).
    Numeric { blocks: usize },
}

/// Compensation settings: shift model and the carrier-trajectory sampling
/// step.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensationConfig {
    pub model: ShiftModel,
    /// Trajectory sample spacing, seconds.
    pub sample_dt: f64,
}

impl Default for CompensationConfig {
    fn default() -> Self {
        Self { model: ShiftModel::Perturbative, sample_dt: 5e-12 }
    }
}

/// Exclusion rule shared by synthesis and compensation: a single-photon
/// tone's own resonant pair term is the drive, not a shift.
fn compensation_exclusion(tone: &ToneSpec) -> Option<(usize, usize)> {
    if tone.is_two_photon {
        None
    } else {
        Some(tone.target_transition)
    }
}

/// Per-tone shift-vs-amplitude evaluator.
enum ShiftCurve {
    /// `δ_j(a) = c_j·a²` (perturbative sums are exactly quadratic).
    Quadratic(Vec<f64>),
    /// Sampled on an amplitude grid, interpolated linearly in a².
    Grid { amps: Vec<f64>, levels: Vec<Vec<f64>> },
}

impl ShiftCurve {
    fn eval(&self, a: f64, out: &mut [f64]) {
        match self {
            Self::Quadratic(c) => {
                let a2 = a * a;
                for (o, &cj) in out.iter_mut().zip(c.iter()) {
                    *o = cj * a2;
                }
            }
            Self::Grid { amps, levels } => {
                let n = amps.len();
                let a = a.clamp(amps[0], amps[n - 1]);
                let i = match amps.iter().position(|&x| x >= a) {
                    Some(0) | None => 0,
                    Some(p) => p - 1,
                };
                let i = i.min(n - 2);
                let (s0, s1) = (amps[i] * amps[i], amps[i + 1] * amps[i + 1]);
                let s = a * a;
                let w = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
                for (j, o) in out.iter_mut().enumerate() {
                    *o = levels[i][j] + w * (levels[i + 1][j] - levels[i][j]);
                }
            }
        }
    }
}

fn quadratic_curve(device: &DeviceSpec, tone: &ToneSpec) -> Result<ShiftCurve> {
    let unit = ToneSpec { amplitude: 1.0, ..*tone };
    let (acs, bs, _) = perturbative_level_sums(device, &unit, compensation_exclusion(tone))?;
    Ok(ShiftCurve::Quadratic(
        acs.iter().zip(bs.iter()).map(|(a, b)| a + b).collect(),
    ))
}

/// True when the tone sits close enough to its own target resonance that
/// tracked dressed branches would follow the intended drive hybridization
/// instead of a pure shift.
fn resonant_with_target(device: &DeviceSpec, tone: &ToneSpec, peak_amplitude: f64) -> bool {
    let (j, k) = tone.target_transition;
    if k >= device.n_levels() {
        return false;
    }
    let wjk = device.transition_freq(j, k);
    if tone.is_two_photon {
        let probe = ToneSpec { amplitude: peak_amplitude, ..*tone };
        let rabi = two_photon_rabi(device, &probe).unwrap_or(f64::INFINITY);
        (2.0 * tone.carrier_freq - wjk).abs() <= 10.0 * rabi
    } else {
        let rabi = device.coupling(j, k).abs() * peak_amplitude;
        (tone.carrier_freq - wjk).abs() <= 10.0 * rabi
    }
}

fn shift_curve(
    device: &DeviceSpec,
    tone: &ToneSpec,
    peak_amplitude: f64,
    model: &ShiftModel,
) -> Result<ShiftCurve> {
    match model {
        ShiftModel::Perturbative => quadratic_curve(device, tone),
        ShiftModel::Numeric { blocks } => {
            if peak_amplitude == 0.0 || resonant_with_target(device, tone, peak_amplitude) {
                return quadratic_curve(device, tone);
            }
            let n_grid = 17;
            let nl = device.n_levels();
            let mut amps = Vec::with_capacity(n_grid);
            let mut levels = Vec::with_capacity(n_grid);
            for i in 0..n_grid {
                let a = peak_amplitude * i as f64 / (n_grid - 1) as f64;
                let probe = ToneSpec { amplitude: a, is_two_photon: false, ..*tone };
                let report = numeric_shifts(device, &probe, *blocks)?;
                amps.push(a);
                levels.push((0..nl).map(|j| report.level_shift(j)).collect());
            }
            Ok(ShiftCurve::Grid { amps, levels })
        }
    }
}

/// Recompute every tone's carrier trajectory and the per-level frame
/// trajectories so that, at each instant, carriers follow
/// `nominal + shift(envelope amplitude)` — the single-photon shift for
/// single-photon tones and half the pair shift for two-photon tones. Shifts
/// from simultaneous tones add (second-order theory is additive). Tones with
/// zero amplitude pass through unchanged.
pub fn compensated_trajectories(
    device: &DeviceSpec,
    schedule: &PulseSchedule,
    config: &CompensationConfig,
) -> Result<PulseSchedule> {
    let nl = device.n_levels();
    if config.sample_dt <= 0.0 {
        return Err(Error::InvalidInput("sample_dt must be positive".into()));
    }
    for st in &schedule.tones {
        let (j, k) = st.tone.target_transition;
        if k >= nl {
            return Err(Error::Dimension(format!(
                "tone targets ({j},{k}) on a {nl}-level device"
            )));
        }
    }

    let curves: Vec<ShiftCurve> = schedule
        .tones
        .iter()
        .map(|st| {
            let peak = st.tone.amplitude * st.envelope.peak;
            shift_curve(device, &st.tone, peak, &config.model)
        })
        .collect::<Result<_>>()?;

    let total = schedule.total_duration;
    let steps = ((total / config.sample_dt).ceil() as usize).max(1) + 1;
    let dt = if steps > 1 { total / (steps - 1) as f64 } else { config.sample_dt };

    let mut level_deltas = vec![vec![0.0f64; steps]; nl];
    let mut scratch = vec![0.0f64; nl];
    for (st, curve) in schedule.tones.iter().zip(curves.iter()) {
        for s in 0..steps {
            let t = dt * s as f64;
            let a = st.amplitude(t);
            if a == 0.0 {
                continue;
            }
            curve.eval(a, &mut scratch);
            for j in 0..nl {
                level_deltas[j][s] += scratch[j];
            }
        }
    }

    let make_traj = |base: f64, samples: &[f64]| -> Result<FrequencyTrajectory> {
        if samples.iter().all(|&x| x == 0.0) {
            Ok(FrequencyTrajectory::constant(base))
        } else {
            FrequencyTrajectory::from_samples(base, dt, samples.to_vec())
        }
    };

    let mut level_trajectories = Vec::with_capacity(nl);
    for j in 0..nl {
        level_trajectories.push(make_traj(device.level_freqs()[j], &level_deltas[j])?);
    }

    let mut tones = Vec::with_capacity(schedule.tones.len());
    for st in &schedule.tones {
        let (j, k) = st.tone.target_transition;
        let factor = if st.tone.is_two_photon { 0.5 } else { 1.0 };
        let samples: Vec<f64> = (0..steps)
            .map(|s| factor * (level_deltas[k][s] - level_deltas[j][s]))
            .collect();
        tones.push(ScheduledTone {
            tone: st.tone,
            envelope: st.envelope,
            carrier: make_traj(st.tone.carrier_freq, &samples)?,
            start: st.start,
        });
    }

    PulseSchedule::new(tones, level_trajectories, total)
}

/// Envelope timing shared by the gate's three tones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateTiming {
    pub rise: f64,
    pub flat: f64,
    pub fall: f64,
}

impl Default for GateTiming {
    /// 4 ns cosine edges around a 27 ns flat top (35 ns total).
    fn default() -> Self {
        Self { rise: 4e-9, flat: 27e-9, fall: 4e-9 }
    }
}

impl GateTiming {
    pub fn total(&self) -> f64 {
        self.rise + self.flat + self.fall
    }

    fn validate(&self) -> Result<()> {
        if self.rise < 0.0 || self.flat < 0.0 || self.fall < 0.0 || self.total() <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "gate timing must have non-negative segments and positive total, got {self:?}"
            )));
        }
        Ok(())
    }

    fn envelope(&self) -> Result<PulseEnvelope> {
        PulseEnvelope::new(self.rise, self.flat, self.fall, 1.0)
    }

    /// Equal-area square-pulse duration.
    pub fn effective_duration_linear(&self) -> f64 {
        self.flat + 0.5 * (self.rise + self.fall)
    }

    /// Equal-∫env² square-pulse duration.
    pub fn effective_duration_quadratic(&self) -> f64 {
        self.flat + 0.375 * (self.rise + self.fall)
    }
}

/// Peak per-level shifts for a set of tones at their peak amplitudes, with
/// each single-photon tone's own resonant term excluded.
fn peak_level_shifts(device: &DeviceSpec, tones: &[ToneSpec]) -> Result<Vec<f64>> {
    let nl = device.n_levels();
    let mut totals = vec![0.0; nl];
    for tone in tones {
        let (acs, bs, _) = perturbative_level_sums(device, tone, compensation_exclusion(tone))?;
        for j in 0..nl {
            totals[j] += acs[j] + bs[j];
        }
    }
    Ok(totals)
}

/// Synthesize the three-tone gate schedule implementing a decomposition:
/// single-photon 0-1 and 1-2 tones plus a two-photon 0-2 tone, all sharing
/// the given envelope timing.
///
/// Peak Rabi rates are set so each tone's integrated area equals `2|m_jk|`
/// (the cosine edges are compensated through the envelope's effective
/// duration — linear for single-photon tones, quadratic for the two-photon
/// tone whose rate goes as amplitude squared). The two-photon amplitude and
/// the shifted carrier targets are solved self-consistently, since the
/// two-photon rate depends on the shifted intermediate-state detuning while
/// the shifts depend on every tone's amplitude. Drive phases are
/// `arg(m_jk)`, halved for the two-photon tone (its effective coupling
/// carries twice the drive phase). Carriers are left at the bare transition
/// frequencies; `compensated_trajectories` installs the time-dependent
/// detunings.
pub fn synthesize_gate_schedule(
    device: &DeviceSpec,
    d: &GateDecomposition,
    timing: &GateTiming,
    comp: &CompensationConfig,
) -> Result<PulseSchedule> {
    timing.validate()?;
    if device.n_levels() < 3 {
        return Err(Error::Dimension(format!(
            "gate synthesis needs ≥ 3 levels, got {}",
            device.n_levels()
        )));
    }
    let t_lin = timing.effective_duration_linear();
    let t_quad = timing.effective_duration_quadratic();
    let w01 = device.transition_freq(0, 1);
    let w12 = device.transition_freq(1, 2);
    let w02 = device.transition_freq(0, 2);
    let g01 = device.coupling(0, 1);
    let g12 = device.coupling(1, 2);

    let single_amp = |m: num_complex::Complex64, g: f64, pair: &str| -> Result<f64> {
        if m.norm() == 0.0 {
            return Ok(0.0);
        }
        if g == 0.0 {
            return Err(Error::InvalidInput(format!(
                "decomposition drives the {pair} transition but the device coupling is zero"
            )));
        }
        Ok(2.0 * m.norm() / t_lin / g)
    };
    let a01 = single_amp(d.m01, g01, "0-1")?;
    let a12 = single_amp(d.m12, g12, "1-2")?;

    // two-photon amplitude: fixed point over (a02, level shifts)
    let rabi_tp_target = 2.0 * d.m02.norm() / t_quad;
    let mut a02 = 0.0;
    let mut deltas = vec![0.0; device.n_levels()];
    if d.m02.norm() > 0.0 {
        if g01 == 0.0 || g12 == 0.0 {
            return Err(Error::InvalidInput(
                "two-photon 0-2 drive requires nonzero 0-1 and 1-2 couplings".into(),
            ));
        }
        let mut converged = false;
        for _ in 0..60 {
            let wd01 = w01 + (deltas[1] - deltas[0]);
            let wd12 = w12 + (deltas[2] - deltas[1]);
            let wd02 = 0.5 * (w02 + (deltas[2] - deltas[0]));
            let delta_eff = wd02 - wd01;
            if delta_eff.abs() < TAU * 1e3 {
                return Err(Error::Resonant { j: 0, k: 1, detuning: delta_eff });
            }
            let a02_new = (2.0 * rabi_tp_target * delta_eff.abs() / (g01 * g12)).sqrt();
            let mut tones = Vec::new();
            if a01 > 0.0 {
                tones.push(ToneSpec::new(a01, wd01, 0.0, (0, 1), false)?);
            }
            if a12 > 0.0 {
                tones.push(ToneSpec::new(a12, wd12, 0.0, (1, 2), false)?);
            }
            tones.push(ToneSpec::new(a02_new, wd02, 0.0, (0, 2), true)?);
            let new_deltas = peak_level_shifts(device, &tones)?;
            let level_move = new_deltas
                .iter()
                .zip(deltas.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let amp_move = (a02_new - a02).abs();
            deltas = new_deltas;
            a02 = a02_new;
            if level_move < TAU * 0.1 && amp_move < 1e-12 * a02.max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::InvalidInput(
                "shift-compensated two-photon amplitude failed to converge".into(),
            ));
        }
    }

    let env = timing.envelope()?;
    let mut tones = Vec::new();
    if a01 > 0.0 {
        tones.push(ScheduledTone::fixed_carrier(
            ToneSpec::new(a01, w01, d.m01.arg(), (0, 1), false)?,
            env,
        ));
    }
    if a12 > 0.0 {
        tones.push(ScheduledTone::fixed_carrier(
            ToneSpec::new(a12, w12, d.m12.arg(), (1, 2), false)?,
            env,
        ));
    }
    if a02 > 0.0 {
        tones.push(ScheduledTone::fixed_carrier(
            ToneSpec::new(a02, 0.5 * w02, 0.5 * d.m02.arg(), (0, 2), true)?,
            env,
        ));
    }
    let bare_levels = device
        .level_freqs()
        .iter()
        .map(|&w| FrequencyTrajectory::constant(w))
        .collect();
    let schedule = PulseSchedule::new(tones, bare_levels, timing.total())?;
    compensated_trajectories(device, &schedule, comp)
}

/// Single-tone schedule realizing a resonant rotation of the given angle on
/// one transition: amplitude `|θ|/(g·T_eff)`, drive phase `phase` (plus π
/// for negative angles), shift-compensated carrier.
pub fn rotation_pulse_schedule(
    device: &DeviceSpec,
    transition: (usize, usize),
    phase: f64,
    angle: f64,
    timing: &GateTiming,
    comp: &CompensationConfig,
) -> Result<PulseSchedule> {
    timing.validate()?;
    let (j, k) = transition;
    if k >= device.n_levels() || j >= k {
        return Err(Error::Dimension(format!(
            "rotation transition ({j},{k}) invalid for {} levels",
            device.n_levels()
        )));
    }
    let g = device.coupling(j, k);
    if g == 0.0 && angle != 0.0 {
        return Err(Error::InvalidInput(format!(
            "transition ({j},{k}) has zero drive coupling"
        )));
    }
    let amp = if angle == 0.0 { 0.0 } else { angle.abs() / (g * timing.effective_duration_linear()) };
    let drive_phase = if angle < 0.0 { phase + std::f64::consts::PI } else { phase };
    let wjk = device.transition_freq(j, k);
    let mut tones = Vec::new();
    if amp > 0.0 {
        tones.push(ScheduledTone::fixed_carrier(
            ToneSpec::new(amp, wjk, drive_phase, (j, k), false)?,
            timing.envelope()?,
        ));
    }
    let bare_levels = device
        .level_freqs()
        .iter()
        .map(|&w| FrequencyTrajectory::constant(w))
        .collect();
    let schedule = PulseSchedule::new(tones, bare_levels, timing.total())?;
    compensated_trajectories(device, &schedule, comp)
}
