//! Pulse-level description of a drive program: envelopes with cosine edges,
//! drive tones, time-dependent carrier/level frequency trajectories, and the
//! schedule that groups them.

use crate::error::{Error, Result};

/// Flat-top envelope with cosine-shaped rise and fall segments. The value is
/// zero outside the support, `peak` on the flat top, and C¹-continuous at
/// every joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseEnvelope {
    /// Rise duration, seconds.
    pub rise: f64,
    /// Flat-top duration, seconds.
    pub flat: f64,
    /// Fall duration, seconds.
    pub fall: f64,
    /// Flat-top value, drive units (≥ 0; sign conventions live in the tone
    /// phase).
    pub peak: f64,
}

impl PulseEnvelope {
    pub fn new(rise: f64, flat: f64, fall: f64, peak: f64) -> Result<Self> {
        for (name, v) in [("rise", rise), ("flat", flat), ("fall", fall)] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "envelope {name} duration must be finite and ≥ 0, got {v}"
                )));
            }
        }
        if peak < 0.0 || !peak.is_finite() {
            return Err(Error::InvalidInput(format!(
                "envelope peak must be finite and ≥ 0, got {peak}"
            )));
        }
        Ok(Self { rise, flat, fall, peak })
    }

    /// Support length `rise + flat + fall`.
    pub fn total(&self) -> f64 {
        self.rise + self.flat + self.fall
    }

    /// Envelope value at local time `t` (zero outside `[0, total]`).
    pub fn eval(&self, t: f64) -> f64 {
        let total = self.total();
        if t < 0.0 || t > total {
            return 0.0;
        }
        if t < self.rise {
            return self.peak * 0.5 * (1.0 - (std::f64::consts::PI * t / self.rise).cos());
        }
        if t <= self.rise + self.flat {
            return self.peak;
        }
        let remaining = total - t;
        if self.fall > 0.0 {
            self.peak * 0.5 * (1.0 - (std::f64::consts::PI * remaining / self.fall).cos())
        } else {
            0.0
        }
    }

    /// `∫ env dt = peak · (flat + (rise+fall)/2)`.
    pub fn area(&self) -> f64 {
        self.peak * self.effective_duration_linear()
    }

    /// `∫ env² dt = peak² · (flat + 3(rise+fall)/8)`.
    pub fn squared_area(&self) -> f64 {
        self.peak * self.peak * self.effective_duration_quadratic()
    }

    /// Duration of the equal-area square pulse at the same peak:
    /// `flat + (rise+fall)/2`. Sets single-photon Rabi amplitudes.
    pub fn effective_duration_linear(&self) -> f64 {
        self.flat + 0.5 * (self.rise + self.fall)
    }

    /// Duration of the equal-∫env² square pulse at the same peak:
    /// `flat + 3(rise+fall)/8`. Sets two-photon (amplitude-squared) rates.
    pub fn effective_duration_quadratic(&self) -> f64 {
        self.flat + 0.375 * (self.rise + self.fall)
    }
}

/// One drive tone: amplitude in coupling units, nominal carrier frequency,
/// phase, and the transition it targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneSpec {
    /// Dimensionless drive amplitude; the Rabi rate on pair `(j,k)` is
    /// `g_jk·amplitude`.
    pub amplitude: f64,
    /// Nominal carrier angular frequency, rad/s.
    pub carrier_freq: f64,
    /// Drive phase, rad.
    pub phase: f64,
    /// Level pair `(j, k)` with `j < k` this tone is meant to address.
    pub target_transition: (usize, usize),
    /// True when the tone drives its target as a two-photon process (carrier
    /// near half the transition frequency).
    pub is_two_photon: bool,
}

impl ToneSpec {
    pub fn new(
        amplitude: f64,
        carrier_freq: f64,
        phase: f64,
        target_transition: (usize, usize),
        is_two_photon: bool,
    ) -> Result<Self> {
        if amplitude < 0.0 || !amplitude.is_finite() {
            return Err(Error::InvalidInput(format!(
                "tone amplitude must be finite and ≥ 0, got {amplitude}"
            )));
        }
        if carrier_freq <= 0.0 || !carrier_freq.is_finite() {
            return Err(Error::InvalidInput(format!(
                "carrier frequency must be positive, got {carrier_freq}"
            )));
        }
        if !phase.is_finite() {
            return Err(Error::InvalidInput("tone phase must be finite".into()));
        }
        let (j, k) = target_transition;
        if j >= k {
            return Err(Error::InvalidInput(format!(
                "target transition must be ordered j < k, got ({j},{k})"
            )));
        }
        Ok(Self { amplitude, carrier_freq, phase, target_transition, is_two_photon })
    }
}

/// An angular frequency of the form `base + δ(t)` with `δ` sampled on a
/// uniform grid. The accumulated phase `∫₀ᵗ ω dt′` is exact (`base·t`) for
/// the base part and trapezoid-accurate for the sampled part, so it is
/// continuous in both value and slope. Outside the sampled window `δ` is
/// held at its boundary value.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTrajectory {
    base: f64,
    dt: f64,
    delta: Vec<f64>,
    /// Cumulative `∫δ` at the sample points (trapezoid rule), same length as
    /// `delta`.
    theta: Vec<f64>,
}

impl FrequencyTrajectory {
    /// Time-independent frequency; phase is `omega·t` to machine precision.
    pub fn constant(omega: f64) -> Self {
        Self { base: omega, dt: 1.0, delta: Vec::new(), theta: Vec::new() }
    }

    /// `ω(t) = base + delta[t/dt]` with linear interpolation between
    /// samples.
    pub fn from_samples(base: f64, dt: f64, delta: Vec<f64>) -> Result<Self> {
        if !base.is_finite() {
            return Err(Error::InvalidInput("trajectory base must be finite".into()));
        }
        if delta.is_empty() {
            return Ok(Self::constant(base));
        }
        if dt <= 0.0 || !dt.is_finite() {
            return Err(Error::InvalidInput(format!(
                "trajectory sample spacing must be positive, got {dt}"
            )));
        }
        if delta.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidInput("trajectory samples must be finite".into()));
        }
        let mut theta = Vec::with_capacity(delta.len());
        let mut acc = 0.0;
        theta.push(0.0);
        for w in delta.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * dt;
            theta.push(acc);
        }
        Ok(Self { base, dt, delta, theta })
    }

    /// Sample `base + f(t)` at `n ≥ 2` points spaced `dt` from `t = 0`.
    pub fn sampled(base: f64, dt: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let delta: Vec<f64> = (0..n.max(2)).map(|i| f(dt * i as f64)).collect();
        Self::from_samples(base, dt, delta)
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    /// Length of the sampled window (0 for constant trajectories).
    pub fn sampled_duration(&self) -> f64 {
        if self.delta.len() < 2 {
            0.0
        } else {
            self.dt * (self.delta.len() - 1) as f64
        }
    }

    /// Instantaneous angular frequency at time `t`.
    pub fn frequency(&self, t: f64) -> f64 {
        self.base + self.delta_at(t)
    }

    fn delta_at(&self, t: f64) -> f64 {
        match self.delta.len() {
            0 => 0.0,
            1 => self.delta[0],
            n => {
                if t <= 0.0 {
                    self.delta[0]
                } else {
                    let x = t / self.dt;
                    let i = (x.floor() as usize).min(n - 2);
                    if i >= n - 1 {
                        self.delta[n - 1]
                    } else {
                        let frac = (x - i as f64).clamp(0.0, 1.0);
                        self.delta[i] + frac * (self.delta[i + 1] - self.delta[i])
                    }
                }
            }
        }
    }

    /// Accumulated phase `∫₀ᵗ ω(t′) dt′`.
    pub fn phase(&self, t: f64) -> f64 {
        self.base * t + self.delta_phase(t)
    }

    fn delta_phase(&self, t: f64) -> f64 {
        match self.delta.len() {
            0 => 0.0,
            1 => self.delta[0] * t,
            n => {
                if t <= 0.0 {
                    return self.delta[0] * t;
                }
                let end = self.dt * (n - 1) as f64;
                if t >= end {
                    return self.theta[n - 1] + self.delta[n - 1] * (t - end);
                }
                let x = t / self.dt;
                let i = (x.floor() as usize).min(n - 2);
                let tau = t - self.dt * i as f64;
                let slope = (self.delta[i + 1] - self.delta[i]) / self.dt;
                self.theta[i] + self.delta[i] * tau + 0.5 * slope * tau * tau
            }
        }
    }
}

/// One tone bound to its envelope, carrier trajectory, and start time.
/// Envelope time is local to `start`; carrier and level trajectories use
/// global schedule time.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledTone {
    pub tone: ToneSpec,
    pub envelope: PulseEnvelope,
    pub carrier: FrequencyTrajectory,
    /// Global start time of the envelope, seconds.
    pub start: f64,
}

impl ScheduledTone {
    /// Tone starting at `t = 0` with the carrier held at the tone's nominal
    /// frequency.
    pub fn fixed_carrier(tone: ToneSpec, envelope: PulseEnvelope) -> Self {
        let carrier = FrequencyTrajectory::constant(tone.carrier_freq);
        Self { tone, envelope, carrier, start: 0.0 }
    }

    /// Instantaneous drive amplitude at global time `t` (coupling units,
    /// includes the tone amplitude).
    pub fn amplitude(&self, t: f64) -> f64 {
        self.tone.amplitude * self.envelope.eval(t - self.start)
    }

    /// Envelope shape alone at global time `t` (peak-normalized by the
    /// envelope's own `peak`).
    pub fn envelope_value(&self, t: f64) -> f64 {
        self.envelope.eval(t - self.start)
    }

    /// Carrier phase `∫ω_d dt` at global time `t` (excludes the static tone
    /// phase).
    pub fn carrier_phase(&self, t: f64) -> f64 {
        self.carrier.phase(t)
    }
}

/// A complete drive program: tones plus the per-level frequency trajectories
/// that define the (possibly shift-compensated) rotating frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSchedule {
    pub tones: Vec<ScheduledTone>,
    /// One trajectory per device level: `ω_j + δ_j(t)`; `δ_j = 0` when no
    /// compensation is applied.
    pub level_trajectories: Vec<FrequencyTrajectory>,
    pub total_duration: f64,
}

impl PulseSchedule {
    pub fn new(
        tones: Vec<ScheduledTone>,
        level_trajectories: Vec<FrequencyTrajectory>,
        total_duration: f64,
    ) -> Result<Self> {
        if total_duration < 0.0 || !total_duration.is_finite() {
            return Err(Error::InvalidInput(format!(
                "schedule duration must be finite and ≥ 0, got {total_duration}"
            )));
        }
        for (i, st) in tones.iter().enumerate() {
            if st.start < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "tone {i} starts before the schedule at {}",
                    st.start
                )));
            }
            let end = st.start + st.envelope.total();
            if end > total_duration * (1.0 + 1e-12) + 1e-15 {
                return Err(Error::InvalidInput(format!(
                    "tone {i} ends at {end} beyond the schedule duration {total_duration}"
                )));
            }
        }
        Ok(Self { tones, level_trajectories, total_duration })
    }

    /// Schedule with no drive and bare level frequencies (free evolution for
    /// `duration`).
    pub fn idle(level_freqs: &[f64], duration: f64) -> Result<Self> {
        let levels = level_freqs
            .iter()
            .map(|&w| FrequencyTrajectory::constant(w))
            .collect();
        Self::new(Vec::new(), levels, duration)
    }
}
