//! Gate synthesis and pulse-level simulation for superconducting qutrits.
//!
//! This crate models a three-level (qutrit) superconducting circuit driven
//! through a single gate line. It provides:
//!
//! - dense complex-matrix foundations: unitaries, density matrices, fidelity
//!   metrics, and physicality validation ([`operator`]);
//! - numerical search for two-step gate factorizations `U = U_d · U_o` into a
//!   diagonal phase generator and a strictly off-diagonal coupling generator
//!   ([`decompose`]);
//! - dressed-state spectra, ac-Stark / Bloch-Siegert shift sums, two-photon
//!   Rabi rates, and shift-compensated carrier trajectories ([`drive`]);
//! - lab-frame Schrödinger and Lindblad integration of multi-tone pulse
//!   schedules, free-evolution decoherence maps, and end-to-end gate
//!   simulation ([`dynamics`]);
//! - averaged-homodyne readout modeling with maximum-likelihood state and
//!   process tomography ([`tomography`]).
//!
//! All frequencies inside the crate are angular (rad/s), all times are
//! seconds, and all decoherence rates are plain `1/s`. Conversions from
//! GHz/MHz/kHz/ns happen at the interface boundary (see the CLI crate).

pub mod error;
pub mod linalg;
pub mod operator;
pub mod device;
pub mod optim;
pub mod decompose;
pub mod pulse;
pub mod drive;
pub mod dynamics;
pub mod tomography;

pub use error::{Error, Result};
pub use operator::{
    DensityMatrix, DensityDiagnostics, DensityViolation, UnitaryOperator,
    expm_skew, state_fidelity, state_fidelity_root, unitary_distance,
    validate_density, walsh_hadamard,
};
pub use device::{CoherenceShape, DecoherenceRates, DeviceSpec, ReadoutModel};
pub use decompose::{
    DecompositionSearchConfig, GateDecomposition, OffDiagonalGenerator, TransitionTarget,
    extract_offdiagonal_generator, pulse_area_targets, search_decompositions,
    select_decomposition,
};
pub use pulse::{FrequencyTrajectory, PulseEnvelope, PulseSchedule, ScheduledTone, ToneSpec};
pub use drive::{
    CompensationConfig, DressedSpectrum, GateTiming, ShiftModel, ShiftReport,
    build_dressed_hamiltonian, compensated_trajectories, dressed_spectrum, numeric_shifts,
    perturbative_shifts, synthesize_gate_schedule, two_photon_rabi,
};
pub use dynamics::{
    DensityTrajectory, Frame, InitialState, SimulationConfig, StateTrajectory,
    drive_hamiltonian, envelope_eval, evolve_lindblad, evolve_schrodinger,
    free_decoherence_evolution, rotating_frame_state, rotating_frame_unitary,
    simulate_gate_sequence, simulate_pulse_sequence,
};
pub use tomography::{
    AnalyzerSet, MleObjective, MleOptions, MleReport, OperatorBasis, ProcessMatrix, Rotation,
    RotationAxis, TomographyPulse, Transition, analyzer_set, build_operator_basis, ideal_chi,
    mle_state, phase_shift_analyzers, preparation_set, process_fidelity, process_mle, rotation,
    simulate_homodyne, solve_voltage_levels, thermal_populations,
};
