//! `trikit simulate` — synthesize the shift-compensated multi-tone schedule
//! for a target gate, integrate the master equation for each tomography
//! preparation, and report fidelities against the ideal gate action in the
//! rotating frame. Optional outputs: per-sample trajectories, homodyne
//! records for `tomo`, and a fidelity-vs-two-photon-phase sweep.

use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use trikit_core::decompose::{
    search_decompositions, select_decomposition, DecompositionSearchConfig, GateDecomposition,
};
use trikit_core::drive::{
    default_blocks, synthesize_gate_schedule, CompensationConfig, GateTiming, ShiftModel,
};
use trikit_core::dynamics::{
    evolve_lindblad, rotating_frame_state, rotating_frame_unitary, InitialState, SimulationConfig,
};
use trikit_core::linalg::TAU;
use trikit_core::operator::{state_fidelity, walsh_hadamard, DensityMatrix, UnitaryOperator};
use trikit_core::pulse::PulseSchedule;
use trikit_core::tomography::{analyzer_set, phase_shift_analyzers, preparation_set, simulate_homodyne};

use crate::commands::Context;
use crate::matrixio::{self, fmt_matrix, parse_sweep};
use crate::runerr::{CliError, CliResult};

pub const FIDELITY_CSV_HEADER: &str = "prep_index,fidelity";
pub const SWEEP_CSV_HEADER: &str = "phase_offset_rad,average_fidelity,min_fidelity";
pub const TRAJECTORY_CSV_HEADER: &str =
    "time_s,P0,P1,P2,re_rho01,im_rho01,re_rho02,im_rho02,re_rho12,im_rho12";
pub const RECORDS_CSV_HEADER: &str = "prep_index,analyzer_index,voltage_volts";

#[derive(clap::Args)]
pub struct Args {
    /// Gate to synthesize: `wh` or a matrix file of re/im pairs.
    #[arg(long, default_value = "wh")]
    pub gate: String,

    /// Phase-grid points per axis for the decomposition search.
    #[arg(long, default_value_t = 100)]
    pub grid: usize,

    /// Envelope rise time, ns.
    #[arg(long, default_value_t = 4.0)]
    pub rise_ns: f64,

    /// Envelope flat-top time, ns.
    #[arg(long, default_value_t = 27.0)]
    pub flat_ns: f64,

    /// Envelope fall time, ns.
    #[arg(long, default_value_t = 4.0)]
    pub fall_ns: f64,

    /// Integrate without decoherence.
    #[arg(long)]
    pub no_decoherence: bool,

    /// Compensate carriers with dressed-state shifts instead of the
    /// second-order sums.
    #[arg(long)]
    pub dressed: bool,

    /// Start from the pure ground state instead of the profile thermal state.
    #[arg(long)]
    pub pure_initial: bool,

    /// Preparations to run: `all` or comma-separated indices 0..8.
    #[arg(long, default_value = "all")]
    pub preparations: String,

    /// Write the per-preparation fidelity table (sweep mode: the
    /// fidelity-vs-phase curve) as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Write simulated homodyne records (prep x analyzer) consumable by
    /// `trikit tomo --records`.
    #[arg(long)]
    pub records_out: Option<PathBuf>,

    /// Add readout voltage noise to the records.
    #[arg(long)]
    pub noise: bool,

    /// Write per-sample trajectory CSVs (suffixed `_prepN` when several
    /// preparations run).
    #[arg(long)]
    pub trajectory: Option<PathBuf>,

    /// Trajectory samples across the schedule.
    #[arg(long, default_value_t = 701)]
    pub samples: usize,

    /// Sweep the 0-2 drive phase offset from its nominal value over
    /// `lo:hi:n` (rad, effective two-photon phase; the half-frequency tone
    /// shifts by half of this).
    #[arg(long, allow_hyphen_values = true)]
    pub sweep_phase02: Option<String>,
}

pub fn resolve_gate(spec: &str) -> CliResult<UnitaryOperator> {
    if spec == "wh" {
        Ok(walsh_hadamard())
    } else {
        matrixio::read_unitary(Path::new(spec))
    }
}

fn parse_preparations(spec: &str, n_preps: usize) -> CliResult<Vec<usize>> {
    if spec == "all" {
        return Ok((0..n_preps).collect());
    }
    let mut out = Vec::new();
    for tok in spec.split(',') {
        let i: usize = tok
            .trim()
            .parse()
            .map_err(|_| CliError::input(format!("--preparations: bad index `{tok}`")))?;
        if i >= n_preps {
            return Err(CliError::input(format!(
                "--preparations: index {i} out of range (0..{})",
                n_preps - 1
            )));
        }
        out.push(i);
    }
    if out.is_empty() {
        return Err(CliError::input("--preparations: empty list"));
    }
    Ok(out)
}

/// The trivial factorization used for a zero-duration (no-op) schedule.
fn trivial_decomposition() -> GateDecomposition {
    let z = C64::new(0.0, 0.0);
    GateDecomposition {
        m01: z,
        m02: z,
        m12: z,
        phi0: 0.0,
        phi1: 0.0,
        phi2: 0.0,
        residual: 0.0,
        branch_flagged: false,
    }
}

pub struct GatePlan {
    pub decomposition: GateDecomposition,
    pub schedule: PulseSchedule,
    /// Rotating-frame reference the physical pulse should realize:
    /// `U_d† · U_target` (the diagonal factor is applied virtually by
    /// phase-shifting later pulses).
    pub reference: UnitaryOperator,
}

pub fn plan_gate(
    ctx: &Context,
    target: &UnitaryOperator,
    grid: usize,
    timing: &GateTiming,
    dressed: bool,
) -> CliResult<GatePlan> {
    let device = &ctx.profile.device;
    let (decomposition, schedule) = if timing.total() == 0.0 {
        (trivial_decomposition(), PulseSchedule::idle(device.level_freqs(), 0.0)?)
    } else {
        let config = DecompositionSearchConfig { grid_points: grid, ..Default::default() };
        let found = search_decompositions(target, &config)?;
        let d = select_decomposition(&found)?.clone();
        let comp = CompensationConfig {
            model: if dressed {
                ShiftModel::Numeric { blocks: default_blocks(device.n_levels()) }
            } else {
                ShiftModel::Perturbative
            },
            ..Default::default()
        };
        let schedule = synthesize_gate_schedule(device, &d, timing, &comp)?;
        (d, schedule)
    };
    let reference = decomposition.diagonal_unitary().dagger().compose(target)?;
    Ok(GatePlan { decomposition, schedule, reference })
}

fn sim_config(ctx: &Context, args: &Args, n_samples: usize) -> SimulationConfig {
    let initial = if args.pure_initial {
        let mut psi = Array1::<C64>::zeros(ctx.profile.device.n_levels());
        psi[0] = C64::new(1.0, 0.0);
        InitialState::Pure(psi)
    } else {
        InitialState::Thermal { p0: ctx.profile.thermal_p0 }
    };
    SimulationConfig {
        include_decoherence: !args.no_decoherence,
        initial_state: initial,
        n_samples,
        ..Default::default()
    }
}

pub struct PrepRun {
    pub fidelity: f64,
    pub rho_final: DensityMatrix,
    pub trajectory: Option<(Vec<f64>, Vec<Array2<C64>>)>,
}

/// Evolve one preparation through the schedule and score it against the
/// rotating-frame reference.
pub fn run_prep(
    device: &trikit_core::device::DeviceSpec,
    plan: &GatePlan,
    prep: &UnitaryOperator,
    config: &SimulationConfig,
    want_trajectory: bool,
) -> CliResult<PrepRun> {
    let rho_in = prep.apply_density(&config.initial_state.realize(device.n_levels())?)?;
    let ideal = plan.reference.apply_density(&rho_in)?;
    let (rho_final, trajectory) = if plan.schedule.total_duration == 0.0 {
        (rho_in, None)
    } else {
        let traj = evolve_lindblad(device, &plan.schedule, &rho_in, config)?;
        let rho_rot = rotating_frame_state(
            &traj.final_density(),
            &plan.schedule,
            plan.schedule.total_duration,
        );
        let samples = want_trajectory.then(|| (traj.times, traj.states));
        (rho_rot, samples)
    };
    let fidelity = state_fidelity(&rho_final, &ideal)?;
    Ok(PrepRun { fidelity, rho_final, trajectory })
}

pub fn run(ctx: &Context, args: Args) -> CliResult<()> {
    let device = &ctx.profile.device;
    let target = resolve_gate(&args.gate)?;
    let all_preps = preparation_set();
    let prep_indices = parse_preparations(&args.preparations, all_preps.len())?;
    let timing = GateTiming {
        rise: args.rise_ns * 1e-9,
        flat: args.flat_ns * 1e-9,
        fall: args.fall_ns * 1e-9,
    };
    let plan = plan_gate(ctx, &target, args.grid, &timing, args.dressed)?;

    if let Some(sweep) = &args.sweep_phase02 {
        return run_phase_sweep(ctx, &args, &plan, &all_preps, &prep_indices, sweep);
    }

    let want_traj = args.trajectory.is_some();
    let n_samples = if want_traj { args.samples.max(2) } else { 0 };
    let config = sim_config(ctx, &args, n_samples);

    let runs: Vec<(usize, PrepRun)> = prep_indices
        .par_iter()
        .map(|&i| -> CliResult<(usize, PrepRun)> {
            let prep = all_preps[i].unitary();
            Ok((i, run_prep(device, &plan, &prep, &config, want_traj)?))
        })
        .collect::<CliResult<_>>()?;

    print_header(&args, &plan);
    println!("\n  {:>4} {:>10}", "prep", "fidelity");
    for (i, r) in &runs {
        println!("  {:>4} {:>10.6}", i, r.fidelity);
    }
    let fids: Vec<f64> = runs.iter().map(|(_, r)| r.fidelity).collect();
    let avg = fids.iter().sum::<f64>() / fids.len() as f64;
    let var = fids.iter().map(|f| (f - avg).powi(2)).sum::<f64>() / fids.len() as f64;
    let min = fids.iter().cloned().fold(f64::INFINITY, f64::min);
    println!("\naverage fidelity: {:.6} +/- {:.6} (min {:.6})", avg, var.sqrt(), min);

    println!("\nfinal rotating-frame density matrices:");
    for (i, r) in &runs {
        println!("  preparation {i}:");
        print!("{}", fmt_matrix(r.rho_final.entries(), "    "));
    }

    if let Some(path) = &args.out {
        let mut body = String::from(FIDELITY_CSV_HEADER);
        body.push('\n');
        for (i, r) in &runs {
            body.push_str(&format!("{},{:.9}\n", i, r.fidelity));
        }
        ctx.manifest().write_output(path, &body)?;
        println!("wrote {}", path.display());
    }

    if let Some(path) = &args.records_out {
        write_records(ctx, &args, &plan, &runs, path)?;
    }

    if let Some(path) = &args.trajectory {
        write_trajectories(ctx, &plan, &runs, path)?;
    }
    Ok(())
}

fn print_header(args: &Args, plan: &GatePlan) {
    let d = &plan.decomposition;
    println!(
        "gate: {} ({:.1} ns schedule, {} compensation, decoherence {})",
        args.gate,
        plan.schedule.total_duration * 1e9,
        if args.dressed { "dressed-state" } else { "perturbative" },
        if args.no_decoherence { "off" } else { "on" }
    );
    println!(
        "factorization: |m01| {:.6}, |m12| {:.6}, |m02| {:.6}, phases ({:.6}, {:.6}, {:.6})",
        d.m01.norm(),
        d.m12.norm(),
        d.m02.norm(),
        d.phi0,
        d.phi1,
        d.phi2
    );
    for st in &plan.schedule.tones {
        let (j, k) = st.tone.target_transition;
        println!(
            "tone {j}-{k}{}: amplitude {:.6}, carrier 2pi x {:.4} MHz, phase {:+.6} rad",
            if st.tone.is_two_photon { " (two-photon)" } else { "" },
            st.tone.amplitude,
            st.tone.carrier_freq / TAU / 1e6,
            st.tone.phase
        );
    }
}

/// Homodyne records against the phase-shifted analyzers (the physical pulses
/// that absorb the virtual diagonal factor). `tomo` reconstructs them against
/// the *nominal* analyzer set, which lands the full target-gate process.
fn write_records(
    ctx: &Context,
    args: &Args,
    plan: &GatePlan,
    runs: &[(usize, PrepRun)],
    path: &Path,
) -> CliResult<()> {
    let readout = &ctx.profile.device.readout;
    let analyzers = phase_shift_analyzers(&analyzer_set(), &plan.decomposition);
    let mut body = String::from(RECORDS_CSV_HEADER);
    body.push('\n');
    for (i, r) in runs {
        for (j, analyzer) in analyzers.unitaries().iter().enumerate() {
            let seed = ctx
                .seed
                .wrapping_add(((i * analyzers.len() + j) as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let v = simulate_homodyne(&r.rho_final, analyzer, readout, args.noise, seed)?;
            body.push_str(&format!("{i},{j},{v:.9}\n"));
        }
    }
    ctx.manifest().write_output(path, &body)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn trajectory_path(base: &Path, prep: usize, multiple: bool) -> PathBuf {
    if !multiple {
        return base.to_path_buf();
    }
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("trajectory");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    base.with_file_name(format!("{stem}_prep{prep}.{ext}"))
}

fn write_trajectories(
    ctx: &Context,
    plan: &GatePlan,
    runs: &[(usize, PrepRun)],
    base: &Path,
) -> CliResult<()> {
    let multiple = runs.len() > 1;
    for (i, r) in runs {
        let Some((times, states)) = &r.trajectory else {
            continue; // zero-duration schedules have nothing to sample
        };
        let mut body = String::from(TRAJECTORY_CSV_HEADER);
        body.push('\n');
        for (t, raw) in times.iter().zip(states.iter()) {
            // populations are frame-invariant; coherences are reported in the
            // schedule's rotating frame
            let u = rotating_frame_unitary(&plan.schedule, *t);
            let ue = u.entries();
            let mut rot = ue.dot(raw);
            let udag = ue.t().mapv(|z| z.conj());
            rot = rot.dot(&udag);
            body.push_str(&format!(
                "{:.6e},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}\n",
                t,
                raw[[0, 0]].re,
                raw[[1, 1]].re,
                raw[[2, 2]].re,
                rot[[0, 1]].re,
                rot[[0, 1]].im,
                rot[[0, 2]].re,
                rot[[0, 2]].im,
                rot[[1, 2]].re,
                rot[[1, 2]].im
            ));
        }
        let path = trajectory_path(base, *i, multiple);
        ctx.manifest().write_output(&path, &body)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Shift the two-photon tone's phase by half the effective offset (its
/// coupling enters the gate with twice the drive phase).
fn with_phase_offset(schedule: &PulseSchedule, offset: f64) -> CliResult<PulseSchedule> {
    let mut shifted = schedule.clone();
    let tone = shifted
        .tones
        .iter_mut()
        .find(|st| st.tone.is_two_photon)
        .ok_or_else(|| CliError::model("the schedule has no two-photon tone to phase-sweep"))?;
    tone.tone.phase += 0.5 * offset;
    Ok(shifted)
}

fn run_phase_sweep(
    ctx: &Context,
    args: &Args,
    plan: &GatePlan,
    all_preps: &[trikit_core::tomography::TomographyPulse],
    prep_indices: &[usize],
    sweep: &str,
) -> CliResult<()> {
    let device = &ctx.profile.device;
    let offsets = parse_sweep(sweep, "--sweep-phase02")?;
    let config = sim_config(ctx, args, 0);

    let rows: Vec<(f64, f64, f64)> = offsets
        .par_iter()
        .map(|&offset| -> CliResult<(f64, f64, f64)> {
            let plan_off = GatePlan {
                decomposition: plan.decomposition.clone(),
                schedule: with_phase_offset(&plan.schedule, offset)?,
                reference: plan.reference.clone(),
            };
            let mut sum = 0.0;
            let mut min = f64::INFINITY;
            for &i in prep_indices {
                let prep = all_preps[i].unitary();
                let r = run_prep(device, &plan_off, &prep, &config, false)?;
                sum += r.fidelity;
                min = min.min(r.fidelity);
            }
            Ok((offset, sum / prep_indices.len() as f64, min))
        })
        .collect::<CliResult<_>>()?;

    print_header(args, plan);
    println!("\n  {:>16} {:>18} {:>14}", "phase offset", "average fidelity", "min fidelity");
    for &(offset, avg, min) in &rows {
        println!("  {offset:>16.6} {avg:>18.6} {min:>14.6}");
    }
    let best = rows
        .iter()
        .cloned()
        .fold((f64::NAN, f64::NEG_INFINITY, 0.0), |b, r| if r.1 > b.1 { r } else { b });
    println!("\npeak average fidelity {:.6} at offset {:+.6} rad", best.1, best.0);

    if let Some(path) = &args.out {
        let mut body = String::from(SWEEP_CSV_HEADER);
        body.push('\n');
        for &(offset, avg, min) in &rows {
            body.push_str(&format!("{offset:.9},{avg:.9},{min:.9}\n"));
        }
        ctx.manifest().write_output(path, &body)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
