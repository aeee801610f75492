//! Release acceptance gate: nine end-to-end checks spanning factorization
//! search, drive modeling, pulse simulation, and tomography. Each criterion
//! prints one PASS/FAIL line carrying the measured quantities and its pinned
//! tolerance; the process exits nonzero when any criterion fails.
//!
//! Criteria phrased as CLI behaviors drive the compiled binary; the rest
//! call the library directly so intermediate states stay inspectable. Every
//! density matrix produced in-process is physicality-checked (criterion 8).

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use trikit_core::drive::default_blocks;
use trikit_core::linalg::wrap_angle;
use trikit_core::operator::{check_physicality, random_density, random_unitary};
use trikit_core::{
    analyzer_set, build_operator_basis, compensated_trajectories, evolve_lindblad,
    evolve_schrodinger, ideal_chi, mle_state, numeric_shifts, perturbative_shifts,
    preparation_set, process_fidelity, process_mle, rotating_frame_state,
    rotating_frame_unitary, search_decompositions, select_decomposition, simulate_homodyne,
    solve_voltage_levels, state_fidelity, synthesize_gate_schedule, thermal_populations,
    two_photon_rabi, unitary_distance, walsh_hadamard, CompensationConfig,
    DecompositionSearchConfig, DeviceSpec, GateDecomposition, GateTiming, InitialState,
    MleOptions, PulseEnvelope, PulseSchedule, ScheduledTone, ShiftModel, SimulationConfig,
    ToneSpec, UnitaryOperator,
};

const BIN: &str = env!("CARGO_BIN_EXE_trikit");

fn main() {
    let device = DeviceSpec::flux_qutrit_3level();
    let workdir = tempfile::tempdir().expect("create scratch directory");
    let mut failures = 0usize;
    let mut ledger = PhysLedger::new();

    // 1: the factorization table, through the binary
    let t = Instant::now();
    let table = criterion_table(workdir.path());
    let (outcome, rows) = match table {
        Ok((detail, rows)) => (Ok(detail), Some(rows)),
        Err(e) => (Err(e), None),
    };
    report(1, outcome, t.elapsed().as_secs_f64(), Some(60.0), &mut failures);

    // 2: every reported factorization rebuilds the target
    let t = Instant::now();
    let outcome = match &rows {
        Some(rows) => criterion_reconstruction(rows),
        None => Err("skipped: no factorizations available from criterion 1".into()),
    };
    report(2, outcome, t.elapsed().as_secs_f64(), None, &mut failures);

    // 3: two-photon amplitude scaling and phase imprint
    let t = Instant::now();
    let outcome = criterion_two_photon(&device);
    report(3, outcome, t.elapsed().as_secs_f64(), Some(300.0), &mut failures);

    // 4: perturbative vs dressed shift models
    let t = Instant::now();
    let outcome = criterion_shift_models(&device);
    report(4, outcome, t.elapsed().as_secs_f64(), None, &mut failures);

    // 5: synthesized-gate fidelity, through the binary
    let t = Instant::now();
    let outcome = criterion_gate_fidelity(workdir.path());
    report(5, outcome, t.elapsed().as_secs_f64(), Some(600.0), &mut failures);

    // 6: fidelity sensitivity to the two-photon tone phase, through the binary
    let t = Instant::now();
    let outcome = criterion_phase_sensitivity(workdir.path());
    report(6, outcome, t.elapsed().as_secs_f64(), None, &mut failures);

    // 7: tomography reconstruction floors and the end-to-end pipeline
    let t = Instant::now();
    let outcome = criterion_tomography(&device, &mut ledger);
    report(7, outcome, t.elapsed().as_secs_f64(), Some(900.0), &mut failures);

    // 8: physicality of every density matrix the pipelines produce
    let t = Instant::now();
    let outcome = criterion_physicality(&device, &mut ledger);
    report(8, outcome, t.elapsed().as_secs_f64(), None, &mut failures);

    // 9: readout calibration round trips
    let t = Instant::now();
    let outcome = criterion_calibration();
    report(9, outcome, t.elapsed().as_secs_f64(), None, &mut failures);

    if failures == 0 {
        println!("acceptance: 9/9 criteria passed");
        std::process::exit(0);
    }
    println!("acceptance: {} of 9 criteria FAILED", failures);
    std::process::exit(1);
}

fn report(
    n: usize,
    outcome: Result<String, String>,
    elapsed: f64,
    budget: Option<f64>,
    failures: &mut usize,
) {
    let time = match budget {
        Some(b) => format!("{elapsed:.1} s, budget {b:.0} s"),
        None => format!("{elapsed:.1} s"),
    };
    let over_budget = budget.is_some_and(|b| elapsed > b);
    match (outcome, over_budget) {
        (Ok(detail), false) => println!("criterion {n} PASS [{time}] {detail}"),
        (Ok(detail), true) => {
            println!("criterion {n} FAIL [{time}] exceeded the time budget; {detail}");
            *failures += 1;
        }
        (Err(detail), _) => {
            println!("criterion {n} FAIL [{time}] {detail}");
            *failures += 1;
        }
    }
}

fn estr(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn run_bin(args: &[&str]) -> Result<String, String> {
    let out = Command::new(BIN)
        .args(args)
        .output()
        .map_err(|e| format!("failed to launch {BIN}: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "`trikit {}` exited with {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

/// Data rows of a manifest-prefixed CSV, header validated and stripped.
fn csv_rows(path: &Path, header: &str) -> Result<Vec<Vec<f64>>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    match lines.next() {
        Some(h) if h == header => {}
        other => return Err(format!("unexpected CSV header {other:?} in {}", path.display())),
    }
    let mut rows = Vec::new();
    for line in lines {
        let row: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>().map_err(|e| format!("bad CSV field {f:?}: {e}")))
            .collect::<Result<_, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

// ---------------------------------------------------------------------------
// criteria 1 and 2: factorization table and reconstruction
// ---------------------------------------------------------------------------

struct RefRow {
    phi: [f64; 3],
    m01: C64,
    m12: C64,
    m02: C64,
}

/// The five reference factorizations, two-photon weight ascending; the first
/// is the minimal-|m02| row the selector must pick. The conjugate-related
/// pair appears as two distinct rows here and in the search output, so
/// element-wise matching covers the conjugation freedom.
fn reference_rows() -> [RefRow; 5] {
    [
        RefRow {
            phi: [6.108652381980, 4.014257279587, 4.014257279587],
            m01: C64::new(0.349065850399, 0.604599788078),
            m12: C64::new(-0.698131700798, 0.0),
            m02: C64::new(0.349065850399, 0.604599788078),
        },
        RefRow {
            phi: [0.843416184635, 0.363690071080, 0.363690071080],
            m01: C64::new(-0.967243198937, -0.236560181291),
            m12: C64::new(1.934486397875, 0.0),
            m02: C64::new(-0.967243198937, -0.236560181291),
        },
        RefRow {
            phi: [2.458085173473, 0.363690071080, 5.032206389422],
            m01: C64::new(-0.967243198937, -1.675314363835),
            m12: C64::new(0.688488725991, 0.719377091272),
            m02: C64::new(0.278754472947, -0.955937272563),
        },
        RefRow {
            phi: [1.919862177194, 6.108652381980, 6.108652381980],
            m01: C64::new(-0.698131700798, -1.209199576156),
            m12: C64::new(1.396263401595, 0.0),
            m02: C64::new(-0.698131700798, -1.209199576156),
        },
        RefRow {
            phi: [2.458085173473, 5.032206389422, 0.363690071080],
            m01: C64::new(0.278754472947, -0.955937272563),
            m12: C64::new(0.688488725991, -0.719377091272),
            m02: C64::new(-0.967243198937, -1.675314363835),
        },
    ]
}

struct FoundRow {
    phi: [f64; 3],
    m01: C64,
    m12: C64,
    m02: C64,
    selected: bool,
    residual: f64,
}

const DECOMPOSE_HEADER: &str = "index,selected,phi0_rad,phi1_rad,phi2_rad,\
re_m01,im_m01,re_m12,im_m12,re_m02,im_m02,residual";

fn rows_match(r: &RefRow, f: &FoundRow, tol: f64) -> bool {
    (0..3).all(|i| wrap_angle(r.phi[i] - f.phi[i]).abs() <= tol)
        && (r.m01 - f.m01).norm() <= tol
        && (r.m12 - f.m12).norm() <= tol
        && (r.m02 - f.m02).norm() <= tol
}

fn criterion_table(dir: &Path) -> Result<(String, Vec<FoundRow>), String> {
    let csv = dir.join("decompose.csv");
    run_bin(&["decompose", "--target", "wh", "--out", csv.to_str().unwrap()])?;
    let rows: Vec<FoundRow> = csv_rows(&csv, DECOMPOSE_HEADER)?
        .into_iter()
        .map(|r| FoundRow {
            phi: [r[2], r[3], r[4]],
            m01: C64::new(r[5], r[6]),
            m12: C64::new(r[7], r[8]),
            m02: C64::new(r[9], r[10]),
            selected: r[1] != 0.0,
            residual: r[11],
        })
        .collect();
    if rows.len() != 5 {
        return Err(format!("expected 5 factorizations, the search reported {}", rows.len()));
    }

    let tol = 1e-3;
    let refs = reference_rows();
    let mut used = [false; 5];
    for (ri, r) in refs.iter().enumerate() {
        let hit = rows
            .iter()
            .enumerate()
            .find(|(fi, f)| !used[*fi] && rows_match(r, f, tol))
            .map(|(fi, _)| fi);
        match hit {
            Some(fi) => used[fi] = true,
            None => {
                return Err(format!(
                    "reference factorization {} has no match within {tol:.0e} per element",
                    ri + 1
                ))
            }
        }
    }

    let selected: Vec<&FoundRow> = rows.iter().filter(|f| f.selected).collect();
    if selected.len() != 1 {
        return Err(format!("{} rows are marked selected, expected exactly 1", selected.len()));
    }
    if !rows_match(&refs[0], selected[0], tol) {
        return Err(format!(
            "selected row has |m02| = {:.4}, not the minimal-|m02| reference row (|m02| = {:.4})",
            selected[0].m02.norm(),
            refs[0].m02.norm()
        ));
    }
    let detail = format!(
        "all 5 reference factorizations matched within {tol:.0e} per element; \
         minimal-|m02| row selected"
    );
    Ok((detail, rows))
}

fn criterion_reconstruction(rows: &[FoundRow]) -> Result<String, String> {
    let target = walsh_hadamard();
    let mut worst = 0.0f64;
    for f in rows {
        let d = GateDecomposition {
            m01: f.m01,
            m02: f.m02,
            m12: f.m12,
            phi0: f.phi[0],
            phi1: f.phi[1],
            phi2: f.phi[2],
            residual: f.residual,
            branch_flagged: false,
        };
        let u = d.reconstruct().map_err(estr)?;
        worst = worst.max(unitary_distance(&u, &target).map_err(estr)?);
    }
    if worst > 1e-6 {
        return Err(format!("reconstruction distance {worst:.2e} exceeds 1e-6"));
    }
    Ok(format!(
        "max distance of reconstructed product from the target {worst:.2e} \
         over {} factorizations (tolerance 1e-6)",
        rows.len()
    ))
}

// ---------------------------------------------------------------------------
// criterion 3: two-photon amplitude scaling and phase imprint
// ---------------------------------------------------------------------------

struct TwoPhotonRun {
    times: Vec<f64>,
    p2: Vec<f64>,
    rho02: Vec<C64>,
}

/// Drive the 0-2 two-photon transition on its shift-corrected resonance with
/// a constant-amplitude tone and record `P2(t)` and the rotating-frame 0-2
/// coherence from a lab-frame Schrödinger integration.
fn two_photon_run(
    device: &DeviceSpec,
    amplitude: f64,
    phase: f64,
    duration: f64,
    n_samples: usize,
) -> Result<TwoPhotonRun, String> {
    let w02 = device.transition_freq(0, 2);
    let tone = ToneSpec::new(amplitude, 0.5 * w02, phase, (0, 2), true).map_err(estr)?;
    let envelope = PulseEnvelope::new(0.0, duration, 0.0, 1.0).map_err(estr)?;
    let mut schedule = PulseSchedule::idle(device.level_freqs(), duration).map_err(estr)?;
    schedule.tones.push(ScheduledTone::fixed_carrier(tone, envelope));
    // the envelope is flat, so a coarse compensation grid loses nothing
    let comp =
        CompensationConfig { model: ShiftModel::Perturbative, sample_dt: duration / 400.0 };
    let schedule = compensated_trajectories(device, &schedule, &comp).map_err(estr)?;

    let config = SimulationConfig { n_samples, ..Default::default() };
    let mut psi0 = Array1::<C64>::zeros(3);
    psi0[0] = C64::new(1.0, 0.0);
    let traj = evolve_schrodinger(device, &schedule, &psi0, &config).map_err(estr)?;

    let mut p2 = Vec::with_capacity(traj.times.len());
    let mut rho02 = Vec::with_capacity(traj.times.len());
    for (t, psi) in traj.times.iter().zip(traj.states.iter()) {
        let rot = rotating_frame_unitary(&schedule, *t).apply_state(psi).map_err(estr)?;
        p2.push(rot[2].norm_sqr());
        rho02.push(rot[0] * rot[2].conj());
    }
    Ok(TwoPhotonRun { times: traj.times, p2, rho02 })
}

/// Time of the first `P2` maximum, parabolically refined between samples.
fn peak_time(times: &[f64], p2: &[f64]) -> Result<f64, String> {
    let mut imax = 0;
    let mut vmax = f64::NEG_INFINITY;
    for (i, &v) in p2.iter().enumerate() {
        if v > vmax {
            vmax = v;
            imax = i;
        }
    }
    if imax == 0 || imax + 1 >= p2.len() {
        return Err(format!(
            "population peak landed on the window edge (sample {imax} of {})",
            p2.len()
        ));
    }
    let (a, b, c) = (p2[imax - 1], p2[imax], p2[imax + 1]);
    let denom = a - 2.0 * b + c;
    let frac = if denom.abs() > 0.0 { (0.5 * (a - c) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    Ok(times[imax] + frac * (times[1] - times[0]))
}

fn criterion_two_photon(device: &DeviceSpec) -> Result<String, String> {
    let w02 = device.transition_freq(0, 2);
    let amplitudes = [1.2, 1.7, 2.3, 3.0];
    let n_samples = 1601;
    let mut ln_amp = Vec::new();
    let mut ln_freq = Vec::new();
    let mut strongest: Option<(TwoPhotonRun, f64)> = None;
    for &a in &amplitudes {
        let tone = ToneSpec::new(a, 0.5 * w02, 0.0, (0, 2), true).map_err(estr)?;
        let omega_est = two_photon_rabi(device, &tone).map_err(estr)?;
        let duration = 1.3 * PI / omega_est;
        let run = two_photon_run(device, a, 0.0, duration, n_samples)?;
        let t_pi = peak_time(&run.times, &run.p2)?;
        ln_amp.push(a.ln());
        ln_freq.push((PI / t_pi).ln());
        strongest = Some((run, duration));
    }

    let ma = mean(&ln_amp);
    let mf = mean(&ln_freq);
    let cov: f64 =
        ln_amp.iter().zip(ln_freq.iter()).map(|(a, f)| (a - ma) * (f - mf)).sum();
    let var: f64 = ln_amp.iter().map(|a| (a - ma) * (a - ma)).sum();
    let slope = cov / var;
    if (slope - 2.0).abs() > 0.05 {
        return Err(format!(
            "oscillation frequency vs amplitude has log-log slope {slope:.3}, outside 2.00 ± 0.05"
        ));
    }

    // a tone-phase shift Δφ must move the 0-2 coherence argument by 2Δφ
    let (base, duration) = strongest.expect("at least one amplitude ran");
    let t_pi = peak_time(&base.times, &base.p2)?;
    let dphi = 25.0f64.to_radians();
    let shifted =
        two_photon_run(device, *amplitudes.last().unwrap(), dphi, duration, n_samples)?;
    let mid = base
        .times
        .iter()
        .enumerate()
        .min_by(|(_, x), (_, y)| {
            (**x - 0.5 * t_pi).abs().total_cmp(&(**y - 0.5 * t_pi).abs())
        })
        .map(|(i, _)| i)
        .expect("trajectory is non-empty");
    let moved = wrap_angle(shifted.rho02[mid].arg() - base.rho02[mid].arg()).abs();
    let err_deg = (moved - 2.0 * dphi).abs().to_degrees();
    if err_deg > 2.0 {
        return Err(format!(
            "coherence argument moved {:.2}° for a 25° tone-phase shift, expected 50° ± 2°",
            moved.to_degrees()
        ));
    }
    Ok(format!(
        "oscillation frequency scales with amplitude at log-log slope {slope:.3} (2.00 ± 0.05); \
         a 25° tone-phase shift moved the 0-2 coherence argument {:.2}° (50° ± 2°)",
        moved.to_degrees()
    ))
}

// ---------------------------------------------------------------------------
// criterion 4: perturbative vs dressed shift models
// ---------------------------------------------------------------------------

/// Largest drive ratio Ω/|Δ| the tone imposes: co-rotating single-photon
/// ratios on every coupled pair, plus the two-photon Rabi over the
/// two-photon detuning for two-photon tones.
fn drive_ratio(device: &DeviceSpec, tone: &ToneSpec) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for j in 0..device.n_levels() {
        for k in (j + 1)..device.n_levels() {
            let g = device.coupling(j, k);
            if g == 0.0 {
                continue;
            }
            let det = tone.carrier_freq - device.transition_freq(j, k);
            worst = worst.max((g * tone.amplitude / det).abs());
        }
    }
    if tone.is_two_photon {
        let (j, k) = tone.target_transition;
        let det = 2.0 * tone.carrier_freq - device.transition_freq(j, k);
        let rabi = two_photon_rabi(device, tone).map_err(estr)?;
        worst = worst.max((rabi / det).abs());
    }
    Ok(worst)
}

fn criterion_shift_models(device: &DeviceSpec) -> Result<String, String> {
    let w01 = device.transition_freq(0, 1);
    let w12 = device.transition_freq(1, 2);
    let w02 = device.transition_freq(0, 2);
    let blocks = default_blocks(device.n_levels());

    // the two-photon probe sits 120 MHz off its resonance: at the avoided
    // crossing the dressed pair splits instead of shifting, so an on-resonance
    // "shift" comparison would be meaningless
    let probes = [
        ToneSpec::new(1.8, 0.5 * (w02 + TAU * 120e6), 0.0, (0, 2), true).map_err(estr)?,
        ToneSpec::new(0.4, w01 + TAU * 0.3e9, 0.0, (0, 1), false).map_err(estr)?,
        ToneSpec::new(0.2, w12 - TAU * 0.4e9, 0.0, (1, 2), false).map_err(estr)?,
    ];
    let mut worst_rel = 0.0f64;
    let mut worst_ratio = 0.0f64;
    for tone in &probes {
        let ratio = drive_ratio(device, tone)?;
        if ratio > 0.05 {
            return Err(format!(
                "probe tone drives at Ω/Δ = {ratio:.3}; the ≤ 0.05 comparison regime is broken"
            ));
        }
        worst_ratio = worst_ratio.max(ratio);
        let pert = perturbative_shifts(device, tone).map_err(estr)?;
        let dressed = numeric_shifts(device, tone, blocks).map_err(estr)?;
        for (j, k) in [(0, 1), (1, 2), (0, 2)] {
            let p = pert.transition_shift(j, k);
            let d = dressed.transition_shift(j, k);
            // 2π·1 kHz floor keeps a vanishing shift from inflating the ratio
            let rel = (p - d).abs() / d.abs().max(TAU * 1e3);
            worst_rel = worst_rel.max(rel);
        }
    }
    if worst_rel > 0.05 {
        return Err(format!(
            "perturbative and dressed transition shifts deviate by {:.2}% (> 5%) \
             at drive ratios ≤ 0.05",
            worst_rel * 100.0
        ));
    }

    // strong 0-2 two-photon drive must pull the 0-1 transition down
    let strong = ToneSpec::new(4.0, 0.5 * w02, 0.0, (0, 2), true).map_err(estr)?;
    let pert01 = perturbative_shifts(device, &strong).map_err(estr)?.transition_shift(0, 1);
    let dressed01 = numeric_shifts(device, &strong, blocks).map_err(estr)?.transition_shift(0, 1);
    if pert01 >= 0.0 || dressed01 >= 0.0 {
        return Err(format!(
            "0-1 shift under a strong 0-2 two-photon drive should be negative, \
             got perturbative {:.3} and dressed {:.3} 2π·MHz",
            pert01 / TAU / 1e6,
            dressed01 / TAU / 1e6
        ));
    }
    Ok(format!(
        "transition shifts agree to {:.2}% (≤ 5%) over {} probe tones with drive ratio ≤ {:.3}; \
         0-1 shift under 0-2 drive is negative in both models ({:.2} / {:.2} 2π·MHz)",
        worst_rel * 100.0,
        probes.len(),
        worst_ratio,
        pert01 / TAU / 1e6,
        dressed01 / TAU / 1e6
    ))
}

// ---------------------------------------------------------------------------
// criteria 5 and 6: synthesized-gate fidelity and phase sensitivity
// ---------------------------------------------------------------------------

const FIDELITY_HEADER: &str = "prep_index,fidelity";
const SWEEP_HEADER: &str = "phase_offset_rad,average_fidelity,min_fidelity";

fn fidelity_column(path: &Path) -> Result<Vec<f64>, String> {
    Ok(csv_rows(path, FIDELITY_HEADER)?.into_iter().map(|r| r[1]).collect())
}

fn criterion_gate_fidelity(dir: &Path) -> Result<String, String> {
    let coherent_csv = dir.join("fidelity_coherent.csv");
    let deco_csv = dir.join("fidelity_deco.csv");
    run_bin(&[
        "simulate",
        "--gate",
        "wh",
        "--no-decoherence",
        "--out",
        coherent_csv.to_str().unwrap(),
    ])?;
    run_bin(&["simulate", "--gate", "wh", "--out", deco_csv.to_str().unwrap()])?;
    let coherent = fidelity_column(&coherent_csv)?;
    let deco = fidelity_column(&deco_csv)?;
    if coherent.len() != 9 || deco.len() != 9 {
        return Err(format!(
            "expected 9 preparations per run, got {} / {}",
            coherent.len(),
            deco.len()
        ));
    }
    let avg_coherent = mean(&coherent);
    let avg_deco = mean(&deco);
    if avg_coherent < 0.99 {
        return Err(format!("coherent average fidelity {avg_coherent:.6} is below 0.99"));
    }
    let drop_pts = (avg_coherent - avg_deco) * 100.0;
    if drop_pts > 0.3 {
        return Err(format!(
            "decoherence lowers the average fidelity by {drop_pts:.3} points (> 0.3)"
        ));
    }
    Ok(format!(
        "average fidelity over 9 preparations: {avg_coherent:.6} coherent (≥ 0.99), \
         {avg_deco:.6} with decoherence (drop {drop_pts:.3} points ≤ 0.3)"
    ))
}

fn criterion_phase_sensitivity(dir: &Path) -> Result<String, String> {
    let sweep_csv = dir.join("phase_sweep.csv");
    run_bin(&[
        "simulate",
        "--gate",
        "wh",
        "--no-decoherence",
        "--sweep-phase02",
        "-3.141592653589793:3.141592653589793:9",
        "--out",
        sweep_csv.to_str().unwrap(),
    ])?;
    let rows = csv_rows(&sweep_csv, SWEEP_HEADER)?;
    if rows.len() != 9 {
        return Err(format!("expected 9 sweep points, got {}", rows.len()));
    }
    let at = |x: f64| -> Result<f64, String> {
        rows.iter()
            .find(|r| (r[0] - x).abs() < 1e-6)
            .map(|r| r[1])
            .ok_or(format!("no sweep point at offset {x:+.4} rad"))
    };
    let peak = rows
        .iter()
        .max_by(|a, b| a[1].total_cmp(&b[1]))
        .expect("sweep is non-empty");
    if peak[0].abs() > 1e-6 {
        return Err(format!(
            "average fidelity peaks at offset {:+.4} rad instead of the nominal phase",
            peak[0]
        ));
    }
    let f0 = at(0.0)?;
    // the generator phase moves at twice the physical tone phase, so tone
    // offsets of ±π/4 and ±π/2 land at generator offsets ±π/2 and ±π; demand
    // the ≥ 5 point contrast at all four
    let mut drops = Vec::new();
    for x in [-PI / 2.0, PI / 2.0, -PI, PI] {
        let f = at(x)?;
        let drop_pts = (f0 - f) * 100.0;
        if drop_pts < 5.0 {
            return Err(format!(
                "fidelity at generator offset {x:+.4} rad is only {drop_pts:.2} points \
                 below the peak (≥ 5 required)"
            ));
        }
        drops.push(drop_pts);
    }
    Ok(format!(
        "fidelity peaks at the nominal phase ({f0:.6}); generator offsets ±π/2 fall \
         {:.1}/{:.1} points below and ±π fall {:.1}/{:.1} (≥ 5 required)",
        drops[0], drops[1], drops[2], drops[3]
    ))
}

// ---------------------------------------------------------------------------
// criterion 7: tomography floors and the end-to-end pipeline
// ---------------------------------------------------------------------------

fn criterion_tomography(device: &DeviceSpec, ledger: &mut PhysLedger) -> Result<String, String> {
    let analyzers = analyzer_set();
    let readout = &device.readout;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_ACCE);

    let mut min_state = 1.0f64;
    for i in 0..100u64 {
        let rho = random_density(3, &mut rng);
        let volts: Vec<f64> = analyzers
            .unitaries()
            .iter()
            .map(|u| simulate_homodyne(&rho, u, readout, false, 0))
            .collect::<Result<_, _>>()
            .map_err(estr)?;
        let opts = MleOptions { restarts: 6, seed: 1000 + i, ..Default::default() };
        let (rec, _) = mle_state(&volts, &analyzers, readout, &opts).map_err(estr)?;
        ledger.record("state reconstruction", rec.entries());
        min_state = min_state.min(state_fidelity(&rec, &rho).map_err(estr)?);
    }
    if min_state < 0.999 {
        return Err(format!(
            "noiseless state reconstruction fidelity floor {min_state:.6} < 0.999 \
             over 100 random states"
        ));
    }

    let basis = build_operator_basis();
    let preps: Vec<UnitaryOperator> =
        preparation_set().iter().map(|p| p.unitary()).collect();
    let rho0 = InitialState::Thermal { p0: 0.74 }.realize(3).map_err(estr)?;
    let mut min_process = 1.0f64;
    for g in 0..20u64 {
        let u = random_unitary(3, &mut rng);
        let mut records = Array2::<f64>::zeros((preps.len(), analyzers.len()));
        for (i, p) in preps.iter().enumerate() {
            let rho_out =
                u.apply_density(&p.apply_density(&rho0).map_err(estr)?).map_err(estr)?;
            for (j, a) in analyzers.unitaries().iter().enumerate() {
                records[[i, j]] =
                    simulate_homodyne(&rho_out, a, readout, false, 0).map_err(estr)?;
            }
        }
        let opts = MleOptions { restarts: 4, seed: 2000 + g, ..Default::default() };
        let (chi, _) = process_mle(&records, &preps, &analyzers, readout, &basis, &rho0, &opts)
            .map_err(estr)?;
        let chi_ref = ideal_chi(&u, &basis).map_err(estr)?;
        min_process = min_process.min(process_fidelity(&chi, &chi_ref).map_err(estr)?);
    }
    if min_process < 0.999 {
        return Err(format!(
            "noiseless process reconstruction fidelity floor {min_process:.6} < 0.999 \
             over 20 random unitaries"
        ));
    }

    // full pipeline through the binary: synthesized pulse, decoherence on,
    // simulated records, process reconstruction
    let report = run_bin(&["tomo", "--mode", "process", "--self-generate", "pulse"])?;
    let fid_line = report
        .lines()
        .find_map(|l| l.strip_prefix("process fidelity vs ideal: "))
        .ok_or("tomo report carries no process-fidelity line")?;
    let f_e2e: f64 = fid_line.trim().parse().map_err(estr)?;
    if f_e2e < 0.95 {
        return Err(format!(
            "end-to-end process fidelity with decoherence {f_e2e:.4} < 0.95"
        ));
    }
    Ok(format!(
        "noiseless reconstruction floors: state {min_state:.6} over 100 random states, \
         process {min_process:.6} over 20 random unitaries (≥ 0.999); end-to-end process \
         fidelity with decoherence {f_e2e:.4} (≥ 0.95)"
    ))
}

// ---------------------------------------------------------------------------
// criterion 8: physicality of every produced density matrix
// ---------------------------------------------------------------------------

struct PhysLedger {
    checked: usize,
    max_trace_dev: f64,
    max_herm_dev: f64,
    min_eig: f64,
    violation_count: usize,
    first_violations: Vec<String>,
}

impl PhysLedger {
    fn new() -> Self {
        Self {
            checked: 0,
            max_trace_dev: 0.0,
            max_herm_dev: 0.0,
            min_eig: f64::INFINITY,
            violation_count: 0,
            first_violations: Vec::new(),
        }
    }

    fn record(&mut self, label: &str, m: &Array2<C64>) {
        self.checked += 1;
        let tr = m.diag().sum();
        self.max_trace_dev = self.max_trace_dev.max((tr - C64::new(1.0, 0.0)).norm());
        let mut herm = 0.0f64;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                herm = herm.max((m[[i, j]] - m[[j, i]].conj()).norm());
            }
        }
        self.max_herm_dev = self.max_herm_dev.max(herm);
        let hpart = (m + &m.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
        if let Ok((vals, _)) = hpart.eigh(UPLO::Lower) {
            self.min_eig = self.min_eig.min(vals[0]);
        }
        if let Err(d) = check_physicality(m, 1e-8, 1e-10, -1e-7) {
            self.violation_count += 1;
            if self.first_violations.len() < 3 {
                self.first_violations.push(format!("{label}: {d}"));
            }
        }
    }

    fn summary(&self) -> Result<String, String> {
        if self.violation_count > 0 {
            return Err(format!(
                "{} of {} density matrices violate physicality; first: {}",
                self.violation_count,
                self.checked,
                self.first_violations.join("; ")
            ));
        }
        Ok(format!(
            "{} density matrices checked: max |Tr−1| {:.1e} (tol 1e-8), max Hermiticity \
             deviation {:.1e} (tol 1e-10), min eigenvalue {:+.1e} (floor −1e-7)",
            self.checked, self.max_trace_dev, self.max_herm_dev, self.min_eig
        ))
    }
}

fn criterion_physicality(device: &DeviceSpec, ledger: &mut PhysLedger) -> Result<String, String> {
    // run the full synthesis + Lindblad pipeline over all nine preparations,
    // with and without decoherence, and check every sampled state plus the
    // rotated finals; the ledger already holds criterion 7's reconstructions
    let target = walsh_hadamard();
    let config = DecompositionSearchConfig { grid_points: 100, ..Default::default() };
    let found = search_decompositions(&target, &config).map_err(estr)?;
    let chosen = select_decomposition(&found).map_err(estr)?;
    let schedule = synthesize_gate_schedule(
        device,
        chosen,
        &GateTiming::default(),
        &CompensationConfig::default(),
    )
    .map_err(estr)?;
    let rho0 = InitialState::Thermal { p0: 0.74 }.realize(3).map_err(estr)?;

    for (pi, prep) in preparation_set().iter().enumerate() {
        let rho_in = prep.unitary().apply_density(&rho0).map_err(estr)?;
        for deco in [false, true] {
            let sim = SimulationConfig {
                include_decoherence: deco,
                n_samples: 41,
                ..Default::default()
            };
            let traj = evolve_lindblad(device, &schedule, &rho_in, &sim).map_err(estr)?;
            for (t, m) in traj.times.iter().zip(traj.states.iter()) {
                ledger.record(
                    &format!("evolved state (prep {pi}, decoherence {deco}, t = {t:.2e} s)"),
                    m,
                );
            }
            let t_end = *traj.times.last().expect("trajectory is non-empty");
            let rotated = rotating_frame_state(&traj.final_density(), &schedule, t_end);
            ledger.record(
                &format!("rotated final state (prep {pi}, decoherence {deco})"),
                rotated.entries(),
            );
        }
    }
    ledger.summary()
}

// ---------------------------------------------------------------------------
// criterion 9: readout calibration round trips
// ---------------------------------------------------------------------------

fn criterion_calibration() -> Result<String, String> {
    // only the amplitude ratio matters; the absolute scale is arbitrary volts
    let scale = 0.137;
    let (p0, p1) = thermal_populations(scale * 0.74, scale * 0.26).map_err(estr)?;
    if (p0 - 0.74).abs() > 1e-12 || (p1 - 0.26).abs() > 1e-12 {
        return Err(format!(
            "thermal populations ({p0:.15}, {p1:.15}) miss (0.74, 0.26) beyond 1e-12"
        ));
    }

    let v = [1.0, -1.0, 0.3];
    let v_thermal = p0 * v[0] + p1 * v[1];
    let v_swap01 = p1 * v[0] + p0 * v[1];
    let v_swap01_12 = p1 * v[0] + p0 * v[2];
    let solved = solve_voltage_levels(v_thermal, v_swap01, v_swap01_12, p0).map_err(estr)?;
    let worst =
        solved.iter().zip(v.iter()).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
    if worst > 1e-12 {
        return Err(format!("voltage levels round-trip with error {worst:.2e} > 1e-12"));
    }
    Ok(format!(
        "ground population {p0:.12} recovered from the 0.26/0.74 amplitude ratio; \
         voltage levels round-trip to {worst:.1e} (≤ 1e-12)"
    ))
}
