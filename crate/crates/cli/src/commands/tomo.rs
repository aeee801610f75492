//! `trikit tomo` — maximum-likelihood state and process reconstruction from
//! homodyne measurement records, plus an in-process record generator so the
//! whole pipeline runs with zero external data.
//!
//! Records are always reconstructed against the *nominal* analyzer set: the
//! generator measures the physical state with the phase-shifted analyzers
//! (which absorb the gate's virtual diagonal factor), and since the readout
//! operator and the diagonal factor commute, those voltages are exactly what
//! the nominal analyzers would read on the full-target output state.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64 as C64;
use trikit_core::drive::GateTiming;
use trikit_core::dynamics::{InitialState, SimulationConfig};
use trikit_core::operator::{state_fidelity, UnitaryOperator};
use trikit_core::tomography::{
    analyzer_set, build_operator_basis, ideal_chi, mle_state, phase_shift_analyzers,
    preparation_set, process_fidelity, process_mle, MleOptions, MleReport,
    simulate_homodyne,
};

use crate::commands::simulate::{plan_gate, resolve_gate, run_prep, RECORDS_CSV_HEADER};
use crate::commands::Context;
use crate::matrixio::fmt_matrix;
use crate::runerr::{CliError, CliResult};

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    /// Reconstruct one preparation's output density matrix.
    State,
    /// Reconstruct the process matrix over all preparations.
    Process,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Source {
    /// Apply the target gate exactly (no pulse physics).
    Ideal,
    /// Run the synthesized pulse schedule through the master equation.
    Pulse,
}

#[derive(clap::Args)]
pub struct Args {
    /// Reconstruction mode.
    #[arg(long, value_enum)]
    pub mode: Mode,

    /// Records CSV with header `prep_index,analyzer_index,voltage_volts`.
    #[arg(long, conflicts_with = "self_generate")]
    pub records: Option<PathBuf>,

    /// Generate the records in-process instead of reading a file.
    #[arg(long, value_enum)]
    pub self_generate: Option<Source>,

    /// Target gate for references and self-generation: `wh` or a matrix file.
    #[arg(long, default_value = "wh")]
    pub gate: String,

    /// Preparation index reconstructed in state mode.
    #[arg(long, default_value_t = 0)]
    pub prep: usize,

    /// MLE restarts.
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,

    /// Phase-grid points per axis for pulse self-generation.
    #[arg(long, default_value_t = 100)]
    pub grid: usize,

    /// Disable decoherence in pulse self-generation.
    #[arg(long)]
    pub no_decoherence: bool,

    /// Add readout voltage noise to self-generated records.
    #[arg(long)]
    pub noise: bool,

    /// Write the reconstruction report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn record_seed(base: u64, i: usize, j: usize, n_analyzers: usize) -> u64 {
    base.wrapping_add(((i * n_analyzers + j) as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Simulated 9x9 record grid plus a one-line description of its origin.
fn generate_records(
    ctx: &Context,
    args: &Args,
    target: &UnitaryOperator,
    source: Source,
) -> CliResult<(Array2<f64>, String)> {
    let device = &ctx.profile.device;
    let preps = preparation_set();
    let nominal = analyzer_set();
    let rho0 = InitialState::Thermal { p0: ctx.profile.thermal_p0 }.realize(device.n_levels())?;
    let mut records = Array2::<f64>::zeros((preps.len(), nominal.len()));
    let noise_desc = if args.noise { "readout noise" } else { "noiseless" };

    match source {
        Source::Ideal => {
            for (i, p) in preps.iter().enumerate() {
                let rho_out = target.apply_density(&p.unitary().apply_density(&rho0)?)?;
                for (j, a) in nominal.unitaries().iter().enumerate() {
                    records[[i, j]] = simulate_homodyne(
                        &rho_out,
                        a,
                        &device.readout,
                        args.noise,
                        record_seed(ctx.seed, i, j, nominal.len()),
                    )?;
                }
            }
            Ok((records, format!("self-generated (ideal gate action, {noise_desc})")))
        }
        Source::Pulse => {
            let plan = plan_gate(ctx, target, args.grid, &GateTiming::default(), false)?;
            let analyzers = phase_shift_analyzers(&nominal, &plan.decomposition);
            let config = SimulationConfig {
                include_decoherence: !args.no_decoherence,
                initial_state: InitialState::Thermal { p0: ctx.profile.thermal_p0 },
                ..Default::default()
            };
            for (i, p) in preps.iter().enumerate() {
                let r = run_prep(device, &plan, &p.unitary(), &config, false)?;
                for (j, a) in analyzers.unitaries().iter().enumerate() {
                    records[[i, j]] = simulate_homodyne(
                        &r.rho_final,
                        a,
                        &device.readout,
                        args.noise,
                        record_seed(ctx.seed, i, j, analyzers.len()),
                    )?;
                }
            }
            Ok((
                records,
                format!(
                    "self-generated (pulse simulation, decoherence {}, {noise_desc})",
                    if args.no_decoherence { "off" } else { "on" }
                ),
            ))
        }
    }
}

fn read_record_map(path: &Path) -> CliResult<BTreeMap<(usize, usize), f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("records file {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    let mut saw_header = false;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != RECORDS_CSV_HEADER {
                return Err(CliError::input(format!(
                    "records file: expected header `{RECORDS_CSV_HEADER}`, got `{line}`"
                )));
            }
            saw_header = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let [i, j, v] = cols.as_slice() else {
            return Err(CliError::input(format!("records file: expected 3 columns, got `{line}`")));
        };
        let i: usize = i
            .parse()
            .map_err(|_| CliError::input(format!("records file: bad prep index `{i}`")))?;
        let j: usize = j
            .parse()
            .map_err(|_| CliError::input(format!("records file: bad analyzer index `{j}`")))?;
        let v: f64 = v
            .parse()
            .map_err(|_| CliError::input(format!("records file: bad voltage `{v}`")))?;
        if !v.is_finite() {
            return Err(CliError::input(format!("records file: non-finite voltage for ({i},{j})")));
        }
        if map.insert((i, j), v).is_some() {
            return Err(CliError::input(format!(
                "records file: duplicate record for (prep, analyzer) = ({i},{j})"
            )));
        }
    }
    if !saw_header {
        return Err(CliError::input("records file: no header line found"));
    }
    Ok(map)
}

/// Assemble the full grid from a record map, listing every missing pair.
fn grid_from_map(
    map: &BTreeMap<(usize, usize), f64>,
    n_preps: usize,
    n_analyzers: usize,
    prep_filter: Option<usize>,
) -> CliResult<Array2<f64>> {
    for &(i, j) in map.keys() {
        if i >= n_preps || j >= n_analyzers {
            return Err(CliError::input(format!(
                "records file: (prep, analyzer) = ({i},{j}) out of range for \
                 {n_preps} preparations x {n_analyzers} analyzers"
            )));
        }
    }
    let wanted: Vec<usize> = match prep_filter {
        Some(p) => vec![p],
        None => (0..n_preps).collect(),
    };
    let mut missing = Vec::new();
    for &i in &wanted {
        for j in 0..n_analyzers {
            if !map.contains_key(&(i, j)) {
                missing.push(format!("({i},{j})"));
            }
        }
    }
    if !missing.is_empty() {
        return Err(CliError::input(format!(
            "incomplete records: missing (prep, analyzer) pairs: {}",
            missing.join(", ")
        )));
    }
    let mut grid = Array2::<f64>::zeros((n_preps, n_analyzers));
    for (&(i, j), &v) in map {
        grid[[i, j]] = v;
    }
    Ok(grid)
}

fn mle_options(ctx: &Context, args: &Args) -> MleOptions {
    MleOptions { restarts: args.restarts, seed: ctx.seed, ..Default::default() }
}

fn matrix_section(text: &mut String, title: &str, m: &Array2<C64>) {
    writeln!(text, "\n{title}:").unwrap();
    text.push_str(&fmt_matrix(m, "  "));
}

fn mle_section(text: &mut String, report: &MleReport, restarts: usize) {
    writeln!(
        text,
        "MLE: objective {:.6e}, iterations {}, restarts converged {}/{}",
        report.objective, report.iterations, report.restarts_converged, restarts
    )
    .unwrap();
}

fn max_abs_entry(m: &Array2<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn run(ctx: &Context, args: Args) -> CliResult<()> {
    let device = &ctx.profile.device;
    let target = resolve_gate(&args.gate)?;
    let preps = preparation_set();
    let nominal = analyzer_set();
    let (n_preps, n_analyzers) = (preps.len(), nominal.len());

    if args.mode == Mode::State && args.prep >= n_preps {
        return Err(CliError::input(format!(
            "--prep {} out of range (0..{})",
            args.prep,
            n_preps - 1
        )));
    }

    let (records, source_desc) = match (&args.records, args.self_generate) {
        (Some(path), None) => {
            let map = read_record_map(path)?;
            let filter = (args.mode == Mode::State).then_some(args.prep);
            (grid_from_map(&map, n_preps, n_analyzers, filter)?, path.display().to_string())
        }
        (None, Some(source)) => generate_records(ctx, &args, &target, source)?,
        (None, None) => {
            return Err(CliError::input("need either --records FILE or --self-generate MODE"));
        }
        (Some(_), Some(_)) => unreachable!("clap conflicts_with rejects this"),
    };

    let options = mle_options(ctx, &args);
    let rho0 = InitialState::Thermal { p0: ctx.profile.thermal_p0 }.realize(device.n_levels())?;

    let mut text = String::new();
    match args.mode {
        Mode::State => {
            let voltages: Vec<f64> =
                (0..n_analyzers).map(|j| records[[args.prep, j]]).collect();
            let (rho_hat, report) = mle_state(&voltages, &nominal, &device.readout, &options)?;
            let ideal = target.apply_density(&preps[args.prep].unitary().apply_density(&rho0)?)?;
            let fidelity = state_fidelity(&rho_hat, &ideal)?;

            writeln!(text, "mode: state reconstruction").unwrap();
            writeln!(text, "records: {source_desc}").unwrap();
            writeln!(text, "preparation: {}", args.prep).unwrap();
            mle_section(&mut text, &report, options.restarts);
            matrix_section(&mut text, "reconstructed density matrix", rho_hat.entries());
            matrix_section(&mut text, "ideal target-gate output", ideal.entries());
            let diff = rho_hat.entries() - ideal.entries();
            writeln!(text, "\nmax |difference entry|: {:.3e}", max_abs_entry(&diff)).unwrap();
            matrix_section(&mut text, "difference (reconstructed - ideal)", &diff);
            writeln!(text, "\nstate fidelity vs ideal: {fidelity:.6}").unwrap();
        }
        Mode::Process => {
            let basis = build_operator_basis();
            let prep_unitaries: Vec<UnitaryOperator> =
                preps.iter().map(|p| p.unitary()).collect();
            let (chi_hat, report) = process_mle(
                &records,
                &prep_unitaries,
                &nominal,
                &device.readout,
                &basis,
                &rho0,
                &options,
            )?;
            let chi_ideal = ideal_chi(&target, &basis)?;
            let fidelity = process_fidelity(&chi_hat, &chi_ideal)?;

            writeln!(text, "mode: process reconstruction").unwrap();
            writeln!(text, "records: {source_desc}").unwrap();
            mle_section(&mut text, &report, options.restarts);
            matrix_section(&mut text, "reconstructed process matrix (chi)", chi_hat.entries());
            matrix_section(&mut text, "ideal process matrix", chi_ideal.entries());
            let diff = chi_hat.entries() - chi_ideal.entries();
            writeln!(text, "\nmax |difference entry|: {:.3e}", max_abs_entry(&diff)).unwrap();
            matrix_section(&mut text, "difference (reconstructed - ideal)", &diff);
            writeln!(text, "\nprocess fidelity vs ideal: {fidelity:.6}").unwrap();
        }
    }

    print!("{text}");
    if let Some(path) = &args.out {
        ctx.manifest().write_output(path, &text)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
