//! `trikit shifts` — drive-induced level shifts for one tone, reported from
//! the closed-form second-order sums and the dressed-state diagonalization
//! side by side. Sweep mode maps the generalized 0-1 Rabi rate over a
//! (probe detuning, shifting-tone detuning) grid; its minimum traces the
//! shift as a function of the shifting tone's detuning.

use std::path::PathBuf;

use rayon::prelude::*;
use trikit_core::drive::{default_blocks, numeric_shifts, perturbative_shifts, ShiftReport};
use trikit_core::linalg::TAU;
use trikit_core::pulse::ToneSpec;

use crate::commands::Context;
use crate::matrixio::{parse_pair, parse_sweep};
use crate::runerr::{CliError, CliResult};

pub const SWEEP_CSV_HEADER: &str = "delta01_mhz,delta02_mhz,rabi01_mhz";

#[derive(clap::Args)]
pub struct Args {
    /// Level pair the tone addresses, `j-k`.
    #[arg(long, default_value = "0-2")]
    pub pair: String,

    /// Dimensionless drive amplitude (Rabi rate on pair j-k is g_jk * amplitude).
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,

    /// Carrier offset from the pair resonance, MHz (halved on the carrier
    /// for two-photon tones so the two-photon detuning equals this value).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub detuning_mhz: f64,

    /// Force two-photon treatment (automatic when the pair's direct
    /// coupling is zero).
    #[arg(long)]
    pub two_photon: bool,

    /// Photon blocks per side in the dressed-state diagonalization.
    #[arg(long)]
    pub blocks: Option<usize>,

    /// Sweep the 0-1 probe detuning over `lo:hi:n` (MHz). Requires
    /// --sweep-delta02-mhz and --out; emits a CSV grid instead of the report.
    #[arg(long, allow_hyphen_values = true)]
    pub sweep_delta01_mhz: Option<String>,

    /// Sweep the shifting tone's detuning over `lo:hi:n` (MHz).
    #[arg(long, allow_hyphen_values = true)]
    pub sweep_delta02_mhz: Option<String>,

    /// 0-1 probe amplitude entering the sweep's generalized Rabi rate.
    #[arg(long, default_value_t = 0.1)]
    pub probe_amplitude: f64,

    /// Use dressed-state shifts in the sweep instead of the second-order sums.
    #[arg(long)]
    pub dressed: bool,

    /// Output file (sweep CSV; ignored in report mode).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn make_tone(
    device: &trikit_core::device::DeviceSpec,
    pair: (usize, usize),
    amplitude: f64,
    detuning: f64,
    force_two_photon: bool,
) -> CliResult<(ToneSpec, bool)> {
    let (j, k) = pair;
    let two_photon = force_two_photon || device.coupling(j, k) == 0.0;
    let w = device.transition_freq(j, k);
    let carrier = if two_photon { 0.5 * (w + detuning) } else { w + detuning };
    Ok((ToneSpec::new(amplitude, carrier, 0.0, pair, two_photon)?, two_photon))
}

pub fn run(ctx: &Context, args: Args) -> CliResult<()> {
    let device = &ctx.profile.device;
    let n = device.n_levels();
    let pair = parse_pair(&args.pair, n)?;
    let blocks = args.blocks.unwrap_or_else(|| default_blocks(n));

    if args.sweep_delta01_mhz.is_some() || args.sweep_delta02_mhz.is_some() {
        return run_sweep(ctx, &args, pair, blocks);
    }

    let detuning = TAU * 1e6 * args.detuning_mhz;
    let (tone, two_photon) = make_tone(device, pair, args.amplitude, detuning, args.two_photon)?;
    let pert = perturbative_shifts(device, &tone)?;
    let num = numeric_shifts(device, &tone, blocks)?;

    let mhz = |w: f64| w / TAU / 1e6;
    println!(
        "tone: pair {}-{}{}, amplitude {:.6}, carrier 2pi x {:.4} MHz (detuning {:+.4} MHz)",
        pair.0,
        pair.1,
        if two_photon { " (two-photon)" } else { "" },
        args.amplitude,
        mhz(tone.carrier_freq),
        args.detuning_mhz
    );
    println!("dressed diagonalization: {blocks} photon blocks per side\n");

    let rel = |p: f64, d: f64| if d.abs() > 0.0 { (p - d).abs() / d.abs() } else { 0.0 };
    println!("level shifts (2pi x MHz):");
    println!("  {:>5} {:>14} {:>14} {:>10}", "level", "perturbative", "dressed", "rel.dev.");
    for j in 0..n.min(3) {
        let (p, d) = (pert.level_shift(j), num.level_shift(j));
        println!("  {:>5} {:>14.6} {:>14.6} {:>10.4}", j, mhz(p), mhz(d), rel(p, d));
    }
    println!("\ntransition shifts (2pi x MHz):");
    println!("  {:>5} {:>14} {:>14} {:>10}", "pair", "perturbative", "dressed", "rel.dev.");
    for &(j, k) in &[(0usize, 1usize), (1, 2), (0, 2)] {
        if k >= n {
            continue;
        }
        let (p, d) = (pert.transition_shift(j, k), num.transition_shift(j, k));
        println!("  {:>2}-{:<2} {:>14.6} {:>14.6} {:>10.4}", j, k, mhz(p), mhz(d), rel(p, d));
    }
    if two_photon {
        println!(
            "\ntwo-photon Rabi rate: perturbative 2pi x {:.4} MHz, dressed 2pi x {:.4} MHz",
            mhz(pert.two_photon_rabi),
            mhz(num.two_photon_rabi)
        );
    }
    print_strained(&pert);
    Ok(())
}

fn print_strained(pert: &ShiftReport) {
    if pert.strained_pairs.is_empty() {
        println!("strained pairs (Omega/|Delta| beyond the perturbative comfort ratio): none");
    } else {
        let list: Vec<String> =
            pert.strained_pairs.iter().map(|&(j, k)| format!("{j}-{k}")).collect();
        println!(
            "strained pairs (Omega/|Delta| beyond the perturbative comfort ratio): {}",
            list.join(", ")
        );
    }
}

fn run_sweep(ctx: &Context, args: &Args, pair: (usize, usize), blocks: usize) -> CliResult<()> {
    let device = &ctx.profile.device;
    let s01 = args
        .sweep_delta01_mhz
        .as_deref()
        .ok_or_else(|| CliError::input("sweep mode needs --sweep-delta01-mhz"))?;
    let s02 = args
        .sweep_delta02_mhz
        .as_deref()
        .ok_or_else(|| CliError::input("sweep mode needs --sweep-delta02-mhz"))?;
    let out = args
        .out
        .as_deref()
        .ok_or_else(|| CliError::input("sweep mode needs --out for the CSV grid"))?;
    let d01s = parse_sweep(s01, "--sweep-delta01-mhz")?;
    let d02s = parse_sweep(s02, "--sweep-delta02-mhz")?;

    let probe_rabi = device.coupling(0, 1) * args.probe_amplitude;
    let columns: Vec<Vec<(f64, f64, f64)>> = d02s
        .par_iter()
        .map(|&d02| -> CliResult<Vec<(f64, f64, f64)>> {
            let detuning = TAU * 1e6 * d02;
            let (tone, _) = make_tone(device, pair, args.amplitude, detuning, args.two_photon)?;
            let report = if args.dressed {
                numeric_shifts(device, &tone, blocks)?
            } else {
                perturbative_shifts(device, &tone)?
            };
            let shift01 = report.transition_shift(0, 1);
            Ok(d01s
                .iter()
                .map(|&d01| {
                    let residual = TAU * 1e6 * d01 - shift01;
                    let rabi = probe_rabi.hypot(residual);
                    (d01, d02, rabi / TAU / 1e6)
                })
                .collect())
        })
        .collect::<CliResult<_>>()?;

    let mut body = String::from(SWEEP_CSV_HEADER);
    body.push('\n');
    for column in &columns {
        for &(d01, d02, rabi) in column {
            body.push_str(&format!("{d01:.9},{d02:.9},{rabi:.9}\n"));
        }
    }
    ctx.manifest().write_output(out, &body)?;
    println!(
        "wrote {} ({} delta02 points x {} delta01 points); the Rabi minimum vs delta01 \
         traces the drive-induced 0-1 shift as a function of delta02",
        out.display(),
        d02s.len(),
        d01s.len()
    );
    Ok(())
}
