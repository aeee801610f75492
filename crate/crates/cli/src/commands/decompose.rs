//! `trikit decompose` — factor a target unitary into a diagonal phase gate
//! times an off-diagonal-generator unitary and report every solution the
//! phase-grid search finds, sorted by |m02|.

use std::path::{Path, PathBuf};

use trikit_core::decompose::{
    search_decompositions, select_decomposition, DecompositionSearchConfig,
};
use trikit_core::operator::walsh_hadamard;

use crate::commands::Context;
use crate::matrixio::{self, fmt_c};
use crate::runerr::CliResult;

pub const CSV_HEADER: &str = "index,selected,phi0_rad,phi1_rad,phi2_rad,\
re_m01,im_m01,re_m12,im_m12,re_m02,im_m02,residual";

#[derive(clap::Args)]
pub struct Args {
    /// Target gate: `wh` (the qutrit Walsh-Hadamard gate) or a matrix file
    /// of whitespace-separated re/im pairs, row-major.
    #[arg(long, default_value = "wh")]
    pub target: String,

    /// Phase-grid points per axis for the coarse scan.
    #[arg(long, default_value_t = 200)]
    pub grid: usize,

    /// Write the factorization table as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(ctx: &Context, args: Args) -> CliResult<()> {
    let target = if args.target == "wh" {
        walsh_hadamard()
    } else {
        matrixio::read_unitary(Path::new(&args.target))?
    };
    if args.grid < 40 {
        eprintln!(
            "warning: {} grid points per axis is coarse; some factorizations may be missed",
            args.grid
        );
    }

    let config = DecompositionSearchConfig { grid_points: args.grid, ..Default::default() };
    let found = search_decompositions(&target, &config)?;
    let selected = select_decomposition(&found)?;
    let sel_index = found
        .iter()
        .position(|c| std::ptr::eq(c, selected))
        .expect("selected element comes from the candidate list");

    println!(
        "found {} factorization{} (grid {}^3 + simplex refinement)\n",
        found.len(),
        if found.len() == 1 { "" } else { "s" },
        args.grid
    );
    println!(
        "  {:>2} {:>3}  {:>9} {:>9} {:>9}  {:>18} {:>18} {:>18}  {:>9}",
        "#", "sel", "phi0", "phi1", "phi2", "m01", "m12", "m02", "residual"
    );
    for (i, d) in found.iter().enumerate() {
        println!(
            "  {:>2} {:>3}  {:>9.6} {:>9.6} {:>9.6}  {:>18} {:>18} {:>18}  {:>9.2e}",
            i,
            if i == sel_index { "*" } else { "" },
            d.phi0,
            d.phi1,
            d.phi2,
            fmt_c(d.m01),
            fmt_c(d.m12),
            fmt_c(d.m02),
            d.residual
        );
    }
    println!(
        "\nselected: #{sel_index} (smallest |m02| = {:.6}, then smallest |m01|+|m12|)",
        selected.m02.norm()
    );

    if let Some(path) = &args.out {
        let mut body = String::from(CSV_HEADER);
        body.push('\n');
        for (i, d) in found.iter().enumerate() {
            body.push_str(&format!(
                "{},{},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.3e}\n",
                i,
                u8::from(i == sel_index),
                d.phi0,
                d.phi1,
                d.phi2,
                d.m01.re,
                d.m01.im,
                d.m12.re,
                d.m12.im,
                d.m02.re,
                d.m02.im,
                d.residual
            ));
        }
        ctx.manifest().write_output(path, &body)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
