//! Plain-text matrix I/O and shared formatting helpers.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use trikit_core::UnitaryOperator;

use crate::runerr::{CliError, CliResult};

/// Read a unitary from a whitespace-separated list of complex pairs
/// (`re im re im …`, row-major; `#` starts a comment). The dimension is
/// inferred from the element count.
pub fn read_unitary(path: &Path) -> CliResult<UnitaryOperator> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("matrix file {}: {e}", path.display())))?;
    let mut values = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| CliError::input(format!("matrix file: bad number `{tok}`")))?;
            values.push(v);
        }
    }
    if values.is_empty() || values.len() % 2 != 0 {
        return Err(CliError::input(format!(
            "matrix file: need re/im pairs, got {} numbers",
            values.len()
        )));
    }
    let n_elems = values.len() / 2;
    let dim = (n_elems as f64).sqrt().round() as usize;
    if dim * dim != n_elems {
        return Err(CliError::input(format!(
            "matrix file: {n_elems} complex entries do not form a square matrix"
        )));
    }
    let entries = Array2::from_shape_vec(
        (dim, dim),
        values.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect(),
    )
    .expect("shape matches by construction");
    Ok(UnitaryOperator::new(entries)?)
}

/// `a+bi` with fixed width, for table output.
pub fn fmt_c(z: C64) -> String {
    format!("{:+.6}{:+.6}i", z.re, z.im)
}

/// Render a complex matrix as aligned `re+imi` cells, one row per line.
pub fn fmt_matrix(m: &Array2<C64>, indent: &str) -> String {
    let mut out = String::new();
    for row in m.rows() {
        out.push_str(indent);
        let cells: Vec<String> = row.iter().map(|&z| fmt_c(z)).collect();
        out.push_str(&cells.join("  "));
        out.push('\n');
    }
    out
}

/// Parse a `lo:hi:n` inclusive sweep specification.
pub fn parse_sweep(spec: &str, what: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(CliError::input(format!("{what}: expected `lo:hi:n`, got `{spec}`")));
    };
    let lo: f64 = lo.parse().map_err(|_| CliError::input(format!("{what}: bad bound `{lo}`")))?;
    let hi: f64 = hi.parse().map_err(|_| CliError::input(format!("{what}: bad bound `{hi}`")))?;
    let n: usize = n.parse().map_err(|_| CliError::input(format!("{what}: bad count `{n}`")))?;
    if n == 0 || !lo.is_finite() || !hi.is_finite() {
        return Err(CliError::input(format!("{what}: empty or non-finite sweep `{spec}`")));
    }
    if n == 1 {
        return Ok(vec![0.5 * (lo + hi)]);
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

/// Parse a `j-k` level pair.
pub fn parse_pair(spec: &str, n_levels: usize) -> CliResult<(usize, usize)> {
    let parts: Vec<&str> = spec.split('-').collect();
    let [a, b] = parts.as_slice() else {
        return Err(CliError::input(format!("pair: expected `j-k`, got `{spec}`")));
    };
    let j: usize =
        a.parse().map_err(|_| CliError::input(format!("pair: bad level `{a}`")))?;
    let k: usize =
        b.parse().map_err(|_| CliError::input(format!("pair: bad level `{b}`")))?;
    if j >= k || k >= n_levels {
        return Err(CliError::input(format!(
            "pair {spec}: need lower-upper with upper < {n_levels}"
        )));
    }
    Ok((j, k))
}
