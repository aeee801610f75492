//! Device-profile files: flat TOML sections mapping measured device numbers
//! (GHz / MHz / kHz, as the lab quotes them) onto a `DeviceSpec` in SI
//! angular units. Unknown keys are rejected so typos fail loudly.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::Deserialize;
use trikit_core::{CoherenceShape, DecoherenceRates, DeviceSpec, ReadoutModel};

use crate::runerr::{CliError, CliResult};

pub const BUILTIN_PROFILE: &str = include_str!("../profiles/flux_qutrit.toml");
pub const BUILTIN_NAME: &str = "builtin:flux_qutrit";

const TAU: f64 = std::f64::consts::TAU;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    levels: Levels,
    couplings: BTreeMap<String, f64>,
    decoherence: Decoherence,
    readout: Readout,
    thermal: Thermal,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Levels {
    transitions_ghz: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Decoherence {
    shape: String,
    transfer_khz: BTreeMap<String, f64>,
    dephasing_khz: BTreeMap<String, f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Readout {
    voltage_levels: Vec<f64>,
    noise_sigma: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Thermal {
    p0: f64,
}

pub struct LoadedProfile {
    pub device: DeviceSpec,
    pub thermal_p0: f64,
    /// Raw profile text, hashed into output manifests.
    pub text: String,
    /// Where the profile came from (path or the builtin tag).
    pub source: String,
}

pub fn load(path: Option<&Path>) -> CliResult<LoadedProfile> {
    let (text, source) = match path {
        Some(p) => (
            fs::read_to_string(p)
                .map_err(|e| CliError::input(format!("profile {}: {e}", p.display())))?,
            p.display().to_string(),
        ),
        None => (BUILTIN_PROFILE.to_string(), BUILTIN_NAME.to_string()),
    };
    let (device, thermal_p0) =
        parse(&text).map_err(|e| CliError::input(format!("profile {source}: {e}")))?;
    Ok(LoadedProfile { device, thermal_p0, text, source })
}

fn pair_key(key: &str, n: usize) -> Result<(usize, usize), String> {
    let mut it = key.split('-');
    let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
        return Err(format!("bad level pair `{key}` (expected like `0-1`)"));
    };
    let i: usize = a.trim().parse().map_err(|_| format!("bad level index in `{key}`"))?;
    let j: usize = b.trim().parse().map_err(|_| format!("bad level index in `{key}`"))?;
    if i == j || i >= n || j >= n {
        return Err(format!("level pair `{key}` out of range for {n} levels"));
    }
    Ok((i, j))
}

fn parse(text: &str) -> Result<(DeviceSpec, f64), String> {
    let file: ProfileFile = toml::from_str(text).map_err(|e| e.to_string())?;

    let n = file.levels.transitions_ghz.len() + 1;
    if n < 3 {
        return Err(format!("need at least 2 transitions (3 levels), got {}", n - 1));
    }
    // accumulate in GHz before converting so the cumulative frequencies
    // round the same way as hand-entered absolute values
    let mut level_freqs = vec![0.0];
    let mut sum_ghz = 0.0;
    for (k, f) in file.levels.transitions_ghz.iter().enumerate() {
        if !(*f > 0.0) || !f.is_finite() {
            return Err(format!("transition {k} frequency must be positive, got {f}"));
        }
        sum_ghz += f;
        level_freqs.push(sum_ghz * TAU * 1e9);
    }

    let mut g = Array2::<f64>::zeros((n, n));
    for (key, mhz) in &file.couplings {
        let (i, j) = pair_key(key, n)?;
        g[[i, j]] = mhz * TAU * 1e6;
        g[[j, i]] = mhz * TAU * 1e6;
    }

    let mut gamma = Array2::<f64>::zeros((n, n));
    for (key, khz) in &file.decoherence.transfer_khz {
        let (i, j) = pair_key(key, n)?;
        gamma[[i, j]] = khz * 1e3;
    }
    let mut dephasing = Array2::<f64>::zeros((n, n));
    for (key, khz) in &file.decoherence.dephasing_khz {
        let (i, j) = pair_key(key, n)?;
        dephasing[[i, j]] = khz * 1e3;
        dephasing[[j, i]] = khz * 1e3;
    }
    let shape = match file.decoherence.shape.as_str() {
        "exponential" => CoherenceShape::Exponential,
        "gaussian" => CoherenceShape::Gaussian,
        other => return Err(format!("unknown coherence shape `{other}`")),
    };
    let decoherence =
        DecoherenceRates::new(gamma, dephasing, shape).map_err(|e| e.to_string())?;

    let v: [f64; 3] = file
        .readout
        .voltage_levels
        .as_slice()
        .try_into()
        .map_err(|_| format!("readout needs exactly 3 voltage levels, got {}", file.readout.voltage_levels.len()))?;
    let readout = ReadoutModel::new(v, file.readout.noise_sigma).map_err(|e| e.to_string())?;

    let device = DeviceSpec::new(level_freqs, g, decoherence, readout).map_err(|e| e.to_string())?;

    let p0 = file.thermal.p0;
    if !(p0 > 0.0 && p0 <= 1.0) {
        return Err(format!("thermal p0 = {p0} outside (0, 1]"));
    }
    Ok((device, p0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_profile_matches_the_reference_device() {
        let loaded = load(None).unwrap();
        let reference = DeviceSpec::flux_qutrit_3level();
        // frequencies compare to an ulp (the profile stores transitions, the
        // reference absolute frequencies); everything else is exact
        for (a, b) in loaded.device.level_freqs().iter().zip(reference.level_freqs()) {
            assert!((a - b).abs() <= 1e-12 * b.abs(), "level freq {a} vs {b}");
        }
        assert_eq!(loaded.device.drive_couplings(), reference.drive_couplings());
        assert_eq!(loaded.device.decoherence, reference.decoherence);
        assert_eq!(loaded.device.readout, reference.readout);
        assert!((loaded.thermal_p0 - 0.74).abs() < 1e-15);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let extra_section = format!("{BUILTIN_PROFILE}\n[extra]\nx = 1\n");
        assert!(parse(&extra_section).is_err());
        let extra_key = BUILTIN_PROFILE.replace("p0 = 0.74", "p0 = 0.74\nbogus = 1.0");
        assert!(parse(&extra_key).is_err());
    }

    #[test]
    fn bad_pairs_are_rejected() {
        let text = BUILTIN_PROFILE.replace("\"0-1\" = 30.0", "\"0-7\" = 30.0");
        assert!(parse(&text).is_err());
        let text = BUILTIN_PROFILE.replace("\"0-1\" = 30.0", "\"zero-one\" = 30.0");
        assert!(parse(&text).is_err());
    }
}
