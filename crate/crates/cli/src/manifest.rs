//! Run manifests: a `#`-comment header embedded in every output file so a
//! result can be traced back to the exact command, profile, and seed that
//! produced it. Reruns are byte-identical except for the timestamp line.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use crate::runerr::CliResult;

pub struct RunManifest {
    command_line: String,
    args_sha256: String,
    profile_source: String,
    profile_sha256: String,
    seed: u64,
    unix_time: u64,
}

fn hex_digest(chunks: impl IntoIterator<Item = Vec<u8>>) -> String {
    let mut h = Sha256::new();
    for c in chunks {
        h.update(&c);
        h.update([0u8]);
    }
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    /// `argv` excludes the binary path (argument 0), so the hash does not
    /// depend on where the tool is installed.
    pub fn new(argv: &[String], profile_source: &str, profile_text: &str, seed: u64) -> Self {
        Self {
            command_line: format!("trikit {}", argv.join(" ")),
            args_sha256: hex_digest(argv.iter().map(|a| a.as_bytes().to_vec())),
            profile_source: profile_source.to_string(),
            profile_sha256: hex_digest([profile_text.as_bytes().to_vec()]),
            seed,
            unix_time: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn header(&self) -> String {
        format!(
            "# command: {}\n# version: {}\n# args-sha256: {}\n# profile: {}\n\
             # profile-sha256: {}\n# seed: {}\n# generated-unix: {}\n",
            self.command_line,
            env!("CARGO_PKG_VERSION"),
            self.args_sha256,
            self.profile_source,
            self.profile_sha256,
            self.seed,
            self.unix_time,
        )
    }

    /// Write `body` to `path` under the manifest header.
    pub fn write_output(&self, path: &Path, body: &str) -> CliResult<()> {
        fs::write(path, format!("{}{body}", self.header()))?;
        Ok(())
    }
}
