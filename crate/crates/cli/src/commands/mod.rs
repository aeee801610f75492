//! Subcommand implementations.

pub mod decompose;
pub mod shifts;
pub mod simulate;
pub mod tomo;

use crate::manifest::RunManifest;
use crate::profile::LoadedProfile;

/// State resolved from the global flags, shared by every subcommand.
pub struct Context {
    pub profile: LoadedProfile,
    pub seed: u64,
}

impl Context {
    /// Manifest for the current invocation (hashes the real argv).
    pub fn manifest(&self) -> RunManifest {
        let argv: Vec<String> = std::env::args().skip(1).collect();
        RunManifest::new(&argv, &self.profile.source, &self.profile.text, self.seed)
    }
}
