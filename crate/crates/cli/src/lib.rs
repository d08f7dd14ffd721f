//! Command implementations behind the `fusionbench` binary.

pub mod bench;
pub mod bundled;
pub mod config;
pub mod csvio;
pub mod error;
pub mod gradcheck;
pub mod params;
pub mod synth;

pub use error::{CliError, CliResult};

/// Environment variable that overrides a config file's seed.
pub const SEED_ENV: &str = "FUSIONBENCH_SEED";

/// Seed precedence: command-line flag, then `FUSIONBENCH_SEED`, then the
/// config value.
pub fn resolve_seed(flag: Option<u64>, config: u64) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(std::env::VarError::NotPresent) => Ok(config),
        Err(e) => Err(CliError::Usage(format!("{SEED_ENV}: {e}"))),
    }
}
