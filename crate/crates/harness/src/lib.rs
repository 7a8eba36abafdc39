//! Command-line driver for `conic-split`: solving problem files, generating
//! instances, running benchmark matrices and comparing solutions.

pub mod bench;
pub mod compare;
pub mod config;
pub mod trace;

/// Thread count from `CONIC_SPLIT_THREADS`, falling back to `flag`.
pub fn resolve_threads(flag: Option<usize>) -> anyhow::Result<Option<usize>> {
    match std::env::var("CONIC_SPLIT_THREADS") {
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| {
                anyhow::anyhow!("CONIC_SPLIT_THREADS must be a positive integer, got '{v}'")
            })?;
            anyhow::ensure!(n > 0, "CONIC_SPLIT_THREADS must be positive");
            Ok(Some(n))
        }
        Err(_) => Ok(flag),
    }
}
