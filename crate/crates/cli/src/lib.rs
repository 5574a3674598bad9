//! Subcommand implementations behind the `brlab` binary.

pub mod output;
pub mod portrait;
pub mod report;
pub mod sweep;
pub mod verify;

pub use output::Failure;

use brlab_core::flow::skeleton::TraceConfig;

/// Seed used when `--seed` is not given.
pub fn default_seed() -> u64 {
    TraceConfig::default().seed
}

/// Caps rayon's pool at `BRLAB_THREADS` when set to a positive integer.
pub fn init_threads() {
    let n = std::env::var("BRLAB_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok());
    if let Some(n) = n.filter(|&n| n > 0) {
        // a second call fails harmlessly
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
