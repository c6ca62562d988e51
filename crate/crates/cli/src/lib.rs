//! Pipeline stages behind the `nrchain` binary. Stages hand off through
//! files in one output directory, so each can be rerun on its own.

pub mod config;
pub mod report;
pub mod stages;

pub use config::PipelineConfig;
pub use stages::{Layout, Timings};

/// Runs `f` on a dedicated pool of `threads` workers (0 = one per core).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    Ok(pool.install(f))
}
