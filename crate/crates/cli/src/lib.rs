//! Experiment runner for auglab: config parsing, orchestration of the
//! consistency and embedding experiments, and result persistence.

pub mod config;
pub mod experiment;
pub mod output;
pub mod tables;

/// Sizes the global rayon pool from `AUGLAB_THREADS` when it is set.
pub fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("AUGLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| format!("AUGLAB_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}
