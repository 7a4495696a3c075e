//! Execution-mode switch for the data-parallel inner loops.
//!
//! With the `parallel` feature the per-edge / per-face / per-vertex maps run
//! on rayon; without it everything is sequential. The mode can also be forced
//! at runtime, which the benchmarks use to compare both paths on one build.

use std::sync::atomic::{AtomicU8, Ordering};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl ExecMode {
    pub fn default_mode() -> Self {
        #[cfg(feature = "parallel")]
        {
            ExecMode::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            ExecMode::Sequential
        }
    }
}

static MODE: AtomicU8 = AtomicU8::new(u8::MAX);

pub fn set_mode(mode: ExecMode) {
    let v = match mode {
        ExecMode::Sequential => 0,
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => 1,
    };
    MODE.store(v, Ordering::Relaxed);
}

pub fn mode() -> ExecMode {
    match MODE.load(Ordering::Relaxed) {
        0 => ExecMode::Sequential,
        #[cfg(feature = "parallel")]
        1 => ExecMode::Parallel,
        _ => ExecMode::default_mode(),
    }
}

/// Applies the `SPINWEIER_THREADS` environment variable: `1` forces the
/// sequential path, larger values cap the rayon pool on parallel builds.
pub fn apply_thread_env() -> crate::error::Result<()> {
    let raw = match std::env::var("SPINWEIER_THREADS") {
        Ok(v) => v,
        Err(_) => return Ok(()),
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        crate::error::Error::Config(format!(
            "SPINWEIER_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    if threads == 1 {
        set_mode(ExecMode::Sequential);
        return Ok(());
    }
    #[cfg(feature = "parallel")]
    {
        // a second initialisation in one process is harmless — keep the pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        set_mode(ExecMode::Parallel);
    }
    Ok(())
}

/// Maps `f` over `0..len`, preserving index order in the output.
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode() {
        ExecMode::Sequential => (0..len).map(f).collect(),
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            (0..len).into_par_iter().map(f).collect()
        }
    }
}
