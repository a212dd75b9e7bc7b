//! Best-effort on-disk cache for butterfly flux rows.
//!
//! A sweep at order nmax recomputes every admissible flux at every lower
//! order, so row-level caching makes successive sweeps incremental. The cache
//! is an optimization only: every entry is validated on read and any
//! missing, stale or corrupt entry silently falls back to recomputation.
//!
//! Location: `$HARPER_CACHE_DIR` when set, otherwise `harper-cache-v1` under
//! the system temp directory. Keys encode every input that determines a row
//! (model integers, grid, tolerance) plus the crate version, so upgrading the
//! binary never reuses stale rows. Writes go through a unique temp file and
//! an atomic rename; concurrent sweeps at worst recompute a row.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::spectral::KGrid;

use super::formats::FluxRow;

/// Environment variable overriding the cache directory.
pub const CACHE_DIR_ENV: &str = "HARPER_CACHE_DIR";

/// Resolve the cache directory (not created yet).
pub fn cache_dir() -> PathBuf {
    match std::env::var_os(CACHE_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => std::env::temp_dir().join("harper-cache-v1"),
    }
}

/// Cache key for one flux row; a valid file name on all platforms.
pub fn row_key(q: i64, r: i64, m: i64, n: i64, grid: KGrid, gap_tol: f64) -> String {
    format!(
        "q{q}_r{r}_M{m}_N{n}_grid{}x{}_tol{gap_tol:e}_v{}",
        grid.n1,
        grid.n2,
        env!("CARGO_PKG_VERSION")
    )
}

fn row_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("{key}.json"))
}

/// Load a cached row, if present and well formed.
pub fn load_row(dir: &Path, key: &str) -> Option<FluxRow> {
    let bytes = fs::read(row_path(dir, key)).ok()?;
    serde_json::from_slice(&bytes).ok()
}

/// Store a row atomically (unique temp file, then rename). Failures are
/// reported but callers are expected to treat them as non-fatal.
pub fn store_row(dir: &Path, key: &str, row: &FluxRow) -> std::io::Result<()> {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    fs::create_dir_all(dir)?;
    let json = serde_json::to_vec_pretty(row).expect("flux row serializes");
    let tmp = dir.join(format!(
        ".{key}.{}.{}.tmp",
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    fs::write(&tmp, &json)?;
    match fs::rename(&tmp, row_path(dir, key)) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}
