//! Stencil store: memoizes built coefficient tables in memory and, when a
//! cache directory is configured, on disk in the `FRST` format.
//!
//! The cache key is the exact build input — (d, α, γ, N, h) plus the
//! quadrature tolerances — compared bit for bit, so a hit always returns a
//! table that an in-process rebuild would reproduce exactly.  File names
//! encode the key through the raw bit patterns of the floating-point
//! parameters; a header mismatch on read (e.g. a hand-renamed file) is
//! treated as a miss and the table is rebuilt.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;

use crate::io::{read_stencil, write_stencil, IoError};
use crate::singquad::QuadConfig;
use crate::stencil::{build_stencil_2d, build_stencil_3d, FracParams, Stencil, StencilError};

/// Environment variable naming the on-disk cache directory.
pub const CACHE_DIR_ENV: &str = "FRACLAP_CACHE_DIR";

#[derive(Debug, Error)]
pub enum CacheError {
    #[error(transparent)]
    Stencil(#[from] StencilError),
    #[error("stencil cache i/o: {0}")]
    Io(#[from] IoError),
    #[error("stencil cache i/o: {0}")]
    Fs(#[from] std::io::Error),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct Key {
    d: usize,
    alpha: u64,
    gamma: u64,
    n: usize,
    h: u64,
    rel: u64,
    abs: u64,
}

impl Key {
    fn new(params: &FracParams, n: usize, h: f64, quad: &QuadConfig) -> Self {
        Key {
            d: params.d,
            alpha: params.alpha.to_bits(),
            gamma: params.gamma.to_bits(),
            n,
            h: h.to_bits(),
            rel: quad.rel_tol.to_bits(),
            abs: quad.abs_tol.to_bits(),
        }
    }

    fn file_name(&self) -> String {
        format!(
            "d{}-a{:016x}-g{:016x}-n{}-h{:016x}-r{:016x}-e{:016x}.frst",
            self.d, self.alpha, self.gamma, self.n, self.h, self.rel, self.abs
        )
    }
}

pub struct StencilStore {
    dir: Option<PathBuf>,
    quad: QuadConfig,
    mem: HashMap<Key, Arc<Stencil>>,
}

impl StencilStore {
    pub fn new(dir: Option<PathBuf>, quad: QuadConfig) -> Self {
        StencilStore { dir, quad, mem: HashMap::new() }
    }

    /// Memory-only store with the given quadrature tolerances.
    pub fn in_memory(quad: QuadConfig) -> Self {
        Self::new(None, quad)
    }

    /// Honors `FRACLAP_CACHE_DIR` when set and non-empty.
    pub fn from_env(quad: QuadConfig) -> Self {
        let dir = std::env::var_os(CACHE_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from);
        Self::new(dir, quad)
    }

    pub fn quad_config(&self) -> &QuadConfig {
        &self.quad
    }

    pub fn cache_dir(&self) -> Option<&PathBuf> {
        self.dir.as_ref()
    }

    /// Fetch the table for (params, N, h), building it at most once.
    ///
    /// Lookup order: in-memory map, then the cache directory, then a fresh
    /// build (which is written back to disk when a directory is set).
    pub fn get_or_build(&mut self, params: &FracParams, n: usize, h: f64) -> Result<Arc<Stencil>, CacheError> {
        params.validate()?;
        let key = Key::new(params, n, h, &self.quad);
        if let Some(st) = self.mem.get(&key) {
            return Ok(Arc::clone(st));
        }

        let path = self.dir.as_ref().map(|d| d.join(key.file_name()));
        if let Some(p) = &path {
            if p.is_file() {
                let st = read_stencil(p)?;
                if Key::new(&st.params, st.n, st.h, &quad_of(&st)) == key {
                    let st = Arc::new(st);
                    self.mem.insert(key, Arc::clone(&st));
                    return Ok(st);
                }
                // Header disagrees with the name: ignore the file and rebuild.
            }
        }

        let st = match params.d {
            2 => build_stencil_2d(params, n, h, &self.quad)?,
            _ => build_stencil_3d(params, n, h, &self.quad)?,
        };
        if let Some(p) = &path {
            if let Some(parent) = p.parent() {
                std::fs::create_dir_all(parent)?;
            }
            write_stencil(p, &st)?;
        }
        let st = Arc::new(st);
        self.mem.insert(key, Arc::clone(&st));
        Ok(st)
    }
}

fn quad_of(st: &Stencil) -> QuadConfig {
    QuadConfig { rel_tol: st.quad_rel_tol, abs_tol: st.quad_abs_tol, ..QuadConfig::default() }
}
