//! Configuration plumbing: exact-fraction parsing, the JSON config file
//! (command-line flags override it, it overrides defaults), and the run
//! manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::{json, Value};

use crate::CliError;

/// Mesh sizes are accepted as exact fractions (`1/256`) so that h = L/N is
/// the floating-point quotient of integers; plain positive decimals are also
/// allowed.
pub fn parse_mesh(s: &str) -> Result<f64, CliError> {
    let t = s.trim();
    let bad = || CliError::Validation(format!("malformed mesh size {s:?} (expected e.g. 1/256 or 0.125)"));
    let v = if let Some((num, den)) = t.split_once('/') {
        let n: u64 = num.trim().parse().map_err(|_| bad())?;
        let d: u64 = den.trim().parse().map_err(|_| bad())?;
        if n == 0 || d == 0 {
            return Err(bad());
        }
        n as f64 / d as f64
    } else {
        t.parse::<f64>().map_err(|_| bad())?
    };
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(bad())
    }
}

/// Comma-separated mesh list; returns the original tokens (for the manifest)
/// alongside the parsed values.
pub fn parse_mesh_list(s: &str) -> Result<(Vec<String>, Vec<f64>), CliError> {
    let mut tokens = Vec::new();
    let mut values = Vec::new();
    for tok in s.split(',') {
        let tok = tok.trim();
        if tok.is_empty() {
            return Err(CliError::Validation(format!("empty entry in mesh list {s:?}")));
        }
        values.push(parse_mesh(tok)?);
        tokens.push(tok.to_string());
    }
    if tokens.is_empty() {
        return Err(CliError::Validation("mesh list is empty".into()));
    }
    Ok((tokens, values))
}

/// Flat comma list `a0,b0,a1,b1[,a2,b2]` of box bounds.
pub fn parse_bounds(s: &str, d: usize) -> Result<Vec<(f64, f64)>, CliError> {
    let nums: Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    let nums = nums.map_err(|_| CliError::Validation(format!("malformed bounds {s:?}")))?;
    if nums.len() != 2 * d {
        return Err(CliError::Validation(format!(
            "bounds {s:?} must list {} numbers for dimension {d}",
            2 * d
        )));
    }
    let mut out = Vec::with_capacity(d);
    for ax in 0..d {
        let (a, b) = (nums[2 * ax], nums[2 * ax + 1]);
        if !(a < b) {
            return Err(CliError::Validation(format!("bounds axis {ax}: {a} must be < {b}")));
        }
        out.push((a, b));
    }
    Ok(out)
}

/// Semicolon-separated points, each a comma list: `0.4,0.4;0.6,0.6`.
pub fn parse_centers(s: &str, d: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let mut out = Vec::new();
    for part in s.split(';') {
        let nums: Result<Vec<f64>, _> = part.split(',').map(|t| t.trim().parse::<f64>()).collect();
        let nums = nums.map_err(|_| CliError::Validation(format!("malformed centers {s:?}")))?;
        if nums.len() != d {
            return Err(CliError::Validation(format!(
                "center {part:?} must have {d} coordinates"
            )));
        }
        out.push(nums);
    }
    if out.is_empty() {
        return Err(CliError::Validation("centers list is empty".into()));
    }
    Ok(out)
}

/// A mesh size in the config file: either an exact-fraction string or a number.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MeshValue {
    Str(String),
    Num(f64),
}

impl MeshValue {
    pub fn resolve(&self) -> Result<(String, f64), CliError> {
        match self {
            MeshValue::Str(s) => Ok((s.clone(), parse_mesh(s)?)),
            MeshValue::Num(v) => {
                if v.is_finite() && *v > 0.0 {
                    Ok((format!("{v}"), *v))
                } else {
                    Err(CliError::Validation(format!("mesh size {v} must be positive")))
                }
            }
        }
    }
}

/// JSON configuration document. Every field is optional; flags win.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub dim: Option<usize>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub s: Option<f64>,
    pub h: Option<Vec<MeshValue>>,
    pub ref_h: Option<MeshValue>,
    pub bounds: Option<String>,
    pub rhs: Option<String>,
    pub tau: Option<f64>,
    pub delta: Option<f64>,
    pub t_end: Option<f64>,
    pub snapshot_every: Option<usize>,
    pub centers: Option<String>,
    pub radius: Option<f64>,
    pub picard_tol: Option<f64>,
    pub picard_max: Option<usize>,
    pub n: Option<usize>,
    pub file: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub quad_rel_tol: Option<f64>,
    pub quad_abs_tol: Option<f64>,
    pub cg_tol: Option<f64>,
    pub cg_max_iter: Option<usize>,
}

/// Load a config document; a manifest from a previous run (which nests the
/// configuration under `"config"`) is accepted directly.
pub fn load_config(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("config {} is not valid JSON: {e}", path.display())))?;
    let body = match doc.get("config") {
        Some(inner @ Value::Object(_)) => inner.clone(),
        _ => doc,
    };
    serde_json::from_value(body)
        .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
}

/// Run manifest: resolved configuration, tool version, wall times, outputs.
pub struct Manifest {
    command: &'static str,
    config: Value,
    files: Vec<String>,
    started: std::time::Instant,
}

impl Manifest {
    pub fn new(command: &'static str, config: Value) -> Self {
        Manifest { command, config, files: Vec::new(), started: std::time::Instant::now() }
    }

    pub fn record_file(&mut self, name: impl Into<String>) {
        self.files.push(name.into());
    }

    pub fn write(&self, out_dir: &Path) -> Result<(), CliError> {
        let doc = json!({
            "tool": "fraclap",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config": self.config,
            "outputs": self.files,
            "wall_seconds": { "total": self.started.elapsed().as_secs_f64() },
        });
        let path = out_dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&doc)
            .map_err(|e| CliError::Failure(format!("manifest serialization: {e}")))?;
        std::fs::write(&path, text)
            .map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }
}

/// Two-column CSV with full round-trip precision.
pub fn series_csv(header: &str, rows: &[(f64, f64)]) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for (a, b) in rows {
        let _ = writeln!(out, "{a:.16e},{b:.16e}");
    }
    out
}
