//! Subcommand implementations.
//!
//! Each command resolves its configuration (flags over `--config` over
//! defaults), validates every precondition before touching the filesystem
//! (exit 2 leaves no outputs behind), then computes and writes CSVs, field
//! dumps, and a `manifest.json` that reproduces the run when passed back via
//! `--config`.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use fraclap::krylov::CgConfig;
use fraclap::pde::{
    apply_manufactured, operator_for, poisson_solve, restrict, truncation_study, unit_box,
    validate_nesting, AllenCahnConfig, ManufacturedFn, StudyReport,
};
use fraclap::singquad::{tail_weight_2d, tail_weight_3d, QuadConfig};
use fraclap::stencil::{
    build_stencil_2d, build_stencil_3d, single_coeff_2d, single_coeff_3d, FracParams, Stencil,
};
use fraclap::{
    allen_cahn_run, read_stencil, write_field, write_stencil, Field, GridSpec, IoError,
    StencilStore,
};

use crate::config::{
    load_config, parse_bounds, parse_centers, parse_mesh, parse_mesh_list, series_csv, FileConfig,
    Manifest, MeshValue,
};
use crate::{
    AllenCahnArgs, CliError, CommonOpts, OpErrorArgs, PoissonArgs, StencilAction, StencilArgs,
};

fn validation(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

/// Map a computation error to an exit code: bad magic anywhere in the chain
/// means a corrupt input file (3), everything else is a runtime failure (1).
fn run_err<E: std::error::Error + 'static>(e: E) -> CliError {
    let msg = e.to_string();
    let mut cur: Option<&(dyn std::error::Error + 'static)> = Some(&e);
    while let Some(c) = cur {
        if matches!(c.downcast_ref::<IoError>(), Some(IoError::BadMagic { .. })) {
            return CliError::Corrupt(msg);
        }
        cur = c.source();
    }
    CliError::Failure(msg)
}

struct Shared {
    out: PathBuf,
    quad: QuadConfig,
    cg: CgConfig,
    cache_dir: Option<PathBuf>,
    threads: Option<usize>,
}

fn file_config(c: &CommonOpts) -> Result<FileConfig, CliError> {
    match &c.config {
        Some(p) => load_config(p),
        None => Ok(FileConfig::default()),
    }
}

fn resolve_shared(c: &CommonOpts, fc: &FileConfig) -> Result<Shared, CliError> {
    let dq = QuadConfig::default();
    let quad = QuadConfig {
        rel_tol: c.quad_rel_tol.or(fc.quad_rel_tol).unwrap_or(dq.rel_tol),
        abs_tol: c.quad_abs_tol.or(fc.quad_abs_tol).unwrap_or(dq.abs_tol),
        ..dq
    };
    quad.validate().map_err(validation)?;
    let dc = CgConfig::default();
    let cg = CgConfig {
        tol: c.cg_tol.or(fc.cg_tol).unwrap_or(dc.tol),
        max_iter: c.cg_max_iter.or(fc.cg_max_iter).or(dc.max_iter),
    };
    if !(cg.tol > 0.0 && cg.tol.is_finite()) {
        return Err(CliError::Validation(format!("cg_tol = {} must be positive", cg.tol)));
    }
    Ok(Shared {
        out: c.out.clone().or_else(|| fc.out.clone()).unwrap_or_else(|| PathBuf::from("fraclap-out")),
        quad,
        cg,
        cache_dir: c.cache_dir.clone().or_else(|| fc.cache_dir.clone()),
        threads: c.threads.or(fc.threads),
    })
}

fn make_store(sh: &Shared) -> StencilStore {
    match &sh.cache_dir {
        Some(d) => StencilStore::new(Some(d.clone()), sh.quad),
        None => StencilStore::from_env(sh.quad),
    }
}

fn init_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Failure(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn resolve_h_list(
    flag: &Option<String>,
    file: &Option<Vec<MeshValue>>,
) -> Result<Option<(Vec<String>, Vec<f64>)>, CliError> {
    if let Some(s) = flag {
        return parse_mesh_list(s).map(Some);
    }
    if let Some(list) = file {
        if list.is_empty() {
            return Err(CliError::Validation("mesh list in config is empty".into()));
        }
        let mut toks = Vec::new();
        let mut vals = Vec::new();
        for m in list {
            let (t, v) = m.resolve()?;
            toks.push(t);
            vals.push(v);
        }
        return Ok(Some((toks, vals)));
    }
    Ok(None)
}

fn resolve_mesh(
    flag: &Option<String>,
    file: &Option<MeshValue>,
) -> Result<Option<(String, f64)>, CliError> {
    if let Some(s) = flag {
        return parse_mesh(s).map(|v| Some((s.trim().to_string(), v)));
    }
    if let Some(m) = file {
        return m.resolve().map(Some);
    }
    Ok(None)
}

fn ensure_out(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Failure(format!("cannot create {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display())))
}

fn print_report(rep: &StudyReport) {
    for i in 0..rep.hs.len() {
        let fmt = |r: &Option<f64>| r.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        println!(
            "  h={:<10} err_inf={:.6e} rate_inf={:<7} err_2={:.6e} rate_2={}",
            format!("{:.6}", rep.hs[i]),
            rep.err_inf[i],
            fmt(&rep.rate_inf[i]),
            rep.err_2[i],
            fmt(&rep.rate_2[i]),
        );
    }
}

pub fn cmd_op_error(a: &OpErrorArgs) -> Result<(), CliError> {
    let fc = file_config(&a.common)?;
    let dim = a.dim.or(fc.dim).unwrap_or(2);
    let alpha = a.alpha.or(fc.alpha).ok_or_else(|| validation("missing required --alpha"))?;
    let gamma = a.gamma.or(fc.gamma).unwrap_or(2.0);
    let s = a.s.or(fc.s).unwrap_or(2.0);
    let (h_toks, h_vals) =
        resolve_h_list(&a.h, &fc.h)?.ok_or_else(|| validation("missing required --h"))?;
    let (ref_tok, ref_h) =
        resolve_mesh(&a.ref_h, &fc.ref_h)?.ok_or_else(|| validation("missing required --ref-h"))?;

    let params = FracParams::with_gamma(dim, alpha, gamma).map_err(validation)?;
    ManufacturedFn::new(dim, s).map_err(validation)?;
    validate_nesting(&h_vals, ref_h).map_err(validation)?;
    let bounds = unit_box(dim);
    for &h in h_vals.iter().chain(std::iter::once(&ref_h)) {
        GridSpec::from_box(&bounds, h).map_err(validation)?;
    }
    let shared = resolve_shared(&a.common, &fc)?;
    init_threads(shared.threads)?;

    let config = json!({
        "dim": dim, "alpha": alpha, "gamma": gamma, "s": s,
        "h": h_toks, "ref_h": ref_tok,
        "quad_rel_tol": shared.quad.rel_tol, "quad_abs_tol": shared.quad.abs_tol,
        "cg_tol": shared.cg.tol, "cg_max_iter": shared.cg.max_iter,
        "out": shared.out, "cache_dir": shared.cache_dir, "threads": shared.threads,
    });
    let mut manifest = Manifest::new("op-error", config);

    let mut store = make_store(&shared);
    let report = truncation_study(&mut store, &params, s, &h_vals, ref_h).map_err(run_err)?;

    ensure_out(&shared.out)?;
    write_text(&shared.out.join("op_error.csv"), &report.to_csv())?;
    manifest.record_file("op_error.csv");
    manifest.write(&shared.out)?;
    println!("op-error: dim={dim} alpha={alpha} gamma={gamma} s={s} ref_h={ref_tok}");
    print_report(&report);
    Ok(())
}

enum Rhs {
    Manufactured(f64),
    One,
}

fn parse_rhs(s: &str) -> Result<Rhs, CliError> {
    if s == "one" {
        return Ok(Rhs::One);
    }
    if s == "manufactured" {
        return Ok(Rhs::Manufactured(2.0));
    }
    if let Some(v) = s.strip_prefix("manufactured:s=") {
        let s_exp: f64 = v
            .parse()
            .map_err(|_| validation(format!("malformed rhs exponent in {s:?}")))?;
        return Ok(Rhs::Manufactured(s_exp));
    }
    Err(validation(format!("unknown rhs {s:?} (expected 'one' or 'manufactured[:s=<v>]')")))
}

pub fn cmd_poisson(a: &PoissonArgs) -> Result<(), CliError> {
    let fc = file_config(&a.common)?;
    let dim = a.dim.or(fc.dim).unwrap_or(2);
    let alpha = a.alpha.or(fc.alpha).ok_or_else(|| validation("missing required --alpha"))?;
    let gamma = a.gamma.or(fc.gamma).unwrap_or(2.0);
    let rhs_tok = a.rhs.clone().or_else(|| fc.rhs.clone()).unwrap_or_else(|| "manufactured:s=2".into());
    let rhs = parse_rhs(&rhs_tok)?;
    let (h_toks, h_vals) =
        resolve_h_list(&a.h, &fc.h)?.ok_or_else(|| validation("missing required --h"))?;
    let ref_spec = resolve_mesh(&a.ref_h, &fc.ref_h)?;
    let bounds_tok = a.bounds.clone().or_else(|| fc.bounds.clone());

    let params = FracParams::with_gamma(dim, alpha, gamma).map_err(validation)?;
    let bounds = match (&rhs, &bounds_tok) {
        (Rhs::Manufactured(_), Some(_)) => {
            return Err(validation("--bounds cannot be combined with the manufactured solution (it lives on (−1,1)^d)"));
        }
        (Rhs::Manufactured(_), None) => unit_box(dim),
        (Rhs::One, Some(b)) => parse_bounds(b, dim)?,
        (Rhs::One, None) => unit_box(dim),
    };
    if let Rhs::Manufactured(s) = rhs {
        ManufacturedFn::new(dim, s).map_err(validation)?;
        if ref_spec.is_none() {
            return Err(validation("manufactured runs require --ref-h (f is prepared on the fine grid)"));
        }
    }
    if let Some((_, ref_h)) = &ref_spec {
        validate_nesting(&h_vals, *ref_h).map_err(validation)?;
        GridSpec::from_box(&bounds, *ref_h).map_err(validation)?;
    } else if h_vals.len() != 1 {
        return Err(validation("without --ref-h exactly one --h is expected (no study possible)"));
    }
    for &h in &h_vals {
        GridSpec::from_box(&bounds, h).map_err(validation)?;
    }
    let shared = resolve_shared(&a.common, &fc)?;
    init_threads(shared.threads)?;

    let ref_tok = ref_spec.as_ref().map(|(t, _)| t.clone());
    let config = json!({
        "dim": dim, "alpha": alpha, "gamma": gamma, "rhs": rhs_tok,
        "h": h_toks, "ref_h": ref_tok, "bounds": bounds_tok,
        "quad_rel_tol": shared.quad.rel_tol, "quad_abs_tol": shared.quad.abs_tol,
        "cg_tol": shared.cg.tol, "cg_max_iter": shared.cg.max_iter,
        "out": shared.out, "cache_dir": shared.cache_dir, "threads": shared.threads,
    });
    let mut manifest = Manifest::new("poisson", config);

    let mut store = make_store(&shared);
    let mut last_solution: Option<Field> = None;
    let mut report: Option<StudyReport> = None;

    match rhs {
        Rhs::Manufactured(s) => {
            let (_, ref_h) = ref_spec.as_ref().unwrap();
            let f_ref = {
                let ref_grid = GridSpec::from_box(&bounds, *ref_h).map_err(run_err)?;
                let op = operator_for(&mut store, &params, &ref_grid).map_err(run_err)?;
                apply_manufactured(&op, s).map_err(run_err)?
            };
            let mf = ManufacturedFn::new(dim, s).map_err(run_err)?;
            let mut err_inf = Vec::new();
            let mut err_2 = Vec::new();
            for &h in &h_vals {
                let grid = GridSpec::from_box(&bounds, h).map_err(run_err)?;
                let op = operator_for(&mut store, &params, &grid).map_err(run_err)?;
                let f = restrict(&f_ref, &grid).map_err(run_err)?;
                let sol = poisson_solve(&op, &f, &shared.cg).map_err(run_err)?;
                let exact = mf.sample(&grid);
                let diff = Field {
                    grid: grid.clone(),
                    values: sol.u.values.iter().zip(&exact.values).map(|(x, y)| x - y).collect(),
                };
                println!("  h={h:.6}: cg_iters={} rel_residual={:.3e}", sol.iters, sol.rel_residual);
                err_inf.push(diff.norm_inf());
                err_2.push(diff.norm_l2());
                last_solution = Some(sol.u);
            }
            report = Some(StudyReport::from_errors(
                &params,
                Some(s),
                Some(*ref_h),
                h_vals.clone(),
                err_inf,
                err_2,
            ));
        }
        Rhs::One => {
            let u_ref = match &ref_spec {
                Some((_, ref_h)) => {
                    let ref_grid = GridSpec::from_box(&bounds, *ref_h).map_err(run_err)?;
                    let op = operator_for(&mut store, &params, &ref_grid).map_err(run_err)?;
                    let f = Field::from_fn(&ref_grid, |_| 1.0);
                    Some(poisson_solve(&op, &f, &shared.cg).map_err(run_err)?.u)
                }
                None => None,
            };
            let mut err_inf = Vec::new();
            let mut err_2 = Vec::new();
            for &h in &h_vals {
                let grid = GridSpec::from_box(&bounds, h).map_err(run_err)?;
                let op = operator_for(&mut store, &params, &grid).map_err(run_err)?;
                let f = Field::from_fn(&grid, |_| 1.0);
                let sol = poisson_solve(&op, &f, &shared.cg).map_err(run_err)?;
                println!("  h={h:.6}: cg_iters={} rel_residual={:.3e}", sol.iters, sol.rel_residual);
                if let Some(u_ref) = &u_ref {
                    let refc = restrict(u_ref, &grid).map_err(run_err)?;
                    let diff = Field {
                        grid: grid.clone(),
                        values: sol.u.values.iter().zip(&refc.values).map(|(x, y)| x - y).collect(),
                    };
                    err_inf.push(diff.norm_inf());
                    err_2.push(diff.norm_l2());
                }
                last_solution = Some(sol.u);
            }
            if let Some((_, ref_h)) = &ref_spec {
                report = Some(StudyReport::from_errors(
                    &params,
                    None,
                    Some(*ref_h),
                    h_vals.clone(),
                    err_inf,
                    err_2,
                ));
            }
        }
    }

    ensure_out(&shared.out)?;
    if let Some(rep) = &report {
        write_text(&shared.out.join("poisson_error.csv"), &rep.to_csv())?;
        manifest.record_file("poisson_error.csv");
        println!("poisson: dim={dim} alpha={alpha} gamma={gamma} rhs={rhs_tok}");
        print_report(rep);
    }
    let sol = last_solution.expect("at least one mesh size was solved");
    write_field(shared.out.join("solution.frlp"), &sol).map_err(run_err)?;
    manifest.record_file("solution.frlp");
    manifest.write(&shared.out)?;
    Ok(())
}

pub fn cmd_allen_cahn(a: &AllenCahnArgs) -> Result<(), CliError> {
    let fc = file_config(&a.common)?;
    let dim = a.dim.or(fc.dim).unwrap_or(2);
    let alpha = a.alpha.or(fc.alpha).ok_or_else(|| validation("missing required --alpha"))?;
    let gamma = a.gamma.or(fc.gamma).unwrap_or(2.0);
    let (h_tok, h) = resolve_mesh(&a.h, &fc.h.as_ref().and_then(|l| l.first().cloned()))?
        .unwrap_or(("1/256".into(), 1.0 / 256.0));
    let tau = a.tau.or(fc.tau).unwrap_or(1e-3);
    let delta = a.delta.or(fc.delta).unwrap_or(0.03);
    let t_end = a.t_end.or(fc.t_end).unwrap_or(0.1);
    let snapshot_every = a.snapshot_every.or(fc.snapshot_every).unwrap_or(10);
    let radius = a.radius.or(fc.radius).unwrap_or(0.12);
    let picard_tol = a.picard_tol.or(fc.picard_tol).unwrap_or(1e-8);
    let picard_max = a.picard_max.or(fc.picard_max).unwrap_or(50);
    let centers_tok = a
        .centers
        .clone()
        .or_else(|| fc.centers.clone())
        .unwrap_or_else(|| match dim {
            3 => "0.4,0.4,0.4;0.6,0.6,0.6".to_string(),
            _ => "0.4,0.4;0.6,0.6".to_string(),
        });
    let bounds_tok = a.bounds.clone().or_else(|| fc.bounds.clone());

    let params = FracParams::with_gamma(dim, alpha, gamma).map_err(validation)?;
    let centers = parse_centers(&centers_tok, dim)?;
    let bounds = match &bounds_tok {
        Some(b) => parse_bounds(b, dim)?,
        None => vec![(0.0, 1.0); dim],
    };
    let grid = GridSpec::from_box(&bounds, h).map_err(validation)?;
    let shared = resolve_shared(&a.common, &fc)?;
    let cfg = AllenCahnConfig {
        delta,
        tau,
        t_end,
        centers,
        radius_offset: radius,
        picard_tol,
        picard_max,
        snapshot_every,
        cg: shared.cg.clone(),
    };
    cfg.validate(dim).map_err(validation)?;
    init_threads(shared.threads)?;

    let config = json!({
        "dim": dim, "alpha": alpha, "gamma": gamma, "h": h_tok,
        "tau": tau, "delta": delta, "t_end": t_end,
        "snapshot_every": snapshot_every, "centers": centers_tok,
        "radius": radius, "picard_tol": picard_tol, "picard_max": picard_max,
        "bounds": bounds_tok,
        "quad_rel_tol": shared.quad.rel_tol, "quad_abs_tol": shared.quad.abs_tol,
        "cg_tol": shared.cg.tol, "cg_max_iter": shared.cg.max_iter,
        "out": shared.out, "cache_dir": shared.cache_dir, "threads": shared.threads,
    });
    let mut manifest = Manifest::new("allen-cahn", config);

    let mut store = make_store(&shared);
    let op = operator_for(&mut store, &params, &grid).map_err(run_err)?;
    let out = allen_cahn_run(&op, &cfg).map_err(run_err)?;

    ensure_out(&shared.out)?;
    write_text(&shared.out.join("mass.csv"), &series_csv("t,mass", &out.mass_series))?;
    manifest.record_file("mass.csv");
    for (i, (t, field)) in out.snapshots.iter().enumerate() {
        let name = format!("snapshot_{i:04}.frlp");
        write_field(shared.out.join(&name), field).map_err(run_err)?;
        manifest.record_file(format!("{name} (t={t})"));
    }
    manifest.write(&shared.out)?;

    let max_picard = out.picard_iters.iter().copied().max().unwrap_or(0);
    println!(
        "allen-cahn: alpha={alpha} h={h_tok} tau={tau} steps={} snapshots={} final_mass={:.6e} max|u|={:.4} max_picard={} cg_iters={}",
        out.mass_series.len() - 1,
        out.snapshots.len(),
        out.mass_series.last().map(|m| m.1).unwrap_or(0.0),
        out.max_abs_u,
        max_picard,
        out.cg_iters_total,
    );
    Ok(())
}

pub fn cmd_stencil(a: &StencilArgs) -> Result<(), CliError> {
    let fc = file_config(&a.common)?;
    let file = a
        .file
        .clone()
        .or_else(|| fc.file.clone())
        .ok_or_else(|| validation("missing required --file"))?;
    match a.action {
        StencilAction::Build => {
            let dim = a.dim.or(fc.dim).unwrap_or(2);
            let alpha = a.alpha.or(fc.alpha).ok_or_else(|| validation("missing required --alpha"))?;
            let gamma = a.gamma.or(fc.gamma).unwrap_or(2.0);
            let n = a.n.or(fc.n).ok_or_else(|| validation("missing required --n"))?;
            let (_, h) = resolve_mesh(&a.h, &fc.h.as_ref().and_then(|l| l.first().cloned()))?
                .ok_or_else(|| validation("missing required --h"))?;
            let params = FracParams::with_gamma(dim, alpha, gamma).map_err(validation)?;
            if n < 2 {
                return Err(validation(format!("--n {n} must be at least 2")));
            }
            let shared = resolve_shared(&a.common, &fc)?;
            init_threads(shared.threads)?;
            let st = match dim {
                2 => build_stencil_2d(&params, n, h, &shared.quad),
                _ => build_stencil_3d(&params, n, h, &shared.quad),
            }
            .map_err(run_err)?;
            if let Some(parent) = file.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)
                        .map_err(|e| CliError::Failure(format!("cannot create {}: {e}", parent.display())))?;
                }
            }
            write_stencil(&file, &st).map_err(run_err)?;
            println!(
                "stencil build: d={dim} alpha={alpha} gamma={gamma} N={n} h={h:.6e} entries={} -> {}",
                st.coeffs.len(),
                file.display()
            );
            Ok(())
        }
        StencilAction::Inspect => {
            let st = read_stencil(&file).map_err(run_err)?;
            let (lo, hi) = st
                .coeffs
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            println!("file:     {}", file.display());
            println!("d:        {}", st.params.d);
            println!("alpha:    {}", st.params.alpha);
            println!("gamma:    {}", st.params.gamma);
            println!("N:        {}", st.n);
            println!("h:        {}", st.h);
            println!("rel_tol:  {}", st.quad_rel_tol);
            println!("abs_tol:  {}", st.quad_abs_tol);
            println!("c_norm:   {:.16e}", st.c_norm);
            println!("tail:     {:.16e}", st.tail);
            println!("entries:  {}", st.coeffs.len());
            println!("center:   {:.16e}", st.center());
            println!("min/max:  {lo:.16e} / {hi:.16e}");
            Ok(())
        }
        StencilAction::Verify => {
            let st = read_stencil(&file).map_err(run_err)?;
            verify_stencil(&st, a.samples, a.seed, a.tol)?;
            println!(
                "stencil verify: {} ok ({} sampled entries, tail and center identities)",
                file.display(),
                a.samples
            );
            Ok(())
        }
    }
}

/// Re-derive random off-center entries by fresh quadrature, recompute the
/// tail, and re-check the zero-row-sum center identity.
fn verify_stencil(st: &Stencil, samples: usize, seed: u64, tol: f64) -> Result<(), CliError> {
    let quad = QuadConfig {
        rel_tol: st.quad_rel_tol,
        abs_tol: st.quad_abs_tol,
        ..QuadConfig::default()
    };
    let (n, h, np1) = (st.n, st.h, st.n + 1);
    let alpha = st.params.alpha;

    let tail = match st.params.d {
        2 => tail_weight_2d(alpha, n as f64 * h, &quad),
        _ => tail_weight_3d(alpha, n as f64 * h, &quad),
    }
    .map_err(run_err)?;
    if (tail - st.tail).abs() > tol * st.tail.abs() {
        return Err(CliError::Failure(format!(
            "tail mismatch: stored {:.16e}, recomputed {tail:.16e}",
            st.tail
        )));
    }

    let center = match st.params.d {
        2 => {
            let mut edge = 0.0;
            let mut bulk = 0.0;
            for m in 1..=n {
                edge += st.coeffs[m];
                for nn in 1..=n {
                    bulk += st.coeffs[m + np1 * nn];
                }
            }
            -4.0 * edge - 4.0 * bulk - 4.0 * tail
        }
        _ => {
            let mut face = 0.0;
            let mut edge = 0.0;
            let mut bulk = 0.0;
            for m in 1..=n {
                face += st.coeffs[m];
                for nn in 1..=n {
                    edge += st.coeffs[m + np1 * nn];
                    for ss in 1..=n {
                        bulk += st.coeffs[m + np1 * (nn + np1 * ss)];
                    }
                }
            }
            -6.0 * face - 12.0 * edge - 8.0 * bulk - 8.0 * tail
        }
    };
    if (center - st.center()).abs() > tol * st.center().abs() {
        return Err(CliError::Failure(format!(
            "center identity violated: stored {:.16e}, recomputed {center:.16e}",
            st.center()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..samples {
        let (direct, table, label) = if st.params.d == 2 {
            let (m, nn) = loop {
                let pair = (rng.gen_range(0..=n), rng.gen_range(0..=n));
                if pair != (0, 0) {
                    break pair;
                }
            };
            let direct = single_coeff_2d(&st.params, n, h, m, nn, &quad).map_err(run_err)?;
            (direct, st.coeff2(m, nn), format!("a_({m},{nn})"))
        } else {
            let (m, nn, ss) = loop {
                let t = (rng.gen_range(0..=n), rng.gen_range(0..=n), rng.gen_range(0..=n));
                if t != (0, 0, 0) {
                    break t;
                }
            };
            let direct = single_coeff_3d(&st.params, n, h, m, nn, ss, &quad).map_err(run_err)?;
            (direct, st.coeff3(m, nn, ss), format!("a_({m},{nn},{ss})"))
        };
        if (direct - table).abs() > tol * table.abs().max(f64::MIN_POSITIVE) {
            return Err(CliError::Failure(format!(
                "entry {label} mismatch (sample {k}): table {table:.16e}, recomputed {direct:.16e}"
            )));
        }
    }
    Ok(())
}
