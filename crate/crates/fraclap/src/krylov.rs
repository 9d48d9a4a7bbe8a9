//! Matrix-free conjugate gradients for the SPD systems of this crate:
//! the fractional operator itself and its Crank–Nicolson shift σI + μA.

use thiserror::Error;

use crate::toeplitz::FractionalOperator;

#[derive(Debug, Error)]
pub enum KrylovError {
    /// ⟨p, Ap⟩ ≤ 0 encountered: the map is not positive definite.
    #[error("CG breakdown at iteration {iter}: curvature {curvature:.3e} <= 0")]
    BreakdownNonSpd { iter: usize, curvature: f64 },
    #[error("shape mismatch: map expects length {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
}

/// A symmetric linear map on flat vectors.
pub trait LinearMap {
    fn len(&self) -> usize;
    /// y = M x.
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// u ↦ σu + μ(Au): the Crank–Nicolson left-hand side (σ = 1, μ = τ/2) and,
/// with σ = 0, μ = 1, the plain operator.
pub struct ShiftedOp<'a> {
    pub sigma: f64,
    pub mu: f64,
    pub op: &'a FractionalOperator,
}

impl LinearMap for ShiftedOp<'_> {
    fn len(&self) -> usize {
        self.op.grid().len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.op.apply_into(x, y);
        for (yi, &xi) in y.iter_mut().zip(x) {
            *yi = self.sigma * xi + self.mu * *yi;
        }
    }
}

impl LinearMap for FractionalOperator {
    fn len(&self) -> usize {
        self.grid().len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_into(x, y);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgConfig {
    /// Relative residual target ‖b − Mx‖₂ ≤ tol·‖b‖₂.
    pub tol: f64,
    /// Iteration cap; None resolves to 10√M + 100.
    pub max_iter: Option<usize>,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: None }
    }
}

impl CgConfig {
    pub fn resolved_max_iter(&self, m: usize) -> usize {
        self.max_iter.unwrap_or_else(|| 10 * (m as f64).sqrt().ceil() as usize + 100)
    }
}

#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iters: usize,
    /// True relative residual ‖b − Mx‖₂/‖b‖₂ at exit.
    pub rel_residual: f64,
    /// False when the iteration cap was reached first.
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Unpreconditioned CG. Convergence is declared only after the *true*
/// residual b − Mx is recomputed and meets the tolerance; the recursion
/// restarts from the true residual if rounding drift spoiled it.
pub fn cg_solve(
    map: &dyn LinearMap,
    b: &[f64],
    x0: Option<&[f64]>,
    cfg: &CgConfig,
) -> Result<CgSolution, KrylovError> {
    let m = map.len();
    if b.len() != m {
        return Err(KrylovError::ShapeMismatch { expected: m, got: b.len() });
    }
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok(CgSolution { x: vec![0.0; m], iters: 0, rel_residual: 0.0, converged: true });
    }
    let mut x = match x0 {
        Some(x0) => {
            if x0.len() != m {
                return Err(KrylovError::ShapeMismatch { expected: m, got: x0.len() });
            }
            x0.to_vec()
        }
        None => vec![0.0; m],
    };
    let max_iter = cfg.resolved_max_iter(m);
    let target = cfg.tol * b_norm;

    let mut work = vec![0.0; m];
    // True residual.
    map.apply(&x, &mut work);
    let mut r: Vec<f64> = b.iter().zip(&work).map(|(bi, wi)| bi - wi).collect();
    let mut rr = dot(&r, &r);
    if rr.sqrt() <= target {
        return Ok(CgSolution {
            x,
            iters: 0,
            rel_residual: rr.sqrt() / b_norm,
            converged: true,
        });
    }
    let mut p = r.clone();
    let mut iters = 0;

    while iters < max_iter {
        iters += 1;
        map.apply(&p, &mut work);
        let pap = dot(&p, &work);
        if pap <= 0.0 {
            return Err(KrylovError::BreakdownNonSpd { iter: iters, curvature: pap });
        }
        let alpha = rr / pap;
        for i in 0..m {
            x[i] += alpha * p[i];
            r[i] -= alpha * work[i];
        }
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= target {
            // Verify against the true residual before declaring success.
            map.apply(&x, &mut work);
            for i in 0..m {
                r[i] = b[i] - work[i];
            }
            let true_rr = dot(&r, &r);
            if true_rr.sqrt() <= target {
                return Ok(CgSolution {
                    x,
                    iters,
                    rel_residual: true_rr.sqrt() / b_norm,
                    converged: true,
                });
            }
            // Drift: restart the recursion from the true residual.
            rr = true_rr;
            p.copy_from_slice(&r);
            continue;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..m {
            p[i] = r[i] + beta * p[i];
        }
    }

    map.apply(&x, &mut work);
    let true_rr: f64 = b
        .iter()
        .zip(&work)
        .map(|(bi, wi)| (bi - wi) * (bi - wi))
        .sum();
    Ok(CgSolution {
        x,
        iters,
        rel_residual: true_rr.sqrt() / b_norm,
        converged: false,
    })
}
