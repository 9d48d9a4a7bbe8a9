//! Finite difference stencil of the fractional Laplacian.
//!
//! The kernel-splitting discretization writes (−Δ)^{α/2}u(x) as a weighted
//! trapezoidal sum against ω_γ(ξ) = |ξ|^{γ−(d+α)}, producing coefficients
//!
//!   a_mn  = (2^{σ(m,n)} / (4 |ξ_mn|^γ)) (∫_{T_mn} ω + c̄_mn ⌊γ/2⌋ ∫_{I_00} ω)
//!
//! in 2D, where σ counts zero indices, T_mn is the (up to four cell)
//! neighborhood of the node ξ_mn clipped to D₁ = (0, Nh)^d, and the I₀₀
//! correction (active only for γ = 2, indices ≤ 1) restores second-order
//! consistency at the singular cell; analogously in 3D with prefactor
//! 2^σ/(8|ξ|^γ) and corner corrections +5/3 (σ = 2) and −1 (σ ∈ {0, 1}).
//! The center coefficient a_{0…0} collects all −2^d u(x) terms plus the
//! exterior (Dirichlet) tail over D₂, so the scheme annihilates constants
//! extended by zero.
//!
//! Every coefficient scales as a(h) = h^{−α} a(1); tables are assembled for
//! indices 0..N per axis (index-N entries participate only in a_{0…0}).

use rayon::prelude::*;
use thiserror::Error;

use crate::singquad::{
    cell_weight_2d, cell_weight_3d, tail_weight_2d, tail_weight_3d, AxisBox, QuadConfig,
    QuadError, WeightExponent,
};

#[derive(Debug, Error)]
pub enum StencilError {
    #[error("invalid fractional parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// Dimension, fractional power, and splitting parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracParams {
    pub d: usize,
    pub alpha: f64,
    pub gamma: f64,
}

impl FracParams {
    /// γ defaults to 2, the optimal splitting for smooth solutions.
    pub fn new(d: usize, alpha: f64) -> Result<Self, StencilError> {
        Self::with_gamma(d, alpha, 2.0)
    }

    pub fn with_gamma(d: usize, alpha: f64, gamma: f64) -> Result<Self, StencilError> {
        let p = Self { d, alpha, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), StencilError> {
        if !(self.d == 2 || self.d == 3) {
            return Err(StencilError::InvalidParams(format!("d = {} not in {{2,3}}", self.d)));
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(StencilError::InvalidParams(format!(
                "alpha = {} must lie in (0, 2)",
                self.alpha
            )));
        }
        if !(self.gamma > self.alpha && self.gamma <= 2.0) {
            return Err(StencilError::InvalidParams(format!(
                "gamma = {} must lie in (alpha, 2]",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Normalization constant c_{d,α} = 2^{α−1} α Γ((d+α)/2) / (π^{d/2} Γ(1−α/2)).
pub fn norm_const(d: usize, alpha: f64) -> Result<f64, StencilError> {
    if !(d == 2 || d == 3) {
        return Err(StencilError::InvalidParams(format!("d = {d} not in {{2,3}}")));
    }
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(StencilError::InvalidParams(format!("alpha = {alpha} must lie in (0, 2)")));
    }
    let lg = statrs::function::gamma::ln_gamma;
    let log = (alpha - 1.0) * std::f64::consts::LN_2 + alpha.ln() + lg((d as f64 + alpha) / 2.0)
        - 0.5 * d as f64 * std::f64::consts::PI.ln()
        - lg(1.0 - alpha / 2.0);
    Ok(log.exp())
}

/// Assembled coefficient table for one (d, α, γ, N, h).
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub params: FracParams,
    /// Kernel extent in cells; L = N h.
    pub n: usize,
    pub h: f64,
    /// (N+1)^d coefficients, index m + (N+1)(n + (N+1) s).
    pub coeffs: Vec<f64>,
    /// c_{d,α}.
    pub c_norm: f64,
    /// ∫_{D₂} |ξ|^{−(d+α)} over the exterior of (0, Nh)^d in one orthant.
    pub tail: f64,
    /// Quadrature tolerances the table was built with; part of the cache identity.
    pub quad_rel_tol: f64,
    pub quad_abs_tol: f64,
}

impl Stencil {
    #[inline]
    pub fn coeff2(&self, m: usize, n: usize) -> f64 {
        debug_assert_eq!(self.params.d, 2);
        self.coeffs[m + (self.n + 1) * n]
    }

    #[inline]
    pub fn coeff3(&self, m: usize, n: usize, s: usize) -> f64 {
        debug_assert_eq!(self.params.d, 3);
        self.coeffs[m + (self.n + 1) * (n + (self.n + 1) * s)]
    }

    /// Whether the I_{0…0} corner correction participates (γ = 2 exactly).
    pub fn correction_active(&self) -> bool {
        self.params.gamma == 2.0
    }

    /// Center coefficient a_{0…0}.
    pub fn center(&self) -> f64 {
        self.coeffs[0]
    }
}

/// Cells adjacent to grid coordinate k, clipped to [0, N−1]: {k−1, k} ∩ range.
#[inline]
fn cells_at(k: usize, n: usize) -> std::ops::Range<usize> {
    let lo = k.saturating_sub(1);
    let hi = (k + 1).min(n);
    lo..hi
}

#[inline]
fn pack2(i: usize, j: usize) -> usize {
    debug_assert!(i <= j);
    j * (j + 1) / 2 + i
}

fn unpack2(idx: usize) -> (usize, usize) {
    let mut j = (((8 * idx + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
    while (j + 1) * (j + 2) / 2 <= idx {
        j += 1;
    }
    while j * (j + 1) / 2 > idx {
        j -= 1;
    }
    (idx - j * (j + 1) / 2, j)
}

#[inline]
fn pack3(i: usize, j: usize, k: usize) -> usize {
    debug_assert!(i <= j && j <= k);
    k * (k + 1) * (k + 2) / 6 + j * (j + 1) / 2 + i
}

fn unpack3(idx: usize) -> (usize, usize, usize) {
    let mut k = 0;
    while (k + 1) * (k + 2) * (k + 3) / 6 <= idx {
        k += 1;
    }
    let rem = idx - k * (k + 1) * (k + 2) / 6;
    let (i, j) = unpack2(rem);
    (i, j, k)
}

/// Build the 2D coefficient table: a_mn for (m, n) ∈ [0, N]².
pub fn build_stencil_2d(
    params: &FracParams,
    n: usize,
    h: f64,
    cfg: &QuadConfig,
) -> Result<Stencil, StencilError> {
    params.validate()?;
    if params.d != 2 {
        return Err(StencilError::InvalidParams(format!("d = {} but 2D build requested", params.d)));
    }
    if n < 2 {
        return Err(StencilError::InvalidParams(format!("N = {n} must be >= 2")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(StencilError::InvalidParams(format!("h = {h} must be positive")));
    }
    let (alpha, gamma) = (params.alpha, params.gamma);
    let p = WeightExponent::new(2.0 + alpha - gamma)
        .map_err(StencilError::Quadrature)?;

    // Cell integrals of ω over each mesh cell, unique up to i <-> j.
    let cells: Vec<f64> = (0..n * (n + 1) / 2)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = unpack2(idx);
            let cell = AxisBox::new(
                [i as f64 * h, j as f64 * h],
                [(i + 1) as f64 * h, (j + 1) as f64 * h],
            )?;
            cell_weight_2d(p, cell, cfg)
        })
        .collect::<Result<_, QuadError>>()?;
    let w = |i: usize, j: usize| cells[pack2(i.min(j), i.max(j))];
    let w00 = w(0, 0);
    let corr_on = gamma == 2.0;

    let np1 = n + 1;
    let mut coeffs = vec![0.0f64; np1 * np1];
    for nn in 0..=n {
        for m in 0..=nn {
            if m == 0 && nn == 0 {
                continue;
            }
            let sigma = (m == 0) as u32 + (nn == 0) as u32;
            let xi = h * ((m * m + nn * nn) as f64).sqrt();
            let pre = (1 << sigma) as f64 / (4.0 * xi.powf(gamma));
            let mut sum = 0.0;
            for ci in cells_at(m, n) {
                for cj in cells_at(nn, n) {
                    sum += w(ci, cj);
                }
            }
            if corr_on && nn <= 1 {
                // c̄_{01} = c̄_{10} = 1, c̄_{11} = −1.
                sum += if m == 1 && nn == 1 { -w00 } else { w00 };
            }
            let a = pre * sum;
            coeffs[m + np1 * nn] = a;
            coeffs[nn + np1 * m] = a;
        }
    }

    let tail = tail_weight_2d(alpha, n as f64 * h, cfg)?;
    let mut edge = 0.0;
    let mut bulk = 0.0;
    for m in 1..=n {
        edge += coeffs[m];
        for nn in 1..=n {
            bulk += coeffs[m + np1 * nn];
        }
    }
    coeffs[0] = -4.0 * edge - 4.0 * bulk - 4.0 * tail;

    Ok(Stencil {
        params: *params,
        n,
        h,
        coeffs,
        c_norm: norm_const(2, alpha)?,
        tail,
        quad_rel_tol: cfg.rel_tol,
        quad_abs_tol: cfg.abs_tol,
    })
}

/// Build the 3D coefficient table: a_mns for (m, n, s) ∈ [0, N]³.
pub fn build_stencil_3d(
    params: &FracParams,
    n: usize,
    h: f64,
    cfg: &QuadConfig,
) -> Result<Stencil, StencilError> {
    params.validate()?;
    if params.d != 3 {
        return Err(StencilError::InvalidParams(format!("d = {} but 3D build requested", params.d)));
    }
    if n < 2 {
        return Err(StencilError::InvalidParams(format!("N = {n} must be >= 2")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(StencilError::InvalidParams(format!("h = {h} must be positive")));
    }
    let (alpha, gamma) = (params.alpha, params.gamma);
    let p = WeightExponent::new(3.0 + alpha - gamma)
        .map_err(StencilError::Quadrature)?;

    let cells: Vec<f64> = (0..n * (n + 1) * (n + 2) / 6)
        .into_par_iter()
        .map(|idx| {
            let (i, j, k) = unpack3(idx);
            let cell = AxisBox::new(
                [i as f64 * h, j as f64 * h, k as f64 * h],
                [(i + 1) as f64 * h, (j + 1) as f64 * h, (k + 1) as f64 * h],
            )?;
            cell_weight_3d(p, cell, cfg)
        })
        .collect::<Result<_, QuadError>>()?;
    let w = |i: usize, j: usize, k: usize| {
        let mut t = [i, j, k];
        t.sort_unstable();
        cells[pack3(t[0], t[1], t[2])]
    };
    let w000 = w(0, 0, 0);
    let corr_on = gamma == 2.0;

    let np1 = n + 1;
    let mut coeffs = vec![0.0f64; np1 * np1 * np1];
    for ss in 0..=n {
        for nn in 0..=ss {
            for m in 0..=nn {
                if m == 0 && nn == 0 && ss == 0 {
                    continue;
                }
                let sigma = (m == 0) as u32 + (nn == 0) as u32 + (ss == 0) as u32;
                let xi = h * ((m * m + nn * nn + ss * ss) as f64).sqrt();
                let pre = (1 << sigma) as f64 / (8.0 * xi.powf(gamma));
                let mut sum = 0.0;
                for ci in cells_at(m, n) {
                    for cj in cells_at(nn, n) {
                        for ck in cells_at(ss, n) {
                            sum += w(ci, cj, ck);
                        }
                    }
                }
                if corr_on && ss <= 1 {
                    // Corner correction restoring the classical limit:
                    // +5/3 when two indices vanish, −1 otherwise.
                    sum += if sigma == 2 { 5.0 / 3.0 * w000 } else { -w000 };
                }
                let a = pre * sum;
                // Mirror over all permutations for exact index symmetry.
                for (x, y, z) in [
                    (m, nn, ss),
                    (m, ss, nn),
                    (nn, m, ss),
                    (nn, ss, m),
                    (ss, m, nn),
                    (ss, nn, m),
                ] {
                    coeffs[x + np1 * (y + np1 * z)] = a;
                }
            }
        }
    }

    let tail = tail_weight_3d(alpha, n as f64 * h, cfg)?;
    let mut face = 0.0;
    let mut edge = 0.0;
    let mut bulk = 0.0;
    for m in 1..=n {
        face += coeffs[m];
        for nn in 1..=n {
            edge += coeffs[m + np1 * nn];
            for ss in 1..=n {
                bulk += coeffs[m + np1 * (nn + np1 * ss)];
            }
        }
    }
    coeffs[0] = -6.0 * face - 12.0 * edge - 8.0 * bulk - 8.0 * tail;

    Ok(Stencil {
        params: *params,
        n,
        h,
        coeffs,
        c_norm: norm_const(3, alpha)?,
        tail,
        quad_rel_tol: cfg.rel_tol,
        quad_abs_tol: cfg.abs_tol,
    })
}

fn check_single_entry(params: &FracParams, d: usize, n: usize, h: f64, idx_max: usize, center: bool) -> Result<(), StencilError> {
    params.validate()?;
    if params.d != d {
        return Err(StencilError::InvalidParams(format!("d = {} but {d}D entry requested", params.d)));
    }
    if n < 2 || !(h > 0.0 && h.is_finite()) {
        return Err(StencilError::InvalidParams(format!("invalid extent N = {n}, h = {h}")));
    }
    if idx_max > n {
        return Err(StencilError::InvalidParams(format!("index exceeds N = {n}")));
    }
    if center {
        return Err(StencilError::InvalidParams(
            "center coefficient is defined by the zero-row-sum identity, not a single quadrature".into(),
        ));
    }
    Ok(())
}

/// Recompute one off-center 2D coefficient directly from quadrature,
/// independent of any assembled table (cache verification oracle).
pub fn single_coeff_2d(
    params: &FracParams,
    n: usize,
    h: f64,
    m: usize,
    nn: usize,
    cfg: &QuadConfig,
) -> Result<f64, StencilError> {
    check_single_entry(params, 2, n, h, m.max(nn), m == 0 && nn == 0)?;
    let (alpha, gamma) = (params.alpha, params.gamma);
    let p = WeightExponent::new(2.0 + alpha - gamma).map_err(StencilError::Quadrature)?;
    let cell = |i: usize, j: usize| -> Result<f64, QuadError> {
        // Canonical orientation (i ≤ j) matches the table-build lookups bitwise.
        let (i, j) = (i.min(j), i.max(j));
        let b = AxisBox::new(
            [i as f64 * h, j as f64 * h],
            [(i + 1) as f64 * h, (j + 1) as f64 * h],
        )?;
        cell_weight_2d(p, b, cfg)
    };
    let sigma = (m == 0) as u32 + (nn == 0) as u32;
    let xi = h * ((m * m + nn * nn) as f64).sqrt();
    let pre = (1 << sigma) as f64 / (4.0 * xi.powf(gamma));
    let mut sum = 0.0;
    for ci in cells_at(m, n) {
        for cj in cells_at(nn, n) {
            sum += cell(ci, cj)?;
        }
    }
    if gamma == 2.0 && m.max(nn) <= 1 {
        let w00 = cell(0, 0)?;
        sum += if m == 1 && nn == 1 { -w00 } else { w00 };
    }
    Ok(pre * sum)
}

/// 3D counterpart of [`single_coeff_2d`].
pub fn single_coeff_3d(
    params: &FracParams,
    n: usize,
    h: f64,
    m: usize,
    nn: usize,
    ss: usize,
    cfg: &QuadConfig,
) -> Result<f64, StencilError> {
    check_single_entry(params, 3, n, h, m.max(nn).max(ss), m == 0 && nn == 0 && ss == 0)?;
    let (alpha, gamma) = (params.alpha, params.gamma);
    let p = WeightExponent::new(3.0 + alpha - gamma).map_err(StencilError::Quadrature)?;
    let cell = |i: usize, j: usize, k: usize| -> Result<f64, QuadError> {
        let mut t = [i, j, k];
        t.sort_unstable();
        let b = AxisBox::new(
            [t[0] as f64 * h, t[1] as f64 * h, t[2] as f64 * h],
            [(t[0] + 1) as f64 * h, (t[1] + 1) as f64 * h, (t[2] + 1) as f64 * h],
        )?;
        cell_weight_3d(p, b, cfg)
    };
    let sigma = (m == 0) as u32 + (nn == 0) as u32 + (ss == 0) as u32;
    let xi = h * ((m * m + nn * nn + ss * ss) as f64).sqrt();
    let pre = (1 << sigma) as f64 / (8.0 * xi.powf(gamma));
    let mut sum = 0.0;
    for ci in cells_at(m, n) {
        for cj in cells_at(nn, n) {
            for ck in cells_at(ss, n) {
                sum += cell(ci, cj, ck)?;
            }
        }
    }
    if gamma == 2.0 && m.max(nn).max(ss) <= 1 {
        let w000 = cell(0, 0, 0)?;
        sum += if sigma == 2 { 5.0 / 3.0 * w000 } else { -w000 };
    }
    Ok(pre * sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    #[test]
    fn norm_const_known_values() {
        // Γ(3/2) = √π/2 and Γ(1/2) = √π give 1/(2π); Γ(2) = 1 gives 1/π².
        let c2 = norm_const(2, 1.0).unwrap();
        assert!((c2 - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
        let c3 = norm_const(3, 1.0).unwrap();
        assert!((c3 - 1.0 / (std::f64::consts::PI * std::f64::consts::PI)).abs() < 1e-15);
        // Pole of Γ(1−α/2) forces c_{2,α} → 0 as α → 2⁻.
        assert!(norm_const(2, 1.9999).unwrap() < 1e-3);
        assert!(norm_const(2, 2.0).is_err());
    }

    #[test]
    fn pack_unpack_roundtrip() {
        for idx in 0..500 {
            let (i, j) = unpack2(idx);
            assert!(i <= j);
            assert_eq!(pack2(i, j), idx);
            let (a, b, c) = unpack3(idx);
            assert!(a <= b && b <= c);
            assert_eq!(pack3(a, b, c), idx);
        }
    }

    #[test]
    fn hand_assembled_a10_2d() {
        // α = 1, γ = 2, h = 1: a_10 = (2/4)(W00 + W10 + W00) with
        // W00 = 2 ln(1+√2) and W10 = [x asinh(1/x) + asinh x]₁².
        let w00 = 2.0 * (1.0f64 + 2.0f64.sqrt()).ln();
        let w10 = 2.0 * 0.5f64.asinh() + 2.0f64.asinh() - 2.0 * 1.0f64.asinh();
        let expect = 0.5 * (2.0 * w00 + w10);
        let params = FracParams::new(2, 1.0).unwrap();
        let st = build_stencil_2d(&params, 2, 1.0, &cfg()).unwrap();
        assert!(
            (st.coeff2(1, 0) - expect).abs() < 1e-12 * expect,
            "a_10 = {}, want {expect}",
            st.coeff2(1, 0)
        );
    }

    #[test]
    fn symmetry_exact_2d() {
        let params = FracParams::with_gamma(2, 0.7, 1.4).unwrap();
        let st = build_stencil_2d(&params, 6, 0.25, &cfg()).unwrap();
        for m in 0..=6 {
            for n in 0..=6 {
                assert_eq!(st.coeff2(m, n), st.coeff2(n, m));
            }
        }
    }

    #[test]
    fn symmetry_exact_3d() {
        let params = FracParams::new(3, 1.3).unwrap();
        let st = build_stencil_3d(&params, 3, 0.5, &cfg()).unwrap();
        for m in 0..=3 {
            for n in 0..=3 {
                for s in 0..=3 {
                    let a = st.coeff3(m, n, s);
                    assert_eq!(a, st.coeff3(m, s, n));
                    assert_eq!(a, st.coeff3(n, m, s));
                    assert_eq!(a, st.coeff3(n, s, m));
                    assert_eq!(a, st.coeff3(s, m, n));
                    assert_eq!(a, st.coeff3(s, n, m));
                }
            }
        }
    }

    #[test]
    fn center_identity_2d() {
        let params = FracParams::new(2, 1.5).unwrap();
        let st = build_stencil_2d(&params, 8, 0.25, &cfg()).unwrap();
        let mut sum = 0.0;
        for m in 1..=8 {
            sum += -2.0 * (st.coeff2(m, 0) + st.coeff2(0, m));
            for n in 1..=8 {
                sum += -4.0 * st.coeff2(m, n);
            }
        }
        sum -= 4.0 * st.tail;
        assert!((st.center() - sum).abs() < 1e-10 * sum.abs());
        assert!(st.center() < 0.0);
        assert!(-st.c_norm * st.center() > 0.0);
    }

    #[test]
    fn center_identity_3d() {
        let params = FracParams::new(3, 0.8).unwrap();
        let st = build_stencil_3d(&params, 4, 0.5, &cfg()).unwrap();
        let mut sum = -8.0 * st.tail;
        for m in 1..=4 {
            sum += -6.0 * st.coeff3(m, 0, 0);
            for n in 1..=4 {
                sum += -12.0 * st.coeff3(m, n, 0);
                for s in 1..=4 {
                    sum += -8.0 * st.coeff3(m, n, s);
                }
            }
        }
        assert!((st.center() - sum).abs() < 1e-10 * sum.abs());
        assert!(st.center() < 0.0);
    }

    #[test]
    fn mesh_scaling_law() {
        // a(h) = h^{−α} a(1) exactly (prefactor h^{−γ}, cells h^{γ−α}).
        let params = FracParams::with_gamma(2, 0.7, 1.8).unwrap();
        let s1 = build_stencil_2d(&params, 4, 1.0, &cfg()).unwrap();
        let s2 = build_stencil_2d(&params, 4, 0.5, &cfg()).unwrap();
        let r = 0.5f64.powf(-0.7);
        for (c1, c2) in s1.coeffs.iter().zip(&s2.coeffs) {
            assert!(
                (c2 - r * c1).abs() <= 1e-11 * (r * c1).abs().max(1e-300),
                "{c2} vs {}",
                r * c1
            );
        }
        let p3 = FracParams::new(3, 1.2).unwrap();
        let t1 = build_stencil_3d(&p3, 3, 1.0, &cfg()).unwrap();
        let t2 = build_stencil_3d(&p3, 3, 0.25, &cfg()).unwrap();
        let r3 = 0.25f64.powf(-1.2);
        for (c1, c2) in t1.coeffs.iter().zip(&t2.coeffs) {
            assert!((c2 - r3 * c1).abs() <= 1e-11 * (r3 * c1).abs().max(1e-300));
        }
    }

    #[test]
    fn correction_inactive_below_gamma_two() {
        let params = FracParams::with_gamma(2, 1.0, 1.5).unwrap();
        let st = build_stencil_2d(&params, 4, 0.5, &cfg()).unwrap();
        assert!(!st.correction_active());
        // Recompute a_11 from raw cell integrals: no I₀₀ term.
        let p = WeightExponent::new(2.0 + 1.0 - 1.5).unwrap();
        let h = 0.5;
        let mut sum = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let cell = AxisBox::new(
                    [i as f64 * h, j as f64 * h],
                    [(i + 1) as f64 * h, (j + 1) as f64 * h],
                )
                .unwrap();
                sum += cell_weight_2d(p, cell, &cfg()).unwrap();
            }
        }
        let expect = sum / (4.0 * (2.0f64.sqrt() * h).powf(1.5));
        assert!((st.coeff2(1, 1) - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn classical_limit_2d() {
        // As α → 2⁻ with γ = 2 the scheme collapses to the 5-point stencil:
        // c·a_10 → 1/h², all other entries vanish at scale 1/h².
        for alpha in [1.99, 1.999] {
            let params = FracParams::new(2, alpha).unwrap();
            let h = 0.25;
            let st = build_stencil_2d(&params, 8, h, &cfg()).unwrap();
            let scale = 1.0 / (h * h);
            let lead = st.c_norm * st.coeff2(1, 0);
            let tol = if alpha == 1.999 { 0.01 } else { 0.05 };
            assert!(
                (lead - scale).abs() < tol * scale,
                "alpha {alpha}: c a_10 = {lead}, want {scale}"
            );
            for m in 0..=8 {
                for n in 0..=8 {
                    if m + n > 1 {
                        let v = st.c_norm * st.coeff2(m, n);
                        assert!(
                            v.abs() < 1e-2 * scale,
                            "alpha {alpha}: c a_{m}{n} = {v} not small"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn classical_limit_3d() {
        // Seven-point limit: c·a_100 → 1/h²; the corner entries must vanish,
        // which exercises the σ-dependent correction including σ = 0.
        let params = FracParams::new(3, 1.999).unwrap();
        let h = 0.5;
        let st = build_stencil_3d(&params, 4, h, &cfg()).unwrap();
        let scale = 1.0 / (h * h);
        let lead = st.c_norm * st.coeff3(1, 0, 0);
        assert!((lead - scale).abs() < 0.01 * scale, "c a_100 = {lead}, want {scale}");
        for m in 0..=4 {
            for n in 0..=4 {
                for s in 0..=4 {
                    if m + n + s > 1 {
                        let v = st.c_norm * st.coeff3(m, n, s);
                        assert!(v.abs() < 1e-2 * scale, "c a_{m}{n}{s} = {v} not small");
                    }
                }
            }
        }
    }

    #[test]
    fn single_entry_matches_table_2d() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for &(alpha, gamma) in &[(0.6, 2.0), (1.4, 2.0), (1.1, 1.6)] {
            let params = FracParams::with_gamma(2, alpha, gamma).unwrap();
            let n = 6;
            let st = build_stencil_2d(&params, n, 0.25, &cfg()).unwrap();
            for _ in 0..10 {
                let (m, nn) = loop {
                    let pair = (rng.gen_range(0..=n), rng.gen_range(0..=n));
                    if pair != (0, 0) {
                        break pair;
                    }
                };
                let direct = single_coeff_2d(&params, n, 0.25, m, nn, &cfg()).unwrap();
                let table = st.coeff2(m, nn);
                assert!(
                    (direct - table).abs() <= 1e-12 * table.abs(),
                    "a_{m}{nn}: direct {direct:e} vs table {table:e}"
                );
            }
        }
    }

    #[test]
    fn single_entry_matches_table_3d() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let params = FracParams::new(3, 1.2).unwrap();
        let n = 4;
        let st = build_stencil_3d(&params, n, 0.5, &cfg()).unwrap();
        for _ in 0..10 {
            let (m, nn, ss) = loop {
                let t = (rng.gen_range(0..=n), rng.gen_range(0..=n), rng.gen_range(0..=n));
                if t != (0, 0, 0) {
                    break t;
                }
            };
            let direct = single_coeff_3d(&params, n, 0.5, m, nn, ss, &cfg()).unwrap();
            let table = st.coeff3(m, nn, ss);
            assert!(
                (direct - table).abs() <= 1e-12 * table.abs(),
                "a_{m}{nn}{ss}: direct {direct:e} vs table {table:e}"
            );
        }
    }

    #[test]
    fn single_entry_rejects_center_and_out_of_range() {
        let params = FracParams::new(2, 1.0).unwrap();
        assert!(single_coeff_2d(&params, 4, 0.25, 0, 0, &cfg()).is_err());
        assert!(single_coeff_2d(&params, 4, 0.25, 5, 0, &cfg()).is_err());
        let params3 = FracParams::new(3, 1.0).unwrap();
        assert!(single_coeff_3d(&params3, 4, 0.25, 0, 0, 0, &cfg()).is_err());
    }
}
