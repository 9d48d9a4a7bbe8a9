//! Singular and tail integrals of the kernel weight |ξ|^{−p}.
//!
//! Every stencil coefficient reduces to integrals of the radial power
//! |ξ|^{−p} over axis-aligned boxes in the positive orthant, plus one
//! improper integral over the exterior region D₂ = ℝ^d₊ \ (0, L)^d.
//! Boxes touching the origin are reduced analytically before quadrature:
//! in 2D by polar coordinates (the radial power integrates in closed form,
//! leaving a smooth angular integrand), in 3D by a Duffy-type split into
//! three apex pyramids. Boxes away from the origin see a smooth integrand
//! and use escalating tensor Gauss rules with adaptive bisection.
//!
//! Tail integrals are decomposed by inclusion–exclusion into slabs with
//! closed-form values and corner overlaps that reduce to one-dimensional
//! angular quadratures.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use thiserror::Error;

/// Errors from the quadrature layer.
#[derive(Debug, Error)]
pub enum QuadError {
    /// The integrand |ξ|^{−p} is not integrable on the given domain
    /// (an origin-touching box in dimension d requires p < d).
    #[error("|xi|^-{p} is not integrable over an origin-corner box in {dim}D")]
    NonIntegrable { p: f64, dim: usize },
    /// The subdivision budget ran out before the tolerance was met.
    #[error("quadrature budget exhausted ({subdivisions} subdivisions, error estimate {err_est:.3e})")]
    BudgetExceeded { subdivisions: u64, err_est: f64 },
    /// Invalid input geometry or configuration.
    #[error("invalid quadrature input: {0}")]
    Invalid(String),
}

/// Decay exponent p of the integrand |ξ|^{−p}.
///
/// For the 2D cell weight p = (2+α) − γ, for the 3D cell weight
/// p = (3+α) − γ, and for tail integrals p = d + α.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightExponent {
    pub p: f64,
}

impl WeightExponent {
    pub fn new(p: f64) -> Result<Self, QuadError> {
        if !p.is_finite() || p < 0.0 {
            return Err(QuadError::Invalid(format!("exponent p = {p} must be finite and >= 0")));
        }
        Ok(Self { p })
    }
}

/// Axis-aligned box in the closed positive orthant, 0 ≤ lo_i < hi_i.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisBox<const D: usize> {
    lo: [f64; D],
    hi: [f64; D],
}

impl<const D: usize> AxisBox<D> {
    pub fn new(lo: [f64; D], hi: [f64; D]) -> Result<Self, QuadError> {
        for i in 0..D {
            if !(lo[i].is_finite() && hi[i].is_finite() && 0.0 <= lo[i] && lo[i] < hi[i]) {
                return Err(QuadError::Invalid(format!(
                    "box axis {i}: need 0 <= lo < hi, got [{}, {}]",
                    lo[i], hi[i]
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> [f64; D] {
        self.lo
    }

    pub fn hi(&self) -> [f64; D] {
        self.hi
    }

    /// True when the box has the origin as a corner (integrand singular there).
    pub fn touches_origin(&self) -> bool {
        self.lo.iter().all(|&v| v == 0.0)
    }

    pub fn volume(&self) -> f64 {
        (0..D).map(|i| self.hi[i] - self.lo[i]).product()
    }

    fn longest_axis(&self) -> usize {
        (0..D)
            .max_by(|&a, &b| (self.hi[a] - self.lo[a]).total_cmp(&(self.hi[b] - self.lo[b])))
            .unwrap()
    }

    fn split(&self, axis: usize) -> (Self, Self) {
        let mid = 0.5 * (self.lo[axis] + self.hi[axis]);
        let mut left = *self;
        let mut right = *self;
        left.hi[axis] = mid;
        right.lo[axis] = mid;
        (left, right)
    }
}

/// Tolerances and budget for all quadratures in this module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    /// Relative tolerance on each returned integral.
    pub rel_tol: f64,
    /// Absolute floor below which refinement stops.
    pub abs_tol: f64,
    /// Maximum number of subdivisions per top-level integral.
    pub max_subdivisions: u64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-12, abs_tol: 1e-15, max_subdivisions: 1 << 20 }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<(), QuadError> {
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(QuadError::Invalid(format!("rel_tol = {} must be > 0", self.rel_tol)));
        }
        if !(self.abs_tol >= 0.0 && self.abs_tol.is_finite()) {
            return Err(QuadError::Invalid(format!("abs_tol = {} must be >= 0", self.abs_tol)));
        }
        Ok(())
    }

    fn tol_for(&self, magnitude: f64) -> f64 {
        (self.rel_tol * magnitude.abs()).max(self.abs_tol)
    }
}

// ---------------------------------------------------------------------------
// 1D adaptive Gauss–Kronrod (G7, K15).
// ---------------------------------------------------------------------------

const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// One (G7, K15) panel on [a, b]: returns (K15 value, error estimate).
fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let hl = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    let fc = f(c);
    let mut resk = WGK[7] * fc;
    let mut resg = WG[3] * fc;
    let mut resabs = WGK[7] * fc.abs();
    let mut fv = [0.0f64; 15];
    fv[7] = fc;
    for j in 0..7 {
        let x = hl * XGK[j];
        let f1 = f(c - x);
        let f2 = f(c + x);
        fv[j] = f1;
        fv[14 - j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = resk * 0.5;
    let mut resasc = WGK[7] * (fc - reskh).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv[j] - reskh).abs() + (fv[14 - j] - reskh).abs());
    }
    let value = resk * hl;
    let resasc = resasc * hl.abs();
    let mut err = ((resk - resg) * hl).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    let eps = f64::EPSILON * 50.0 * resabs * hl.abs();
    (value, err.max(eps))
}

/// Globally adaptive 1D quadrature: bisect the worst panel until the summed
/// error estimate meets the tolerance.
fn adaptive_gk(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    cfg: &QuadConfig,
) -> Result<f64, QuadError> {
    struct Seg {
        a: f64,
        b: f64,
        val: f64,
        err: f64,
    }
    let (val, err) = gk15(f, a, b);
    let mut segs = vec![Seg { a, b, val, err }];
    let mut total_val = val;
    let mut total_err = err;
    let mut subdivisions: u64 = 0;
    while total_err > cfg.tol_for(total_val) {
        if subdivisions >= cfg.max_subdivisions {
            return Err(QuadError::BudgetExceeded { subdivisions, err_est: total_err });
        }
        let worst = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .map(|(i, _)| i)
            .unwrap();
        let seg = segs.swap_remove(worst);
        total_val -= seg.val;
        total_err -= seg.err;
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval at floating point resolution; keep its estimate.
            total_val += seg.val;
            segs.push(seg);
            break;
        }
        for (sa, sb) in [(seg.a, mid), (mid, seg.b)] {
            let (v, e) = gk15(f, sa, sb);
            total_val += v;
            total_err += e;
            segs.push(Seg { a: sa, b: sb, val: v, err: e });
        }
        subdivisions += 1;
    }
    Ok(total_val)
}

// ---------------------------------------------------------------------------
// Tensor Gauss–Legendre rules on boxes.
// ---------------------------------------------------------------------------

/// Gauss–Legendre nodes/weights on [-1, 1], cached per order.
fn gauss_legendre(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static (Vec<f64>, Vec<f64>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    *guard.entry(n).or_insert_with(|| {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..(n + 1) / 2 {
            // Newton iteration from the Chebyshev estimate.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0f64, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Box::leak(Box::new((nodes, weights)))
    })
}

fn tensor_gauss<const D: usize>(f: &dyn Fn([f64; D]) -> f64, bx: &AxisBox<D>, n: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(n);
    let mut xs = [[0.0f64; 64]; D];
    let mut ws = [[0.0f64; 64]; D];
    for ax in 0..D {
        let c = 0.5 * (bx.lo[ax] + bx.hi[ax]);
        let hl = 0.5 * (bx.hi[ax] - bx.lo[ax]);
        for (k, (&x, &w)) in nodes.iter().zip(weights).enumerate() {
            xs[ax][k] = c + hl * x;
            ws[ax][k] = w * hl;
        }
    }
    let mut sum = 0.0;
    match D {
        2 => {
            for i in 0..n {
                let mut row = 0.0;
                for j in 0..n {
                    let mut pt = [0.0; D];
                    pt[0] = xs[0][i];
                    pt[1] = xs[1][j];
                    row += ws[1][j] * f(pt);
                }
                sum += ws[0][i] * row;
            }
        }
        3 => {
            for i in 0..n {
                for j in 0..n {
                    let mut row = 0.0;
                    for k in 0..n {
                        let mut pt = [0.0; D];
                        pt[0] = xs[0][i];
                        pt[1] = xs[1][j];
                        pt[2] = xs[2][k];
                        row += ws[2][k] * f(pt);
                    }
                    sum += ws[0][i] * ws[1][j] * row;
                }
            }
        }
        _ => unreachable!("only 2D and 3D boxes are supported"),
    }
    sum
}

/// Escalating tensor Gauss with adaptive bisection fallback, for integrands
/// smooth on the box.
fn smooth_box_quad<const D: usize>(
    f: &dyn Fn([f64; D]) -> f64,
    bx: &AxisBox<D>,
    cfg: &QuadConfig,
    budget: &mut u64,
) -> Result<f64, QuadError> {
    const LADDER: [usize; 3] = [4, 6, 10];
    let mut prev = tensor_gauss(f, bx, LADDER[0]);
    for &n in &LADDER[1..] {
        let cur = tensor_gauss(f, bx, n);
        if (cur - prev).abs() <= 0.5 * cfg.tol_for(cur) {
            return Ok(cur);
        }
        prev = cur;
    }
    if *budget == 0 {
        return Err(QuadError::BudgetExceeded { subdivisions: cfg.max_subdivisions, err_est: f64::NAN });
    }
    *budget -= 1;
    let (l, r) = bx.split(bx.longest_axis());
    // Children inherit the parent's tolerance; the split only sharpens the
    // rule, so the sum meets the parent target.
    Ok(smooth_box_quad(f, &l, cfg, budget)? + smooth_box_quad(f, &r, cfg, budget)?)
}

// ---------------------------------------------------------------------------
// Cell weights.
// ---------------------------------------------------------------------------

/// ∫∫_cell (ξ² + η²)^{−p/2} dξ dη.
///
/// Origin-corner cells use the polar identity: splitting the rectangle
/// [0,a]×[0,b] along the ray θ = atan(b/a) and integrating the radial power
/// exactly leaves smooth angular integrands
/// (a^{2−p}∫ sec^{2−p}θ dθ + b^{2−p}∫ sec^{2−p}θ dθ) / (2−p).
pub fn cell_weight_2d(
    p: WeightExponent,
    cell: AxisBox<2>,
    cfg: &QuadConfig,
) -> Result<f64, QuadError> {
    cfg.validate()?;
    let p = p.p;
    if cell.touches_origin() {
        if p >= 2.0 {
            return Err(QuadError::NonIntegrable { p, dim: 2 });
        }
        let [a, b] = cell.hi();
        let phi = (b / a).atan();
        let q = 2.0 - p;
        let sec_pow = |t: f64| (1.0 / t.cos()).powf(q);
        let i1 = adaptive_gk(&sec_pow, 0.0, phi, cfg)?;
        let i2 = adaptive_gk(&sec_pow, 0.0, std::f64::consts::FRAC_PI_2 - phi, cfg)?;
        return Ok((a.powf(q) * i1 + b.powf(q) * i2) / q);
    }
    let f = move |x: [f64; 2]| (x[0] * x[0] + x[1] * x[1]).powf(-0.5 * p);
    let mut budget = cfg.max_subdivisions;
    smooth_box_quad(&f, &cell, cfg, &mut budget)
}

/// ∫∫∫_cell |ξ|^{−p} dV.
///
/// Origin-corner boxes are split into the three apex pyramids over the far
/// faces (Duffy). On the pyramid whose base is the face ζ = c the map
/// (ξ, η, ζ) = (a u ζ/c, b v ζ/c, ζ) factors the radial power analytically:
/// the ζ integral is c^{3−p}/(3−p) and the remaining (u, v) integrand is
/// smooth on the unit square.
pub fn cell_weight_3d(
    p: WeightExponent,
    cell: AxisBox<3>,
    cfg: &QuadConfig,
) -> Result<f64, QuadError> {
    cfg.validate()?;
    let p = p.p;
    if cell.touches_origin() {
        if p >= 3.0 {
            return Err(QuadError::NonIntegrable { p, dim: 3 });
        }
        let [a, b, c] = cell.hi();
        let unit: AxisBox<2> = AxisBox::new([0.0, 0.0], [1.0, 1.0]).unwrap();
        let mut total = 0.0;
        let mut budget = cfg.max_subdivisions;
        for (e1, e2, e3) in [(a, b, c), (b, c, a), (c, a, b)] {
            let f = move |x: [f64; 2]| {
                (e1 * e1 * x[0] * x[0] + e2 * e2 * x[1] * x[1] + e3 * e3).powf(-0.5 * p)
            };
            total += a * b * c / (3.0 - p) * smooth_box_quad(&f, &unit, cfg, &mut budget)?;
        }
        return Ok(total);
    }
    let f = move |x: [f64; 3]| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).powf(-0.5 * p);
    let mut budget = cfg.max_subdivisions;
    smooth_box_quad(&f, &cell, cfg, &mut budget)
}

// ---------------------------------------------------------------------------
// Tail weights over D₂ = ℝ^d₊ \ (0, L)^d.
// ---------------------------------------------------------------------------

fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// ∫₀^{π/4} sin^α θ dθ (adaptive; the derivative is singular at 0 for α < 1,
/// handled by bisection toward the endpoint).
fn sin_pow_quarter(alpha: f64, cfg: &QuadConfig) -> Result<f64, QuadError> {
    adaptive_gk(&|t: f64| t.sin().powf(alpha), 0.0, std::f64::consts::FRAC_PI_4, cfg)
}

/// Corner overlap C(α, L) = ∫_{[L,∞)²} |ξ|^{−(2+α)}: polar reduction with
/// entry radius max(L secθ, L cscθ) gives (2/α) L^{−α} ∫₀^{π/4} sin^α θ dθ.
fn corner_overlap_2d(alpha: f64, l: f64, cfg: &QuadConfig) -> Result<f64, QuadError> {
    Ok(2.0 / alpha * l.powf(-alpha) * sin_pow_quarter(alpha, cfg)?)
}

/// ∫_{D₂} |ξ|^{−(2+α)} dξ dη with D₂ = ℝ²₊ \ (0, L)², by inclusion–exclusion
/// over the two slabs {ξ ≥ L} and {η ≥ L}: 2 S₁ − C.
///
/// S₁ = ∫_{[L,∞)×[0,∞)} has the closed form
/// (√π / (2α)) Γ((1+α)/2) / Γ((2+α)/2) · L^{−α} via η = ξ t.
pub fn tail_weight_2d(alpha: f64, l: f64, cfg: &QuadConfig) -> Result<f64, QuadError> {
    cfg.validate()?;
    if !(0.0 < alpha && alpha < 2.0) {
        return Err(QuadError::Invalid(format!("alpha = {alpha} must lie in (0, 2)")));
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(QuadError::Invalid(format!("L = {l} must be positive")));
    }
    let s1 = std::f64::consts::PI.sqrt() / (2.0 * alpha)
        * (ln_gamma((1.0 + alpha) / 2.0) - ln_gamma((2.0 + alpha) / 2.0)).exp()
        * l.powf(-alpha);
    let c = corner_overlap_2d(alpha, l, cfg)?;
    Ok(2.0 * s1 - c)
}

/// J(φ₀) = ∫_{φ₀}^{π/2} cos^{1+α} φ dφ; J(0) has the closed form
/// (√π/2) Γ(1 + α/2) / Γ((3+α)/2).
fn cos_pow_upper(alpha: f64, phi0: f64, cfg: &QuadConfig) -> Result<f64, QuadError> {
    adaptive_gk(&|t: f64| t.cos().powf(1.0 + alpha), phi0, std::f64::consts::FRAC_PI_2, cfg)
}

/// ∫_{D₂} |ξ|^{−(3+α)} dV with D₂ = ℝ³₊ \ (0, L)³: inclusion–exclusion over
/// the three slabs {ξ_i ≥ L} gives 3 S₁ − 3 S₂ + S₃.
///
/// S₁ = ∫_{[L,∞)×[0,∞)²} = π / (2α(1+α)) · L^{−α} (quarter-plane polar in
/// the two free coordinates integrates in closed form).
/// S₂ = ∫_{[L,∞)²×[0,∞)} = K₂ · C(α, L) with K₂ = ∫₀^{π/2} cos^{1+α},
/// reusing the 2D corner overlap after integrating out the free axis.
/// S₃ = ∫_{[L,∞)³}: polar over the (ξ, η) corner with the remaining radial
/// integral done by parts, leaving only smooth angular quadratures:
/// ∫_R^∞ r^{−(1+α)} J(atan(1/r)) dr
///   = (1/α) [ R^{−α} J(atan(1/R)) + (1+R²)^{−(1+α)/2} / (1+α) ].
pub fn tail_weight_3d(alpha: f64, l: f64, cfg: &QuadConfig) -> Result<f64, QuadError> {
    cfg.validate()?;
    if !(0.0 < alpha && alpha < 2.0) {
        return Err(QuadError::Invalid(format!("alpha = {alpha} must lie in (0, 2)")));
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(QuadError::Invalid(format!("L = {l} must be positive")));
    }
    let s1 = std::f64::consts::PI / (2.0 * alpha * (1.0 + alpha)) * l.powf(-alpha);
    let k2 = 0.5
        * std::f64::consts::PI.sqrt()
        * (ln_gamma(1.0 + alpha / 2.0) - ln_gamma((3.0 + alpha) / 2.0)).exp();
    let s2 = k2 * corner_overlap_2d(alpha, l, cfg)?;
    // S₃ scaled to L = 1; homogeneity restores the L^{−α} factor.
    let inner = |theta: f64| -> f64 {
        let r = 1.0 / theta.cos();
        let j = cos_pow_upper(alpha, (1.0 / r).atan(), cfg).unwrap_or(f64::NAN);
        (r.powf(-alpha) * j + (1.0 + r * r).powf(-0.5 * (1.0 + alpha)) / (1.0 + alpha)) / alpha
    };
    let s3_unit = 2.0
        * adaptive_gk(
            &inner,
            std::f64::consts::FRAC_PI_4,
            std::f64::consts::FRAC_PI_2,
            cfg,
        )?;
    let s3 = l.powf(-alpha) * s3_unit;
    let total = 3.0 * s1 - 3.0 * s2 + s3;
    if !total.is_finite() {
        return Err(QuadError::BudgetExceeded { subdivisions: cfg.max_subdivisions, err_est: f64::NAN });
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    fn wexp(p: f64) -> WeightExponent {
        WeightExponent::new(p).unwrap()
    }

    #[test]
    fn unit_square_p0_is_area() {
        let cell = AxisBox::new([0.0, 0.0], [1.0, 1.0]).unwrap();
        let v = cell_weight_2d(wexp(0.0), cell, &cfg()).unwrap();
        assert!((v - 1.0).abs() < 1e-13, "got {v}");
    }

    #[test]
    fn unit_square_p1_closed_form() {
        // 2 ∫₀^{π/4} sec θ dθ = 2 ln(1 + √2).
        let expect = 2.0 * (1.0 + 2.0f64.sqrt()).ln();
        let cell = AxisBox::new([0.0, 0.0], [1.0, 1.0]).unwrap();
        let v = cell_weight_2d(wexp(1.0), cell, &cfg()).unwrap();
        assert!((v - expect).abs() < 1e-12 * expect, "got {v}, want {expect}");
    }

    #[test]
    fn shifted_square_p1_asinh_oracle() {
        // ∫₁²∫₀¹ (ξ²+η²)^{-1/2} dη dξ = ∫₁² asinh(1/ξ) dξ.
        let oracle = adaptive_gk(&|x: f64| (1.0 / x).asinh(), 1.0, 2.0, &cfg()).unwrap();
        let cell = AxisBox::new([1.0, 0.0], [2.0, 1.0]).unwrap();
        let v = cell_weight_2d(wexp(1.0), cell, &cfg()).unwrap();
        assert!((v - oracle).abs() < 1e-11 * oracle.abs(), "got {v}, want {oracle}");
        assert!((v - 0.644).abs() < 1e-3);
    }

    #[test]
    fn corner_cell_rejects_non_integrable() {
        let cell = AxisBox::new([0.0, 0.0], [1.0, 1.0]).unwrap();
        assert!(matches!(
            cell_weight_2d(wexp(2.0), cell, &cfg()),
            Err(QuadError::NonIntegrable { .. })
        ));
        let cube = AxisBox::new([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(
            cell_weight_3d(wexp(3.0), cube, &cfg()),
            Err(QuadError::NonIntegrable { .. })
        ));
    }

    #[test]
    fn scaling_homogeneity_2d() {
        let p = 0.7;
        let s = 3.25;
        let cell = AxisBox::new([0.0, 0.0], [1.0, 1.5]).unwrap();
        let scaled = AxisBox::new([0.0, 0.0], [s, 1.5 * s]).unwrap();
        let v1 = cell_weight_2d(wexp(p), cell, &cfg()).unwrap();
        let v2 = cell_weight_2d(wexp(p), scaled, &cfg()).unwrap();
        let expect = s.powf(2.0 - p) * v1;
        assert!((v2 - expect).abs() < 1e-11 * expect.abs());
    }

    #[test]
    fn unit_cube_p0_is_volume() {
        let cube = AxisBox::new([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]).unwrap();
        let v = cell_weight_3d(wexp(0.0), cube, &cfg()).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn corner_cube_matches_offset_tensor_sum() {
        // Assemble [0,2]³ from the corner cube [0,1]³ (Duffy path) and seven
        // offset unit cubes (tensor path); compare against the Duffy value
        // of [0,2]³ directly. Exercises both code paths against each other.
        let p = wexp(1.7);
        let big = AxisBox::new([0.0; 3], [2.0; 3]).unwrap();
        let whole = cell_weight_3d(p, big, &cfg()).unwrap();
        let mut sum = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let lo = [i as f64, j as f64, k as f64];
                    let hi = [lo[0] + 1.0, lo[1] + 1.0, lo[2] + 1.0];
                    let cell = AxisBox::new(lo, hi).unwrap();
                    sum += cell_weight_3d(p, cell, &cfg()).unwrap();
                }
            }
        }
        assert!((whole - sum).abs() < 1e-10 * whole.abs(), "whole {whole} sum {sum}");
    }

    #[test]
    fn tail_2d_alpha1_closed_form() {
        // 2 S₁ − C with S₁ = 1 and C = 2 − √2 gives √2.
        let v = tail_weight_2d(1.0, 1.0, &cfg()).unwrap();
        let expect = 2.0f64.sqrt();
        assert!((v - expect).abs() < 1e-12, "got {v}, want {expect}");
    }

    #[test]
    fn tail_2d_corner_overlap_alpha1() {
        let c = corner_overlap_2d(1.0, 1.0, &cfg()).unwrap();
        let expect = 2.0 - 2.0f64.sqrt();
        assert!((c - expect).abs() < 1e-13, "got {c}, want {expect}");
    }

    #[test]
    fn tail_2d_homogeneity() {
        for alpha in [0.3, 1.0, 1.7] {
            let v1 = tail_weight_2d(alpha, 1.0, &cfg()).unwrap();
            let v2 = tail_weight_2d(alpha, 2.0, &cfg()).unwrap();
            let expect = 2.0f64.powf(-alpha) * v1;
            assert!((v2 - expect).abs() < 1e-12 * expect.abs());
        }
    }

    #[test]
    fn tail_3d_s1_alpha1() {
        // With S₂, S₃ removed by linearity this pins S₁ = π/4 at α = 1, L = 1:
        // compare the full tail against a brute-force 1D reduction oracle.
        let alpha = 1.0;
        let s1 = std::f64::consts::PI / (2.0 * alpha * (1.0 + alpha));
        assert!((s1 - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn tail_3d_homogeneity() {
        for alpha in [0.4, 1.0, 1.6] {
            let v1 = tail_weight_3d(alpha, 1.0, &cfg()).unwrap();
            let v2 = tail_weight_3d(alpha, 2.0, &cfg()).unwrap();
            let expect = 2.0f64.powf(-alpha) * v1;
            assert!((v2 - expect).abs() < 1e-11 * expect.abs());
        }
    }

    #[test]
    fn nested_boxes_monotone() {
        let inner = AxisBox::new([1.0, 2.0], [2.0, 3.0]).unwrap();
        let outer = AxisBox::new([1.0, 2.0], [2.5, 3.5]).unwrap();
        let p = wexp(1.2);
        let vi = cell_weight_2d(p, inner, &cfg()).unwrap();
        let vo = cell_weight_2d(p, outer, &cfg()).unwrap();
        assert!(vo > vi);
    }

    #[test]
    fn random_homogeneity_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let p = rng.gen_range(0.05..1.9);
            let s = rng.gen_range(0.2..5.0);
            let hi = [rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0)];
            let cell = AxisBox::new([0.0, 0.0], hi).unwrap();
            let scaled = AxisBox::new([0.0, 0.0], [s * hi[0], s * hi[1]]).unwrap();
            let v1 = cell_weight_2d(wexp(p), cell, &cfg()).unwrap();
            let v2 = cell_weight_2d(wexp(p), scaled, &cfg()).unwrap();
            let expect = s.powf(2.0 - p) * v1;
            assert!(
                (v2 - expect).abs() <= 1e-12 * expect.abs().max(1.0),
                "p={p} s={s}: got {v2}, want {expect}"
            );
        }
        for _ in 0..20 {
            let p = rng.gen_range(0.05..2.9);
            let s = rng.gen_range(0.2..5.0);
            let hi = [rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0)];
            let cell = AxisBox::new([0.0; 3], hi).unwrap();
            let scaled = AxisBox::new([0.0; 3], [s * hi[0], s * hi[1], s * hi[2]]).unwrap();
            let v1 = cell_weight_3d(wexp(p), cell, &cfg()).unwrap();
            let v2 = cell_weight_3d(wexp(p), scaled, &cfg()).unwrap();
            let expect = s.powf(3.0 - p) * v1;
            assert!(
                (v2 - expect).abs() <= 1e-11 * expect.abs().max(1.0),
                "p={p} s={s}: got {v2}, want {expect}"
            );
        }
    }

    /// Composite Gauss oracle: uniform k^d partition, order-6 tensor rule on
    /// each piece, k doubled until two successive values agree.
    fn composite_oracle_2d(p: f64, bx: &AxisBox<2>) -> f64 {
        let f = |x: [f64; 2]| (x[0] * x[0] + x[1] * x[1]).powf(-0.5 * p);
        let eval = |k: usize| {
            let mut total = 0.0;
            for i in 0..k {
                for j in 0..k {
                    let dx = (bx.hi[0] - bx.lo[0]) / k as f64;
                    let dy = (bx.hi[1] - bx.lo[1]) / k as f64;
                    let sub = AxisBox::new(
                        [bx.lo[0] + i as f64 * dx, bx.lo[1] + j as f64 * dy],
                        [bx.lo[0] + (i + 1) as f64 * dx, bx.lo[1] + (j + 1) as f64 * dy],
                    )
                    .unwrap();
                    total += tensor_gauss(&f, &sub, 6);
                }
            }
            total
        };
        let mut k = 1;
        let mut prev = eval(k);
        loop {
            k *= 2;
            let cur = eval(k);
            if (cur - prev).abs() <= 1e-13 * cur.abs() || k >= 64 {
                return cur;
            }
            prev = cur;
        }
    }

    #[test]
    fn oracle_agreement_random_cells() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let p = rng.gen_range(0.1..3.5);
            let lo = [rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0)];
            let hi = [lo[0] + rng.gen_range(0.3..1.5), lo[1] + rng.gen_range(0.3..1.5)];
            let cell = AxisBox::new(lo, hi).unwrap();
            let v = cell_weight_2d(wexp(p), cell, &cfg()).unwrap();
            let oracle = composite_oracle_2d(p, &cell);
            assert!(
                (v - oracle).abs() <= 1e-10 * oracle.abs(),
                "p={p} cell {cell:?}: got {v}, oracle {oracle}"
            );
        }
    }

    /// Monte-Carlo oracle on the dyadic shell [0,1]^3 \ [0,1/2]^3 (bounded
    /// integrand) with the remainder summed by exact homogeneity:
    /// total = shell / (1 − 2^{p−3}).
    #[test]
    fn cube_p2_matches_monte_carlo() {
        use rand::{Rng, SeedableRng};
        let p = 2.0;
        let cube = AxisBox::new([0.0; 3], [1.0; 3]).unwrap();
        let v = cell_weight_3d(wexp(p), cube, &cfg()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1234);
        let n = 4_000_000usize;
        let (mut sum, mut sumsq, mut kept) = (0.0f64, 0.0f64, 0usize);
        while kept < n {
            let x: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
            if x.iter().all(|&c| c < 0.5) {
                continue;
            }
            let f = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).powf(-0.5 * p);
            sum += f;
            sumsq += f * f;
            kept += 1;
        }
        let vol = 1.0 - 0.125;
        let mean = sum / n as f64;
        let var = (sumsq / n as f64 - mean * mean).max(0.0);
        let shell = vol * mean;
        let sigma = vol * (var / n as f64).sqrt();
        let scale = 1.0 / (1.0 - 2.0f64.powf(p - 3.0));
        let mc = shell * scale;
        let mc_sigma = sigma * scale;
        assert!(
            (v - mc).abs() <= 3.0 * mc_sigma,
            "quad {v} vs MC {mc} ± {mc_sigma}"
        );
    }

    /// Same dyadic-shell device outward: D₂ ∩ ([0,2L]^d \ [0,L]^d) sampled
    /// by rejection, remainder = 2^{−α}·total by homogeneity, so
    /// total = shell / (1 − 2^{−α}).
    #[test]
    fn tails_match_monte_carlo() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(98765);

        let alpha = 1.0;
        let v2 = tail_weight_2d(alpha, 1.0, &cfg()).unwrap();
        let n = 4_000_000usize;
        let (mut sum, mut sumsq, mut kept) = (0.0f64, 0.0f64, 0usize);
        while kept < n {
            let x: [f64; 2] = [rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)];
            if x[0] < 1.0 && x[1] < 1.0 {
                continue;
            }
            let f = (x[0] * x[0] + x[1] * x[1]).powf(-0.5 * (2.0 + alpha));
            sum += f;
            sumsq += f * f;
            kept += 1;
        }
        let vol = 4.0 - 1.0;
        let mean = sum / n as f64;
        let var = (sumsq / n as f64 - mean * mean).max(0.0);
        let scale = 1.0 / (1.0 - 2.0f64.powf(-alpha));
        let mc = vol * mean * scale;
        let mc_sigma = vol * (var / n as f64).sqrt() * scale;
        assert!((v2 - mc).abs() <= 3.0 * mc_sigma, "2D: quad {v2} vs MC {mc} ± {mc_sigma}");

        let v3 = tail_weight_3d(alpha, 1.0, &cfg()).unwrap();
        let (mut sum, mut sumsq, mut kept) = (0.0f64, 0.0f64, 0usize);
        while kept < n {
            let x: [f64; 3] = [
                rng.gen_range(0.0..2.0),
                rng.gen_range(0.0..2.0),
                rng.gen_range(0.0..2.0),
            ];
            if x[0] < 1.0 && x[1] < 1.0 && x[2] < 1.0 {
                continue;
            }
            let f = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).powf(-0.5 * (3.0 + alpha));
            sum += f;
            sumsq += f * f;
            kept += 1;
        }
        let vol = 8.0 - 1.0;
        let mean = sum / n as f64;
        let var = (sumsq / n as f64 - mean * mean).max(0.0);
        let mc = vol * mean * scale;
        let mc_sigma = vol * (var / n as f64).sqrt() * scale;
        assert!((v3 - mc).abs() <= 3.0 * mc_sigma, "3D: quad {v3} vs MC {mc} ± {mc_sigma}");
    }

    #[test]
    fn tail_2d_brute_force_truncated_oracle() {
        // Truncate D₂ at R = 10⁴ and integrate the rectangle decomposition
        // [L,R]×[0,R] ∪ [0,L]×[L,R] by the smooth-box path; the analytic
        // remainder (homogeneity of the full tail) bounds the cut-off error.
        let alpha = 0.5;
        let l = 1.0;
        let v = tail_weight_2d(alpha, l, &cfg()).unwrap();
        let r = 1.0e5;
        let c = cfg();
        let p = wexp(2.0 + alpha);
        let strip1 = AxisBox::new([l, 0.0], [r, r]).unwrap();
        let strip2 = AxisBox::new([0.0, l], [l, r]).unwrap();
        let truncated =
            cell_weight_2d(p, strip1, &c).unwrap() + cell_weight_2d(p, strip2, &c).unwrap();
        // Remainder outside [0,R]² is below tail(α, R) = R^{−α}·tail(α, 1).
        let rem_bound = r.powf(-alpha) * v * l.powf(alpha);
        assert!(rem_bound < 1e-2 * v);
        assert!(
            (v - truncated).abs() <= rem_bound + 1e-6 * v,
            "tail {v} vs truncated {truncated} (remainder bound {rem_bound:.3e})"
        );
    }
}
