//! Uniform tensor grids on axis-aligned boxes and interior-node fields.
//!
//! The mesh size h is tied to the longest axis: L = max_i (b_i − a_i),
//! N = L/h (exact), and each remaining axis gets the smallest N_i with
//! a_i + N_i h ≥ b_i. Unknowns live on interior nodes only (homogeneous
//! Dirichlet data extends by zero outside), ordered x-fastest.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    Invalid(String),
}

/// Uniform grid over a box, interior nodes only.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// Spatial dimension, 2 or 3.
    pub d: usize,
    /// Per-axis bounds (a_i, b_i), len d.
    pub bounds: Vec<(f64, f64)>,
    /// Mesh size, identical on all axes.
    pub h: f64,
    /// Interior node counts N_i − 1 per axis, len d.
    pub n_interior: Vec<usize>,
    /// Longest axis length; the stencil's kernel extent.
    pub big_l: f64,
    /// big_l / h.
    pub big_n: usize,
}

impl GridSpec {
    pub fn from_box(bounds: &[(f64, f64)], h: f64) -> Result<Self, GridError> {
        let d = bounds.len();
        if !(d == 2 || d == 3) {
            return Err(GridError::Invalid(format!("dimension {d} not in {{2,3}}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(GridError::Invalid(format!("mesh size h = {h} must be positive")));
        }
        for (i, &(a, b)) in bounds.iter().enumerate() {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(GridError::Invalid(format!("axis {i}: need a < b, got ({a}, {b})")));
            }
        }
        let big_l = bounds.iter().map(|&(a, b)| b - a).fold(0.0, f64::max);
        let n_real = big_l / h;
        let big_n = n_real.round() as usize;
        if big_n < 2 || (n_real - big_n as f64).abs() > 1e-9 * n_real {
            return Err(GridError::Invalid(format!(
                "h = {h} must divide the longest side {big_l} (L/h = {n_real})"
            )));
        }
        let mut n_interior = Vec::with_capacity(d);
        for &(a, b) in bounds {
            // Smallest integer with a + N_i h >= b.
            let ni = ((b - a) / h - 1e-9).ceil() as usize;
            if ni < 2 {
                return Err(GridError::Invalid(format!(
                    "axis ({a}, {b}) too short for h = {h}: no interior nodes"
                )));
            }
            n_interior.push(ni - 1);
        }
        Ok(Self { d, bounds: bounds.to_vec(), h, n_interior, big_l, big_n })
    }

    /// Total number of interior unknowns M.
    pub fn len(&self) -> usize {
        self.n_interior.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinates of interior node with per-axis indices `idx` (0-based):
    /// x_i = a_i + (idx_i + 1) h.
    pub fn node(&self, idx: &[usize]) -> Vec<f64> {
        debug_assert_eq!(idx.len(), self.d);
        idx.iter()
            .zip(&self.bounds)
            .map(|(&j, &(a, _))| a + (j as f64 + 1.0) * self.h)
            .collect()
    }

    /// Flat index of interior node, x-fastest then y then z.
    pub fn flat(&self, idx: &[usize]) -> usize {
        let mut f = 0;
        for ax in (0..self.d).rev() {
            debug_assert!(idx[ax] < self.n_interior[ax]);
            f = f * self.n_interior[ax] + idx[ax];
        }
        f
    }

    /// Inverse of [`GridSpec::flat`].
    pub fn unflat(&self, mut flat: usize) -> Vec<usize> {
        debug_assert!(flat < self.len());
        let mut idx = vec![0; self.d];
        for ax in 0..self.d {
            idx[ax] = flat % self.n_interior[ax];
            flat /= self.n_interior[ax];
        }
        idx
    }
}

/// Interior-node values of a scalar function on a grid, x-fastest order.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &GridSpec) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    /// Sample a function at every interior node.
    pub fn from_fn(grid: &GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        let mut idx = vec![0usize; grid.d];
        let mut pt = vec![0.0f64; grid.d];
        loop {
            for ax in 0..grid.d {
                pt[ax] = grid.bounds[ax].0 + (idx[ax] as f64 + 1.0) * grid.h;
            }
            values.push(f(&pt));
            // Odometer increment, x first.
            let mut ax = 0;
            loop {
                idx[ax] += 1;
                if idx[ax] < grid.n_interior[ax] {
                    break;
                }
                idx[ax] = 0;
                ax += 1;
                if ax == grid.d {
                    return Self { grid: grid.clone(), values };
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    /// Discrete L² norm (h^{d/2} scaling).
    pub fn norm_l2(&self) -> f64 {
        let ss: f64 = self.values.iter().map(|&v| v * v).sum();
        self.grid.h.powi(self.grid.d as i32).sqrt() * ss.sqrt()
    }

    /// Discrete integral h^d Σ v_i.
    pub fn integral(&self) -> f64 {
        self.grid.h.powi(self.grid.d as i32) * self.values.iter().sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_grid_counts() {
        let g = GridSpec::from_box(&[(-1.0, 1.0), (-1.0, 1.0)], 0.25).unwrap();
        assert_eq!(g.big_n, 8);
        assert_eq!(g.n_interior, vec![7, 7]);
        assert_eq!(g.len(), 49);
        assert_eq!(g.node(&[0, 0]), vec![-0.75, -0.75]);
        assert_eq!(g.node(&[6, 6]), vec![0.75, 0.75]);
    }

    #[test]
    fn rectangular_axis_rounds_up() {
        // Short side 1.3 with h = 0.25: N_y = ceil(5.2) = 6, interior 5.
        let g = GridSpec::from_box(&[(0.0, 2.0), (0.0, 1.3)], 0.25).unwrap();
        assert_eq!(g.big_n, 8);
        assert_eq!(g.n_interior, vec![7, 5]);
        assert_eq!(g.big_l, 2.0);
    }

    #[test]
    fn exact_division_boundary() {
        // N_y h = b exactly: last grid node is the boundary, interior N_y - 1.
        let g = GridSpec::from_box(&[(0.0, 1.0), (0.0, 1.0)], 0.125).unwrap();
        assert_eq!(g.n_interior, vec![7, 7]);
    }

    #[test]
    fn h_must_divide_longest_side() {
        assert!(GridSpec::from_box(&[(0.0, 1.0), (0.0, 1.0)], 0.3).is_err());
    }

    #[test]
    fn flat_ordering_x_fastest() {
        let g = GridSpec::from_box(&[(0.0, 1.0), (0.0, 1.0), (0.0, 1.0)], 0.25).unwrap();
        assert_eq!(g.n_interior, vec![3, 3, 3]);
        assert_eq!(g.flat(&[1, 0, 0]), 1);
        assert_eq!(g.flat(&[0, 1, 0]), 3);
        assert_eq!(g.flat(&[0, 0, 1]), 9);
        let f = Field::from_fn(&g, |p| p[0] + 10.0 * p[1] + 100.0 * p[2]);
        assert_eq!(f.values[g.flat(&[1, 2, 0])], 0.5 + 10.0 * 0.75 + 100.0 * 0.25);
    }

    #[test]
    fn integral_of_one_is_interior_mass() {
        let g = GridSpec::from_box(&[(0.0, 1.0), (0.0, 1.0)], 0.25).unwrap();
        let f = Field::from_fn(&g, |_| 1.0);
        assert!((f.integral() - 9.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn unflat_inverts_flat() {
        let g = GridSpec::from_box(&[(0.0, 1.0), (0.0, 0.75), (0.0, 0.5)], 0.25).unwrap();
        for flat in 0..g.len() {
            assert_eq!(g.flat(&g.unflat(flat)), flat);
        }
    }
}
