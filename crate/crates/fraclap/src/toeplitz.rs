//! The discretized fractional Laplacian as a symmetric multilevel Toeplitz
//! operator.
//!
//! On a uniform grid the matrix entry coupling interior nodes p and q
//! depends only on the per-axis index distances: A[p,q] = −c_{d,α}·a_{|p−q|}.
//! The operator is therefore stored as its first column (a d-dimensional
//! table over offsets) and applied through FFT circulant embedding
//! ([`crate::fft`]); a direct dense path serves as an oracle and powers the
//! positive-definiteness checks on small grids.

use thiserror::Error;

use crate::fft::ConvPlan;
use crate::grid::{Field, GridSpec};
use crate::stencil::{FracParams, Stencil};

pub const DENSE_CAP: usize = 10_000;

#[derive(Debug, Error)]
pub enum OpError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("dense path refused: M = {m} exceeds cap {cap}")]
    CapExceeded { m: usize, cap: usize },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
}

pub struct FractionalOperator {
    grid: GridSpec,
    params: FracParams,
    /// t_Δ = −c_{d,α} a_{|Δ|}, Δ_i ∈ 0..n_i−1, x-fastest.
    first_col: Vec<f64>,
    conv: ConvPlan,
}

/// Build the operator for a stencil on a matching grid. The stencil must
/// have been assembled with the grid's h and kernel extent N.
pub fn assemble_operator(
    stencil: &Stencil,
    grid: &GridSpec,
) -> Result<FractionalOperator, OpError> {
    if stencil.params.d != grid.d {
        return Err(OpError::ShapeMismatch(format!(
            "stencil dimension {} vs grid dimension {}",
            stencil.params.d, grid.d
        )));
    }
    if (stencil.h - grid.h).abs() > 1e-12 * grid.h {
        return Err(OpError::ShapeMismatch(format!(
            "stencil h = {} vs grid h = {}",
            stencil.h, grid.h
        )));
    }
    if stencil.n != grid.big_n {
        return Err(OpError::ShapeMismatch(format!(
            "stencil N = {} vs grid N = {}",
            stencil.n, grid.big_n
        )));
    }
    let d = grid.d;
    let n = &grid.n_interior;
    let (nx, ny, nz) = (n[0], n[1], if d == 3 { n[2] } else { 1 });
    let c = stencil.c_norm;
    let mut first_col = Vec::with_capacity(nx * ny * nz);
    for dz in 0..nz {
        for dy in 0..ny {
            for dx in 0..nx {
                let a = if d == 2 { stencil.coeff2(dx, dy) } else { stencil.coeff3(dx, dy, dz) };
                first_col.push(-c * a);
            }
        }
    }
    let conv = ConvPlan::new([nx, ny, nz], &first_col);
    Ok(FractionalOperator { grid: grid.clone(), params: stencil.params, first_col, conv })
}

impl FractionalOperator {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn params(&self) -> &FracParams {
        &self.params
    }

    /// First-column entry at offset Δ (flat x-fastest index).
    pub fn first_col(&self) -> &[f64] {
        &self.first_col
    }

    /// Padded FFT extents per axis.
    pub fn fft_shape(&self) -> [usize; 3] {
        self.conv.padded_shape()
    }

    fn check_grid(&self, u: &Field) -> Result<(), OpError> {
        if u.grid != self.grid {
            return Err(OpError::ShapeMismatch("field grid differs from operator grid".into()));
        }
        Ok(())
    }

    /// A u via FFT circulant embedding, O(M log M).
    pub fn apply_fft(&self, u: &Field) -> Result<Field, OpError> {
        self.check_grid(u)?;
        let mut out = Field::zeros(&self.grid);
        self.conv.apply(&u.values, &mut out.values);
        Ok(out)
    }

    /// Raw-slice apply for solver inner loops (same contract as apply_fft).
    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        self.conv.apply(u, out);
    }

    /// Number of interior unknowns M.
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.len() == 0
    }

    /// Direct O(M²) evaluation; the oracle for apply_fft.
    pub fn apply_dense(&self, u: &Field, cap: usize) -> Result<Field, OpError> {
        self.check_grid(u)?;
        let m = self.grid.len();
        if m > cap {
            return Err(OpError::CapExceeded { m, cap });
        }
        let n = &self.grid.n_interior;
        let (nx, ny, nz) = (n[0], n[1], if self.grid.d == 3 { n[2] } else { 1 });
        let t = &self.first_col;
        let mut out = Field::zeros(&self.grid);
        let idx = |x: usize, y: usize, z: usize| x + nx * (y + ny * z);
        for pz in 0..nz {
            for py in 0..ny {
                for px in 0..nx {
                    let mut acc = 0.0;
                    for qz in 0..nz {
                        for qy in 0..ny {
                            let drow = idx(0, py.abs_diff(qy), pz.abs_diff(qz));
                            let urow = idx(0, qy, qz);
                            for qx in 0..nx {
                                acc += t[drow + px.abs_diff(qx)] * u.values[urow + qx];
                            }
                        }
                    }
                    out.values[idx(px, py, pz)] = acc;
                }
            }
        }
        Ok(out)
    }

    /// Dense matrix (row-major M×M) for small grids.
    pub fn dense_matrix(&self, cap: usize) -> Result<Vec<f64>, OpError> {
        let m = self.grid.len();
        if m > cap {
            return Err(OpError::CapExceeded { m, cap });
        }
        let n = &self.grid.n_interior;
        let (nx, ny, nz) = (n[0], n[1], if self.grid.d == 3 { n[2] } else { 1 });
        let idx = |x: usize, y: usize, z: usize| x + nx * (y + ny * z);
        let mut a = vec![0.0; m * m];
        for pz in 0..nz {
            for py in 0..ny {
                for px in 0..nx {
                    let p = idx(px, py, pz);
                    for qz in 0..nz {
                        for qy in 0..ny {
                            for qx in 0..nx {
                                let q = idx(qx, qy, qz);
                                a[p * m + q] = self.first_col
                                    [idx(px.abs_diff(qx), py.abs_diff(qy), pz.abs_diff(qz))];
                            }
                        }
                    }
                }
            }
        }
        Ok(a)
    }

    /// Cholesky SPD test on the dense matrix.
    pub fn is_spd_dense(&self, cap: usize) -> Result<bool, OpError> {
        let a = self.dense_matrix(cap)?;
        let m = self.grid.len();
        let mat = nalgebra::DMatrix::from_row_slice(m, m, &a);
        Ok(nalgebra::Cholesky::new(mat).is_some())
    }

    /// Smallest eigenvalue of the dense matrix: exact symmetric
    /// eigendecomposition on small grids, Cholesky inverse iteration above.
    pub fn smallest_eigen_check(&self, cap: usize) -> Result<f64, OpError> {
        let a = self.dense_matrix(cap)?;
        let m = self.grid.len();
        let mat = nalgebra::DMatrix::from_row_slice(m, m, &a);
        if m <= 256 {
            let eig = mat.symmetric_eigen();
            return Ok(eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b)));
        }
        let chol = nalgebra::Cholesky::new(mat.clone()).ok_or(OpError::NotPositiveDefinite)?;
        let mut x = nalgebra::DVector::from_element(m, 1.0 / (m as f64).sqrt());
        let mut lambda = 0.0;
        for _ in 0..500 {
            let y = chol.solve(&x);
            let ny = y.norm();
            x = y / ny;
            let ax = &mat * &x;
            let next = x.dot(&ax);
            if (next - lambda).abs() <= 1e-12 * next.abs() {
                return Ok(next);
            }
            lambda = next;
        }
        Ok(lambda)
    }
}
