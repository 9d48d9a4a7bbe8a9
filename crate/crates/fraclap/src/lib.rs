//! Finite difference discretization of the integral fractional Laplacian
//! (−Δ)^{α/2}, α ∈ (0, 2), on rectangular domains in 2D and 3D.
//!
//! The operator is discretized by kernel splitting with a parameter
//! γ ∈ (α, 2]: the hypersingular integral is rewritten against the weight
//! ω_γ(ξ) = |ξ|^{γ−(d+α)} and approximated with weighted trapezoidal rules,
//! yielding a stencil whose coefficients are singular integrals of ω_γ over
//! mesh cells ([`singquad`], [`stencil`]). On a uniform grid the resulting
//! matrix is symmetric multilevel Toeplitz and is applied in O(M log M) via
//! circulant embedding and the FFT ([`toeplitz`]). Conjugate gradients
//! ([`krylov`]) solve the shifted systems arising in fractional Poisson
//! problems and the Crank–Nicolson time stepping of the fractional
//! Allen–Cahn equation ([`pde`]).

pub mod cache;
mod fft;
pub mod grid;
pub mod io;
pub mod krylov;
pub mod pde;
pub mod singquad;
pub mod stencil;
pub mod toeplitz;

pub use cache::{CacheError, StencilStore, CACHE_DIR_ENV};
pub use pde::{
    allen_cahn_initial, allen_cahn_run, apply_manufactured, bubbles_connected, mass, operator_for,
    poisson_manufactured_study, poisson_one_study, poisson_solve, restrict, truncation_study,
    unit_box, validate_nesting, AllenCahnConfig, AllenCahnOutput, ManufacturedFn, PdeError,
    PoissonSolution, SelfConvergence, StudyReport,
};
pub use grid::{Field, GridSpec};
pub use io::{read_field, read_stencil, write_field, write_stencil, IoError};
pub use krylov::{cg_solve, CgConfig, CgSolution, LinearMap, ShiftedOp};
pub use singquad::{AxisBox, QuadConfig, QuadError, WeightExponent};
pub use stencil::{
    build_stencil_2d, build_stencil_3d, norm_const, single_coeff_2d, single_coeff_3d, FracParams,
    Stencil,
};
pub use toeplitz::{assemble_operator, FractionalOperator};
