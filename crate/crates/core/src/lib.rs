//! Low-rank tensor solvers for the Poisson problem on long product domains.
//!
//! The domain is a product `I × ω` of a long interval with a cross section
//! (an interval or an L-shaped polygon), the right-hand side is an elementary
//! tensor `1 ⊗ f`, and solutions are represented as short sums of rank-1
//! terms `p ⊗ q`. Three solvers produce such representations:
//!
//! * [`method1::method1_solution`] — a closed-form one-term approximation
//!   built from the reduced problem on the cross section,
//! * [`als::als_solve`] — greedy rank-1 enrichment by alternating
//!   least-squares sweeps,
//! * [`method3::method3_solve`] — a rank-`r` inverse built from an
//!   exponential-sum approximation of `1/x` applied to the Kronecker-sum
//!   discretization, with matrix exponentials evaluated by sine-basis
//!   diagonalization (interval factor) and sinc-quadrature contour
//!   integration (cross-section factor).
//!
//! The crate is `no_std` + `alloc`; all floating-point math goes through
//! `libm`. IO, CSV formats and the benchmark CLI live in the companion
//! `longdomain-bench` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod als;
pub mod error;
pub mod expm;
pub mod expsum;
pub mod field;
pub mod grid;
pub mod method1;
pub mod method3;
pub mod operator;
pub mod solve;
pub(crate) mod util;

pub use error::{Error, Result};
pub use grid::{build_cross_section, build_interval_grid, CrossSectionGrid, CrossSectionShape, Grid1D};
pub use operator::{assemble_laplacian_1d, assemble_laplacian_cs, spectral_bounds, DiscreteOperator};
