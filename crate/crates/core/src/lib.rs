//! Discrete-velocity kinetic model of two-group crowd dynamics.
//!
//! Pedestrians are described by distribution functions `f[σ][i][j](x)` over
//! a cell-centred spatial grid, a finite set of walking directions `θ_i` and
//! speed moduli `v_j`. Binary encounters change direction and speed according
//! to stochastic game tables, and the resulting kinetic equation is integrated
//! by splitting transport along `x`, transport along `y` and the local
//! interaction step.
//!
//! The crate is `no_std` (with `alloc`). The `std` feature only forwards to
//! dependencies; `parallel` enables rayon-backed sweeps whose results are
//! bit-identical to the serial path.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod contour;
pub mod diagnostics;
mod error;
pub mod games;
pub mod grid;
pub mod kinetics;
mod par;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{build_velocity_grid, Grid2D, SpeedLattice, StateField, VelocityGrid};
