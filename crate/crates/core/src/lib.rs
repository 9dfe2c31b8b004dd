//! Structure-preserving discontinuous Galerkin (SPDG) operators on periodic
//! corner-staggered Cartesian grids, and a vortex-stream incompressible
//! Navier-Stokes solver built on them.
//!
//! Scalars, vorticity and stream function live on the primal grid; velocity
//! lives on the dual grid, whose cells are centred on primal cell corners.
//! Every operator maps one staggering to the other by summing contributions
//! from the eight corner neighbours of a target cell.
//!
//! The discrete divergence of a discrete curl is not zero for `N >= 1`; the
//! structure-preserving divergence subtracts a correction built from the
//! field's vector potential, so solenoidal fields are always carried together
//! with the field they are the curl of (see [`fieldops::Solenoidal`]).

pub mod basis;
pub mod cases;
pub mod field;
pub mod fieldops;
pub mod grid;
pub mod imex;
pub mod io;
pub mod krylov;
pub mod nssolver;
pub mod opkernels;

pub use basis::NodalBasis;
pub use field::{DgField, Staggering};
pub use fieldops::{Solenoidal, SpdgOperators};
pub use grid::{CellRef, CornerOffset, StaggeredGrid};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpdgError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Krylov(#[from] krylov::KrylovError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed data: {0}")]
    Format(String),
}
