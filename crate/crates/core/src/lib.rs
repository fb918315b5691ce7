//! Push-block interlacing particle dynamics with two jump rates, and the
//! determinantal kernels that describe it: the finite-time kernel, the
//! tacnode kernel obtained in the double scaling limit, and its GUE-minor and
//! Pearcey degenerations.
//!
//! Module map:
//! - [`contour`]: contours, quadrature rules, the Cauchy double-integral engine.
//! - [`finite`]: the finite-time kernel and its exact identities.
//! - [`tacnode`]: the tacnode kernel, endpoint kernel, Bessel oracle.
//! - [`limits`]: GUE-limit and Pearcey kernels and the scaling wrappers.
//! - [`macro_geometry`]: saddle points, density map, boundary curve.
//! - [`simulator`]: exact Monte Carlo for the particle system.
//! - [`correlation`]: determinants, complementation, endpoint block.
//! - [`cli`]: the command-line driver and CSV/JSON formats.

pub mod cli;
pub mod contour;
pub mod correlation;
mod extended;
pub mod finite;
pub mod limits;
pub mod macro_geometry;
pub mod simulator;
pub mod tacnode;
pub mod verify;

pub use contour::{KernelValue, QuadError, C64};

use thiserror::Error;

/// Errors shared by the kernel modules.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum KernelError {
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error("singular point {0}")]
    Singular(C64),
    #[error("contour conflict: {0}")]
    ContourConflict(String),
    #[error("point is not on the grid: x2 = {x2}, m = {m}")]
    OffGrid { x2: i64, m: u32 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("domain error: {0}")]
    Domain(String),
}
