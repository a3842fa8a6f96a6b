//! Reduced-order modeling of geometrically nonlinear structures: an
//! exactly-cubic beam kernel, vibration modes and static modal derivatives,
//! ECSW hyperreduction trained on a static quadratic manifold, enforced
//! displacement identification of reduced stiffness tensors, and the ROM
//! runtime with load synthesis and PSD analysis.

pub mod ecsw;
pub mod error;
pub mod fe;
pub mod identify;
pub mod linalg;
pub mod manifold;
pub mod modal;
pub mod reduced;
pub mod rom;
pub mod signal;

pub use error::{Error, Result};
