//! Simulation and SVD-based separation of dynamic OCT signals.
//!
//! The crate synthesizes Doppler OCT measurements of a sample made of a strongly reflecting,
//! slowly drifting collagen matrix and weak, temporally white metabolic scatterers. It then
//! separates the two by singular value decomposition of the pixels x time (Casorati) matrix and
//! reconstructs a per-pixel metabolic intensity map.
//!
//! * [`medium`]: random collagen media and metabolic noise fields.
//! * [`forward`]: spectral-line forward model producing the ODT signals.
//! * [`separation`]: Casorati assembly, SVD, total-variation cut-off, intensity maps.
//! * [`spectral`]: correlation kernels and the perturbation / cross-term / orthogonality checks.
//! * [`run`]: configuration, seeded end-to-end runs, manifests and the file-level commands.

pub mod error;
pub mod formats;
pub mod forward;
pub mod medium;
pub mod rng;
pub mod run;
pub mod separation;
pub mod spectral;

pub use error::{Error, Result};
