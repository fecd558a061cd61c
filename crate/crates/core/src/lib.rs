//! Stabilizer-free weak Galerkin finite elements for the clamped biharmonic
//! problem `Δ²u = f` on polygonal meshes of the unit square, with reduced
//! order `(P_k(T), P_{k-1}(e), P_{k-1}(e))` weak functions.

pub mod error;
pub mod exact;
pub mod mesh;
pub mod norms;
pub mod polyspace;
pub mod study;
pub mod system;
pub mod weakop;

pub use error::{Error, Result};
