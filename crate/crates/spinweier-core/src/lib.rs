//! Complex Clifford algebras with negative-definite signature, their matrix
//! representations and minimal ideals, the Spin and Spin^c groups, and a
//! discrete spinorial Weierstrass pipeline over triangle meshes.

pub mod clifford;
pub mod config;
pub mod error;
pub mod exec;
pub mod forward;
pub mod matrix_rep;
pub mod mesh;
pub mod pairing;
pub mod pipeline;
pub mod reconstruct;
pub mod report;
pub mod scenarios;
pub mod spin;

pub use clifford::{algebra_info, AlgebraInfo, BladeIndex, Multivector, C64};
pub use error::{Error, Result};
