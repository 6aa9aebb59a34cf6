//! Tight wavelet frames on locally compact abelian groups.
//!
//! Lattice chains on the integers, finite cyclic groups, the torus and
//! Euclidean space; unitary-extension filter banks built from B-splines and
//! characteristic functions; and numerical verification of the resulting
//! Parseval frames.

pub mod bspline;
pub mod charfun;
pub mod cli;
pub mod descriptor;
pub mod emit;
pub mod error;
pub mod filters;
pub mod frame;
pub mod group;
pub mod lattice;
pub mod numeric;
pub mod sequence;
pub mod tiles;
pub mod verify;

pub use error::{Error, Result};
pub use group::{Elem, GroupSpec, Space};
pub use lattice::{Domain, LatticeChain};
