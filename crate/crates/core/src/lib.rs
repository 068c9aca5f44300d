//! Heat flow and Li-Yau gradient estimates on Cayley graphs of virtually
//! Abelian groups.
//!
//! The crate builds the two Cayley graphs `G = Cay(Φ, S)` and
//! `G̃ = Cay(Φ, S̃)` of a group `Φ` that contains `Z^d` as a normal subgroup of
//! finite index, decomposes functions on the finite quotients `Φ_n` into joint
//! eigenfunctions of both Laplacians, synthesizes heat-equation solutions on
//! `G` from translated heat kernels of `G̃`, and evaluates the Li-Yau
//! quantities on those solutions.

pub mod cli;
pub mod estimates;
pub mod export;
pub mod graph;
pub mod group;
pub mod heat;
pub mod lattice;
pub mod quotient;
pub mod specs;
pub mod synthesis;

pub use graph::{BallFunction, Generators, GraphView};
pub use group::{Element, Group, GroupSpec};
pub use quotient::QuotientGraph;

pub use nalgebra::Complex;
pub type Complex64 = Complex<f64>;
