//! Variable-exponent function spaces on a grid: Lebesgue and mixed
//! sequence norms, Littlewood–Paley based Besov and Triebel–Lizorkin
//! quasi-norms with 2-microlocal weights, atomic decompositions, and
//! numerical checks of the inequalities that tie them together.

pub mod atoms;
pub mod decomp;
pub mod embeddings;
pub mod error;
pub mod exponent;
pub mod fourier;
pub mod grid;
pub mod io;
pub mod lp_analysis;
pub mod mixed;
pub mod modular;
mod par;
pub mod rootfind;

pub use error::{Error, Result};
pub use exponent::{Exponent, WeightKind, WeightSequence};
pub use grid::{DyadicCube, Grid, GridFunction};
pub use modular::NormResult;
