//! Density at infinity of polynomial fibers.
//!
//! For a polynomial `f: R^n -> R` this crate estimates the density at
//! infinity of the level sets `f^{-1}(t)` (by counting or measuring their
//! intersections with large spheres and balls, or at the origin after the
//! inversion `x -> x/|x|^2`), detects asymptotic critical values through the
//! decay of `|x| |grad f(x)|`, and checks the Lipschitz behaviour of
//! `t -> density` together with the rugosity bound for the vector field that
//! trivializes the fibration at infinity.

pub mod analysis;
pub mod cli;
pub mod density;
pub mod error;
pub mod fiber;
pub mod geometry;
pub mod kinf;
pub mod numerics;
pub mod poly;
pub mod rng;

pub use error::{Error, ParseError, ParseErrorKind, Result};
pub use poly::{DiffPoly, Polynomial};
pub use rng::StreamId;
