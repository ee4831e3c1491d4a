//! Exact recognition of subgraphs and induced subgraphs of the regular
//! {p,q} tiling graphs.
//!
//! The crate decides whether a pattern graph embeds into the 1-skeleton of
//! the spherical, Euclidean, or hyperbolic {p,q} tiling:
//!  - spherical tilings are generated in full and searched directly,
//!  - Euclidean tilings use a rectangle-restricted divide and conquer on the
//!    (possibly sheared) integer grid,
//!  - hyperbolic tilings run a dynamic program over candidate nooses and
//!    boundary assignments, with a linear-time fast path for p > |V(H)|.
//!
//! A brute-force oracle cross-checks every solver and independently verifies
//! every witness.

pub mod atlas;
pub mod error;
pub mod convexity;
pub mod hyperbolic;
pub mod noose;
pub mod oracle;
pub mod pattern;
pub mod ray;

pub use error::{Error, Result};
