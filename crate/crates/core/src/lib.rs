//! Curvature of Kähler Sasaki metrics on tube domains, positivity
//! classification, and the optimal-transport structure of Ψ-costs.
//!
//! Everything is computed in the real base chart: a convex potential Ψ on
//! Ω ⊂ ℝⁿ determines the Hessian metric `Ψ_ij dx_i dx_j` and the translation
//! invariant Kähler metric on Ω × ℝⁿ, and all curvature quantities are
//! expressed through `Ψ_ij, Ψ_ijk, Ψ_ijkl`.

pub mod curvature;
pub mod error;
pub mod expr;
pub mod geodesy;
pub mod jet;
pub mod potential;
pub mod quad;
pub mod radial;
pub mod sampling;
pub mod transport;
pub mod verdict;
pub mod verify;

pub use error::{Error, Result};
pub use potential::{parse_potential, Derivs, Domain, DualChart, Parsed, PotentialJet, RadialPotential};
pub use verdict::{SignStatus, SignVerdict, Witness};
