//! Far-field asymptotics of two-dimensional Navier–Stokes flows with
//! localized data.
//!
//! The crate couples a pseudospectral vorticity solver with closed-form
//! far-field invariants: the flux matrix `∫₀ᵗ∫u⊗u`, the complex number
//! `z = (a − d) + ib`, the radial limit `L = |z|/π` of `|x|³|u|` and the
//! hexagon of directions where a single velocity component decays faster.
//! See the `book/` directory for a guided tour.

pub mod accept;
pub mod asymptotics;
pub mod farfield;
pub mod grid;
pub mod initdata;
pub mod io;
pub mod kernels;
pub mod quad;
pub mod solver;
pub mod verify;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/invariants.md")]
    pub struct Invariants;
    #[doc = include_str!("../../../book/src/kernels.md")]
    pub struct Kernels;
    #[doc = include_str!("../../../book/src/solver.md")]
    pub struct Solver;
    #[doc = include_str!("../../../book/src/farfield.md")]
    pub struct FarField;
    #[doc = include_str!("../../../book/src/lemmas.md")]
    pub struct Lemmas;
    #[doc = include_str!("../../../book/src/reports.md")]
    pub struct Reports;
    #[doc = include_str!("../../../book/src/acceptance.md")]
    pub struct Acceptance;
}
