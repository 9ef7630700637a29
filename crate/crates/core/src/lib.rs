//! Partial pole placement for linear systems with a single delay.

pub mod admissibility;
pub mod catalog;
pub mod dde_sim;
pub mod error;
pub mod factorization;
mod linalg;
mod precise;
pub mod placement;
pub mod quasipoly;
pub mod report;
pub mod spectrum;
mod roots1d;

pub use error::{Error, Result};
pub use placement::{solve_control_mid, solve_crrid, solve_generic_mid, PlacementResult};
pub use quasipoly::{Evaluation, Kind, Quasipolynomial};

/// The guide's code samples, compiled and run as doc-tests.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $file:literal) => {
            #[doc = include_str!(concat!("../../../book/src/", $file))]
            pub struct $name;
        };
    }
    #[doc = include_str!("../../../README.md")]
    pub struct Readme;

    chapter!(Introduction, "introduction.md");
    chapter!(Quasipolynomials, "quasipolynomials.md");
    chapter!(Placement, "placement.md");
    chapter!(Admissibility, "admissibility.md");
    chapter!(Spectrum, "spectrum.md");
    chapter!(Simulation, "simulation.md");
    chapter!(Factorization, "factorization.md");
    chapter!(Examples, "examples.md");
    chapter!(Reports, "reports.md");
    chapter!(Cli, "cli.md");
    chapter!(Service, "service.md");
}
