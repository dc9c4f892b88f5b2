//! Spectrum sharing between two energy-efficient sources and an
//! amplify-and-forward relay that charges for the band it carries.
//!
//! The crate computes the unique Nash equilibrium of the bandwidth game, the
//! Nash bargaining solution over it (conjugate gradient with Polak-Ribière
//! updates, cross-checked by a grid oracle), the Hessian eigenvalues that
//! certify local strict concavity of the Nash product, the time-sharing
//! utility region, and relay-position sweeps of the resulting gains.
//!
//! Grid evaluations and sweeps run on rayon when the `parallel` feature is
//! enabled (the default); see [`Execution`].

pub mod bargaining;
pub mod error;
pub mod experiments;
pub mod format;
pub mod game;
pub mod parallel;
pub mod system_model;

pub use error::{Error, Result};
pub use game::{
    BandAllocation, EquilibriumReport, MarginalTerms, Player, SolutionKind, UtilityPair,
};
pub use parallel::Execution;
pub use system_model::{LinkBudget, Point, Scenario};
