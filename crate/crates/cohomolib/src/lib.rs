//! Numerical renormalization toolkit for orientation-preserving circle
//! diffeomorphisms.
//!
//! The crate is organized around the classical return-time structure of an
//! irrational rotation number: exact continued-fraction arithmetic
//! ([`arithmetic`]), combinatorics for high-order chain rules ([`calculus`]),
//! spectral circle maps and their renormalization geometry ([`circlemap`]),
//! Birkhoff sums and bounded-variation estimates ([`cocycle`]), small-divisor
//! Fourier solvers over rigid rotations ([`fourier`]), fibered Z^2-actions
//! ([`action`]), and an explicit smooth-coboundary construction pipeline
//! ([`coboundary`]).
//!
//! All quantities that feed an assertion are computed, never assumed: error
//! budgets (interpolation residuals, measure-estimate slack, interval widths)
//! travel with the results in each module's report structs.

pub mod arithmetic;
pub mod calculus;
pub mod circlemap;
pub mod coboundary;
pub mod cocycle;
pub mod action;
pub mod fourier;
pub mod periodic;

pub use arithmetic::ContinuedFraction;
