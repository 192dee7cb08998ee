//! Semiconcave functions as minima of finite families, the Lax-Oleinik
//! semigroups of Tonelli Lagrangians, Hamiltonian characteristics, and
//! numerical checks on pseudo-graphs and singular strata.
//!
//! Every routine is generic over [`Scalar`] (`f32` or `f64`); the `*64` and
//! `*32` aliases below fix the precision. There is no exact or rational
//! scalar type.

// `!(a < b)` is the NaN-rejecting form throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod evolution;
pub mod flow;
pub mod grid;
pub mod linalg;
pub mod pseudograph;
pub mod scalar;
pub mod semiconcave;
pub mod tonelli;
pub mod topology;

pub use scalar::Scalar;

pub type DomainSpec64 = tonelli::DomainSpec<f64>;
pub type DomainSpec32 = tonelli::DomainSpec<f32>;
pub type TonelliSystem64 = tonelli::TonelliSystem<f64>;
pub type TonelliSystem32 = tonelli::TonelliSystem<f32>;
pub type MarginalFunction64 = semiconcave::MarginalFunction<f64>;
pub type MarginalFunction32 = semiconcave::MarginalFunction<f32>;
pub type Grid64 = grid::Grid<f64>;
pub type Grid32 = grid::Grid<f32>;
pub type PhaseCloud64 = pseudograph::PhaseCloud<f64>;
pub type PhaseCloud32 = pseudograph::PhaseCloud<f32>;
pub type StrataGrid64 = topology::StrataGrid<f64>;
pub type StrataGrid32 = topology::StrataGrid<f32>;
