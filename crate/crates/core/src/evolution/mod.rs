//! Fundamental solutions, the Lax–Oleinik operators `T` and `T̆`, maximizer
//! localization, touching families and the C^{1,1} window.

mod action;
mod family;
mod operators;
mod regularity;

use serde::Serialize;
use thiserror::Error;

use crate::flow::FlowError;
use crate::grid::GridError;
use crate::linalg::Point;
use crate::semiconcave::SemiconcaveError;
use crate::tonelli::TonelliError;

pub use action::{action_kernel, default_knots, fundamental_solution, Method};
pub use family::{
    maximizer_radius, touching_family, verify_inf_representation, InfRepresentationReport,
};
pub use operators::{
    evolve_grid, lax_oleinik_negative, lax_oleinik_positive, positive_basins, Basin, EvolvedGrid,
    OperatorValue, ScanOptions,
};
pub use regularity::{
    c11_certificate, estimate_critical_time, C11Certificate, CriticalProbe, CriticalTimeOptions,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolutionError {
    #[error("action minimization did not converge (best action {best_action}, gradient {gradient_norm})")]
    NoConvergence {
        best_action: f64,
        gradient_norm: f64,
        best: Vec<Vec<f64>>,
    },
    #[error("shooting left the diffeomorphism window: {0}")]
    ShootingNotDiffeo(String),
    #[error("maximizer at distance {distance} exceeds the localization bound {bound}")]
    LocalizationViolated { distance: f64, bound: f64 },
    #[error("system has no growth constants: {0}")]
    MissingConstants(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Tonelli(#[from] TonelliError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Semiconcave(#[from] SemiconcaveError),
}

/// Discrete minimizing curve.
#[derive(Clone, Debug, Serialize)]
pub struct CurvePath<S> {
    pub times: Vec<S>,
    pub points: Vec<Point<S>>,
    /// `L_v` at the knots (direct) or the characteristic momentum (shooting).
    pub costates: Option<Vec<Point<S>>>,
    pub action: S,
    /// Newton iterations used.
    pub iterations: usize,
}

/// Radius `λ_ℓ` with `|y* − x| ≤ λ_ℓ (t₂ − t₁)` for ℓ-Lipschitz data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LocalizationBound<S> {
    pub lipschitz: S,
    pub lambda: S,
    pub window: (S, S),
}

/// Bracket `[lower, upper]` for the critical time.
#[derive(Clone, Debug, Serialize)]
pub struct CriticalTimeEstimate<S> {
    pub t_phi_lower: S,
    pub t_phi_upper: S,
    pub cap: S,
    /// True when no failure was found up to `cap`.
    pub capped: bool,
    pub probes: Vec<CriticalProbe<S>>,
}
