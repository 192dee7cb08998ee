//! Tonelli Lagrangian/Hamiltonian pairs on boxes and flat tori.
//!
//! A [`TonelliSystem`] bundles a Lagrangian evaluator, an optional analytic
//! Hamiltonian (otherwise obtained through [`legendre_transform`] with
//! finite-difference second derivatives), the superlinear growth function θ and
//! the growth constants `c0`, `C1`, `C2`.

mod domain;
mod legendre;
mod systems;
mod verify;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{Matrix, Point};
use crate::scalar::{lit, Scalar};

pub use domain::{DomainKind, DomainSpec};
pub use legendre::{convex_conjugate, legendre_transform, Conjugate, ConjugateOptions, ConvexJet};
pub use systems::Potential;
pub use verify::{verify_tonelli, ConditionReport, SampleWindow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TonelliError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error(
        "objective is not convex at iterate {iterate:?} (min Hessian eigenvalue {min_eigenvalue})"
    )]
    NonConvexObjective {
        iterate: Vec<f64>,
        min_eigenvalue: f64,
    },
    #[error("maximizer stayed on the search boundary after {retries} radius doublings (radius {radius})")]
    MaximizerOnBoundary { retries: usize, radius: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Value and derivatives of `L(t, x, v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianJet<S> {
    pub value: S,
    pub dt: S,
    pub dx: Vec<S>,
    pub dv: Vec<S>,
    pub dvv: Matrix<S>,
}

/// Value and derivatives of `H(t, x, p)`. `dxp[(i, j)] = ∂²H/∂x_i∂p_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianJet<S> {
    pub value: S,
    pub dx: Vec<S>,
    pub dp: Vec<S>,
    pub dxx: Matrix<S>,
    pub dxp: Matrix<S>,
    pub dpp: Matrix<S>,
}

pub type LagrangianFn<S> = Arc<dyn Fn(S, &[S], &[S]) -> LagrangianJet<S> + Send + Sync>;
pub type HamiltonianFn<S> = Arc<dyn Fn(S, &[S], &[S]) -> HamiltonianJet<S> + Send + Sync>;
/// Writes `(H_x, H_p)` into the two buffers.
pub type HamiltonianGradientFn<S> = Arc<dyn Fn(S, &[S], &[S], &mut [S], &mut [S]) + Send + Sync>;
/// Closed-form fundamental solution `h(t1, t2, x, y)` where one is known.
pub type ActionFn<S> = Arc<dyn Fn(S, S, &[S], &[S]) -> S + Send + Sync>;

/// Superlinear growth function `θ(r) = a·r^q / q` with `q > 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Superlinear<S> {
    pub exponent: S,
    pub coefficient: S,
}

impl<S: Scalar> Superlinear<S> {
    pub fn quadratic() -> Self {
        Self {
            exponent: lit(2.0),
            coefficient: S::one(),
        }
    }

    pub fn power(exponent: S) -> Self {
        Self {
            exponent,
            coefficient: S::one(),
        }
    }

    pub fn value(&self, r: S) -> S {
        self.coefficient * r.abs().powf(self.exponent) / self.exponent
    }

    /// θ on the real line, `r ↦ θ(|r|)`, as a convex jet.
    fn jet(&self, r: S) -> ConvexJet<S> {
        let q = self.exponent;
        let a = self.coefficient;
        let ar = r.abs();
        let d1 = a * ar.powf(q - S::one()) * r.signum();
        let d2 = if ar == S::zero() && q < lit(2.0) {
            S::infinity()
        } else {
            a * (q - S::one()) * ar.powf(q - lit(2.0))
        };
        ConvexJet {
            value: self.value(r),
            grad: vec![if ar == S::zero() { S::zero() } else { d1 }],
            hess: Matrix::scaled_identity(1, d2),
        }
    }

    /// Convex conjugate `θ*(s) = sup_r (s·r − θ(|r|))`, computed with the same
    /// routine as the Legendre transform.
    pub fn conjugate(&self, s: S) -> Result<S, TonelliError> {
        let opts = ConjugateOptions {
            radius: s.abs().max(S::one()) + S::one(),
            ..ConjugateOptions::default()
        };
        convex_conjugate(|r: &[S]| self.jet(r[0]), &[s], None, &opts).map(|c| c.value)
    }
}

/// Growth constants of the Tonelli conditions.
///
/// `localization_c1` is the additive constant of the maximizer-radius bound; it
/// defaults to `c1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthConstants<S> {
    pub c0: S,
    pub c1: S,
    pub c2: S,
    pub localization_c1: S,
}

impl<S: Scalar> GrowthConstants<S> {
    pub fn new(c0: S, c1: S, c2: S) -> Self {
        Self {
            c0,
            c1,
            c2,
            localization_c1: c1,
        }
    }
}

#[derive(Clone)]
pub struct TonelliSystem<S: Scalar> {
    name: String,
    domain: DomainSpec<S>,
    lagrangian: LagrangianFn<S>,
    hamiltonian: Option<HamiltonianFn<S>>,
    hamiltonian_gradient: Option<HamiltonianGradientFn<S>>,
    theta: Option<Superlinear<S>>,
    constants: Option<GrowthConstants<S>>,
    autonomous: bool,
    separable: bool,
    action: Option<ActionFn<S>>,
}

impl<S: Scalar> fmt::Debug for TonelliSystem<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TonelliSystem")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("analytic_hamiltonian", &self.hamiltonian.is_some())
            .field("theta", &self.theta)
            .field("constants", &self.constants)
            .field("autonomous", &self.autonomous)
            .field("separable", &self.separable)
            .finish()
    }
}

impl<S: Scalar> TonelliSystem<S> {
    /// A custom system given only by its Lagrangian. The Hamiltonian is
    /// obtained numerically and its second derivatives by finite differences.
    pub fn from_lagrangian(
        name: impl Into<String>,
        domain: DomainSpec<S>,
        lagrangian: LagrangianFn<S>,
    ) -> Self {
        Self {
            name: name.into(),
            domain,
            lagrangian,
            hamiltonian: None,
            hamiltonian_gradient: None,
            theta: None,
            constants: None,
            autonomous: false,
            separable: false,
            action: None,
        }
    }

    pub fn with_hamiltonian(mut self, h: HamiltonianFn<S>) -> Self {
        self.hamiltonian = Some(h);
        self
    }

    /// Allocation-free first derivatives, used by the characteristic flow.
    pub fn with_hamiltonian_gradient(mut self, g: HamiltonianGradientFn<S>) -> Self {
        self.hamiltonian_gradient = Some(g);
        self
    }

    pub fn with_growth(mut self, theta: Superlinear<S>, constants: GrowthConstants<S>) -> Self {
        self.theta = Some(theta);
        self.constants = Some(constants);
        self
    }

    pub fn with_constants(mut self, constants: GrowthConstants<S>) -> Self {
        self.constants = Some(constants);
        self
    }

    pub fn with_autonomous(mut self, autonomous: bool) -> Self {
        self.autonomous = autonomous;
        self
    }

    pub fn with_separable(mut self, separable: bool) -> Self {
        self.separable = separable;
        self
    }

    pub fn with_action(mut self, action: ActionFn<S>) -> Self {
        self.action = Some(action);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &DomainSpec<S> {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn theta(&self) -> Option<&Superlinear<S>> {
        self.theta.as_ref()
    }

    pub fn constants(&self) -> Option<&GrowthConstants<S>> {
        self.constants.as_ref()
    }

    pub fn is_autonomous(&self) -> bool {
        self.autonomous
    }

    /// `H(t, x, p) = K(p) + V(x)` with no time dependence.
    pub fn is_separable(&self) -> bool {
        self.separable
    }

    pub fn has_analytic_hamiltonian(&self) -> bool {
        self.hamiltonian.is_some()
    }

    pub fn closed_form_action(&self) -> Option<&ActionFn<S>> {
        self.action.as_ref()
    }

    #[inline]
    pub fn lagrangian(&self, t: S, x: &[S], v: &[S]) -> LagrangianJet<S> {
        (self.lagrangian)(t, x, v)
    }

    /// Hamiltonian jet. Falls back to the numerical Legendre transform with
    /// central differences (step 1e-5) when no analytic form is registered.
    pub fn hamiltonian(&self, t: S, x: &[S], p: &[S]) -> Result<HamiltonianJet<S>, TonelliError> {
        match &self.hamiltonian {
            Some(h) => Ok(h(t, x, p)),
            None => self.numeric_hamiltonian(t, x, p),
        }
    }

    /// `(H_x, H_p)` written into `dx` and `dp`.
    pub fn hamiltonian_gradient(
        &self,
        t: S,
        x: &[S],
        p: &[S],
        dx: &mut [S],
        dp: &mut [S],
    ) -> Result<(), TonelliError> {
        if let Some(g) = &self.hamiltonian_gradient {
            g(t, x, p, dx, dp);
            return Ok(());
        }
        let (hx, hp) = match &self.hamiltonian {
            Some(h) => {
                let jet = h(t, x, p);
                (jet.dx, jet.dp)
            }
            None => {
                let (_, hx, hp) = self.numeric_first_order(t, x, p)?;
                (hx, hp)
            }
        };
        dx.copy_from_slice(&hx);
        dp.copy_from_slice(&hp);
        Ok(())
    }

    /// `(H, H_x, H_p)` by the envelope theorem: `H_p = v*`, `H_x = −L_x(v*)`.
    fn numeric_first_order(
        &self,
        t: S,
        x: &[S],
        p: &[S],
    ) -> Result<(S, Vec<S>, Vec<S>), TonelliError> {
        let c = legendre_transform(self, t, x, p, lit(8.0))?;
        let lx = self.lagrangian(t, x, &c.maximizer).dx;
        Ok((c.value, lx.into_iter().map(|g| -g).collect(), c.maximizer))
    }

    fn numeric_hamiltonian(
        &self,
        t: S,
        x: &[S],
        p: &[S],
    ) -> Result<HamiltonianJet<S>, TonelliError> {
        let d = x.len();
        let step: S = lit(1e-5);
        let (value, dx, dp) = self.numeric_first_order(t, x, p)?;
        let mut dxx = Matrix::zeros(d, d);
        let mut dxp = Matrix::zeros(d, d);
        let mut dpp = Matrix::zeros(d, d);
        for j in 0..d {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] = xp[j] + step;
            xm[j] = xm[j] - step;
            let (_, hx_p, hp_p) = self.numeric_first_order(t, &xp, p)?;
            let (_, hx_m, hp_m) = self.numeric_first_order(t, &xm, p)?;
            let mut pp = p.to_vec();
            let mut pm = p.to_vec();
            pp[j] = pp[j] + step;
            pm[j] = pm[j] - step;
            let (_, _, hpp_p) = self.numeric_first_order(t, x, &pp)?;
            let (_, _, hpp_m) = self.numeric_first_order(t, x, &pm)?;
            let two_h = step + step;
            for i in 0..d {
                dxx[(i, j)] = (hx_p[i] - hx_m[i]) / two_h;
                // ∂/∂x_j of H_{p_i} is ∂²H/∂x_j∂p_i
                dxp[(j, i)] = (hp_p[i] - hp_m[i]) / two_h;
                dpp[(i, j)] = (hpp_p[i] - hpp_m[i]) / two_h;
            }
        }
        Ok(HamiltonianJet {
            value,
            dx,
            dp,
            dxx: dxx.symmetric_part(),
            dxp,
            dpp: dpp.symmetric_part(),
        })
    }

    pub fn hamiltonian_value(&self, t: S, x: &[S], p: &[S]) -> Result<S, TonelliError> {
        match &self.hamiltonian {
            Some(h) => Ok(h(t, x, p).value),
            None => legendre_transform(self, t, x, p, lit(8.0)).map(|c| c.value),
        }
    }

    pub(crate) fn check_dim(&self, x: &[S]) -> Result<(), TonelliError> {
        if x.len() != self.dim() {
            return Err(TonelliError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Sample point in the `(t, x, v)` window.
pub type TxvSample<S> = (S, Point<S>, Point<S>);
