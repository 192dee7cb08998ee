use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{convex_conjugate, ConjugateOptions, ConvexJet, TonelliSystem};
use crate::linalg::{norm, Point};
use crate::scalar::{lit, Scalar};

/// Compact `(t, x, v)` window sampled by [`verify_tonelli`]. `x` is drawn from
/// the system's domain.
#[derive(Clone, Debug, Serialize)]
pub struct SampleWindow<S> {
    pub t_min: S,
    pub t_max: S,
    pub v_radius: S,
}

impl<S: Scalar> Default for SampleWindow<S> {
    fn default() -> Self {
        Self {
            t_min: S::zero(),
            t_max: S::one(),
            v_radius: lit(3.0),
        }
    }
}

/// Worst-case margins of the Tonelli conditions over the sampled window.
/// A margin is non-negative when the condition holds at every sample.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport<S> {
    pub samples: usize,
    pub window: SampleWindow<S>,
    /// Smallest eigenvalue of `L_vv`.
    pub convexity_margin: S,
    /// `min L − θ(|v|) + c0`; `None` without growth data.
    pub growth_margin: Option<S>,
    /// `min C1 + C2·L − |L_t|`; `None` without growth data.
    pub time_derivative_margin: Option<S>,
    /// `max |L − sup_p(p·v − H)|`.
    pub legendre_residual: S,
    pub convexity_ok: bool,
    pub growth_ok: Option<bool>,
    pub time_derivative_ok: Option<bool>,
    pub failures: Vec<String>,
}

impl<S: Scalar> ConditionReport<S> {
    pub fn all_pass(&self) -> bool {
        self.failures.is_empty()
    }
}

struct SampleResult<S> {
    convexity: S,
    growth: Option<S>,
    time: Option<S>,
    residual: S,
    error: Option<String>,
}

pub fn verify_tonelli<S: Scalar>(
    system: &TonelliSystem<S>,
    sample_count: usize,
    seed: u64,
    window: SampleWindow<S>,
) -> ConditionReport<S> {
    let sample_count = sample_count.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = system.dim();
    let samples: Vec<(S, Point<S>, Point<S>)> = (0..sample_count)
        .map(|_| {
            let u = S::from_f64(rng.gen::<f64>()).unwrap();
            let t = window.t_min + u * (window.t_max - window.t_min);
            let x = system.domain().sample_uniform(&mut rng);
            let v = (0..d)
                .map(|_| {
                    let u = S::from_f64(rng.gen_range(-1.0..=1.0)).unwrap();
                    u * window.v_radius
                })
                .collect();
            (t, x, v)
        })
        .collect();

    let theta = system.theta().copied();
    let constants = system.constants().copied();
    let results: Vec<SampleResult<S>> = samples
        .par_iter()
        .map(|(t, x, v)| {
            let jet = system.lagrangian(*t, x, v);
            let convexity = jet.dvv.min_symmetric_eigenvalue();
            let growth = match (theta, constants) {
                (Some(th), Some(c)) => Some(jet.value - th.value(norm(v)) + c.c0),
                _ => None,
            };
            let time = constants.map(|c| c.c1 + c.c2 * jet.value - jet.dt.abs());
            // Round trip: conjugate H back at v, starting from p = L_v(v).
            let opts = ConjugateOptions {
                radius: lit::<S>(4.0) * (norm(&jet.dv) + S::one()),
                ..ConjugateOptions::default()
            };
            let back = system.hamiltonian(*t, x, &jet.dv).and_then(|_| {
                convex_conjugate(
                    |p: &[S]| {
                        let h = system
                            .hamiltonian(*t, x, p)
                            .expect("Hamiltonian evaluable on the search box");
                        ConvexJet {
                            value: h.value,
                            grad: h.dp,
                            hess: h.dpp,
                        }
                    },
                    v,
                    Some(&jet.dv),
                    &opts,
                )
            });
            match back {
                Ok(c) => SampleResult {
                    convexity,
                    growth,
                    time,
                    residual: (jet.value - c.value).abs(),
                    error: None,
                },
                Err(e) => SampleResult {
                    convexity,
                    growth,
                    time,
                    residual: S::infinity(),
                    error: Some(format!("Legendre round trip failed at v={v:?}: {e}")),
                },
            }
        })
        .collect();

    let convexity_margin = results
        .iter()
        .map(|r| r.convexity)
        .fold(S::infinity(), S::min);
    let growth_margin = results
        .iter()
        .map(|r| r.growth)
        .try_fold(S::infinity(), |m, g| g.map(|g| m.min(g)));
    let time_derivative_margin = results
        .iter()
        .map(|r| r.time)
        .try_fold(S::infinity(), |m, g| g.map(|g| m.min(g)));
    let legendre_residual = results.iter().map(|r| r.residual).fold(S::zero(), S::max);

    let tol: S = lit(1e-12);
    let convexity_ok = convexity_margin > S::zero();
    let growth_ok = growth_margin.map(|m| m >= -tol);
    let time_derivative_ok = time_derivative_margin.map(|m| m >= -tol);
    let mut failures = Vec::new();
    if !convexity_ok {
        failures.push(format!(
            "strict convexity violated: min eigenvalue of L_vv = {convexity_margin}"
        ));
    }
    if growth_ok == Some(false) {
        failures.push(format!(
            "superlinear lower bound violated: margin {}",
            growth_margin.unwrap()
        ));
    }
    if time_derivative_ok == Some(false) {
        failures.push(format!(
            "time-derivative bound violated: margin {}",
            time_derivative_margin.unwrap()
        ));
    }
    if legendre_residual > lit(1e-6) {
        failures.push(format!(
            "Legendre round-trip residual {legendre_residual} exceeds 1e-6"
        ));
    }
    if let Some(e) = results.iter().find_map(|r| r.error.clone()) {
        failures.push(e);
    }
    ConditionReport {
        samples: sample_count,
        window,
        convexity_margin,
        growth_margin,
        time_derivative_margin,
        legendre_residual,
        convexity_ok,
        growth_ok,
        time_derivative_ok,
        failures,
    }
}
