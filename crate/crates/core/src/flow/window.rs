use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::linalg::{all_finite, norm, Point};
use crate::scalar::{lit, to_f64, Scalar};
use crate::semiconcave::sample_ball;
use crate::tonelli::TonelliSystem;

use super::{default_steps, flow_endpoint, variational_flow, FlowError};

#[derive(Clone, Copy, Debug)]
pub struct WindowOptions<S> {
    /// Terminal time of the characteristics.
    pub t2: S,
    /// Random momenta drawn from the ball in addition to `0` and `±R eᵢ`.
    pub p_samples: usize,
    pub seed: u64,
}

impl<S: Scalar> Default for WindowOptions<S> {
    fn default() -> Self {
        Self {
            t2: S::zero(),
            p_samples: 32,
            seed: 0,
        }
    }
}

/// Certified time window on which `p ↦ X(t₁)` is a diffeomorphism of `B(0, R)`.
#[derive(Clone, Debug, Serialize)]
pub struct DiffeoWindow<S> {
    pub x: Point<S>,
    pub t2: S,
    pub r: S,
    /// Minimum eigenvalue of `H_pp(t₂, x, p)` over the sampled ball.
    pub c_r: S,
    /// Largest probed gap in the leading passing run.
    pub t_r: S,
    /// `max |X(t₁) − x| / (t₂ − t₁)` over samples and passing probes.
    pub m_r: S,
    /// `(gap, min over p of min-eig(−X_p/gap))` for every probe tried.
    pub probes: Vec<(S, S)>,
}

fn momenta<S: Scalar>(d: usize, r: S, extra: usize, seed: u64) -> Vec<Point<S>> {
    let mut out = vec![vec![S::zero(); d]];
    for i in 0..d {
        for sign in [S::one(), -S::one()] {
            let mut p = vec![S::zero(); d];
            p[i] = sign * r;
            out.push(p);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let origin = vec![S::zero(); d];
    out.extend((0..extra).map(|_| sample_ball(&mut rng, &origin, r)));
    out
}

pub fn diffeo_window<S: Scalar>(
    system: &TonelliSystem<S>,
    x: &[S],
    r: S,
    probe_times: &[S],
    opts: &WindowOptions<S>,
) -> Result<DiffeoWindow<S>, FlowError> {
    system.check_dim(x)?;
    if !(r > S::zero()) {
        return Err(FlowError::InvalidParameter("R must be positive".into()));
    }
    if probe_times.is_empty() || probe_times.iter().any(|&t| !(t > S::zero())) {
        return Err(FlowError::InvalidParameter(
            "probe times must be a nonempty list of positive gaps".into(),
        ));
    }
    let mut probes: Vec<S> = probe_times.to_vec();
    probes.sort_by(|a, b| a.partial_cmp(b).expect("finite probes"));

    let ps = momenta(x.len(), r, opts.p_samples, opts.seed);
    let mut c_r = S::infinity();
    for p in &ps {
        let jet = system.hamiltonian(opts.t2, x, p)?;
        if !jet.dpp.is_finite() {
            return Err(FlowError::NotConvexAtX {
                min_eigenvalue: f64::INFINITY,
            });
        }
        c_r = c_r.min(jet.dpp.symmetric_part().min_symmetric_eigenvalue());
    }
    if !(c_r > S::zero()) {
        return Err(FlowError::NotConvexAtX {
            min_eigenvalue: to_f64(c_r),
        });
    }

    let half_c = c_r / (S::one() + S::one());
    let mut report = Vec::new();
    let mut t_r = S::zero();
    let mut m_r = S::zero();
    for &tau in &probes {
        let t1 = opts.t2 - tau;
        let steps = default_steps(t1, opts.t2);
        let per_p: Vec<Result<(S, S), FlowError>> = ps
            .par_iter()
            .map(|p| {
                let v = variational_flow(system, t1, opts.t2, x, p, steps)?;
                let m = v.x_p.scale(-S::one() / tau).symmetric_part();
                let disp = norm(&system.domain().displacement(x, &v.end.x));
                Ok((m.min_symmetric_eigenvalue(), disp / tau))
            })
            .collect();
        let mut worst = S::infinity();
        let mut speed = S::zero();
        for res in per_p {
            match res {
                Ok((e, s)) => {
                    worst = worst.min(e);
                    speed = speed.max(s);
                }
                Err(FlowError::StepRejected { .. }) => worst = S::neg_infinity(),
                Err(e) => return Err(e),
            }
        }
        report.push((tau, worst));
        if worst > half_c {
            t_r = tau;
            m_r = m_r.max(speed);
        } else {
            break;
        }
    }
    if t_r == S::zero() {
        return Err(FlowError::EmptyWindow {
            first_probe: to_f64(probes[0]),
        });
    }
    Ok(DiffeoWindow {
        x: x.to_vec(),
        t2: opts.t2,
        r,
        c_r,
        t_r,
        m_r,
        probes: report,
    })
}

/// `Φ_{x,t₁,t₂}(p) = X(t₁; t₁, t₂, x, p)`, wrapped on a torus.
pub fn flow_map<S: Scalar>(
    system: &TonelliSystem<S>,
    x: &[S],
    t1: S,
    t2: S,
    p: &[S],
) -> Result<Point<S>, FlowError> {
    let steps = default_steps(t1, t2);
    Ok(flow_endpoint(system, t2, t1, x, p, steps)?.x)
}

#[derive(Clone, Debug, Serialize)]
pub struct Inversion<S> {
    pub p: Point<S>,
    pub iterations: usize,
    pub residual: S,
}

/// Solves `Φ_{x,t₁,t₂}(p) = target` by Newton's method on the `X_p`
/// Jacobian, from the free-particle guess. On a torus the target is matched
/// modulo periods.
pub fn flow_map_inverse<S: Scalar>(
    system: &TonelliSystem<S>,
    x: &[S],
    t1: S,
    t2: S,
    target: &[S],
    window: Option<&DiffeoWindow<S>>,
) -> Result<Inversion<S>, FlowError> {
    system.check_dim(x)?;
    system.check_dim(target)?;
    let tau = t2 - t1;
    if !(tau > S::zero()) {
        return Err(FlowError::InvalidParameter("need t1 < t2".into()));
    }
    if let Some(w) = window {
        if tau > w.t_r {
            return Err(FlowError::OutsideWindow(format!(
                "time gap {} exceeds t_R = {}",
                to_f64(tau),
                to_f64(w.t_r)
            )));
        }
    }
    let domain = system.domain();
    let steps = default_steps(t1, t2);
    let mut p: Vec<S> = domain
        .displacement(x, target)
        .into_iter()
        .map(|c| -c / tau)
        .collect();
    let scale = S::one() + norm(target).max(norm(x));
    let tol = scale * (S::eps() * lit(64.0)).max(lit(1e-12));
    let mut residual = S::infinity();
    for it in 0..50 {
        let v = variational_flow(system, t1, t2, x, &p, steps)?;
        let r = domain.displacement(target, &v.end.x);
        residual = norm(&r);
        if residual <= tol {
            return finish(p, it, residual, window);
        }
        let step = v
            .x_p
            .solve(&r)
            .ok_or_else(|| FlowError::OutsideWindow("singular X_p during inversion".into()))?;
        for (pi, si) in p.iter_mut().zip(&step) {
            *pi = *pi - *si;
        }
        if !all_finite(&p) {
            break;
        }
    }
    Err(FlowError::NoConvergence {
        residual: to_f64(residual),
    })
}

fn finish<S: Scalar>(
    p: Point<S>,
    iterations: usize,
    residual: S,
    window: Option<&DiffeoWindow<S>>,
) -> Result<Inversion<S>, FlowError> {
    if let Some(w) = window {
        if norm(&p) > w.r * (S::one() + S::eps().sqrt()) {
            return Err(FlowError::OutsideWindow(format!(
                "preimage |p| = {} exceeds R = {}",
                to_f64(norm(&p)),
                to_f64(w.r)
            )));
        }
    }
    Ok(Inversion {
        p,
        iterations,
        residual,
    })
}
