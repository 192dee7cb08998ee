//! Characteristics `ẋ = H_p, ṗ = −H_x` and their variational equation.

mod window;

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{all_finite, Matrix, Point};
use crate::scalar::{from_usize, lit, to_f64, Scalar};
use crate::tonelli::{TonelliError, TonelliSystem};

pub use window::{
    diffeo_window, flow_map, flow_map_inverse, DiffeoWindow, Inversion, WindowOptions,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("step rejected at t = {t}: {reason}")]
    StepRejected { t: f64, reason: String },
    #[error("H_pp is not finite and positive definite on the sampled ball (min eigenvalue {min_eigenvalue})")]
    NotConvexAtX { min_eigenvalue: f64 },
    #[error("no probed time gap satisfies the window bound (first probe {first_probe})")]
    EmptyWindow { first_probe: f64 },
    #[error("outside the diffeomorphism window: {0}")]
    OutsideWindow(String),
    #[error("Newton inversion of the flow map did not converge (residual {residual})")]
    NoConvergence { residual: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Tonelli(#[from] TonelliError),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhasePoint<S> {
    pub t: S,
    pub x: Point<S>,
    pub p: Point<S>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
pub enum Integrator {
    #[default]
    Rk4,
    /// Störmer–Verlet; only for separable autonomous systems.
    Verlet,
}

/// `ceil(|t_end − t_start| / 1e-3)`, at least 1.
pub fn default_steps<S: Scalar>(t_start: S, t_end: S) -> usize {
    (to_f64((t_end - t_start).abs()) / 1e-3).ceil().max(1.0) as usize
}

fn rejected<S: Scalar>(t: S, reason: impl Into<String>) -> FlowError {
    FlowError::StepRejected {
        t: to_f64(t),
        reason: reason.into(),
    }
}

/// Classical RK4 on a flat state vector; `f(t, s, out)` writes the time
/// derivative into `out`.
fn rk4<S, F>(
    t0: S,
    t1: S,
    steps: usize,
    state: &mut [S],
    mut f: F,
    mut on_step: impl FnMut(S, &[S]),
) -> Result<(), FlowError>
where
    S: Scalar,
    F: FnMut(S, &[S], &mut [S]) -> Result<(), FlowError>,
{
    let dt = (t1 - t0) / from_usize(steps);
    let half = lit::<S>(0.5);
    let two = lit::<S>(2.0);
    let sixth = S::one() / lit(6.0);
    let n = state.len();
    let mut k1 = vec![S::zero(); n];
    let mut k2 = vec![S::zero(); n];
    let mut k3 = vec![S::zero(); n];
    let mut k4 = vec![S::zero(); n];
    let mut tmp = vec![S::zero(); n];
    for i in 0..steps {
        let t = t0 + dt * from_usize(i);
        f(t, state, &mut k1)?;
        for j in 0..n {
            tmp[j] = state[j] + half * dt * k1[j];
        }
        f(t + half * dt, &tmp, &mut k2)?;
        for j in 0..n {
            tmp[j] = state[j] + half * dt * k2[j];
        }
        f(t + half * dt, &tmp, &mut k3)?;
        for j in 0..n {
            tmp[j] = state[j] + dt * k3[j];
        }
        f(t + dt, &tmp, &mut k4)?;
        for j in 0..n {
            state[j] = state[j] + dt * sixth * (k1[j] + (k2[j] + k3[j]) * two + k4[j]);
        }
        if !all_finite(state) {
            return Err(rejected(t + dt, "non-finite state"));
        }
        let t_next = if i + 1 == steps { t1 } else { t + dt };
        on_step(t_next, state);
    }
    Ok(())
}

/// Writes `(H_p, −H_x)` into `out`.
fn phase_rhs_into<S: Scalar>(
    system: &TonelliSystem<S>,
    t: S,
    x: &[S],
    p: &[S],
    out: &mut [S],
) -> Result<(), FlowError> {
    let d = x.len();
    let (xd, pd) = out.split_at_mut(d);
    system.hamiltonian_gradient(t, x, p, pd, xd)?;
    if !all_finite(out) {
        return Err(rejected(t, "non-finite Hamiltonian derivatives"));
    }
    for g in &mut out[d..] {
        *g = -*g;
    }
    Ok(())
}

fn phase_rhs<S: Scalar>(
    system: &TonelliSystem<S>,
    t: S,
    x: &[S],
    p: &[S],
) -> Result<(Vec<S>, Vec<S>), FlowError> {
    let mut out = vec![S::zero(); 2 * x.len()];
    phase_rhs_into(system, t, x, p, &mut out)?;
    let pd = out.split_off(x.len());
    Ok((out, pd))
}

/// Integrates the characteristic system from `(x, p)` at `t_start` to
/// `t_end` (either direction). The returned trajectory starts with the initial
/// point; `x` is wrapped on a torus.
pub fn integrate<S: Scalar>(
    system: &TonelliSystem<S>,
    t_start: S,
    t_end: S,
    x: &[S],
    p: &[S],
    steps: usize,
    integrator: Integrator,
) -> Result<Vec<PhasePoint<S>>, FlowError> {
    integrate_impl(system, t_start, t_end, x, p, steps, integrator, true)
}

#[allow(clippy::too_many_arguments)]
fn integrate_impl<S: Scalar>(
    system: &TonelliSystem<S>,
    t_start: S,
    t_end: S,
    x: &[S],
    p: &[S],
    steps: usize,
    integrator: Integrator,
    record: bool,
) -> Result<Vec<PhasePoint<S>>, FlowError> {
    system.check_dim(x)?;
    system.check_dim(p)?;
    if steps == 0 {
        return Err(FlowError::InvalidParameter("steps must be ≥ 1".into()));
    }
    let d = x.len();
    let domain = system.domain();
    let mut traj = vec![PhasePoint {
        t: t_start,
        x: domain.wrap(x),
        p: p.to_vec(),
    }];
    match integrator {
        Integrator::Rk4 => {
            let mut state: Vec<S> = x.iter().chain(p).copied().collect();
            rk4(
                t_start,
                t_end,
                steps,
                &mut state,
                |t, s, out| phase_rhs_into(system, t, &s[..d], &s[d..], out),
                |t, s| {
                    if record {
                        traj.push(PhasePoint {
                            t,
                            x: domain.wrap(&s[..d]),
                            p: s[d..].to_vec(),
                        })
                    }
                },
            )?;
            if !record {
                traj.push(PhasePoint {
                    t: t_end,
                    x: domain.wrap(&state[..d]),
                    p: state[d..].to_vec(),
                });
            }
        }
        Integrator::Verlet => {
            if !(system.is_separable() && system.is_autonomous()) {
                return Err(FlowError::InvalidParameter(
                    "Störmer–Verlet needs a separable autonomous Hamiltonian".into(),
                ));
            }
            let dt = (t_end - t_start) / from_usize(steps);
            let half = lit::<S>(0.5) * dt;
            let mut xs = x.to_vec();
            let mut ps = p.to_vec();
            for i in 0..steps {
                let t = t_start + dt * from_usize(i);
                let (_, pd) = phase_rhs(system, t, &xs, &ps)?;
                let ph: Vec<S> = ps.iter().zip(&pd).map(|(&a, &b)| a + half * b).collect();
                let (xd, _) = phase_rhs(system, t, &xs, &ph)?;
                xs = xs.iter().zip(&xd).map(|(&a, &b)| a + dt * b).collect();
                let (_, pd) = phase_rhs(system, t + dt, &xs, &ph)?;
                ps = ph.iter().zip(&pd).map(|(&a, &b)| a + half * b).collect();
                if !all_finite(&xs) || !all_finite(&ps) {
                    return Err(rejected(t + dt, "non-finite state"));
                }
                if record || i + 1 == steps {
                    traj.push(PhasePoint {
                        t: if i + 1 == steps { t_end } else { t + dt },
                        x: domain.wrap(&xs),
                        p: ps.clone(),
                    });
                }
            }
        }
    }
    Ok(traj)
}

/// Backward characteristic from terminal data `(x, p)` at `t2` down to `t1`.
pub fn hamiltonian_flow<S: Scalar>(
    system: &TonelliSystem<S>,
    t1: S,
    t2: S,
    x: &[S],
    p: &[S],
    steps: usize,
) -> Result<Vec<PhasePoint<S>>, FlowError> {
    integrate(system, t2, t1, x, p, steps, Integrator::Rk4)
}

/// Forward flow `Φ_H^{t1,t2}` of initial data `(x, p)` at `t1`.
pub fn forward_flow<S: Scalar>(
    system: &TonelliSystem<S>,
    t1: S,
    t2: S,
    x: &[S],
    p: &[S],
    steps: usize,
) -> Result<Vec<PhasePoint<S>>, FlowError> {
    integrate(system, t1, t2, x, p, steps, Integrator::Rk4)
}

/// End point only.
pub fn flow_endpoint<S: Scalar>(
    system: &TonelliSystem<S>,
    t_start: S,
    t_end: S,
    x: &[S],
    p: &[S],
    steps: usize,
) -> Result<PhasePoint<S>, FlowError> {
    let mut traj = integrate_impl(system, t_start, t_end, x, p, steps, Integrator::Rk4, false)?;
    Ok(traj.pop().expect("trajectory is nonempty"))
}

/// `(X_p, P_p)` at `t1` for terminal data `X_p(t2) = 0`, `P_p(t2) = I`.
#[derive(Clone, Debug, Serialize)]
pub struct VariationalState<S> {
    pub x_p: Matrix<S>,
    pub p_p: Matrix<S>,
    /// Characteristic end point at `t1` (x unwrapped).
    pub end: PhasePoint<S>,
}

/// Integrates the characteristic together with a tangent pair `(δX, δP)`
/// (each `d × m`) from `t_start` to `t_end`:
/// `δẊ = H_px δX + H_pp δP`, `δṖ = −H_xx δX − H_xp δP`.
pub fn tangent_flow<S: Scalar>(
    system: &TonelliSystem<S>,
    t_start: S,
    t_end: S,
    x: &[S],
    p: &[S],
    dx0: &Matrix<S>,
    dp0: &Matrix<S>,
    steps: usize,
) -> Result<(PhasePoint<S>, Matrix<S>, Matrix<S>), FlowError> {
    system.check_dim(x)?;
    system.check_dim(p)?;
    if steps == 0 {
        return Err(FlowError::InvalidParameter("steps must be ≥ 1".into()));
    }
    let d = x.len();
    let m = dx0.cols();
    let dd = d * m;
    let mut state: Vec<S> = x
        .iter()
        .chain(p)
        .chain(dx0.as_slice())
        .chain(dp0.as_slice())
        .copied()
        .collect();
    rk4(
        t_start,
        t_end,
        steps,
        &mut state,
        |t, s, out| {
            let (xs, rest) = s.split_at(d);
            let (ps, rest) = rest.split_at(d);
            let (xm, pm) = rest.split_at(dd);
            let h = system.hamiltonian(t, xs, ps)?;
            let finite = all_finite(&h.dp)
                && all_finite(&h.dx)
                && h.dxx.is_finite()
                && h.dxp.is_finite()
                && h.dpp.is_finite();
            if !finite {
                return Err(rejected(t, "non-finite Hamiltonian derivatives"));
            }
            out[..d].copy_from_slice(&h.dp);
            for (o, &g) in out[d..2 * d].iter_mut().zip(&h.dx) {
                *o = -g;
            }
            let (xdot, pdot) = out[2 * d..].split_at_mut(dd);
            for i in 0..d {
                for j in 0..m {
                    let mut a = S::zero();
                    let mut b = S::zero();
                    for k in 0..d {
                        // H_px[i][k] = ∂²H/∂p_i∂x_k = dxp[(k, i)]
                        a = a + h.dxp[(k, i)] * xm[k * m + j] + h.dpp[(i, k)] * pm[k * m + j];
                        b = b - h.dxx[(i, k)] * xm[k * m + j] - h.dxp[(i, k)] * pm[k * m + j];
                    }
                    xdot[i * m + j] = a;
                    pdot[i * m + j] = b;
                }
            }
            Ok(())
        },
        |_, _| {},
    )?;
    let to_matrix = |slice: &[S]| {
        let rows: Vec<Vec<S>> = slice.chunks(m).map(|r| r.to_vec()).collect();
        Matrix::from_rows(&rows)
    };
    Ok((
        PhasePoint {
            t: t_end,
            x: state[..d].to_vec(),
            p: state[d..2 * d].to_vec(),
        },
        to_matrix(&state[2 * d..2 * d + dd]),
        to_matrix(&state[2 * d + dd..]),
    ))
}

/// Variational equation with respect to the terminal momentum, integrated
/// from `t2` back to `t1`.
pub fn variational_flow<S: Scalar>(
    system: &TonelliSystem<S>,
    t1: S,
    t2: S,
    x: &[S],
    p: &[S],
    steps: usize,
) -> Result<VariationalState<S>, FlowError> {
    let d = x.len();
    let (end, x_p, p_p) = tangent_flow(
        system,
        t2,
        t1,
        x,
        p,
        &Matrix::zeros(d, d),
        &Matrix::identity(d),
        steps,
    )?;
    Ok(VariationalState { x_p, p_p, end })
}

/// `max |MᵀJM − J|` for the full phase-space tangent map `M` of the flow
/// from `t_start` to `t_end`.
pub fn symplectic_defect<S: Scalar>(
    system: &TonelliSystem<S>,
    t_start: S,
    t_end: S,
    x: &[S],
    p: &[S],
    steps: usize,
) -> Result<S, FlowError> {
    let d = x.len();
    let (_, xx, px) = tangent_flow(
        system,
        t_start,
        t_end,
        x,
        p,
        &Matrix::identity(d),
        &Matrix::zeros(d, d),
        steps,
    )?;
    let (_, xp, pp) = tangent_flow(
        system,
        t_start,
        t_end,
        x,
        p,
        &Matrix::zeros(d, d),
        &Matrix::identity(d),
        steps,
    )?;
    let n = 2 * d;
    let mut m = Matrix::zeros(n, n);
    let mut j = Matrix::zeros(n, n);
    for r in 0..d {
        for c in 0..d {
            m[(r, c)] = xx[(r, c)];
            m[(r, c + d)] = xp[(r, c)];
            m[(r + d, c)] = px[(r, c)];
            m[(r + d, c + d)] = pp[(r, c)];
        }
        j[(r, r + d)] = S::one();
        j[(r + d, r)] = -S::one();
    }
    Ok(m.transpose().matmul(&j).matmul(&m).sub(&j).max_abs())
}

/// End points for a batch of initial conditions, in parallel.
pub fn batch_endpoints<S: Scalar>(
    system: &TonelliSystem<S>,
    t_start: S,
    t_end: S,
    initial: &[(Point<S>, Point<S>)],
    steps: usize,
) -> Vec<Result<PhasePoint<S>, FlowError>> {
    use rayon::prelude::*;
    initial
        .par_iter()
        .map(|(x, p)| flow_endpoint(system, t_start, t_end, x, p, steps))
        .collect()
}
