use serde::{Deserialize, Serialize};

use crate::flow::{default_steps, flow_map_inverse, hamiltonian_flow, DiffeoWindow, FlowError};
use crate::linalg::{dot, max_abs, norm, Matrix, Point};
use crate::scalar::{from_usize, lit, to_f64, Scalar};
use crate::tonelli::TonelliSystem;

use super::{CurvePath, EvolutionError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Minimize the trapezoidal action over interior knots.
    Direct,
    /// Newton on the terminal momentum of the characteristic through `y`.
    Shooting,
}

/// 64 knots per unit time, at least 64.
pub fn default_knots<S: Scalar>(t1: S, t2: S) -> usize {
    64 * (to_f64(t2 - t1).ceil().max(1.0) as usize)
}

/// `h(t₁, t₂, x, y)` from the closed form when the system has one, otherwise
/// by direct minimization with [`default_knots`].
pub fn action_kernel<S: Scalar>(
    system: &TonelliSystem<S>,
    t1: S,
    t2: S,
    x: &[S],
    y: &[S],
) -> Result<S, EvolutionError> {
    if let Some(h) = system.closed_form_action() {
        return Ok(h(t1, t2, x, y));
    }
    let (value, _) = fundamental_solution(
        system,
        t1,
        t2,
        x,
        y,
        default_knots(t1, t2),
        Method::Direct,
        None,
    )?;
    Ok(value)
}

/// Minimal action from `x` at `t1` to `y` at `t2`. On a torus the curve is
/// computed in the cover, ending at the nearest lift of `y`.
#[allow(clippy::too_many_arguments)]
pub fn fundamental_solution<S: Scalar>(
    system: &TonelliSystem<S>,
    t1: S,
    t2: S,
    x: &[S],
    y: &[S],
    knots: usize,
    method: Method,
    window: Option<&DiffeoWindow<S>>,
) -> Result<(S, CurvePath<S>), EvolutionError> {
    system.check_dim(x)?;
    system.check_dim(y)?;
    if !(t1 < t2) {
        return Err(EvolutionError::InvalidParameter("need t1 < t2".into()));
    }
    let path = match method {
        Method::Direct => {
            if knots < 2 {
                return Err(EvolutionError::InvalidParameter(
                    "need at least 2 knots".into(),
                ));
            }
            direct(system, t1, t2, x, y, knots)?
        }
        Method::Shooting => shooting(system, t1, t2, x, y, window)?,
    };
    Ok((path.action, path))
}

struct Discrete<'a, S: Scalar> {
    system: &'a TonelliSystem<S>,
    t1: S,
    dt: S,
    n: usize,
    d: usize,
    x: Vec<S>,
    y: Vec<S>,
}

impl<S: Scalar> Discrete<'_, S> {
    fn time(&self, i: usize) -> S {
        self.t1 + self.dt * from_usize(i)
    }

    fn knot<'b>(&'b self, z: &'b [S], i: usize) -> &'b [S] {
        if i == 0 {
            &self.x
        } else if i == self.n {
            &self.y
        } else {
            &z[(i - 1) * self.d..i * self.d]
        }
    }

    fn velocity(&self, z: &[S], i: usize) -> Vec<S> {
        let (a, b) = (self.knot(z, i), self.knot(z, i + 1));
        a.iter().zip(b).map(|(&p, &q)| (q - p) / self.dt).collect()
    }

    fn action(&self, z: &[S]) -> S {
        let half = lit::<S>(0.5) * self.dt;
        let mut total = S::zero();
        for i in 0..self.n {
            let v = self.velocity(z, i);
            let la = self.system.lagrangian(self.time(i), self.knot(z, i), &v);
            let lb = self
                .system
                .lagrangian(self.time(i + 1), self.knot(z, i + 1), &v);
            total = total + half * (la.value + lb.value);
        }
        total
    }

    fn action_and_gradient(&self, z: &[S]) -> (S, Vec<S>) {
        let half = lit::<S>(0.5);
        let hdt = half * self.dt;
        let d = self.d;
        let mut g = vec![S::zero(); z.len()];
        let mut total = S::zero();
        for i in 0..self.n {
            let v = self.velocity(z, i);
            let la = self.system.lagrangian(self.time(i), self.knot(z, i), &v);
            let lb = self
                .system
                .lagrangian(self.time(i + 1), self.knot(z, i + 1), &v);
            total = total + hdt * (la.value + lb.value);
            if i >= 1 {
                for k in 0..d {
                    g[(i - 1) * d + k] =
                        g[(i - 1) * d + k] + hdt * la.dx[k] - half * (la.dv[k] + lb.dv[k]);
                }
            }
            if i + 1 < self.n {
                for k in 0..d {
                    g[i * d + k] = g[i * d + k] + hdt * lb.dx[k] + half * (la.dv[k] + lb.dv[k]);
                }
            }
        }
        (total, g)
    }

    /// Block-tridiagonal Hessian by central differences of the gradient,
    /// perturbing every third knot at once.
    fn hessian(&self, z: &[S]) -> Matrix<S> {
        let d = self.d;
        let m = z.len();
        let interior = self.n - 1;
        let eps = S::eps().cbrt() * (S::one() + max_abs(z));
        let mut h = Matrix::zeros(m, m);
        for colour in 0..3 {
            for j in 0..d {
                let mut zp = z.to_vec();
                let mut zm = z.to_vec();
                let mut any = false;
                for k in (1..=interior).filter(|k| k % 3 == colour) {
                    zp[(k - 1) * d + j] = zp[(k - 1) * d + j] + eps;
                    zm[(k - 1) * d + j] = zm[(k - 1) * d + j] - eps;
                    any = true;
                }
                if !any {
                    continue;
                }
                let (_, gp) = self.action_and_gradient(&zp);
                let (_, gm) = self.action_and_gradient(&zm);
                for knot in 1..=interior {
                    let owner = (knot.saturating_sub(1)..=knot + 1)
                        .find(|k| *k >= 1 && *k <= interior && k % 3 == colour);
                    if let Some(k) = owner {
                        for i in 0..d {
                            let row = (knot - 1) * d + i;
                            h[(row, (k - 1) * d + j)] = (gp[row] - gm[row]) / (eps + eps);
                        }
                    }
                }
            }
        }
        h.symmetric_part()
    }

    fn costates(&self, z: &[S]) -> Vec<Point<S>> {
        let half = lit::<S>(0.5);
        (0..=self.n)
            .map(|i| {
                let at = |seg: usize| {
                    let v = self.velocity(z, seg);
                    self.system.lagrangian(self.time(i), self.knot(z, i), &v).dv
                };
                if i == 0 {
                    at(0)
                } else if i == self.n {
                    at(self.n - 1)
                } else {
                    let (a, b) = (at(i - 1), at(i));
                    a.iter().zip(&b).map(|(&u, &w)| half * (u + w)).collect()
                }
            })
            .collect()
    }
}

fn direct<S: Scalar>(
    system: &TonelliSystem<S>,
    t1: S,
    t2: S,
    x: &[S],
    y: &[S],
    knots: usize,
) -> Result<CurvePath<S>, EvolutionError> {
    let d = x.len();
    let lifted: Vec<S> = x
        .iter()
        .zip(system.domain().displacement(x, y))
        .map(|(&a, b)| a + b)
        .collect();
    let prob = Discrete {
        system,
        t1,
        dt: (t2 - t1) / from_usize(knots),
        n: knots,
        d,
        x: x.to_vec(),
        y: lifted.clone(),
    };
    // Straight line start.
    let mut z: Vec<S> = (1..knots)
        .flat_map(|i| {
            let s = from_usize::<S>(i) / from_usize(knots);
            x.iter()
                .zip(&lifted)
                .map(move |(&a, &b)| a + s * (b - a))
                .collect::<Vec<_>>()
        })
        .collect();
    let tol = lit::<S>(1e-8).max(S::eps() * lit(1000.0));
    let mut mu = S::zero();
    let mut iterations = 0;
    let (mut value, mut g) = prob.action_and_gradient(&z);
    loop {
        if !value.is_finite() || !crate::linalg::all_finite(&g) {
            return Err(no_convergence(value, &g, &z, d));
        }
        if norm(&g) < tol {
            break;
        }
        if iterations >= 100 {
            return Err(no_convergence(value, &g, &z, d));
        }
        iterations += 1;
        let h = prob.hessian(&z);
        let neg_g: Vec<S> = g.iter().map(|&c| -c).collect();
        let floor = lit::<S>(1e-10) * (S::one() + h.max_abs());
        let mut step = None;
        for _ in 0..40 {
            let shifted = if mu > S::zero() {
                h.add(&Matrix::scaled_identity(z.len(), mu))
            } else {
                h.clone()
            };
            if let Some(s) = shifted.solve(&neg_g) {
                if dot(&s, &g) < S::zero() && crate::linalg::all_finite(&s) {
                    step = Some(s);
                    break;
                }
            }
            mu = (mu * lit(10.0)).max(floor);
        }
        let step = step.unwrap_or_else(|| neg_g.clone());
        let slope = dot(&step, &g);
        let mut alpha = S::one();
        let mut accepted = None;
        // Below the resolution of the action the line search is blind; trust Newton.
        if -slope < lit::<S>(100.0) * S::eps() * (S::one() + value.abs()) {
            let trial: Vec<S> = z.iter().zip(&step).map(|(&a, &s)| a + s).collect();
            if crate::linalg::all_finite(&trial) {
                accepted = Some(trial);
            }
        }
        for _ in 0..50 {
            if accepted.is_some() {
                break;
            }
            let trial: Vec<S> = z.iter().zip(&step).map(|(&a, &s)| a + alpha * s).collect();
            let a_trial = prob.action(&trial);
            if a_trial.is_finite() && a_trial <= value + lit::<S>(1e-4) * alpha * slope {
                accepted = Some(trial);
                break;
            }
            alpha = alpha * lit(0.5);
        }
        match accepted {
            Some(trial) => {
                z = trial;
                let (v, gr) = prob.action_and_gradient(&z);
                value = v;
                g = gr;
                mu = if alpha == S::one() {
                    mu * lit(0.1)
                } else {
                    mu.max(floor)
                };
                if mu < floor {
                    mu = S::zero();
                }
            }
            None => {
                // No decrease possible in floating point: accept if the
                // gradient is at roundoff level relative to the costates.
                let scale = S::one() + max_abs(&prob.costates(&z).concat());
                if norm(&g) < tol * scale * lit(10.0) {
                    break;
                }
                return Err(no_convergence(value, &g, &z, d));
            }
        }
    }
    let times = (0..=knots).map(|i| prob.time(i)).collect();
    let points = (0..=knots).map(|i| prob.knot(&z, i).to_vec()).collect();
    Ok(CurvePath {
        times,
        points,
        costates: Some(prob.costates(&z)),
        action: value,
        iterations,
    })
}

fn no_convergence<S: Scalar>(value: S, g: &[S], z: &[S], d: usize) -> EvolutionError {
    EvolutionError::NoConvergence {
        best_action: to_f64(value),
        gradient_norm: to_f64(norm(g)),
        best: z
            .chunks(d)
            .map(|c| c.iter().map(|&v| to_f64(v)).collect())
            .collect(),
    }
}

fn shooting<S: Scalar>(
    system: &TonelliSystem<S>,
    t1: S,
    t2: S,
    x: &[S],
    y: &[S],
    window: Option<&DiffeoWindow<S>>,
) -> Result<CurvePath<S>, EvolutionError> {
    if let Some(w) = window {
        if t2 - t1 > w.t_r {
            return Err(EvolutionError::ShootingNotDiffeo(format!(
                "time gap {} exceeds t_R = {}",
                to_f64(t2 - t1),
                to_f64(w.t_r)
            )));
        }
    }
    let inv = flow_map_inverse(system, y, t1, t2, x, window).map_err(|e| match e {
        FlowError::OutsideWindow(msg) => EvolutionError::ShootingNotDiffeo(msg),
        FlowError::NoConvergence { residual } => EvolutionError::NoConvergence {
            best_action: f64::NAN,
            gradient_norm: residual,
            best: Vec::new(),
        },
        other => other.into(),
    })?;
    let steps = default_steps(t1, t2);
    let mut traj = hamiltonian_flow(system, t1, t2, y, &inv.p, steps)?;
    traj.reverse();
    let mut integrand = Vec::with_capacity(traj.len());
    for q in &traj {
        let jet = system.hamiltonian(q.t, &q.x, &q.p)?;
        integrand.push(dot(&q.p, &jet.dp) - jet.value);
    }
    let dt = (t2 - t1) / from_usize(steps);
    let half = lit::<S>(0.5);
    let action = integrand
        .windows(2)
        .fold(S::zero(), |acc, w| acc + half * dt * (w[0] + w[1]));
    let n = traj.len();
    let mut points: Vec<Point<S>> = traj.iter().map(|q| q.x.clone()).collect();
    points[0] = x.to_vec();
    points[n - 1] = y.to_vec();
    Ok(CurvePath {
        times: traj.iter().map(|q| q.t).collect(),
        points,
        costates: Some(traj.iter().map(|q| q.p.clone()).collect()),
        action,
        iterations: inv.iterations,
    })
}
