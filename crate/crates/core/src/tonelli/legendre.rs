use super::{TonelliError, TonelliSystem};
use crate::linalg::{all_finite, axpy, dot, norm, Matrix, Point};
use crate::scalar::{from_usize, lit, to_f64, Scalar};

/// Value, gradient and Hessian of a convex function of the fibre variable.
#[derive(Clone, Debug)]
pub struct ConvexJet<S> {
    pub value: S,
    pub grad: Vec<S>,
    pub hess: Matrix<S>,
}

#[derive(Clone, Debug)]
pub struct ConjugateOptions<S> {
    /// Initial half-width of the search box.
    pub radius: S,
    /// Newton stops when `|p − ∇f(v)| ≤ grad_tol`.
    pub grad_tol: S,
    pub max_newton: usize,
    /// Fallback grid points per axis, indexed by `d − 1`.
    pub grid_per_axis: [usize; 3],
    /// Radius doublings before giving up with `MaximizerOnBoundary`.
    pub max_retries: usize,
}

impl<S: Scalar> Default for ConjugateOptions<S> {
    fn default() -> Self {
        Self {
            radius: lit(8.0),
            grad_tol: lit(1e-10),
            max_newton: 50,
            grid_per_axis: [2048, 64, 16],
            max_retries: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conjugate<S> {
    pub value: S,
    pub maximizer: Point<S>,
    /// `true` when Newton converged, `false` when the grid fallback was used.
    pub newton: bool,
}

enum NewtonOutcome<S> {
    Converged(Point<S>),
    Fallback,
}

/// `sup_v { p·v − f(v) }` for convex `f`.
///
/// Newton ascent from `start` (default `p`), with a zooming grid search as
/// fallback when the Hessian is singular, non-finite or the iterate leaves the
/// search box. A Hessian with a negative eigenvalue at any iterate is reported
/// as [`TonelliError::NonConvexObjective`].
pub fn convex_conjugate<S, F>(
    f: F,
    p: &[S],
    start: Option<&[S]>,
    opts: &ConjugateOptions<S>,
) -> Result<Conjugate<S>, TonelliError>
where
    S: Scalar,
    F: Fn(&[S]) -> ConvexJet<S>,
{
    let objective = |v: &[S]| dot(p, v) - f(v).value;
    let mut radius = opts.radius;
    let start: Point<S> = start.map(|s| s.to_vec()).unwrap_or_else(|| p.to_vec());

    if let NewtonOutcome::Converged(v) = newton_ascent(&f, p, start, radius, opts)? {
        return Ok(Conjugate {
            value: objective(&v),
            maximizer: v,
            newton: true,
        });
    }

    for _ in 0..=opts.max_retries {
        let v = zoom_grid_search(&objective, p.len(), radius, opts);
        let edge =
            radius * (S::one() - lit::<S>(4.0) / from_usize(opts.grid_per_axis[p.len() - 1]));
        if v.iter().any(|c| c.abs() >= edge) {
            radius = radius + radius;
            continue;
        }
        // Polish with Newton when the Hessian permits; keep the grid point otherwise.
        let polished = match newton_ascent(&f, p, v.clone(), radius, opts) {
            Ok(NewtonOutcome::Converged(w)) if objective(&w) >= objective(&v) => w,
            _ => v,
        };
        return Ok(Conjugate {
            value: objective(&polished),
            maximizer: polished,
            newton: false,
        });
    }
    Err(TonelliError::MaximizerOnBoundary {
        retries: opts.max_retries,
        radius: to_f64(radius),
    })
}

fn newton_ascent<S, F>(
    f: &F,
    p: &[S],
    mut v: Point<S>,
    radius: S,
    opts: &ConjugateOptions<S>,
) -> Result<NewtonOutcome<S>, TonelliError>
where
    S: Scalar,
    F: Fn(&[S]) -> ConvexJet<S>,
{
    let objective = |v: &[S]| dot(p, v) - f(v).value;
    for _ in 0..opts.max_newton {
        let jet = f(&v);
        let g: Vec<S> = p.iter().zip(&jet.grad).map(|(&a, &b)| a - b).collect();
        if !all_finite(&g) {
            return Ok(NewtonOutcome::Fallback);
        }
        if norm(&g) <= opts.grad_tol {
            return Ok(NewtonOutcome::Converged(v));
        }
        if !jet.hess.is_finite() {
            return Ok(NewtonOutcome::Fallback);
        }
        let min_eig = jet.hess.min_symmetric_eigenvalue();
        let scale = jet.hess.max_abs().max(S::one());
        if min_eig < -S::eps().sqrt() * scale {
            return Err(TonelliError::NonConvexObjective {
                iterate: v.iter().map(|&c| to_f64(c)).collect(),
                min_eigenvalue: to_f64(min_eig),
            });
        }
        if min_eig <= S::eps() * scale {
            return Ok(NewtonOutcome::Fallback);
        }
        let Some(step) = jet.hess.solve(&g) else {
            return Ok(NewtonOutcome::Fallback);
        };
        let f0 = objective(&v);
        let mut alpha = S::one();
        let mut accepted = None;
        for _ in 0..40 {
            let cand = axpy(&v, alpha, &step);
            if objective(&cand) >= f0 - S::eps() * (S::one() + f0.abs()) {
                accepted = Some(cand);
                break;
            }
            alpha = alpha * lit(0.5);
        }
        match accepted {
            Some(c) => v = c,
            None => return Ok(NewtonOutcome::Fallback),
        }
        if v.iter().any(|c| c.abs() > radius) {
            return Ok(NewtonOutcome::Fallback);
        }
    }
    Ok(NewtonOutcome::Fallback)
}

/// Maximizes over `[-radius, radius]^d`, then repeatedly re-grids a box of
/// four cells around the incumbent.
fn zoom_grid_search<S: Scalar>(
    objective: &impl Fn(&[S]) -> S,
    d: usize,
    radius: S,
    opts: &ConjugateOptions<S>,
) -> Point<S> {
    let n = opts.grid_per_axis[d - 1].max(3);
    let mut center = vec![S::zero(); d];
    let mut half = radius;
    let mut best = center.clone();
    let mut best_val = S::neg_infinity();
    for _round in 0..60 {
        let cell = (half + half) / from_usize(n - 1);
        let mut idx = vec![0usize; d];
        loop {
            let v: Point<S> = (0..d)
                .map(|k| {
                    let c = center[k] - half + cell * from_usize(idx[k]);
                    c.max(-radius).min(radius)
                })
                .collect();
            let val = objective(&v);
            if val > best_val {
                best_val = val;
                best = v;
            }
            let mut k = 0;
            loop {
                idx[k] += 1;
                if idx[k] < n {
                    break;
                }
                idx[k] = 0;
                k += 1;
                if k == d {
                    break;
                }
            }
            if k == d {
                break;
            }
        }
        center = best.clone();
        half = cell + cell;
        if half <= radius * lit(1e-14) {
            break;
        }
    }
    best
}

/// `H(t, x, p) = sup_v { p·v − L(t, x, v) }` with the maximizer `v*`.
pub fn legendre_transform<S: Scalar>(
    system: &TonelliSystem<S>,
    t: S,
    x: &[S],
    p: &[S],
    search_radius: S,
) -> Result<Conjugate<S>, TonelliError> {
    system.check_dim(x)?;
    system.check_dim(p)?;
    let opts = ConjugateOptions {
        radius: search_radius,
        ..ConjugateOptions::default()
    };
    convex_conjugate(
        |v: &[S]| {
            let j = system.lagrangian(t, x, v);
            ConvexJet {
                value: j.value,
                grad: j.dv,
                hess: j.dvv,
            }
        },
        p,
        None,
        &opts,
    )
}
