//! Semiconcave functions given as the minimum of a finite family of C² pieces.

mod library;
mod polytope;

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::ScalarField;
use crate::linalg::{norm, sub, Matrix, Point};
use crate::scalar::{lit, to_f64, Scalar};
use crate::tonelli::DomainSpec;

pub use polytope::{min_norm_point, FiberDensity, Polytope};

/// Relative tie tolerance of active sets.
pub const DEFAULT_TIE_TOL: f64 = 1e-9;
/// Relative singular-value cutoff for affine dimension.
pub const RANK_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemiconcaveError {
    #[error("point {0:?} lies outside the function's domain")]
    OutOfDomain(Vec<f64>),
    #[error("no differentiable points found near {x:?} within radius {radius}")]
    NoDifferentiablePointsFound { x: Vec<f64>, radius: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty point set")]
    EmptyPointSet,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Value, gradient and Hessian of one piece.
#[derive(Clone, Debug, PartialEq)]
pub struct PieceJet<S> {
    pub value: S,
    pub gradient: Vec<S>,
    pub hessian: Matrix<S>,
}

pub type PieceFn<S> = Arc<dyn Fn(&[S]) -> PieceJet<S> + Send + Sync>;

/// `F(y) = value + gradient·(y − center) + ½ (y − center)ᵀ hessian (y − center)`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticPiece<S> {
    pub center: Vec<S>,
    pub value: S,
    pub gradient: Vec<S>,
    pub hessian: Matrix<S>,
}

impl<S: Scalar> QuadraticPiece<S> {
    pub fn linear(center: Vec<S>, value: S, gradient: Vec<S>) -> Self {
        let d = center.len();
        Self {
            center,
            value,
            gradient,
            hessian: Matrix::zeros(d, d),
        }
    }

    pub fn constant(d: usize, value: S) -> Self {
        Self::linear(vec![S::zero(); d], value, vec![S::zero(); d])
    }

    fn is_linear(&self) -> bool {
        self.hessian.as_slice().iter().all(|&h| h == S::zero())
    }
}

#[derive(Clone)]
pub enum Piece<S: Scalar> {
    Quadratic(QuadraticPiece<S>),
    Custom { name: String, f: PieceFn<S> },
}

impl<S: Scalar> fmt::Debug for Piece<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Piece::Quadratic(q) => f.debug_tuple("Quadratic").field(q).finish(),
            Piece::Custom { name, .. } => f.debug_struct("Custom").field("name", name).finish(),
        }
    }
}

impl<S: Scalar> Piece<S> {
    pub fn value(&self, x: &[S]) -> S {
        match self {
            Piece::Quadratic(q) => {
                let d = x.len();
                let mut lin = q.value;
                for i in 0..d {
                    lin = lin + q.gradient[i] * (x[i] - q.center[i]);
                }
                if q.is_linear() {
                    return lin;
                }
                let mut quad = S::zero();
                for i in 0..d {
                    let ri = x[i] - q.center[i];
                    for j in 0..d {
                        quad = quad + ri * q.hessian[(i, j)] * (x[j] - q.center[j]);
                    }
                }
                lin + lit::<S>(0.5) * quad
            }
            Piece::Custom { f, .. } => f(x).value,
        }
    }

    pub fn gradient(&self, x: &[S]) -> Vec<S> {
        match self {
            Piece::Quadratic(q) => {
                let r = sub(x, &q.center);
                let hr = q.hessian.matvec(&r);
                q.gradient.iter().zip(&hr).map(|(&g, &h)| g + h).collect()
            }
            Piece::Custom { f, .. } => f(x).gradient,
        }
    }

    pub fn jet(&self, x: &[S]) -> PieceJet<S> {
        match self {
            Piece::Quadratic(q) => PieceJet {
                value: self.value(x),
                gradient: self.gradient(x),
                hessian: q.hessian.clone(),
            },
            Piece::Custom { f, .. } => f(x),
        }
    }
}

/// Indices of the pieces attaining the minimum within tolerance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ActiveSet<S> {
    pub indices: Vec<usize>,
    pub min_value: S,
    /// Absolute threshold actually used.
    pub threshold: S,
}

/// Quadratic pieces in contiguous storage, evaluated by the same formula as
/// [`Piece::value`].
#[derive(Clone, Debug)]
struct PieceTable<S> {
    d: usize,
    values: Vec<S>,
    centers: Vec<S>,
    gradients: Vec<S>,
    /// Row-major Hessians; `None` for affine pieces.
    hessians: Vec<Option<Vec<S>>>,
}

impl<S: Scalar> PieceTable<S> {
    fn build(pieces: &[Piece<S>], d: usize) -> Option<Self> {
        let mut t = Self {
            d,
            values: Vec::with_capacity(pieces.len()),
            centers: Vec::with_capacity(pieces.len() * d),
            gradients: Vec::with_capacity(pieces.len() * d),
            hessians: Vec::with_capacity(pieces.len()),
        };
        for p in pieces {
            let Piece::Quadratic(q) = p else {
                return None;
            };
            t.values.push(q.value);
            t.centers.extend_from_slice(&q.center);
            t.gradients.extend_from_slice(&q.gradient);
            t.hessians
                .push((!q.is_linear()).then(|| q.hessian.as_slice().to_vec()));
        }
        Some(t)
    }

    #[inline]
    fn value(&self, i: usize, x: &[S]) -> S {
        let d = self.d;
        let c = &self.centers[i * d..(i + 1) * d];
        let g = &self.gradients[i * d..(i + 1) * d];
        let mut lin = self.values[i];
        for k in 0..d {
            lin = lin + g[k] * (x[k] - c[k]);
        }
        let Some(h) = &self.hessians[i] else {
            return lin;
        };
        let mut quad = S::zero();
        for a in 0..d {
            let ra = x[a] - c[a];
            for b in 0..d {
                quad = quad + ra * h[a * d + b] * (x[b] - c[b]);
            }
        }
        lin + lit::<S>(0.5) * quad
    }
}

/// `φ(x) = min_s F(s, x)` over a finite family with Hessians bounded by `C·I`.
#[derive(Clone, Debug)]
pub struct MarginalFunction<S: Scalar> {
    name: String,
    pieces: Vec<Piece<S>>,
    table: Option<PieceTable<S>>,
    hessian_bound: S,
    domain: DomainSpec<S>,
}

impl<S: Scalar> MarginalFunction<S> {
    pub fn new(
        name: impl Into<String>,
        pieces: Vec<Piece<S>>,
        hessian_bound: S,
        domain: DomainSpec<S>,
    ) -> Result<Self, SemiconcaveError> {
        if pieces.is_empty() {
            return Err(SemiconcaveError::InvalidParameter("no pieces".into()));
        }
        if !(hessian_bound >= S::zero()) {
            return Err(SemiconcaveError::InvalidParameter(format!(
                "Hessian bound must be non-negative, got {hessian_bound}"
            )));
        }
        let d = domain.dim();
        for p in &pieces {
            if let Piece::Quadratic(q) = p {
                for len in [
                    q.center.len(),
                    q.gradient.len(),
                    q.hessian.rows(),
                    q.hessian.cols(),
                ] {
                    if len != d {
                        return Err(SemiconcaveError::DimensionMismatch {
                            expected: d,
                            got: len,
                        });
                    }
                }
            }
        }
        let table = PieceTable::build(&pieces, d);
        Ok(Self {
            name: name.into(),
            pieces,
            table,
            hessian_bound,
            domain,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn pieces(&self) -> &[Piece<S>] {
        &self.pieces
    }

    pub fn hessian_bound(&self) -> S {
        self.hessian_bound
    }

    pub fn domain(&self) -> &DomainSpec<S> {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    fn check(&self, x: &[S]) -> Result<(), SemiconcaveError> {
        if x.len() != self.dim() {
            return Err(SemiconcaveError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if !self.domain.contains(x) {
            return Err(SemiconcaveError::OutOfDomain(
                x.iter().map(|&v| to_f64(v)).collect(),
            ));
        }
        Ok(())
    }

    /// Value of piece `i`; no domain check.
    #[inline]
    pub fn piece_value(&self, i: usize, x: &[S]) -> S {
        match &self.table {
            Some(t) => t.value(i, x),
            None => self.pieces[i].value(x),
        }
    }

    /// Minimum over the family; no domain check.
    pub fn min_value(&self, x: &[S]) -> S {
        self.argmin(x).1
    }

    /// First index attaining the minimum, with the value.
    pub fn argmin(&self, x: &[S]) -> (usize, S) {
        let mut best = (0, S::infinity());
        for i in 0..self.pieces.len() {
            let v = self.piece_value(i, x);
            if v < best.1 {
                best = (i, v);
            }
        }
        best
    }

    /// First minimizing piece and the size of the active set with tolerance
    /// `tol`; no domain check.
    pub fn active_count(&self, x: &[S], tol: S) -> (usize, usize) {
        let (arg, min) = self.argmin(x);
        let cut = min + tol * (S::one() + min.abs());
        let count = (0..self.pieces.len())
            .filter(|&i| self.piece_value(i, x) <= cut)
            .count();
        (arg, count)
    }

    pub fn evaluate(&self, x: &[S]) -> Result<S, SemiconcaveError> {
        self.check(x)?;
        Ok(self.min_value(x))
    }

    /// Pieces within `tol·(1 + |min|)` of the minimum.
    pub fn active_set(&self, x: &[S], tol: S) -> Result<ActiveSet<S>, SemiconcaveError> {
        self.check(x)?;
        if !(tol > S::zero()) {
            return Err(SemiconcaveError::InvalidParameter(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        Ok(self.active_set_unchecked(x, tol))
    }

    fn active_set_unchecked(&self, x: &[S], tol: S) -> ActiveSet<S> {
        let values: Vec<S> = (0..self.pieces.len())
            .map(|i| self.piece_value(i, x))
            .collect();
        let min_value = values.iter().copied().fold(S::infinity(), S::min);
        let threshold = tol * (S::one() + min_value.abs());
        let indices = values
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v <= min_value + threshold)
            .map(|(i, _)| i)
            .collect();
        ActiveSet {
            indices,
            min_value,
            threshold,
        }
    }

    /// `D⁺φ(x) = co{∇F(s, x) : s active}`.
    pub fn superdifferential(&self, x: &[S], tol: S) -> Result<Polytope<S>, SemiconcaveError> {
        let active = self.active_set(x, tol)?;
        let grads: Vec<Point<S>> = active
            .indices
            .iter()
            .map(|&i| self.pieces[i].gradient(x))
            .collect();
        Polytope::from_points(&grads, lit(RANK_TOL))
    }

    /// Affine dimension of `D⁺φ(x)`; 0 exactly at differentiable points.
    pub fn stratum_dimension(&self, x: &[S], tol: S) -> Result<usize, SemiconcaveError> {
        Ok(self.superdifferential(x, tol)?.affine_dim())
    }

    /// Approximates `D*φ(x)` by the gradients of pieces that are the unique
    /// minimizer at sampled nearby points. Samples are spread over balls of
    /// radius `radius·2⁻ʲ`; only pieces active at `x` count.
    pub fn reachable_gradients(
        &self,
        x: &[S],
        radius: S,
        n_samples: usize,
        seed: u64,
    ) -> Result<Vec<Point<S>>, SemiconcaveError> {
        self.check(x)?;
        if !(radius > S::zero()) {
            return Err(SemiconcaveError::InvalidParameter(format!(
                "radius must be positive, got {radius}"
            )));
        }
        let tie: S = lit(DEFAULT_TIE_TOL);
        let at_x = self.active_set_unchecked(x, tie);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut found: Vec<usize> = Vec::new();
        const SHELLS: usize = 8;
        for i in 0..n_samples {
            let r = radius / lit::<S>((1u64 << (i % SHELLS)) as f64);
            let y = sample_ball(&mut rng, x, r);
            if !self.domain.contains(&y) {
                continue;
            }
            let a = self.active_set_unchecked(&y, tie);
            if a.indices.len() == 1 {
                let s = a.indices[0];
                if at_x.indices.contains(&s) && !found.contains(&s) {
                    found.push(s);
                }
            }
        }
        if found.is_empty() {
            return Err(SemiconcaveError::NoDifferentiablePointsFound {
                x: x.iter().map(|&v| to_f64(v)).collect(),
                radius: to_f64(radius),
            });
        }
        found.sort_unstable();
        let mut clusters: Vec<Point<S>> = Vec::new();
        let merge = lit::<S>(1e-9);
        for s in found {
            let g = self.pieces[s].gradient(x);
            if !clusters.iter().any(|c| norm(&sub(c, &g)) <= merge) {
                clusters.push(g);
            }
        }
        Ok(clusters)
    }

    /// Largest `λ_max(∇²F) − C` over the pieces at `samples` random points
    /// (non-positive when the Hessian bound holds).
    pub fn hessian_bound_excess(&self, samples: usize, seed: u64) -> S {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = S::neg_infinity();
        for _ in 0..samples {
            let y = self.domain.sample_uniform(&mut rng);
            for p in &self.pieces {
                let h = p.jet(&y).hessian;
                let top = h
                    .symmetric_eigenvalues()
                    .last()
                    .copied()
                    .unwrap_or(S::zero());
                worst = worst.max(top - self.hessian_bound);
            }
        }
        worst
    }
}

impl<S: Scalar> ScalarField<S> for MarginalFunction<S> {
    fn value(&self, x: &[S]) -> S {
        self.min_value(x)
    }

    fn domain(&self) -> &DomainSpec<S> {
        &self.domain
    }
}

/// Uniform point in the Euclidean ball `B(center, r)`.
pub fn sample_ball<S: Scalar, R: Rng + ?Sized>(rng: &mut R, center: &[S], r: S) -> Point<S> {
    let d = center.len();
    loop {
        let u: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let n2: f64 = u.iter().map(|v| v * v).sum();
        if n2 <= 1.0 && n2 > 0.0 {
            return center
                .iter()
                .zip(&u)
                .map(|(&c, &v)| c + r * S::from_f64(v).unwrap())
                .collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> DomainSpec<f64> {
        DomainSpec::symmetric_box(1, 3.0).unwrap()
    }

    #[test]
    fn active_set_threshold_is_relative() {
        let f = MarginalFunction::new(
            "two-constants",
            vec![
                Piece::Quadratic(QuadraticPiece::constant(1, 1000.0)),
                Piece::Quadratic(QuadraticPiece::constant(1, 1000.0 + 5e-7)),
            ],
            0.0,
            line(),
        )
        .unwrap();
        let a = f.active_set(&[0.0], 1e-9).unwrap();
        assert_eq!(a.indices, vec![0, 1]);
        let a = f.active_set(&[0.0], 1e-10).unwrap();
        assert_eq!(a.indices, vec![0]);
    }

    #[test]
    fn rejects_out_of_domain_and_bad_pieces() {
        let f = library::neg_norm(line(), 2).unwrap();
        assert!(matches!(
            f.evaluate(&[4.0]),
            Err(SemiconcaveError::OutOfDomain(_))
        ));
        let bad = MarginalFunction::new(
            "bad",
            vec![Piece::Quadratic(QuadraticPiece::constant(2, 0.0))],
            0.0,
            line(),
        );
        assert!(matches!(
            bad,
            Err(SemiconcaveError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn custom_piece_evaluates() {
        let f = MarginalFunction::new(
            "cos",
            vec![Piece::Custom {
                name: "cos".into(),
                f: Arc::new(|x: &[f64]| PieceJet {
                    value: x[0].cos(),
                    gradient: vec![-x[0].sin()],
                    hessian: Matrix::scaled_identity(1, -x[0].cos()),
                }),
            }],
            1.0,
            line(),
        )
        .unwrap();
        assert!((f.evaluate(&[0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(f.hessian_bound_excess(50, 1) <= 0.0);
    }
}

pub use library::{min_parabolas, neg_norm, paraboloid, phi1, phi2, two_cones};
