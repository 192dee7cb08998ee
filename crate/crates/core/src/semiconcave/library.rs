//! Named marginal functions.

use crate::linalg::{Matrix, Point};
use crate::scalar::{from_usize, lit, Scalar};
use crate::tonelli::DomainSpec;

use super::{MarginalFunction, Piece, QuadraticPiece, SemiconcaveError};

fn e1<S: Scalar>(d: usize, k: S) -> Vec<S> {
    let mut v = vec![S::zero(); d];
    v[0] = k;
    v
}

/// `(x₁ + 2^{1−n})(x₁ + 2^{−n})` for `n = 1..=n_max`.
fn dyadic_parabolas<S: Scalar>(d: usize, n_max: usize) -> Vec<Piece<S>> {
    let mut hess = Matrix::zeros(d, d);
    hess[(0, 0)] = lit(2.0);
    (1..=n_max)
        .map(|n| {
            let a: S = lit(0.5f64.powi(n as i32 - 1));
            let b: S = lit(0.5f64.powi(n as i32));
            Piece::Quadratic(QuadraticPiece {
                center: vec![S::zero(); d],
                value: a * b,
                gradient: e1(d, a + b),
                hessian: hess.clone(),
            })
        })
        .collect()
}

/// `min(0, q₁, …, q_N)`: zero except on the dyadic segments of `x₁ < 0`.
pub fn phi1<S: Scalar>(
    domain: DomainSpec<S>,
    n_max: usize,
) -> Result<MarginalFunction<S>, SemiconcaveError> {
    if n_max == 0 {
        return Err(SemiconcaveError::InvalidParameter(
            "n_max must be ≥ 1".into(),
        ));
    }
    let d = domain.dim();
    let mut pieces = vec![Piece::Quadratic(QuadraticPiece::constant(d, S::zero()))];
    pieces.extend(dyadic_parabolas(d, n_max));
    MarginalFunction::new("phi1", pieces, lit(2.0), domain)
}

/// `phi1` with the extra piece `−x₁`.
pub fn phi2<S: Scalar>(
    domain: DomainSpec<S>,
    n_max: usize,
) -> Result<MarginalFunction<S>, SemiconcaveError> {
    if n_max == 0 {
        return Err(SemiconcaveError::InvalidParameter(
            "n_max must be ≥ 1".into(),
        ));
    }
    let d = domain.dim();
    let mut pieces = vec![
        Piece::Quadratic(QuadraticPiece::constant(d, S::zero())),
        Piece::Quadratic(QuadraticPiece::linear(
            vec![S::zero(); d],
            S::zero(),
            e1(d, -S::one()),
        )),
    ];
    pieces.extend(dyadic_parabolas(d, n_max));
    MarginalFunction::new("phi2", pieces, lit(2.0), domain)
}

/// Unit vectors: `±1` for d = 1, equally spaced angles for d = 2, a
/// Fibonacci lattice for d = 3.
fn sphere_directions<S: Scalar>(d: usize, count: usize) -> Vec<Point<S>> {
    match d {
        1 => vec![vec![S::one()], vec![-S::one()]],
        2 => (0..count)
            .map(|k| {
                let a = S::TAU() * from_usize(k) / from_usize(count);
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let golden = S::PI() * (lit::<S>(3.0) - lit::<S>(5.0).sqrt());
            (0..count)
                .map(|k| {
                    let z = S::one()
                        - (from_usize::<S>(k) + lit(0.5)) * lit::<S>(2.0) / from_usize(count);
                    let r = (S::one() - z * z).max(S::zero()).sqrt();
                    let a = golden * from_usize(k);
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
    }
}

fn cone_pieces<S: Scalar>(apex: &[S], height: S, directions: &[Point<S>]) -> Vec<Piece<S>> {
    directions
        .iter()
        .map(|p| Piece::Quadratic(QuadraticPiece::linear(apex.to_vec(), height, p.clone())))
        .collect()
}

/// `−|x| = min_{|p| = 1} p·x` over `directions` sampled unit vectors (exact for d = 1).
pub fn neg_norm<S: Scalar>(
    domain: DomainSpec<S>,
    directions: usize,
) -> Result<MarginalFunction<S>, SemiconcaveError> {
    let d = domain.dim();
    if d > 1 && directions < d + 1 {
        return Err(SemiconcaveError::InvalidParameter(format!(
            "need at least {} directions in dimension {d}",
            d + 1
        )));
    }
    let dirs = sphere_directions(d, directions);
    let pieces = cone_pieces(&vec![S::zero(); d], S::zero(), &dirs);
    MarginalFunction::new("neg-norm", pieces, S::zero(), domain)
}

/// `min(−|x − a| + ha, −|x − b| + hb)`.
pub fn two_cones<S: Scalar>(
    domain: DomainSpec<S>,
    a: &[S],
    b: &[S],
    heights: (S, S),
    directions: usize,
) -> Result<MarginalFunction<S>, SemiconcaveError> {
    let d = domain.dim();
    let dirs = sphere_directions(d, directions.max(d + 1));
    let mut pieces = cone_pieces(a, heights.0, &dirs);
    pieces.extend(cone_pieces(b, heights.1, &dirs));
    MarginalFunction::new("two-cones", pieces, S::zero(), domain)
}

/// `min(|x − e₁|², |x + e₁|²)`, Hessian bound 2.
pub fn min_parabolas<S: Scalar>(
    domain: DomainSpec<S>,
) -> Result<MarginalFunction<S>, SemiconcaveError> {
    let d = domain.dim();
    let two = Matrix::scaled_identity(d, lit(2.0));
    let piece = |sign: S| {
        Piece::Quadratic(QuadraticPiece {
            center: e1(d, sign),
            value: S::zero(),
            gradient: vec![S::zero(); d],
            hessian: two.clone(),
        })
    };
    MarginalFunction::new(
        "min-parabolas",
        vec![piece(S::one()), piece(-S::one())],
        lit(2.0),
        domain,
    )
}

/// Smooth `(k/2)|x|²` with Hessian bound `max(k, 0)`.
pub fn paraboloid<S: Scalar>(
    domain: DomainSpec<S>,
    curvature: S,
) -> Result<MarginalFunction<S>, SemiconcaveError> {
    let d = domain.dim();
    let piece = Piece::Quadratic(QuadraticPiece {
        center: vec![S::zero(); d],
        value: S::zero(),
        gradient: vec![S::zero(); d],
        hessian: Matrix::scaled_identity(d, curvature),
    });
    MarginalFunction::new("paraboloid", vec![piece], curvature.max(S::zero()), domain)
}
