use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::grid::Grid;
use crate::linalg::{Matrix, Point};
use crate::scalar::{from_usize, lit, to_f64, Scalar};
use crate::semiconcave::{FiberDensity, MarginalFunction, Piece, QuadraticPiece, DEFAULT_TIE_TOL};
use crate::tonelli::TonelliSystem;

use super::operators::{evolve_grid, lax_oleinik_positive, ScanOptions};
use super::{EvolutionError, LocalizationBound};

/// `λ_ℓ = c₁ + θ*(ℓ + 1) + max |L(s, x, 0)| + c₀`, the maximum taken over 11
/// times in `[τ₁, τ₂]` and a 17-point-per-axis grid of the domain.
pub fn maximizer_radius<S: Scalar>(
    system: &TonelliSystem<S>,
    lipschitz: S,
    tau1: S,
    tau2: S,
) -> Result<LocalizationBound<S>, EvolutionError> {
    if !(lipschitz >= S::zero()) || !(tau1 <= tau2) {
        return Err(EvolutionError::InvalidParameter(
            "need ℓ ≥ 0 and τ₁ ≤ τ₂".into(),
        ));
    }
    let constants = system
        .constants()
        .ok_or_else(|| EvolutionError::MissingConstants(system.name().to_string()))?;
    let theta = system
        .theta()
        .ok_or_else(|| EvolutionError::MissingConstants(format!("{}: θ", system.name())))?;
    let domain = system.domain();
    let d = domain.dim();
    let per_axis = 17usize;
    let axis_points = |k: usize| -> Vec<S> {
        let (a, w) = (domain.lower()[k], domain.extent(k));
        if domain.is_torus() {
            (0..per_axis - 1)
                .map(|i| a + w * from_usize(i) / from_usize(per_axis - 1))
                .collect()
        } else {
            (0..per_axis)
                .map(|i| a + w * from_usize(i) / from_usize(per_axis - 1))
                .collect()
        }
    };
    let axes: Vec<Vec<S>> = (0..d).map(axis_points).collect();
    let total: usize = axes.iter().map(Vec::len).product();
    let zero = vec![S::zero(); d];
    let mut rest_max = S::zero();
    for j in 0..11 {
        let s = tau1 + (tau2 - tau1) * from_usize(j) / lit(10.0);
        for mut flat in 0..total {
            let mut x = Vec::with_capacity(d);
            for axis in axes.iter().rev() {
                x.push(axis[flat % axis.len()]);
                flat /= axis.len();
            }
            x.reverse();
            rest_max = rest_max.max(system.lagrangian(s, &x, &zero).value.abs());
        }
    }
    let lambda = constants.localization_c1
        + theta.conjugate(lipschitz + S::one())?
        + rest_max
        + constants.c0;
    Ok(LocalizationBound {
        lipschitz,
        lambda,
        window: (tau1, tau2),
    })
}

/// `f(y) = φ(x) + p·(y − x) + (C/2)|y − x|²` for sampled `p ∈ D⁺φ(x)`.
/// Vertices are always included; `FiberDensity::MaxPoints(2)` gives vertices
/// only for a segment.
pub fn touching_family<S: Scalar>(
    phi: &MarginalFunction<S>,
    x: &[S],
    density: FiberDensity<S>,
) -> Result<Vec<QuadraticPiece<S>>, EvolutionError> {
    let sd = phi.superdifferential(x, lit(DEFAULT_TIE_TOL))?;
    let value = phi.evaluate(x)?;
    let hessian = Matrix::scaled_identity(x.len(), phi.hessian_bound());
    Ok(sd
        .sample(density)
        .into_iter()
        .map(|p| QuadraticPiece {
            center: x.to_vec(),
            value,
            gradient: p,
            hessian: hessian.clone(),
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct InfRepresentationReport<S> {
    pub max_deviation: S,
    /// `T̆φ` on the grid.
    pub lhs: Vec<S>,
    /// `min_f T̆f` on the grid.
    pub rhs: Vec<S>,
    pub anchors: usize,
    pub family_size: usize,
}

/// Compares `T̆φ` with `min_f T̆f` over the touching functions anchored at
/// the (deduplicated) maximizers of `T̆φ` on the grid.
#[allow(clippy::too_many_arguments)]
pub fn verify_inf_representation<S: Scalar>(
    phi: &MarginalFunction<S>,
    system: &TonelliSystem<S>,
    t1: S,
    t2: S,
    grid: &Grid<S>,
    opts: &ScanOptions<S>,
    density: FiberDensity<S>,
) -> Result<InfRepresentationReport<S>, EvolutionError> {
    let lhs = evolve_grid(phi, system, t1, t2, grid, opts, true)?;
    let anchors = dedupe(&lhs.arguments, lit(1e-9));
    let mut family = Vec::new();
    for a in &anchors {
        for q in touching_family(phi, a, density)? {
            family.push(MarginalFunction::new(
                "touching",
                vec![Piece::Quadratic(q)],
                phi.hessian_bound(),
                phi.domain().clone(),
            )?);
        }
    }
    let rhs: Vec<S> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.point(i);
            let mut best = S::infinity();
            for f in &family {
                best = best.min(lax_oleinik_positive(f, system, t1, t2, &x, opts, None)?.value);
            }
            Ok(best)
        })
        .collect::<Result<_, EvolutionError>>()?;
    let max_deviation = rhs
        .iter()
        .zip(&lhs.values)
        .map(|(&r, &l)| (r - l).abs())
        .fold(S::zero(), S::max);
    Ok(InfRepresentationReport {
        max_deviation,
        lhs: lhs.values,
        rhs,
        anchors: anchors.len(),
        family_size: family.len(),
    })
}

fn dedupe<S: Scalar>(points: &[Point<S>], resolution: S) -> Vec<Point<S>> {
    let mut seen: BTreeMap<Vec<i64>, Point<S>> = BTreeMap::new();
    for p in points {
        let key: Vec<i64> = p
            .iter()
            .map(|&c| to_f64((c / resolution).round()) as i64)
            .collect();
        seen.entry(key).or_insert_with(|| p.clone());
    }
    seen.into_values().collect()
}
