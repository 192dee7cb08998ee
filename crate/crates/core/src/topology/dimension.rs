use std::collections::HashSet;

use serde::Serialize;

use crate::linalg::Point;
use crate::scalar::{lit, to_f64, Scalar};

use super::TopologyError;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxCount {
    /// Least-squares slope of `log N(ε)` against `log(1/ε)`.
    pub estimate: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    pub scales: Vec<f64>,
    pub counts: Vec<usize>,
}

/// `2^{-from}, …, 2^{-to}`.
pub fn dyadic_scales<S: Scalar>(from: i32, to: i32) -> Vec<S> {
    (from..=to).map(|n| lit(0.5f64.powi(n))).collect()
}

/// Box counts on the lattice `origin + ε·ℤᵈ`, `origin` the componentwise
/// minimum of the points.
pub fn box_counting_dimension<S: Scalar>(
    points: &[Point<S>],
    scales: &[S],
) -> Result<BoxCount, TopologyError> {
    if points.is_empty() {
        return Err(TopologyError::EmptyPointSet);
    }
    let eps: Vec<f64> = scales.iter().map(|&s| to_f64(s)).collect();
    if let Some(bad) = eps.iter().find(|&&e| !(e > 0.0 && e.is_finite())) {
        return Err(TopologyError::DegenerateScales(format!(
            "scale {bad} is not positive"
        )));
    }
    let mut distinct = eps.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(TopologyError::DegenerateScales(
            "need at least two distinct scales".into(),
        ));
    }
    let d = points[0].len();
    let origin: Vec<f64> = (0..d)
        .map(|k| {
            points
                .iter()
                .map(|p| to_f64(p[k]))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let counts: Vec<usize> = eps
        .iter()
        .map(|&e| {
            points
                .iter()
                .map(|p| {
                    (0..d)
                        .map(|k| ((to_f64(p[k]) - origin[k]) / e).floor() as i64)
                        .collect::<Vec<_>>()
                })
                .collect::<HashSet<_>>()
                .len()
        })
        .collect();
    let xs: Vec<f64> = eps.iter().map(|e| -e.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(BoxCount {
        estimate: slope,
        residual,
        scales: eps,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_has_dimension_zero() {
        let r = box_counting_dimension(&[vec![0.3, 0.7]], &dyadic_scales::<f64>(1, 6)).unwrap();
        assert_eq!(r.estimate, 0.0);
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn filled_square_has_dimension_two() {
        let pts: Vec<Point<f64>> = (0..256)
            .flat_map(|i| (0..256).map(move |j| vec![i as f64 / 256.0, j as f64 / 256.0]))
            .collect();
        let r = box_counting_dimension(&pts, &dyadic_scales::<f64>(1, 6)).unwrap();
        assert!((r.estimate - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_scales() {
        let p = [vec![0.0]];
        assert!(matches!(
            box_counting_dimension(&p, &[0.5, 0.5]),
            Err(TopologyError::DegenerateScales(_))
        ));
        assert!(matches!(
            box_counting_dimension(&p, &[0.5, 0.0]),
            Err(TopologyError::DegenerateScales(_))
        ));
        assert_eq!(
            box_counting_dimension::<f64>(&[], &[0.5, 0.25]),
            Err(TopologyError::EmptyPointSet)
        );
    }
}
