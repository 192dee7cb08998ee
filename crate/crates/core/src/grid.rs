//! Uniform rectangular grids and sampled functions on them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Point;
use crate::scalar::{from_usize, lit, to_f64, Scalar};
use crate::tonelli::DomainSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid spacing must be positive and finite, got {0}")]
    BadSpacing(f64),
    #[error("grid needs at least one node per axis and 1 ≤ d ≤ 3 (got counts {0:?})")]
    BadCounts(Vec<usize>),
    #[error("grid bounds are inconsistent: {0}")]
    BadBounds(String),
    #[error("value count {got} does not match grid size {expected}")]
    ValueCount { expected: usize, got: usize },
}

/// A real-valued function that can be evaluated anywhere in a box.
pub trait ScalarField<S: Scalar>: Send + Sync {
    fn value(&self, x: &[S]) -> S;
    /// The region on which `value` is meaningful.
    fn domain(&self) -> &DomainSpec<S>;
    fn dim(&self) -> usize {
        self.domain().dim()
    }
}

/// Nodes `lower + h·i`, `0 ≤ iₖ < counts[k]`, stored with the last axis fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid<S> {
    lower: Vec<S>,
    spacing: S,
    counts: Vec<usize>,
}

impl<S: Scalar> Grid<S> {
    pub fn new(lower: Vec<S>, spacing: S, counts: Vec<usize>) -> Result<Self, GridError> {
        if !(spacing > S::zero() && spacing.is_finite()) {
            return Err(GridError::BadSpacing(to_f64(spacing)));
        }
        if lower.len() != counts.len()
            || counts.is_empty()
            || counts.len() > 3
            || counts.iter().any(|&c| c == 0)
        {
            return Err(GridError::BadCounts(counts));
        }
        Ok(Self {
            lower,
            spacing,
            counts,
        })
    }

    /// Largest grid with spacing `h` anchored at `lower` that fits in `[lower, upper]`.
    pub fn covering(lower: &[S], upper: &[S], spacing: S) -> Result<Self, GridError> {
        if lower.len() != upper.len() {
            return Err(GridError::BadBounds("corner dimensions differ".into()));
        }
        if !(spacing > S::zero() && spacing.is_finite()) {
            return Err(GridError::BadSpacing(to_f64(spacing)));
        }
        let mut counts = Vec::with_capacity(lower.len());
        for (&a, &b) in lower.iter().zip(upper) {
            if !(b >= a) {
                return Err(GridError::BadBounds(format!("upper {b} below lower {a}")));
            }
            let n = ((b - a) / spacing + lit(1e-9)).floor();
            counts.push(to_f64(n) as usize + 1);
        }
        Self::new(lower.to_vec(), spacing, counts)
    }

    /// `n ≥ 2` equally spaced nodes on `[a, b]`.
    pub fn linspace(a: S, b: S, n: usize) -> Result<Self, GridError> {
        if n < 2 || !(b > a) {
            return Err(GridError::BadBounds(format!("linspace({a}, {b}, {n})")));
        }
        Self::new(vec![a], (b - a) / from_usize(n - 1), vec![n])
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn spacing(&self) -> S {
        self.spacing
    }

    pub fn lower(&self) -> &[S] {
        &self.lower
    }

    pub fn upper(&self) -> Point<S> {
        self.lower
            .iter()
            .zip(&self.counts)
            .map(|(&a, &n)| a + self.spacing * from_usize(n - 1))
            .collect()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            idx[k] = flat % self.counts[k];
            flat /= self.counts[k];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.counts)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn coord(&self, axis: usize, i: usize) -> S {
        self.lower[axis] + self.spacing * from_usize(i)
    }

    pub fn point(&self, flat: usize) -> Point<S> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(k, &i)| self.coord(k, i))
            .collect()
    }

    pub fn points(&self) -> Vec<Point<S>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Flat index of the node offset by `step` along `axis`, if inside.
    pub fn neighbor(&self, flat: usize, axis: usize, step: isize) -> Option<usize> {
        let mut idx = self.multi_index(flat);
        let j = idx[axis] as isize + step;
        if j < 0 || j >= self.counts[axis] as isize {
            return None;
        }
        idx[axis] = j as usize;
        Some(self.flat_index(&idx))
    }

    /// Node at integer offset `offset` from `flat`, if inside.
    pub fn offset(&self, flat: usize, offset: &[isize]) -> Option<usize> {
        let mut idx = self.multi_index(flat);
        for k in 0..self.dim() {
            let j = idx[k] as isize + offset[k];
            if j < 0 || j >= self.counts[k] as isize {
                return None;
            }
            idx[k] = j as usize;
        }
        Some(self.flat_index(&idx))
    }

    pub fn bounding_box(&self) -> DomainSpec<S> {
        let upper: Vec<S> = self
            .upper()
            .iter()
            .zip(&self.lower)
            .map(|(&u, &l)| if u > l { u } else { l + self.spacing })
            .collect();
        DomainSpec::new_box(self.lower.clone(), upper).expect("grid box is valid")
    }
}

/// Values sampled on a [`Grid`], read back by multilinear interpolation.
#[derive(Clone, Debug)]
pub struct GridFunction<S: Scalar> {
    grid: Grid<S>,
    values: Vec<S>,
    domain: DomainSpec<S>,
}

impl<S: Scalar> GridFunction<S> {
    pub fn new(grid: Grid<S>, values: Vec<S>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::ValueCount {
                expected: grid.len(),
                got: values.len(),
            });
        }
        let domain = grid.bounding_box();
        Ok(Self {
            grid,
            values,
            domain,
        })
    }

    pub fn sample(grid: Grid<S>, f: impl Fn(&[S]) -> S) -> Self {
        let values = grid.points().iter().map(|p| f(p)).collect();
        Self::new(grid, values).expect("sizes agree")
    }

    /// Replaces the grid's bounding box as the reported domain.
    pub fn with_domain(mut self, domain: DomainSpec<S>) -> Self {
        self.domain = domain;
        self
    }

    pub fn grid(&self) -> &Grid<S> {
        &self.grid
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn interpolate(&self, x: &[S]) -> S {
        let d = self.grid.dim();
        let mut base = vec![0usize; d];
        let mut frac = vec![S::zero(); d];
        for k in 0..d {
            let n = self.grid.counts[k];
            if n == 1 {
                continue;
            }
            let u = ((x[k] - self.grid.lower[k]) / self.grid.spacing)
                .max(S::zero())
                .min(from_usize(n - 1));
            let i = (to_f64(u.floor()) as usize).min(n - 2);
            base[k] = i;
            frac[k] = u - from_usize(i);
        }
        let mut acc = S::zero();
        for corner in 0..(1usize << d) {
            let mut w = S::one();
            let mut idx = base.clone();
            for k in 0..d {
                let hi = corner >> k & 1 == 1;
                if self.grid.counts[k] == 1 {
                    if hi {
                        w = S::zero();
                    }
                    continue;
                }
                if hi {
                    idx[k] += 1;
                    w = w * frac[k];
                } else {
                    w = w * (S::one() - frac[k]);
                }
            }
            if w != S::zero() {
                acc = acc + w * self.values[self.grid.flat_index(&idx)];
            }
        }
        acc
    }
}

impl<S: Scalar> ScalarField<S> for GridFunction<S> {
    fn value(&self, x: &[S]) -> S {
        self.interpolate(x)
    }

    fn domain(&self) -> &DomainSpec<S> {
        &self.domain
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covering_counts_nodes() {
        let g = Grid::covering(&[-1.0, 0.0], &[1.0, 0.5], 0.25).unwrap();
        assert_eq!(g.counts(), &[9, 3]);
        assert_eq!(g.len(), 27);
        let i = g.flat_index(&[4, 2]);
        assert_eq!(g.multi_index(i), vec![4, 2]);
        assert_eq!(g.point(i), vec![0.0, 0.5]);
        assert_eq!(g.neighbor(i, 1, 1), None);
        assert_eq!(g.neighbor(i, 0, -1), Some(g.flat_index(&[3, 2])));
    }

    #[test]
    fn interpolation_is_exact_for_bilinear() {
        let g = Grid::covering(&[0.0, 0.0], &[1.0, 1.0], 0.1).unwrap();
        let f = |x: &[f64]| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1];
        let gf = GridFunction::sample(g, f);
        for &(a, b) in &[(0.05, 0.33), (0.99, 0.01), (0.5, 0.5)] {
            assert!((gf.value(&[a, b]) - f(&[a, b])).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Grid::<f64>::new(vec![0.0], 0.0, vec![3]).is_err());
        assert!(Grid::<f64>::new(vec![0.0], 0.1, vec![0]).is_err());
        assert!(Grid::<f64>::linspace(1.0, 0.0, 5).is_err());
        let g = Grid::<f64>::linspace(0.0, 1.0, 5).unwrap();
        assert!(GridFunction::new(g, vec![0.0; 4]).is_err());
    }
}
