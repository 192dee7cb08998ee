use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TonelliError;
use crate::linalg::Point;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    Box,
    FlatTorus,
}

/// Axis-aligned box `[lower, upper]` or flat torus `ℝᵈ / (period·ℤᵈ)`.
///
/// A torus is stored with `lower = 0` and `upper = period`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec<S> {
    kind: DomainKind,
    lower: Vec<S>,
    upper: Vec<S>,
}

impl<S: Scalar> DomainSpec<S> {
    pub fn new_box(lower: Vec<S>, upper: Vec<S>) -> Result<Self, TonelliError> {
        if lower.len() != upper.len() {
            return Err(TonelliError::InvalidDomain(format!(
                "corner dimensions differ ({} vs {})",
                lower.len(),
                upper.len()
            )));
        }
        check_dim(lower.len())?;
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] < upper[i])) {
            return Err(TonelliError::InvalidDomain(format!(
                "lower[{i}] = {} is not below upper[{i}] = {}",
                lower[i], upper[i]
            )));
        }
        Ok(Self {
            kind: DomainKind::Box,
            lower,
            upper,
        })
    }

    pub fn torus(period: Vec<S>) -> Result<Self, TonelliError> {
        check_dim(period.len())?;
        if let Some(i) = period
            .iter()
            .position(|&p| !(p > S::zero()) || !p.is_finite())
        {
            return Err(TonelliError::InvalidDomain(format!(
                "period[{i}] = {} must be positive",
                period[i]
            )));
        }
        Ok(Self {
            kind: DomainKind::FlatTorus,
            lower: vec![S::zero(); period.len()],
            upper: period,
        })
    }

    /// `[-a, a]^d`
    pub fn symmetric_box(d: usize, a: S) -> Result<Self, TonelliError> {
        Self::new_box(vec![-a; d], vec![a; d])
    }

    /// `(ℝ/2πℤ)^d`
    pub fn standard_torus(d: usize) -> Result<Self, TonelliError> {
        Self::torus(vec![S::PI() + S::PI(); d])
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn is_torus(&self) -> bool {
        self.kind == DomainKind::FlatTorus
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[S] {
        &self.lower
    }

    pub fn upper(&self) -> &[S] {
        &self.upper
    }

    pub fn extent(&self, i: usize) -> S {
        self.upper[i] - self.lower[i]
    }

    pub fn diameter(&self) -> S {
        (0..self.dim())
            .map(|i| {
                let e = self.extent(i);
                if self.is_torus() {
                    e * e / (S::one() + S::one()) / (S::one() + S::one())
                } else {
                    e * e
                }
            })
            .sum::<S>()
            .sqrt()
    }

    pub fn contains(&self, x: &[S]) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self.kind {
            DomainKind::FlatTorus => x.iter().all(|v| v.is_finite()),
            DomainKind::Box => {
                let slack = S::eps() * S::from_f64(64.0).unwrap();
                (0..self.dim()).all(|i| {
                    let tol = slack * (S::one() + self.extent(i));
                    x[i] >= self.lower[i] - tol && x[i] <= self.upper[i] + tol
                })
            }
        }
    }

    /// Canonical representative: wraps into `[0, period)` on a torus, identity on a box.
    pub fn wrap(&self, x: &[S]) -> Point<S> {
        match self.kind {
            DomainKind::Box => x.to_vec(),
            DomainKind::FlatTorus => x
                .iter()
                .zip(&self.upper)
                .map(|(&v, &p)| {
                    let w = v - p * (v / p).floor();
                    if w >= p {
                        w - p
                    } else {
                        w
                    }
                })
                .collect(),
        }
    }

    /// Shortest displacement `to − from` (minimal image on a torus).
    pub fn displacement(&self, from: &[S], to: &[S]) -> Point<S> {
        let mut d: Vec<S> = to.iter().zip(from).map(|(&a, &b)| a - b).collect();
        if self.is_torus() {
            for (di, &p) in d.iter_mut().zip(&self.upper) {
                *di = *di - p * (*di / p).round();
            }
        }
        d
    }

    pub fn distance(&self, a: &[S], b: &[S]) -> S {
        crate::linalg::norm(&self.displacement(a, b))
    }

    /// Clamps into a box; wraps on a torus.
    pub fn project(&self, x: &[S]) -> Point<S> {
        match self.kind {
            DomainKind::FlatTorus => self.wrap(x),
            DomainKind::Box => x
                .iter()
                .enumerate()
                .map(|(i, &v)| v.max(self.lower[i]).min(self.upper[i]))
                .collect(),
        }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point<S> {
        (0..self.dim())
            .map(|i| {
                let u = S::from_f64(rng.gen::<f64>()).unwrap();
                self.lower[i] + u * self.extent(i)
            })
            .collect()
    }
}

fn check_dim(d: usize) -> Result<(), TonelliError> {
    if !(1..=3).contains(&d) {
        return Err(TonelliError::InvalidDomain(format!(
            "dimension {d} unsupported (1 ≤ d ≤ 3)"
        )));
    }
    Ok(())
}
