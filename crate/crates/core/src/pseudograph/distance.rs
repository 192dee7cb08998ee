use kdtree::distance::squared_euclidean;
use kdtree::KdTree;
use rayon::prelude::*;
use serde::Serialize;

use crate::scalar::{lit, to_f64, Scalar};
use crate::tonelli::DomainSpec;

use super::{PhaseCloud, PseudographError};

/// Clouds larger than this are searched with a k-d tree.
pub const KD_THRESHOLD: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HausdorffReport<S> {
    pub hausdorff: S,
    /// `sup_{a∈A} d(a, B)`.
    pub directed_ab: S,
    /// `sup_{b∈B} d(b, A)`.
    pub directed_ba: S,
    /// `min_{a∈A} d(a, B)`.
    pub min_distance: S,
}

/// Euclidean in `(x, p)`; the `x` part uses the minimal image when either
/// cloud carries a torus domain.
pub fn hausdorff_distance<S: Scalar>(
    a: &PhaseCloud<S>,
    b: &PhaseCloud<S>,
) -> Result<HausdorffReport<S>, PseudographError> {
    if a.is_empty() || b.is_empty() {
        return Err(PseudographError::EmptyCloud);
    }
    if a.dim() != b.dim() {
        return Err(PseudographError::InvalidParameter(
            "clouds live in different dimensions".into(),
        ));
    }
    let torus = [&a.domain, &b.domain]
        .into_iter()
        .flatten()
        .find(|d| d.is_torus())
        .cloned();
    let ab = nearest_distances(a, b, torus.as_ref());
    let ba = nearest_distances(b, a, torus.as_ref());
    let directed_ab = ab.iter().copied().fold(0.0, f64::max);
    let directed_ba = ba.iter().copied().fold(0.0, f64::max);
    let min_distance = ab.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(HausdorffReport {
        hausdorff: lit(directed_ab.max(directed_ba)),
        directed_ab: lit(directed_ab),
        directed_ba: lit(directed_ba),
        min_distance: lit(min_distance),
    })
}

fn flat<S: Scalar>(cloud: &PhaseCloud<S>, torus: Option<&DomainSpec<S>>) -> Vec<Vec<f64>> {
    cloud
        .points
        .iter()
        .map(|c| {
            let x = match torus {
                Some(t) => t.wrap(&c.x),
                None => c.x.clone(),
            };
            x.iter().chain(&c.p).map(|&v| to_f64(v)).collect()
        })
        .collect()
}

/// Shifts of the `x` block by `{−P, 0, P}` per axis.
fn image_shifts<S: Scalar>(torus: Option<&DomainSpec<S>>, dim: usize) -> Vec<Vec<f64>> {
    let Some(t) = torus else {
        return vec![vec![0.0; dim]];
    };
    let d = t.dim();
    let mut out = Vec::new();
    for code in 0..3usize.pow(d as u32) {
        let mut s = vec![0.0; dim];
        let mut c = code;
        for (k, sk) in s.iter_mut().enumerate().take(d) {
            *sk = (c % 3) as f64 - 1.0;
            *sk *= to_f64(t.extent(k));
            c /= 3;
        }
        out.push(s);
    }
    out
}

/// `d(q, targets)` for every `q ∈ queries`.
fn nearest_distances<S: Scalar>(
    queries: &PhaseCloud<S>,
    targets: &PhaseCloud<S>,
    torus: Option<&DomainSpec<S>>,
) -> Vec<f64> {
    let q = flat(queries, torus);
    let t = flat(targets, torus);
    let dim = q[0].len();
    let shifts = image_shifts(torus, dim);
    if q.len().max(t.len()) <= KD_THRESHOLD {
        return q
            .par_iter()
            .map(|u| {
                let mut best = f64::INFINITY;
                for s in &shifts {
                    for v in &t {
                        let d2: f64 = (0..dim)
                            .map(|k| {
                                let e = u[k] + s[k] - v[k];
                                e * e
                            })
                            .sum();
                        best = best.min(d2);
                    }
                }
                best.sqrt()
            })
            .collect();
    }
    let mut tree = KdTree::with_capacity(dim, 16);
    for (i, v) in t.iter().enumerate() {
        tree.add(v.clone(), i).expect("finite cloud coordinates");
    }
    q.par_iter()
        .map(|u| {
            let mut best = f64::INFINITY;
            let mut shifted = u.clone();
            for s in &shifts {
                for k in 0..dim {
                    shifted[k] = u[k] + s[k];
                }
                if let Ok(hit) = tree.nearest(&shifted, 1, &squared_euclidean) {
                    if let Some(&(d2, _)) = hit.first() {
                        best = best.min(d2);
                    }
                }
            }
            best.sqrt()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pseudograph::PointTag;

    fn cloud(pts: &[(f64, f64)]) -> PhaseCloud<f64> {
        let mut c = PhaseCloud::new("t", None);
        for &(x, p) in pts {
            c.push(vec![x], vec![p], PointTag::Smooth);
        }
        c
    }

    #[test]
    fn tree_and_brute_force_agree() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let big: Vec<(f64, f64)> = (0..KD_THRESHOLD + 500)
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let small: Vec<(f64, f64)> = (0..200)
            .map(|_| (rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)))
            .collect();
        let fast = nearest_distances(&cloud(&small), &cloud(&big), None);
        for (i, &(x, p)) in small.iter().enumerate() {
            let brute = big
                .iter()
                .map(|&(y, q)| ((x - y).powi(2) + (p - q).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            assert!((fast[i] - brute).abs() < 1e-14);
        }
    }

    #[test]
    fn torus_uses_minimal_image() {
        let t = DomainSpec::torus(vec![1.0]).unwrap();
        let mut a = cloud(&[(0.05, 0.0)]);
        let b = cloud(&[(0.95, 0.0)]);
        a.domain = Some(t);
        let r = hausdorff_distance(&a, &b).unwrap();
        assert!((r.hausdorff - 0.1).abs() < 1e-12);
    }
}
