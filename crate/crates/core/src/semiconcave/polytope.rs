use serde::Serialize;

use crate::linalg::{dot, norm, sub, Matrix, Point};
use crate::scalar::{from_usize, lit, to_f64, Scalar};

use super::SemiconcaveError;

/// How densely a polytope is sampled by [`Polytope::sample`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum FiberDensity<S> {
    /// At most this many points (vertices included).
    MaxPoints(usize),
    /// Lattice spacing; the point count is unbounded.
    Spacing(S),
}

/// Vertex-represented convex hull of a finite point set.
#[derive(Clone, Debug, Serialize)]
pub struct Polytope<S> {
    vertices: Vec<Point<S>>,
    affine_dim: usize,
    #[serde(skip)]
    origin: Point<S>,
    #[serde(skip)]
    basis: Vec<Point<S>>,
    /// Vertex coordinates in `basis`; counter-clockwise when `affine_dim == 2`.
    #[serde(skip)]
    coords: Vec<Point<S>>,
}

impl<S: Scalar> Polytope<S> {
    /// Convex hull of `points`. Singular values of the centred point matrix
    /// below `rank_tol · σ_max` are treated as zero. The cutoff is floored at
    /// `8√ε`, the resolution of singular values taken from the Gram matrix.
    pub fn from_points(points: &[Point<S>], rank_tol: S) -> Result<Self, SemiconcaveError> {
        if points.is_empty() {
            return Err(SemiconcaveError::EmptyPointSet);
        }
        let d = points[0].len();
        let scale = S::one() + points.iter().map(|p| norm(p)).fold(S::zero(), S::max);
        let merge = lit::<S>(1e-9) * scale;
        let mut unique: Vec<Point<S>> = Vec::new();
        for p in points {
            if !unique.iter().any(|q| norm(&sub(p, q)) <= merge) {
                unique.push(p.clone());
            }
        }
        if unique.len() == 1 {
            return Ok(Self {
                origin: unique[0].clone(),
                vertices: unique.clone(),
                affine_dim: 0,
                basis: Vec::new(),
                coords: vec![Vec::new()],
            });
        }

        let n = from_usize::<S>(unique.len());
        let origin: Point<S> = (0..d)
            .map(|k| unique.iter().map(|p| p[k]).sum::<S>() / n)
            .collect();
        let mut gram = Matrix::zeros(d, d);
        for p in &unique {
            let r = sub(p, &origin);
            for i in 0..d {
                for j in 0..d {
                    gram[(i, j)] = gram[(i, j)] + r[i] * r[j];
                }
            }
        }
        let (vals, vecs) = gram.symmetric_eigen();
        let sigma: Vec<S> = vals.iter().map(|&l: &S| l.max(S::zero()).sqrt()).collect();
        let smax = sigma.iter().copied().fold(S::zero(), S::max);
        let rank_tol = rank_tol.max(lit::<S>(8.0) * S::eps().sqrt());
        let basis: Vec<Point<S>> = (0..d)
            .rev()
            .filter(|&j| sigma[j] > rank_tol * smax)
            .map(|j| vecs.column(j))
            .collect();
        let k = basis.len();
        let to_coords = |p: &[S]| -> Point<S> {
            let r = sub(p, &origin);
            basis.iter().map(|b| dot(b, &r)).collect()
        };
        let all_coords: Vec<Point<S>> = unique.iter().map(|p| to_coords(p)).collect();

        let keep: Vec<usize> = match k {
            0 => vec![0],
            1 => {
                let (mut lo, mut hi) = (0, 0);
                for (i, c) in all_coords.iter().enumerate() {
                    if c[0] < all_coords[lo][0] {
                        lo = i;
                    }
                    if c[0] > all_coords[hi][0] {
                        hi = i;
                    }
                }
                vec![lo, hi]
            }
            2 => convex_hull_2d(&all_coords),
            _ => {
                let tol = lit::<S>(1e-10) * scale;
                (0..unique.len())
                    .filter(|&i| {
                        let others: Vec<Point<S>> = all_coords
                            .iter()
                            .enumerate()
                            .filter(|&(j, _)| j != i)
                            .map(|(_, c)| sub(c, &all_coords[i]))
                            .collect();
                        norm(&min_norm_point(&others).0) > tol
                    })
                    .collect()
            }
        };
        Ok(Self {
            vertices: keep.iter().map(|&i| unique[i].clone()).collect(),
            coords: keep.iter().map(|&i| all_coords[i].clone()).collect(),
            affine_dim: k,
            origin,
            basis,
        })
    }

    pub fn vertices(&self) -> &[Point<S>] {
        &self.vertices
    }

    pub fn affine_dim(&self) -> usize {
        self.affine_dim
    }

    pub fn ambient_dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn is_singleton(&self) -> bool {
        self.affine_dim == 0
    }

    /// Euclidean distance from `p` to the polytope.
    pub fn distance(&self, p: &[S]) -> S {
        if self.affine_dim == 0 {
            return norm(&sub(p, &self.vertices[0]));
        }
        let r = sub(p, &self.origin);
        let u: Point<S> = self.basis.iter().map(|b| dot(b, &r)).collect();
        let in_plane = dot(&u, &u);
        let off_plane = (dot(&r, &r) - in_plane).max(S::zero());
        let shifted: Vec<Point<S>> = self.coords.iter().map(|c| sub(c, &u)).collect();
        let inside = norm(&min_norm_point(&shifted).0);
        (off_plane + inside * inside).sqrt()
    }

    pub fn contains(&self, p: &[S], tol: S) -> bool {
        self.distance(p) <= tol
    }

    /// Vertices plus a lattice (and, in the plane, boundary points).
    pub fn sample(&self, density: FiberDensity<S>) -> Vec<Point<S>> {
        match self.affine_dim {
            0 => self.vertices.clone(),
            1 => {
                let (a, b) = (&self.vertices[0], &self.vertices[1]);
                let len = norm(&sub(b, a));
                let n = match density {
                    FiberDensity::MaxPoints(m) => m.max(2),
                    FiberDensity::Spacing(s) => to_f64((len / s).ceil()) as usize + 1,
                };
                (0..n)
                    .map(|i| {
                        let w = from_usize::<S>(i) / from_usize(n - 1);
                        a.iter().zip(b).map(|(&x, &y)| x + w * (y - x)).collect()
                    })
                    .collect()
            }
            k => {
                let spacing = match density {
                    FiberDensity::Spacing(s) => s,
                    FiberDensity::MaxPoints(m) => {
                        let m = m.max(self.vertices.len() + 1);
                        let vol = self.coordinate_volume();
                        let mut s = (vol / from_usize(m)).powf(S::one() / from_usize(k));
                        if !(s > S::zero()) {
                            s = lit(1e-3);
                        }
                        while self.sample_with_spacing(s).len() > m {
                            s = s * lit(1.1);
                        }
                        s
                    }
                };
                self.sample_with_spacing(spacing)
            }
        }
    }

    fn coordinate_volume(&self) -> S {
        if self.affine_dim == 2 {
            let c = &self.coords;
            let n = c.len();
            let twice: S = (0..n)
                .map(|i| {
                    let j = (i + 1) % n;
                    c[i][0] * c[j][1] - c[j][0] * c[i][1]
                })
                .sum();
            twice.abs() / lit(2.0)
        } else {
            (0..self.affine_dim)
                .map(|a| {
                    let lo = self.coords.iter().map(|c| c[a]).fold(S::infinity(), S::min);
                    let hi = self
                        .coords
                        .iter()
                        .map(|c| c[a])
                        .fold(S::neg_infinity(), S::max);
                    hi - lo
                })
                .fold(S::one(), |acc, e| acc * e)
        }
    }

    fn from_coords(&self, u: &[S]) -> Point<S> {
        let mut p = self.origin.clone();
        for (b, &c) in self.basis.iter().zip(u) {
            for (pk, &bk) in p.iter_mut().zip(b) {
                *pk = *pk + c * bk;
            }
        }
        p
    }

    fn coords_inside(&self, u: &[S], tol: S) -> bool {
        if self.affine_dim == 2 {
            let c = &self.coords;
            let n = c.len();
            (0..n).all(|i| {
                let j = (i + 1) % n;
                let cross =
                    (c[j][0] - c[i][0]) * (u[1] - c[i][1]) - (c[j][1] - c[i][1]) * (u[0] - c[i][0]);
                cross >= -tol * norm(&sub(&c[j], &c[i]))
            })
        } else {
            let shifted: Vec<Point<S>> = self.coords.iter().map(|c| sub(c, u)).collect();
            norm(&min_norm_point(&shifted).0) <= tol
        }
    }

    fn sample_with_spacing(&self, s: S) -> Vec<Point<S>> {
        let k = self.affine_dim;
        let mut out = self.vertices.clone();
        if k == 2 {
            let n = self.coords.len();
            for i in 0..n {
                let (a, b) = (&self.coords[i], &self.coords[(i + 1) % n]);
                let m = to_f64((norm(&sub(b, a)) / s).ceil()) as usize;
                for j in 1..m {
                    let w = from_usize::<S>(j) / from_usize(m);
                    let u = vec![a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])];
                    out.push(self.from_coords(&u));
                }
            }
        }
        let lo: Vec<S> = (0..k)
            .map(|a| self.coords.iter().map(|c| c[a]).fold(S::infinity(), S::min))
            .collect();
        let hi: Vec<S> = (0..k)
            .map(|a| {
                self.coords
                    .iter()
                    .map(|c| c[a])
                    .fold(S::neg_infinity(), S::max)
            })
            .collect();
        let counts: Vec<usize> = (0..k)
            .map(|a| to_f64(((hi[a] - lo[a]) / s).floor()) as usize + 1)
            .collect();
        let tol = lit::<S>(1e-12) * (S::one() + s);
        let total: usize = counts.iter().product();
        for flat in 0..total {
            let mut rem = flat;
            let u: Point<S> = (0..k)
                .map(|a| {
                    let i = rem % counts[a];
                    rem /= counts[a];
                    lo[a] + s * from_usize(i)
                })
                .collect();
            if self.coords_inside(&u, tol) {
                out.push(self.from_coords(&u));
            }
        }
        out
    }
}

/// Counter-clockwise hull indices (Andrew's monotone chain), collinear points dropped.
fn convex_hull_2d<S: Scalar>(pts: &[Point<S>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.sort_by(|&a, &b| {
        (pts[a][0], pts[a][1])
            .partial_cmp(&(pts[b][0], pts[b][1]))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let scale = pts
        .iter()
        .map(|p| p[0].abs().max(p[1].abs()))
        .fold(S::zero(), S::max)
        .max(S::min_positive_value());
    let tol = lit::<S>(1e-12) * scale * scale;
    let cross = |o: usize, a: usize, b: usize| {
        (pts[a][0] - pts[o][0]) * (pts[b][1] - pts[o][1])
            - (pts[a][1] - pts[o][1]) * (pts[b][0] - pts[o][0])
    };
    let mut hull: Vec<usize> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let seq: Box<dyn Iterator<Item = &usize>> = if pass == 0 {
            Box::new(idx.iter())
        } else {
            Box::new(idx.iter().rev())
        };
        for &i in seq {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], i) <= tol
            {
                hull.pop();
            }
            hull.push(i);
        }
        hull.pop();
    }
    hull
}

/// Minimum-norm point of the convex hull of `points` (Wolfe's algorithm).
/// Returns the point and its barycentric weights.
pub fn min_norm_point<S: Scalar>(points: &[Point<S>]) -> (Point<S>, Vec<S>) {
    let m = points.len();
    let dim = points[0].len();
    let scale = points
        .iter()
        .map(|p| dot(p, p))
        .fold(S::zero(), S::max)
        .max(S::min_positive_value());
    let stop = lit::<S>(1e-13) * scale;
    let wtol = lit::<S>(1e-14);

    let first = (0..m)
        .min_by(|&a, &b| {
            dot(&points[a], &points[a])
                .partial_cmp(&dot(&points[b], &points[b]))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap();
    let mut set = vec![first];
    let mut w = vec![S::one()];
    let combine = |set: &[usize], w: &[S]| -> Point<S> {
        let mut x = vec![S::zero(); dim];
        for (&i, &wi) in set.iter().zip(w) {
            for k in 0..dim {
                x[k] = x[k] + wi * points[i][k];
            }
        }
        x
    };
    let mut x = points[first].clone();

    for _major in 0..(10 * m + 50) {
        let xx = dot(&x, &x);
        let (j, best) = (0..m)
            .map(|j| (j, dot(&x, &points[j])))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap();
        if xx - best <= stop || set.contains(&j) {
            break;
        }
        set.push(j);
        w.push(S::zero());
        let mut stalled = false;
        for _minor in 0..(m + 5) {
            let Some(a) = affine_minimizer(points, &set) else {
                stalled = true;
                break;
            };
            if a.iter().all(|&ai| ai > wtol) {
                w = a;
                break;
            }
            let mut theta = S::one();
            for (wi, ai) in w.iter().zip(&a) {
                if *ai <= wtol && *wi - *ai > S::zero() {
                    theta = theta.min(*wi / (*wi - *ai));
                }
            }
            for (wi, ai) in w.iter_mut().zip(&a) {
                *wi = *wi + theta * (*ai - *wi);
            }
            let mut k = 0;
            while k < set.len() {
                if w[k] <= wtol {
                    set.remove(k);
                    w.remove(k);
                } else {
                    k += 1;
                }
            }
            let total: S = w.iter().copied().sum();
            for wi in w.iter_mut() {
                *wi = *wi / total;
            }
        }
        if stalled {
            set.pop();
            w.pop();
            break;
        }
        x = combine(&set, &w);
    }
    let mut weights = vec![S::zero(); m];
    for (&i, &wi) in set.iter().zip(&w) {
        weights[i] = wi;
    }
    (combine(&set, &w), weights)
}

/// Weights of the min-norm point of the affine hull of `points[set]`.
fn affine_minimizer<S: Scalar>(points: &[Point<S>], set: &[usize]) -> Option<Vec<S>> {
    let n = set.len();
    if n == 1 {
        return Some(vec![S::one()]);
    }
    let p0 = &points[set[0]];
    let cols: Vec<Point<S>> = set[1..].iter().map(|&i| sub(&points[i], p0)).collect();
    let mut g = Matrix::zeros(n - 1, n - 1);
    let mut rhs = vec![S::zero(); n - 1];
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            g[(i, j)] = dot(&cols[i], &cols[j]);
        }
        rhs[i] = -dot(&cols[i], p0);
    }
    let b = g.solve(&rhs)?;
    if !b.iter().all(|v| v.is_finite()) {
        return None;
    }
    let mut w = vec![S::one() - b.iter().copied().sum::<S>()];
    w.extend(b);
    Some(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_hull_drops_interior_points() {
        let pts: Vec<Vec<f64>> = vec![
            vec![0.0, 0.0],
            vec![0.5, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 0.0],
        ];
        let p = Polytope::from_points(&pts, 1e-6).unwrap();
        assert_eq!(p.affine_dim(), 1);
        assert_eq!(p.vertices().len(), 2);
        assert!(p.contains(&[-0.3, 0.0], 1e-12));
        assert!((p.distance(&[0.0, 2.0]) - 2.0).abs() < 1e-12);
        assert!((p.distance(&[1.5, 0.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn square_in_plane() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![0.5, 0.5],
            vec![0.5, 0.0],
        ];
        let p = Polytope::from_points(&pts, 1e-6).unwrap();
        assert_eq!(p.affine_dim(), 2);
        assert_eq!(p.vertices().len(), 4);
        assert!(p.contains(&[0.2, 0.9], 1e-12));
        assert!((p.distance(&[2.0, 2.0]) - 2f64.sqrt()).abs() < 1e-10);
        let s = p.sample(FiberDensity::MaxPoints(30));
        assert!(s.len() <= 30 && s.len() > 4);
        assert!(s.iter().all(|q| p.contains(q, 1e-9)));
    }

    #[test]
    fn tetrahedron_vertices_in_space() {
        let mut pts = vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        pts.push(vec![0.2, 0.2, 0.2]);
        pts.push(vec![0.5, 0.5, 0.0]);
        let p = Polytope::from_points(&pts, 1e-6).unwrap();
        assert_eq!(p.affine_dim(), 3);
        assert_eq!(p.vertices().len(), 4);
        let expected = (1.0 - 1.0 / 3.0) * 3f64.sqrt();
        assert!((p.distance(&[1.0, 1.0, 1.0]) - expected).abs() < 1e-9);
    }

    #[test]
    fn tilted_segment_in_space_has_dimension_one() {
        let pts = vec![
            vec![1.0, 2.0, 3.0],
            vec![2.0, 3.0, 4.0],
            vec![1.5, 2.5, 3.5],
        ];
        let p = Polytope::from_points(&pts, 1e-6).unwrap();
        assert_eq!(p.affine_dim(), 1);
        let s = p.sample(FiberDensity::MaxPoints(5));
        assert_eq!(s.len(), 5);
    }

    #[test]
    fn single_precision_segment_stays_one_dimensional() {
        let pts = vec![
            vec![1.192_488_1e-8f32, -1.0],
            vec![0.382_683_6, -0.923_879_44],
        ];
        assert_eq!(Polytope::from_points(&pts, 1e-6).unwrap().affine_dim(), 1);
    }

    #[test]
    fn min_norm_point_of_triangle() {
        let pts: Vec<Vec<f64>> = vec![vec![1.0, -1.0], vec![1.0, 1.0], vec![3.0, 0.0]];
        let (x, w) = min_norm_point(&pts);
        assert!((x[0] - 1.0).abs() < 1e-12 && x[1].abs() < 1e-12);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
