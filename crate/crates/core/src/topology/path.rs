use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::linalg::{dist, dot, norm, Point};
use crate::scalar::{from_usize, lit, to_f64, Scalar};
use crate::semiconcave::{sample_ball, MarginalFunction};

use super::TopologyError;

/// `l(s) = a + 2s(z − a)` on `[0, ½]`, `z + (2s − 1)(b − z)` on `[½, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BrokenLine<S> {
    pub a: Point<S>,
    pub z: Point<S>,
    pub b: Point<S>,
    /// Waypoints drawn, including the accepted one.
    pub samples_checked: usize,
}

impl<S: Scalar> BrokenLine<S> {
    pub fn new(a: Point<S>, z: Point<S>, b: Point<S>) -> Self {
        Self {
            a,
            z,
            b,
            samples_checked: 0,
        }
    }

    pub fn eval(&self, s: S) -> Point<S> {
        let half = lit::<S>(0.5);
        let two = lit::<S>(2.0);
        let (from, to, u) = if s <= half {
            (&self.a, &self.z, two * s)
        } else {
            (&self.z, &self.b, two * s - S::one())
        };
        from.iter()
            .zip(to)
            .map(|(&p, &q)| p + u * (q - p))
            .collect()
    }

    pub fn length(&self) -> S {
        dist(&self.a, &self.z) + dist(&self.z, &self.b)
    }
}

#[derive(Clone, Debug)]
pub struct PathOptions<S> {
    /// Disk radius; `|b − a|/4` when unset. Always clipped to the domain.
    pub radius: Option<S>,
    pub n_samples: usize,
    pub seed: u64,
    /// Active-set tolerance of the membership test; samples are `tol/2` apart.
    pub tol: S,
}

impl<S: Scalar> Default for PathOptions<S> {
    fn default() -> Self {
        Self {
            radius: None,
            n_samples: 10,
            seed: 0,
            tol: lit(1e-4),
        }
    }
}

/// First point of the open broken line, sampled at `spacing`, lying in
/// `Σ^{≥2}` with tie tolerance `tol`.
pub fn first_singular_point<S: Scalar>(
    phi: &MarginalFunction<S>,
    line: &BrokenLine<S>,
    tol: S,
    spacing: S,
) -> Result<Option<Point<S>>, TopologyError> {
    if !(spacing > S::zero()) {
        return Err(TopologyError::InvalidParameter(format!(
            "spacing must be positive, got {spacing}"
        )));
    }
    let segments = [(&line.a, &line.z, true), (&line.z, &line.b, false)];
    for (from, to, closed_end) in segments {
        let n = to_f64((dist(from, to) / spacing).ceil()).max(1.0) as usize;
        let last = if closed_end { n } else { n - 1 };
        for j in 1..=last {
            let u = from_usize::<S>(j) / from_usize(n);
            let x: Point<S> = from
                .iter()
                .zip(to)
                .map(|(&p, &q)| p + u * (q - p))
                .collect();
            if singular(phi, &x, tol)? {
                return Ok(Some(x));
            }
        }
    }
    Ok(None)
}

fn singular<S: Scalar>(phi: &MarginalFunction<S>, x: &[S], tol: S) -> Result<bool, TopologyError> {
    // Affine dimension two needs three active pieces.
    if phi.active_count(x, tol).1 < 3 {
        if !phi.domain().contains(x) {
            phi.evaluate(x)?;
        }
        return Ok(false);
    }
    Ok(phi.stratum_dimension(x, tol)? >= 2)
}

struct Disk<S> {
    center: Point<S>,
    basis: Vec<Point<S>>,
    radius: S,
}

impl<S: Scalar> Disk<S> {
    /// The `(d−1)`-disk centred at the midpoint of `[a, b]`, orthogonal to `b − a`.
    fn bisector(
        phi: &MarginalFunction<S>,
        a: &[S],
        b: &[S],
        radius: Option<S>,
    ) -> Result<Self, TopologyError> {
        let d = a.len();
        let half = lit::<S>(0.5);
        let center: Point<S> = a.iter().zip(b).map(|(&p, &q)| (p + q) * half).collect();
        let len = dist(a, b);
        let u: Point<S> = a.iter().zip(b).map(|(&p, &q)| (q - p) / len).collect();
        let mut basis: Vec<Point<S>> = Vec::with_capacity(d - 1);
        for k in 0..d {
            let mut e = vec![S::zero(); d];
            e[k] = S::one();
            for q in std::iter::once(&u).chain(&basis) {
                let c = dot(&e, q);
                for (ei, &qi) in e.iter_mut().zip(q) {
                    *ei = *ei - c * qi;
                }
            }
            let n = norm(&e);
            if n > lit(1e-6) {
                basis.push(e.into_iter().map(|v| v / n).collect());
            }
            if basis.len() == d - 1 {
                break;
            }
        }
        let mut r = radius.unwrap_or(len / lit(4.0));
        if !(r > S::zero()) {
            return Err(TopologyError::InvalidParameter(format!(
                "disk radius must be positive, got {r}"
            )));
        }
        let dom = phi.domain();
        if !dom.is_torus() {
            for k in 0..d {
                r = r
                    .min(center[k] - dom.lower()[k])
                    .min(dom.upper()[k] - center[k]);
            }
            if !(r > S::zero()) {
                return Err(TopologyError::InvalidParameter(
                    "midpoint of the endpoints lies on the domain boundary".into(),
                ));
            }
        }
        Ok(Self {
            center,
            basis,
            radius: r,
        })
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Point<S> {
        let c = sample_ball(rng, &vec![S::zero(); self.basis.len()], self.radius);
        let mut z = self.center.clone();
        for (ck, e) in c.iter().zip(&self.basis) {
            for (zi, &ei) in z.iter_mut().zip(e) {
                *zi = *zi + *ck * ei;
            }
        }
        z
    }
}

fn check_endpoints<S: Scalar>(
    phi: &MarginalFunction<S>,
    a: &[S],
    b: &[S],
    tol: S,
) -> Result<(), TopologyError> {
    let d = phi.dim();
    if d < 2 {
        return Err(TopologyError::DimensionTooLow(d));
    }
    if a.len() != d || b.len() != d {
        return Err(TopologyError::InvalidParameter(
            "endpoint dimension mismatch".into(),
        ));
    }
    if !(tol > S::zero()) {
        return Err(TopologyError::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if a == b {
        return Err(TopologyError::InvalidParameter("endpoints coincide".into()));
    }
    for p in [a, b] {
        let k = phi.stratum_dimension(p, tol)?;
        if k >= 2 {
            return Err(TopologyError::EndpointsSingular {
                point: p.iter().map(|&v| to_f64(v)).collect(),
                stratum: k,
            });
        }
    }
    Ok(())
}

/// Draws waypoints uniformly from the bisector disk and returns the first
/// broken line whose interior avoids `Σ^{≥2}` at resolution `tol`.
pub fn broken_line_path<S: Scalar>(
    phi: &MarginalFunction<S>,
    a: &[S],
    b: &[S],
    opts: &PathOptions<S>,
) -> Result<BrokenLine<S>, TopologyError> {
    check_endpoints(phi, a, b, opts.tol)?;
    let disk = Disk::bisector(phi, a, b, opts.radius)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let spacing = opts.tol * lit(0.5);
    for i in 0..opts.n_samples {
        let mut line = BrokenLine::new(a.to_vec(), disk.sample(&mut rng), b.to_vec());
        if first_singular_point(phi, &line, opts.tol, spacing)?.is_none() {
            line.samples_checked = i + 1;
            return Ok(line);
        }
    }
    Err(TopologyError::NoPathFoundAtResolution {
        samples: opts.n_samples,
        tol: to_f64(opts.tol),
        failure_density: 1.0,
    })
}

/// Acceptance statistics of every waypoint among `n_samples` draws.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathSurvey {
    pub samples: usize,
    pub accepted: usize,
    pub failure_density: f64,
}

pub fn survey_broken_lines<S: Scalar>(
    phi: &MarginalFunction<S>,
    a: &[S],
    b: &[S],
    opts: &PathOptions<S>,
) -> Result<PathSurvey, TopologyError> {
    check_endpoints(phi, a, b, opts.tol)?;
    if opts.n_samples == 0 {
        return Err(TopologyError::InvalidParameter(
            "n_samples must be positive".into(),
        ));
    }
    let disk = Disk::bisector(phi, a, b, opts.radius)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let spacing = opts.tol * lit(0.5);
    let mut accepted = 0;
    for _ in 0..opts.n_samples {
        let line = BrokenLine::new(a.to_vec(), disk.sample(&mut rng), b.to_vec());
        if first_singular_point(phi, &line, opts.tol, spacing)?.is_none() {
            accepted += 1;
        }
    }
    Ok(PathSurvey {
        samples: opts.n_samples,
        accepted,
        failure_density: (opts.n_samples - accepted) as f64 / opts.n_samples as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tonelli::DomainSpec;

    #[test]
    fn broken_line_hits_its_three_points() {
        let l = BrokenLine::new(vec![0.0, 0.0], vec![1.0, 2.0], vec![3.0, 0.0]);
        assert_eq!(l.eval(0.0), vec![0.0, 0.0]);
        assert_eq!(l.eval(0.5), vec![1.0, 2.0]);
        assert_eq!(l.eval(1.0), vec![3.0, 0.0]);
    }

    #[test]
    fn bisector_basis_is_orthonormal() {
        let dom = DomainSpec::symmetric_box(3, 5.0).unwrap();
        let phi = crate::semiconcave::paraboloid(dom, 1.0).unwrap();
        let (a, b) = ([0.3, -1.0, 2.0], [1.0, 0.5, -0.7]);
        let disk = Disk::bisector(&phi, &a, &b, None).unwrap();
        assert_eq!(disk.basis.len(), 2);
        let u: Vec<f64> = a.iter().zip(&b).map(|(p, q)| q - p).collect();
        for (i, e) in disk.basis.iter().enumerate() {
            assert!(dot(e, &u).abs() < 1e-14);
            assert!((norm(e) - 1.0).abs() < 1e-14);
            for f in &disk.basis[i + 1..] {
                assert!(dot(e, f).abs() < 1e-14);
            }
        }
    }
}
