//! Phase-space clouds: sampled pseudo-graphs, their transport along
//! characteristics, and distances between them.

mod arnaud;
mod distance;

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::evolution::EvolutionError;
use crate::flow::{default_steps, flow_endpoint, FlowError};
use crate::grid::GridError;
use crate::linalg::{norm, sub, Point};
use crate::scalar::{format_sig17, lit, to_f64, Scalar};
use crate::semiconcave::{FiberDensity, MarginalFunction, SemiconcaveError, DEFAULT_TIE_TOL};
use crate::tonelli::{DomainSpec, TonelliSystem};

pub use arnaud::{verify_arnaud, ArnaudOptions, ArnaudReport};
pub use distance::{hausdorff_distance, HausdorffReport, KD_THRESHOLD};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PseudographError {
    #[error("empty phase cloud")]
    EmptyCloud,
    #[error(
        "t = {t} is past the C^1,1 window (semiconcave {semiconcave}, semiconvex {semiconvex})"
    )]
    CriticalTimeExceeded {
        t: f64,
        semiconcave: f64,
        semiconvex: f64,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Semiconcave(#[from] SemiconcaveError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointTag {
    Smooth,
    FiberSample,
}

impl PointTag {
    pub fn as_str(self) -> &'static str {
        match self {
            PointTag::Smooth => "smooth",
            PointTag::FiberSample => "fiber-sample",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CloudPoint<S> {
    pub x: Point<S>,
    pub p: Point<S>,
    pub tag: PointTag,
}

/// Finite sample of a subset of `T*M`.
#[derive(Clone, Debug, Serialize)]
pub struct PhaseCloud<S> {
    pub points: Vec<CloudPoint<S>>,
    pub source: String,
    /// Used for torus-aware distances in `x`.
    #[serde(skip)]
    pub domain: Option<DomainSpec<S>>,
}

impl<S: Scalar> PhaseCloud<S> {
    pub fn new(source: impl Into<String>, domain: Option<DomainSpec<S>>) -> Self {
        Self {
            points: Vec::new(),
            source: source.into(),
            domain,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(|c| c.x.len())
    }

    pub fn push(&mut self, x: Point<S>, p: Point<S>, tag: PointTag) {
        self.points.push(CloudPoint { x, p, tag });
    }

    pub fn count(&self, tag: PointTag) -> usize {
        self.points.iter().filter(|c| c.tag == tag).count()
    }

    /// Rows `x…, p…, tag` with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.dim().unwrap_or(0);
        let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
        header.extend((0..d).map(|i| format!("p{i}")));
        header.push("tag".into());
        writeln!(w, "{}", header.join(","))?;
        for c in &self.points {
            let mut row: Vec<String> = c.x.iter().map(|&v| format_sig17(v)).collect();
            row.extend(c.p.iter().map(|&v| format_sig17(v)));
            row.push(c.tag.as_str().into());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// `(x, Dφ(x))` at differentiable points and samples of `{x} × D⁺φ(x)`
/// elsewhere.
pub fn sample_pseudograph<S: Scalar>(
    phi: &MarginalFunction<S>,
    xs: &[Point<S>],
    density: FiberDensity<S>,
) -> Result<PhaseCloud<S>, PseudographError> {
    if xs.is_empty() {
        return Err(PseudographError::EmptyCloud);
    }
    let tol = lit(DEFAULT_TIE_TOL);
    let chunks: Vec<Result<Vec<CloudPoint<S>>, PseudographError>> = xs
        .par_iter()
        .map(|x| {
            let sd = phi.superdifferential(x, tol)?;
            Ok(if sd.is_singleton() {
                vec![CloudPoint {
                    x: x.clone(),
                    p: sd.vertices()[0].clone(),
                    tag: PointTag::Smooth,
                }]
            } else {
                sd.sample(density)
                    .into_iter()
                    .map(|p| CloudPoint {
                        x: x.clone(),
                        p,
                        tag: PointTag::FiberSample,
                    })
                    .collect()
            })
        })
        .collect();
    let mut cloud = PhaseCloud::new(
        format!("pseudograph:{}", phi.name()),
        Some(phi.domain().clone()),
    );
    for c in chunks {
        cloud.points.extend(c?);
    }
    Ok(cloud)
}

/// `center` plus rings of radius `k·dr ≤ radius`, each sampled at the angles
/// `2πj / angles`. Planar only.
pub fn polar_points<S: Scalar>(
    center: &[S],
    radius: S,
    dr: S,
    angles: usize,
) -> Result<Vec<Point<S>>, PseudographError> {
    if center.len() != 2 || !(dr > S::zero()) || !(radius >= S::zero()) || angles == 0 {
        return Err(PseudographError::InvalidParameter(
            "polar points need a planar center, dr > 0 and at least one angle".into(),
        ));
    }
    let rings = to_f64((radius / dr + lit(1e-9)).floor()) as usize;
    let mut out = Vec::with_capacity(1 + rings * angles);
    out.push(center.to_vec());
    for k in 1..=rings {
        let r = dr * crate::scalar::from_usize(k);
        for j in 0..angles {
            let a =
                S::TAU() * crate::scalar::from_usize::<S>(j) / crate::scalar::from_usize(angles);
            out.push(vec![center[0] + r * a.cos(), center[1] + r * a.sin()]);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Data at `t1` carried to `t2`.
    Forward,
    /// Data at `t2` carried back to `t1`.
    Backward,
}

/// Moves every point along the characteristic flow; tags are kept.
pub fn flow_graph<S: Scalar>(
    cloud: &PhaseCloud<S>,
    system: &TonelliSystem<S>,
    t1: S,
    t2: S,
    direction: Direction,
) -> Result<PhaseCloud<S>, PseudographError> {
    let (from, to) = match direction {
        Direction::Forward => (t1, t2),
        Direction::Backward => (t2, t1),
    };
    let steps = default_steps(from, to);
    let moved: Vec<Result<CloudPoint<S>, FlowError>> = cloud
        .points
        .par_iter()
        .map(|c| {
            let end = flow_endpoint(system, from, to, &c.x, &c.p, steps)?;
            Ok(CloudPoint {
                x: end.x,
                p: end.p,
                tag: c.tag,
            })
        })
        .collect();
    let mut out = PhaseCloud::new(
        format!("{}|flow[{}→{}]", cloud.source, to_f64(from), to_f64(to)),
        Some(system.domain().clone()),
    );
    for m in moved {
        out.points.push(m?);
    }
    Ok(out)
}

/// Smallest `|p_i − p_j| / |x_i − x_j|` bound over the cloud.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LipschitzReport<S> {
    pub constant: S,
    /// Pairs with `|x_i − x_j| ≤ x_tol` but `|p_i − p_j| > p_tol`.
    pub conflicts: usize,
    pub x_tol: S,
    pub p_tol: S,
}

/// Checks that a cloud is the graph of a Lipschitz map `x ↦ p`. Quadratic in
/// the cloud size.
pub fn graph_lipschitz<S: Scalar>(
    cloud: &PhaseCloud<S>,
    x_tol: S,
    p_tol: S,
) -> Result<LipschitzReport<S>, PseudographError> {
    if cloud.is_empty() {
        return Err(PseudographError::EmptyCloud);
    }
    let pts = &cloud.points;
    let dx = |a: &[S], b: &[S]| match &cloud.domain {
        Some(dom) => dom.distance(a, b),
        None => norm(&sub(a, b)),
    };
    let (constant, conflicts) = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let mut k = S::zero();
            let mut bad = 0usize;
            for j in i + 1..pts.len() {
                let ex = dx(&pts[i].x, &pts[j].x);
                let ep = norm(&sub(&pts[i].p, &pts[j].p));
                if ex <= x_tol {
                    if ep > p_tol {
                        bad += 1;
                    }
                } else {
                    k = k.max(ep / ex);
                }
            }
            (k, bad)
        })
        .reduce(|| (S::zero(), 0), |a, b| (a.0.max(b.0), a.1 + b.1));
    Ok(LipschitzReport {
        constant,
        conflicts,
        x_tol,
        p_tol,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiberDisjointness<S> {
    pub min_distance: S,
    /// Indices of the closest pair of input points.
    pub closest_pair: (usize, usize),
    pub fiber_sizes: Vec<usize>,
}

/// Flows `{x} × D⁺φ(x)` back from `t` to `0` for each point and reports the
/// smallest distance between different fibers.
pub fn fiber_disjointness<S: Scalar>(
    phi: &MarginalFunction<S>,
    system: &TonelliSystem<S>,
    t: S,
    points: &[Point<S>],
    density: FiberDensity<S>,
) -> Result<FiberDisjointness<S>, PseudographError> {
    if points.len() < 2 {
        return Err(PseudographError::InvalidParameter(
            "need at least two points".into(),
        ));
    }
    let mut fibers = Vec::with_capacity(points.len());
    for x in points {
        let cloud = sample_pseudograph(phi, std::slice::from_ref(x), density)?;
        fibers.push(flow_graph(
            &cloud,
            system,
            S::zero(),
            t,
            Direction::Backward,
        )?);
    }
    let mut best = (S::infinity(), (0, 1));
    for i in 0..fibers.len() {
        for j in i + 1..fibers.len() {
            let r = hausdorff_distance(&fibers[i], &fibers[j])?;
            if r.min_distance < best.0 {
                best = (r.min_distance, (i, j));
            }
        }
    }
    Ok(FiberDisjointness {
        min_distance: best.0,
        closest_pair: best.1,
        fiber_sizes: fibers.iter().map(PhaseCloud::len).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_tags() {
        let mut c = PhaseCloud::<f64>::new("t", None);
        c.push(vec![0.5], vec![-1.0], PointTag::Smooth);
        c.push(vec![0.0], vec![0.25], PointTag::FiberSample);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x0,p0,tag");
        assert!(lines[1].ends_with(",smooth"));
        assert!(lines[2].ends_with(",fiber-sample"));
        let v: f64 = lines[1].split(',').next().unwrap().parse().unwrap();
        assert_eq!(v, 0.5);
    }

    #[test]
    fn lipschitz_of_a_line() {
        let mut c = PhaseCloud::<f64>::new("line", None);
        for i in 0..11 {
            let x = i as f64 / 10.0;
            c.push(vec![x], vec![-2.0 * x], PointTag::Smooth);
        }
        let r = graph_lipschitz(&c, 1e-9, 1e-9).unwrap();
        assert!((r.constant - 2.0).abs() < 1e-12);
        assert_eq!(r.conflicts, 0);
        c.push(vec![0.0], vec![1.0], PointTag::FiberSample);
        assert_eq!(graph_lipschitz(&c, 1e-9, 1e-9).unwrap().conflicts, 1);
    }
}
