use serde::Serialize;

use crate::evolution::{c11_certificate, evolve_grid, C11Certificate, ScanOptions};
use crate::grid::Grid;
use crate::linalg::Point;
use crate::scalar::{from_usize, lit, to_f64, Scalar};
use crate::semiconcave::{FiberDensity, MarginalFunction};
use crate::tonelli::{DomainSpec, TonelliSystem};

use super::{
    flow_graph, hausdorff_distance, sample_pseudograph, Direction, PhaseCloud, PointTag,
    PseudographError,
};

#[derive(Clone, Debug)]
pub struct ArnaudOptions<S> {
    pub scan: ScanOptions<S>,
    /// Cap for the C^{1,1} guard on the evolved function.
    pub cap: S,
    pub tol: S,
    /// Judge only `sup_{a∈A} d(a, B)`.
    pub inclusion_only: bool,
    /// Replaces the sampled pseudo-graph on the grid nodes.
    pub custom_b: Option<PhaseCloud<S>>,
}

impl<S: Scalar> Default for ArnaudOptions<S> {
    fn default() -> Self {
        Self {
            scan: ScanOptions::default(),
            cap: lit(100.0),
            tol: lit(0.02),
            inclusion_only: false,
            custom_b: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ArnaudReport<S> {
    pub hausdorff: S,
    /// From the transported gradient graph into the pseudo-graph.
    pub directed_ab: S,
    /// From the pseudo-graph into the transported gradient graph.
    pub directed_ba: S,
    pub t: S,
    pub grid_h: S,
    pub tol: S,
    pub inclusion_only: bool,
    pub pass: bool,
    pub a_points: usize,
    pub b_points: usize,
    pub fiber_samples: usize,
    pub evaluation_counts: Vec<usize>,
    pub certificate: C11Certificate<S>,
    /// The transported gradient graph, clipped to the box.
    #[serde(skip)]
    pub transported: PhaseCloud<S>,
}

/// Compares `Φ_H^{0,t}(graph D T̆₀ᵗφ)` with `graph(D⁺φ)` over the box of
/// `grid`. `T̆₀ᵗφ` is evaluated on a grid widened far enough to reach every
/// backward characteristic of the pseudo-graph sample.
pub fn verify_arnaud<S: Scalar>(
    phi: &MarginalFunction<S>,
    system: &TonelliSystem<S>,
    t: S,
    grid: &Grid<S>,
    density: FiberDensity<S>,
    opts: &ArnaudOptions<S>,
) -> Result<ArnaudReport<S>, PseudographError> {
    if !(t > S::zero()) {
        return Err(PseudographError::InvalidParameter(format!(
            "t must be positive, got {t}"
        )));
    }
    if grid.dim() != phi.dim() || grid.dim() != system.dim() {
        return Err(PseudographError::InvalidParameter(
            "dimension mismatch".into(),
        ));
    }
    let b = match &opts.custom_b {
        Some(c) => c.clone(),
        None => sample_pseudograph(phi, &grid.points(), density)?,
    };
    let domain = phi.domain();
    let back = flow_graph(&b, system, S::zero(), t, Direction::Backward)?;
    let a_grid = evaluation_grid(grid, domain, &b, &back)?;

    let evolved = evolve_grid(phi, system, S::zero(), t, &a_grid, &opts.scan, true)?;
    let certificate = c11_certificate(&evolved.values, &a_grid, opts.cap)?;
    if !certificate.pass {
        return Err(PseudographError::CriticalTimeExceeded {
            t: to_f64(t),
            semiconcave: to_f64(certificate.semiconcave),
            semiconvex: to_f64(certificate.semiconvex),
        });
    }

    let mut graph = PhaseCloud::new(
        format!("gradient:T[{}]{}", to_f64(t), phi.name()),
        Some(system.domain().clone()),
    );
    for i in 0..a_grid.len() {
        let p = grid_gradient(&evolved.values, &a_grid, i);
        graph.push(a_grid.point(i), p, PointTag::Smooth);
    }
    let mut a = flow_graph(&graph, system, S::zero(), t, Direction::Forward)?;
    a.points
        .retain(|c| in_grid_box(grid, system.domain(), &c.x));
    if a.is_empty() {
        return Err(PseudographError::EmptyCloud);
    }
    let dist = hausdorff_distance(&a, &b)?;
    let pass = if opts.inclusion_only {
        dist.directed_ab <= opts.tol
    } else {
        dist.hausdorff <= opts.tol
    };
    Ok(ArnaudReport {
        hausdorff: dist.hausdorff,
        directed_ab: dist.directed_ab,
        directed_ba: dist.directed_ba,
        t,
        grid_h: grid.spacing(),
        tol: opts.tol,
        inclusion_only: opts.inclusion_only,
        pass,
        a_points: a.len(),
        b_points: b.len(),
        fiber_samples: b.count(PointTag::FiberSample),
        evaluation_counts: a_grid.counts().to_vec(),
        certificate,
        transported: a,
    })
}

/// `grid` extended on its own lattice to cover the backward images, clipped
/// to the domain of `φ` on a box.
fn evaluation_grid<S: Scalar>(
    grid: &Grid<S>,
    domain: &DomainSpec<S>,
    b: &PhaseCloud<S>,
    back: &PhaseCloud<S>,
) -> Result<Grid<S>, PseudographError> {
    let d = grid.dim();
    let h = grid.spacing();
    let mut lo = vec![S::zero(); d];
    let mut hi = vec![S::zero(); d];
    for (from, to) in b.points.iter().zip(&back.points) {
        let delta = domain.displacement(&from.x, &to.x);
        for k in 0..d {
            lo[k] = lo[k].min(delta[k]);
            hi[k] = hi[k].max(delta[k]);
        }
    }
    let (g_lo, g_hi) = (grid.lower().to_vec(), grid.upper());
    let slack = lit::<S>(1e-9);
    let mut lower = Vec::with_capacity(d);
    let mut counts = Vec::with_capacity(d);
    for k in 0..d {
        let mut below = to_f64((-lo[k] / h - slack).ceil().max(S::zero())) as usize;
        let mut above = to_f64((hi[k] / h - slack).ceil().max(S::zero())) as usize;
        if !domain.is_torus() {
            let tol = slack * (S::one() + domain.extent(k));
            while below > 0 && g_lo[k] - h * from_usize(below) < domain.lower()[k] - tol {
                below -= 1;
            }
            while above > 0 && g_hi[k] + h * from_usize(above) > domain.upper()[k] + tol {
                above -= 1;
            }
        }
        lower.push(g_lo[k] - h * from_usize(below));
        counts.push(grid.counts()[k] + below + above);
    }
    Ok(Grid::new(lower, h, counts)?)
}

/// Centered differences, one-sided on the grid boundary.
fn grid_gradient<S: Scalar>(values: &[S], grid: &Grid<S>, node: usize) -> Point<S> {
    let h = grid.spacing();
    (0..grid.dim())
        .map(|k| {
            let fwd = grid.neighbor(node, k, 1);
            let bwd = grid.neighbor(node, k, -1);
            match (bwd, fwd) {
                (Some(m), Some(p)) => (values[p] - values[m]) / (h + h),
                (None, Some(p)) => (values[p] - values[node]) / h,
                (Some(m), None) => (values[node] - values[m]) / h,
                (None, None) => S::zero(),
            }
        })
        .collect()
}

fn in_grid_box<S: Scalar>(grid: &Grid<S>, domain: &DomainSpec<S>, x: &[S]) -> bool {
    let upper = grid.upper();
    let half = lit::<S>(0.5);
    let slack = lit::<S>(1e-9);
    let center: Point<S> = grid
        .lower()
        .iter()
        .zip(&upper)
        .map(|(&a, &b)| (a + b) * half)
        .collect();
    let off = domain.displacement(&center, x);
    (0..grid.dim()).all(|k| {
        let w = (upper[k] - grid.lower()[k]) * half;
        off[k].abs() <= w + slack * (S::one() + w)
    })
}
