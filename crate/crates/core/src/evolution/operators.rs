use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::{Grid, GridFunction, ScalarField};
use crate::linalg::{norm, Point};
use crate::scalar::{from_usize, lit, to_f64, Scalar};
use crate::tonelli::{DomainSpec, TonelliSystem};

use super::action::action_kernel;
use super::{EvolutionError, LocalizationBound};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions<S> {
    /// Spacing of the global scan over `y`.
    pub spacing: S,
    /// Only scan `|y − x|∞ ≤ radius` when set.
    pub radius: Option<S>,
    /// Step size at which local refinement stops.
    pub tolerance: S,
    /// Seeds the rotating search directions of the refinement in d ≥ 2.
    pub seed: u64,
}

impl<S: Scalar> Default for ScanOptions<S> {
    fn default() -> Self {
        Self {
            spacing: lit(0.01),
            radius: None,
            tolerance: lit(1e-10),
            seed: 0,
        }
    }
}

impl<S: Scalar> ScanOptions<S> {
    pub fn with_spacing(spacing: S) -> Self {
        Self {
            spacing,
            ..Self::default()
        }
    }
}

/// Optimal value and the point `y` realizing it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OperatorValue<S> {
    pub value: S,
    pub argument: Point<S>,
}

/// Refined local maximizer of `y ↦ φ(y) − h(x, y)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Basin<S> {
    pub argument: Point<S>,
    pub value: S,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Sense {
    /// `sup_y φ(y) − h(t₁, t₂, x, y)`
    Positive,
    /// `inf_y φ(y) + h(t₁, t₂, y, x)`, maximized as its negative.
    Negative,
}

struct Problem<'a, S: Scalar> {
    phi: &'a dyn ScalarField<S>,
    system: &'a TonelliSystem<S>,
    t1: S,
    t2: S,
    x: &'a [S],
    sense: Sense,
    lo: Vec<S>,
    hi: Vec<S>,
}

impl<'a, S: Scalar> Problem<'a, S> {
    #[allow(clippy::too_many_arguments)]
    fn new(
        phi: &'a dyn ScalarField<S>,
        system: &'a TonelliSystem<S>,
        t1: S,
        t2: S,
        x: &'a [S],
        sense: Sense,
        opts: &ScanOptions<S>,
    ) -> Result<Self, EvolutionError> {
        system.check_dim(x)?;
        if phi.dim() != x.len() {
            return Err(EvolutionError::InvalidParameter(format!(
                "function has dimension {}, point has {}",
                phi.dim(),
                x.len()
            )));
        }
        if !(t1 < t2) {
            return Err(EvolutionError::InvalidParameter("need t1 < t2".into()));
        }
        if !(opts.spacing > S::zero()) || !(opts.tolerance > S::zero()) {
            return Err(EvolutionError::InvalidParameter(
                "scan spacing and tolerance must be positive".into(),
            ));
        }
        let (lo, hi) = search_region(phi.domain(), x, opts.radius);
        Ok(Self {
            phi,
            system,
            t1,
            t2,
            x,
            sense,
            lo,
            hi,
        })
    }

    fn objective(&self, y: &[S]) -> Result<S, EvolutionError> {
        let domain = self.phi.domain();
        let fy = self.phi.value(&domain.wrap(y));
        Ok(match self.sense {
            Sense::Positive => fy - action_kernel(self.system, self.t1, self.t2, self.x, y)?,
            Sense::Negative => -(fy + action_kernel(self.system, self.t1, self.t2, y, self.x)?),
        })
    }

    fn clamp(&self, y: &mut [S]) {
        for (k, v) in y.iter_mut().enumerate() {
            *v = v.max(self.lo[k]).min(self.hi[k]);
        }
    }

    fn signed(&self, v: S) -> S {
        match self.sense {
            Sense::Positive => v,
            Sense::Negative => -v,
        }
    }
}

fn search_region<S: Scalar>(
    domain: &DomainSpec<S>,
    x: &[S],
    radius: Option<S>,
) -> (Vec<S>, Vec<S>) {
    let d = x.len();
    let mut lo = Vec::with_capacity(d);
    let mut hi = Vec::with_capacity(d);
    for k in 0..d {
        if domain.is_torus() {
            let half = domain.extent(k) * lit(0.5);
            let r = radius.map_or(half, |r| r.min(half));
            lo.push(x[k] - r);
            hi.push(x[k] + r);
        } else {
            let (a, b) = (domain.lower()[k], domain.upper()[k]);
            match radius {
                Some(r) => {
                    lo.push((x[k] - r).max(a).min(b));
                    hi.push((x[k] + r).min(b).max(a));
                }
                None => {
                    lo.push(a);
                    hi.push(b);
                }
            }
        }
    }
    (lo, hi)
}

/// Scan grid anchored so that `x` (clamped into the region) is a node.
fn scan_grid<S: Scalar>(prob: &Problem<'_, S>, h: S) -> Result<Grid<S>, EvolutionError> {
    let d = prob.x.len();
    let mut lower = Vec::with_capacity(d);
    let mut counts = Vec::with_capacity(d);
    let slack = lit::<S>(1e-9);
    for k in 0..d {
        let c = prob.x[k].max(prob.lo[k]).min(prob.hi[k]);
        let below = to_f64(((c - prob.lo[k]) / h + slack).floor()) as usize;
        let above = to_f64(((prob.hi[k] - c) / h + slack).floor()) as usize;
        lower.push(c - h * from_usize(below));
        counts.push(below + above + 1);
    }
    Ok(Grid::new(lower, h, counts)?)
}

fn golden<S: Scalar>(prob: &Problem<'_, S>, a: S, b: S, tol: S) -> Result<(S, S), EvolutionError> {
    let ratio = (lit::<S>(5.0).sqrt() - S::one()) * lit(0.5);
    let f = |y: S| prob.objective(&[y]);
    let (mut a, mut b) = (a, b);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    v.into_iter().map(|c| c / n).collect()
}

fn fixed_directions(d: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for i in 0..d {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; d];
            v[i] = s;
            dirs.push(v);
        }
    }
    for i in 0..d {
        for j in i + 1..d {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut v = vec![0.0; d];
                v[i] = si;
                v[j] = sj;
                dirs.push(unit(v));
            }
        }
    }
    dirs
}

/// Pattern search with axis, diagonal and rotating random directions.
fn pattern_search<S: Scalar>(
    prob: &Problem<'_, S>,
    start: Point<S>,
    start_value: S,
    step: S,
    tol: S,
    seed: u64,
) -> Result<(Point<S>, S), EvolutionError> {
    let d = start.len();
    let fixed = fixed_directions(d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random: Vec<Vec<f64>> = Vec::new();
    let extra = if d == 1 { 0 } else { 8 };
    let reshuffle = |rng: &mut ChaCha8Rng, out: &mut Vec<Vec<f64>>| {
        out.clear();
        for _ in 0..extra {
            loop {
                let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let n2: f64 = v.iter().map(|c| c * c).sum();
                if n2 > 1e-6 && n2 <= 1.0 {
                    out.push(unit(v));
                    break;
                }
            }
        }
    };
    reshuffle(&mut rng, &mut random);
    let max_step = step;
    let (mut pos, mut val, mut step) = (start, start_value, step);
    let mut last_good = 0usize;
    // Expanding after success keeps ridges from being crawled at tiny steps.
    let mut budget = 20_000usize;
    while step > tol && budget > 0 {
        let total = fixed.len() + random.len();
        let mut moved = false;
        for off in 0..total {
            let idx = (last_good + off) % total;
            let dir = if idx < fixed.len() {
                &fixed[idx]
            } else {
                &random[idx - fixed.len()]
            };
            let mut cand: Vec<S> = pos
                .iter()
                .zip(dir)
                .map(|(&p, &u)| p + step * lit::<S>(u))
                .collect();
            prob.clamp(&mut cand);
            let v = prob.objective(&cand)?;
            budget = budget.saturating_sub(1);
            if v > val {
                pos = cand;
                val = v;
                last_good = idx;
                moved = true;
                break;
            }
        }
        if moved {
            step = (step + step).min(max_step);
        } else {
            step = step * lit(0.5);
            reshuffle(&mut rng, &mut random);
        }
    }
    Ok((pos, val))
}

fn refine<S: Scalar>(
    prob: &Problem<'_, S>,
    start: Point<S>,
    start_value: S,
    h: S,
    opts: &ScanOptions<S>,
) -> Result<(Point<S>, S), EvolutionError> {
    let (y, v) = if start.len() == 1 {
        let a = (start[0] - h).max(prob.lo[0]);
        let b = (start[0] + h).min(prob.hi[0]);
        let (y, v) = golden(prob, a, b, opts.tolerance)?;
        (vec![y], v)
    } else {
        pattern_search(
            prob,
            start.clone(),
            start_value,
            h * lit(0.5),
            opts.tolerance,
            opts.seed,
        )?
    };
    Ok(if v >= start_value {
        (y, v)
    } else {
        (start, start_value)
    })
}

struct Scan<S> {
    grid: Grid<S>,
    values: Vec<S>,
}

fn scan<S: Scalar>(prob: &Problem<'_, S>, h: S) -> Result<Scan<S>, EvolutionError> {
    let grid = scan_grid(prob, h)?;
    let values = (0..grid.len())
        .map(|i| prob.objective(&grid.point(i)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Scan { grid, values })
}

fn best_node<S: Scalar>(scan: &Scan<S>) -> usize {
    let mut best = 0;
    for (i, &v) in scan.values.iter().enumerate() {
        if v > scan.values[best] {
            best = i;
        }
    }
    best
}

fn optimize<S: Scalar>(
    prob: &Problem<'_, S>,
    opts: &ScanOptions<S>,
) -> Result<(Point<S>, S), EvolutionError> {
    let s = scan(prob, opts.spacing)?;
    let i = best_node(&s);
    refine(prob, s.grid.point(i), s.values[i], opts.spacing, opts)
}

/// `T̆_{t₁}^{t₂}φ(x) = sup_y φ(y) − h(t₁, t₂, x, y)` by grid scan and local
/// refinement. With a localization bound, a maximizer farther than
/// `λ_ℓ(t₂ − t₁) + spacing` from `x` is an error.
#[allow(clippy::too_many_arguments)]
pub fn lax_oleinik_positive<S: Scalar>(
    phi: &dyn ScalarField<S>,
    system: &TonelliSystem<S>,
    t1: S,
    t2: S,
    x: &[S],
    opts: &ScanOptions<S>,
    bound: Option<&LocalizationBound<S>>,
) -> Result<OperatorValue<S>, EvolutionError> {
    let prob = Problem::new(phi, system, t1, t2, x, Sense::Positive, opts)?;
    let (y, v) = optimize(&prob, opts)?;
    if let Some(b) = bound {
        let distance = phi.domain().distance(x, &y);
        let limit = b.lambda * (t2 - t1) + opts.spacing;
        if distance > limit {
            return Err(EvolutionError::LocalizationViolated {
                distance: to_f64(distance),
                bound: to_f64(limit),
            });
        }
    }
    Ok(OperatorValue {
        value: v,
        argument: phi.domain().wrap(&y),
    })
}

/// `T_{t₁}^{t₂}φ(x) = inf_y φ(y) + h(t₁, t₂, y, x)`.
pub fn lax_oleinik_negative<S: Scalar>(
    phi: &dyn ScalarField<S>,
    system: &TonelliSystem<S>,
    t1: S,
    t2: S,
    x: &[S],
    opts: &ScanOptions<S>,
) -> Result<OperatorValue<S>, EvolutionError> {
    let prob = Problem::new(phi, system, t1, t2, x, Sense::Negative, opts)?;
    let (y, v) = optimize(&prob, opts)?;
    Ok(OperatorValue {
        value: prob.signed(v),
        argument: phi.domain().wrap(&y),
    })
}

/// Refined local maxima of the scan, best first; maxima closer than
/// `10·spacing` are merged.
pub fn positive_basins<S: Scalar>(
    phi: &dyn ScalarField<S>,
    system: &TonelliSystem<S>,
    t1: S,
    t2: S,
    x: &[S],
    opts: &ScanOptions<S>,
) -> Result<Vec<Basin<S>>, EvolutionError> {
    let prob = Problem::new(phi, system, t1, t2, x, Sense::Positive, opts)?;
    let s = scan(&prob, opts.spacing)?;
    let d = x.len();
    let mut peaks: Vec<usize> = (0..s.grid.len())
        .filter(|&i| {
            let v = s.values[i];
            let mut strict = false;
            for axis in 0..d {
                for step in [-1isize, 1] {
                    if let Some(j) = s.grid.neighbor(i, axis, step) {
                        if s.values[j] > v {
                            return false;
                        }
                        if s.values[j] < v {
                            strict = true;
                        }
                    }
                }
            }
            strict || s.grid.len() == 1
        })
        .collect();
    peaks.sort_by(|&a, &b| s.values[b].partial_cmp(&s.values[a]).expect("finite"));
    peaks.truncate(8);
    let domain = phi.domain();
    let merge = opts.spacing * lit(10.0);
    let mut basins: Vec<Basin<S>> = Vec::new();
    for i in peaks {
        let (y, v) = refine(&prob, s.grid.point(i), s.values[i], opts.spacing, opts)?;
        if let Some(b) = basins
            .iter_mut()
            .find(|b| domain.distance(&b.argument, &y) <= merge)
        {
            if v > b.value {
                b.argument = y;
                b.value = v;
            }
        } else {
            basins.push(Basin {
                argument: y,
                value: v,
            });
        }
    }
    basins.sort_by(|a, b| b.value.partial_cmp(&a.value).expect("finite"));
    Ok(basins)
}

/// Values and optimizers of `T̆` or `T` on every node of a grid.
#[derive(Clone, Debug, Serialize)]
pub struct EvolvedGrid<S> {
    pub grid: Grid<S>,
    pub values: Vec<S>,
    pub arguments: Vec<Point<S>>,
}

impl<S: Scalar> EvolvedGrid<S> {
    pub fn to_function(&self, domain: DomainSpec<S>) -> Result<GridFunction<S>, EvolutionError> {
        Ok(GridFunction::new(self.grid.clone(), self.values.clone())?.with_domain(domain))
    }

    /// Largest `|y* − x|` over the grid.
    pub fn max_displacement(&self, domain: &DomainSpec<S>) -> S {
        (0..self.grid.len())
            .map(|i| norm(&domain.displacement(&self.grid.point(i), &self.arguments[i])))
            .fold(S::zero(), S::max)
    }
}

/// Evaluates `T̆` (`positive = true`) or `T` on all grid nodes in parallel.
#[allow(clippy::too_many_arguments)]
pub fn evolve_grid<S: Scalar>(
    phi: &dyn ScalarField<S>,
    system: &TonelliSystem<S>,
    t1: S,
    t2: S,
    grid: &Grid<S>,
    opts: &ScanOptions<S>,
    positive: bool,
) -> Result<EvolvedGrid<S>, EvolutionError> {
    let results: Vec<Result<OperatorValue<S>, EvolutionError>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.point(i);
            if positive {
                lax_oleinik_positive(phi, system, t1, t2, &x, opts, None)
            } else {
                lax_oleinik_negative(phi, system, t1, t2, &x, opts)
            }
        })
        .collect();
    let mut values = Vec::with_capacity(grid.len());
    let mut arguments = Vec::with_capacity(grid.len());
    for r in results {
        let r = r?;
        values.push(r.value);
        arguments.push(r.argument);
    }
    Ok(EvolvedGrid {
        grid: grid.clone(),
        values,
        arguments,
    })
}
