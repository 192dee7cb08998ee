use serde::Serialize;

use crate::grid::{Grid, ScalarField};
use crate::linalg::Point;
use crate::scalar::{lit, to_f64, Scalar};
use crate::tonelli::TonelliSystem;

use super::operators::{evolve_grid, positive_basins, ScanOptions};
use super::{CriticalTimeEstimate, EvolutionError};

/// Bounds on second differences of a grid function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct C11Certificate<S> {
    /// `max(0, max D²f)`.
    pub semiconcave: S,
    /// `max(0, −min D²f)`.
    pub semiconvex: S,
    pub cap: S,
    pub pass: bool,
}

/// Centered second differences along axes and, for d ≥ 2, the diagonals
/// `eᵢ ± eⱼ`. Passes iff both one-sided constants are at most `cap`.
pub fn c11_certificate<S: Scalar>(
    values: &[S],
    grid: &Grid<S>,
    cap: S,
) -> Result<C11Certificate<S>, EvolutionError> {
    if values.len() != grid.len() {
        return Err(EvolutionError::InvalidParameter(format!(
            "{} values for {} nodes",
            values.len(),
            grid.len()
        )));
    }
    let d = grid.dim();
    let mut offsets: Vec<Vec<isize>> = Vec::new();
    for i in 0..d {
        let mut e = vec![0; d];
        e[i] = 1;
        offsets.push(e);
        for j in i + 1..d {
            for s in [1, -1] {
                let mut e = vec![0; d];
                e[i] = 1;
                e[j] = s;
                offsets.push(e);
            }
        }
    }
    let h2 = grid.spacing() * grid.spacing();
    let mut hi = S::neg_infinity();
    let mut lo = S::infinity();
    for node in 0..grid.len() {
        for e in &offsets {
            let back: Vec<isize> = e.iter().map(|&c| -c).collect();
            let (Some(a), Some(b)) = (grid.offset(node, e), grid.offset(node, &back)) else {
                continue;
            };
            let len2 = lit::<S>(e.iter().map(|c| (c * c) as f64).sum());
            let dd = (values[a] + values[b] - values[node] - values[node]) / (len2 * h2);
            hi = hi.max(dd);
            lo = lo.min(dd);
        }
    }
    if hi == S::neg_infinity() {
        return Err(EvolutionError::InvalidParameter(
            "grid too small for second differences".into(),
        ));
    }
    let semiconcave = hi.max(S::zero());
    let semiconvex = (-lo).max(S::zero());
    let pass = semiconcave.is_finite()
        && semiconvex.is_finite()
        && semiconcave <= cap
        && semiconvex <= cap;
    Ok(C11Certificate {
        semiconcave,
        semiconvex,
        cap,
        pass,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CriticalTimeOptions<S> {
    /// Certificate cap on both one-sided constants.
    pub cap: S,
    pub bisection_tol: S,
    /// Two basins with values this close count as tied.
    pub tie_tol: S,
    pub check_uniqueness: bool,
}

impl<S: Scalar> Default for CriticalTimeOptions<S> {
    fn default() -> Self {
        Self {
            cap: lit(100.0),
            bisection_tol: lit(0.05),
            tie_tol: lit(1e-7),
            check_uniqueness: true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalProbe<S> {
    pub t: S,
    pub certificate: C11Certificate<S>,
    /// A grid point with two distinct tied maximizers, if one was found.
    pub non_unique_at: Option<Point<S>>,
    pub pass: bool,
}

fn probe<S: Scalar>(
    phi: &dyn ScalarField<S>,
    system: &TonelliSystem<S>,
    t: S,
    x_grid: &Grid<S>,
    scan: &ScanOptions<S>,
    opts: &CriticalTimeOptions<S>,
) -> Result<CriticalProbe<S>, EvolutionError> {
    let evolved = evolve_grid(phi, system, S::zero(), t, x_grid, scan, true)?;
    let certificate = c11_certificate(&evolved.values, x_grid, opts.cap)?;
    let mut non_unique_at = None;
    if certificate.pass && opts.check_uniqueness {
        for i in 0..x_grid.len() {
            let x = x_grid.point(i);
            let basins = positive_basins(phi, system, S::zero(), t, &x, scan)?;
            if basins.len() >= 2 && basins[0].value - basins[1].value <= opts.tie_tol {
                non_unique_at = Some(x);
                break;
            }
        }
    }
    let pass = certificate.pass && non_unique_at.is_none();
    Ok(CriticalProbe {
        t,
        certificate,
        non_unique_at,
        pass,
    })
}

/// Scans `t_grid` for the first time at which `T̆₀ᵗφ` fails the certificate
/// or has a non-unique maximizer, then bisects to `bisection_tol`.
pub fn estimate_critical_time<S: Scalar>(
    phi: &dyn ScalarField<S>,
    system: &TonelliSystem<S>,
    t_grid: &[S],
    x_grid: &Grid<S>,
    scan: &ScanOptions<S>,
    opts: &CriticalTimeOptions<S>,
) -> Result<CriticalTimeEstimate<S>, EvolutionError> {
    if t_grid.is_empty() || t_grid[0] <= S::zero() || t_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(EvolutionError::InvalidParameter(
            "t-grid must be positive and strictly increasing".into(),
        ));
    }
    let cap = *t_grid.last().expect("nonempty");
    let mut probes = Vec::new();
    let mut bracket = None;
    let mut last_pass = S::zero();
    for &t in t_grid {
        let p = probe(phi, system, t, x_grid, scan, opts)?;
        let ok = p.pass;
        probes.push(p);
        if ok {
            last_pass = t;
        } else {
            bracket = Some((last_pass, t));
            break;
        }
    }
    let Some((mut lo, mut hi)) = bracket else {
        return Ok(CriticalTimeEstimate {
            t_phi_lower: cap,
            t_phi_upper: cap,
            cap,
            capped: true,
            probes,
        });
    };
    let slack = lit::<S>(1e-12);
    while hi - lo > opts.bisection_tol + slack {
        let mid = (lo + hi) * lit(0.5);
        let p = probe(phi, system, mid, x_grid, scan, opts)?;
        if p.pass {
            lo = mid;
        } else {
            hi = mid;
        }
        probes.push(p);
    }
    debug_assert!(to_f64(lo) <= to_f64(hi));
    Ok(CriticalTimeEstimate {
        t_phi_lower: lo,
        t_phi_upper: hi,
        cap,
        capped: false,
        probes,
    })
}
