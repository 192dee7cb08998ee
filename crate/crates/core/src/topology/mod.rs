//! Singular strata on grids, box-counting dimension, broken-line paths and
//! connected components of strata masks.

mod dimension;
mod path;

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::grid::{Grid, GridError};
use crate::linalg::Point;
use crate::scalar::{format_sig17, lit, Scalar};
use crate::semiconcave::{MarginalFunction, SemiconcaveError};

pub use dimension::{box_counting_dimension, dyadic_scales, BoxCount};
pub use path::{
    broken_line_path, first_singular_point, survey_broken_lines, BrokenLine, PathOptions,
    PathSurvey,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error(transparent)]
    Semiconcave(#[from] SemiconcaveError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("degenerate scales: {0}")]
    DegenerateScales(String),
    #[error("empty point set")]
    EmptyPointSet,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("the broken-line construction needs d ≥ 2, got d = {0}")]
    DimensionTooLow(usize),
    #[error("endpoint {point:?} lies in the stratum of dimension {stratum} ≥ 2")]
    EndpointsSingular { point: Vec<f64>, stratum: usize },
    #[error(
        "no broken line avoided the singular set at resolution {tol} after {samples} samples \
         (failure density {failure_density})"
    )]
    NoPathFoundAtResolution {
        samples: usize,
        tol: f64,
        failure_density: f64,
    },
}

/// Per-node stratum labels `k = dim D⁺φ(x)`.
///
/// `labels` is the value at the node itself. `interface` holds, for nodes
/// closest to a change of minimizing piece along a grid edge, the stratum of
/// the refined crossing point on that edge.
#[derive(Clone, Debug, PartialEq)]
pub struct StrataGrid<S> {
    pub grid: Grid<S>,
    pub labels: Vec<u8>,
    pub interface: Vec<Option<u8>>,
}

impl<S: Scalar> StrataGrid<S> {
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Node label combined with its interface label.
    pub fn refined(&self, node: usize) -> u8 {
        self.labels[node].max(self.interface[node].unwrap_or(0))
    }

    /// `Σ^{≥k}` on refined labels.
    pub fn mask_at_least(&self, k: usize) -> Vec<bool> {
        (0..self.len())
            .map(|i| self.refined(i) as usize >= k)
            .collect()
    }

    /// `Σ^{≤k}` on refined labels.
    pub fn mask_at_most(&self, k: usize) -> Vec<bool> {
        (0..self.len())
            .map(|i| self.refined(i) as usize <= k)
            .collect()
    }

    /// `Σᵏ` on refined labels.
    pub fn mask_exactly(&self, k: usize) -> Vec<bool> {
        (0..self.len())
            .map(|i| self.refined(i) as usize == k)
            .collect()
    }

    /// Node count per refined label `0..=d`.
    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.dim() + 1];
        for i in 0..self.len() {
            h[self.refined(i) as usize] += 1;
        }
        h
    }

    /// Coordinates of the nodes in `Σ^{≥k}`.
    pub fn points_at_least(&self, k: usize) -> Vec<Point<S>> {
        (0..self.len())
            .filter(|&i| self.refined(i) as usize >= k)
            .map(|i| self.grid.point(i))
            .collect()
    }

    /// Header `x0,…,label,interface`; `interface` is empty when unset.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = self.dim();
        let mut header: Vec<String> = (0..d).map(|k| format!("x{k}")).collect();
        header.push("label".into());
        header.push("interface".into());
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.grid.point(i).into_iter().map(format_sig17).collect();
            row.push(self.labels[i].to_string());
            row.push(self.interface[i].map(|v| v.to_string()).unwrap_or_default());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn strides(counts: &[usize]) -> Vec<usize> {
    let mut s = vec![1; counts.len()];
    for k in (0..counts.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * counts[k + 1];
    }
    s
}

/// Forward neighbour of `node` along `axis`, if inside.
fn forward(counts: &[usize], strides: &[usize], node: usize, axis: usize) -> Option<usize> {
    let i = (node / strides[axis]) % counts[axis];
    (i + 1 < counts[axis]).then(|| node + strides[axis])
}

fn backward(counts: &[usize], strides: &[usize], node: usize, axis: usize) -> Option<usize> {
    let i = (node / strides[axis]) % counts[axis];
    (i > 0).then(|| node - strides[axis])
}

const BISECTION_STEPS: usize = 60;

/// Labels every node by `stratum_dimension` with tie tolerance `tol`, then
/// refines each grid edge whose endpoints have different minimizing pieces:
/// the crossing is located by bisection and its stratum is attached to the
/// nearer endpoint.
pub fn classify_grid<S: Scalar>(
    phi: &MarginalFunction<S>,
    grid: &Grid<S>,
    tol: S,
) -> Result<StrataGrid<S>, TopologyError> {
    if grid.dim() != phi.dim() {
        return Err(TopologyError::InvalidParameter(format!(
            "grid has dimension {} but φ has dimension {}",
            grid.dim(),
            phi.dim()
        )));
    }
    if !(tol > S::zero()) {
        return Err(TopologyError::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    phi.evaluate(grid.lower())?;
    phi.evaluate(&grid.upper())?;

    let nodes: Vec<(u8, usize)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.point(i);
            let (arg, count) = phi.active_count(&x, tol);
            let label = if count == 1 {
                0
            } else {
                phi.stratum_dimension(&x, tol)?
            };
            Ok((label as u8, arg))
        })
        .collect::<Result<_, SemiconcaveError>>()?;

    let counts = grid.counts().to_vec();
    let st = strides(&counts);
    let d = grid.dim();
    let hits: Vec<(usize, u8)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            for axis in 0..d {
                let Some(j) = forward(&counts, &st, i, axis) else {
                    continue;
                };
                if nodes[i].1 == nodes[j].1 {
                    continue;
                }
                let (s, label) = refine_edge(phi, &grid.point(i), &grid.point(j), nodes[i].1, tol)?;
                out.push((if s <= lit(0.5) { i } else { j }, label));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>, SemiconcaveError>>()?
        .into_iter()
        .flatten()
        .collect();

    let mut interface = vec![None; grid.len()];
    for (node, label) in hits {
        let slot: &mut Option<u8> = &mut interface[node];
        *slot = Some(slot.map_or(label, |v| v.max(label)));
    }
    Ok(StrataGrid {
        grid: grid.clone(),
        labels: nodes.into_iter().map(|(l, _)| l).collect(),
        interface,
    })
}

/// Bisects `[a, b]` for the first change of minimizing piece away from
/// `piece`; returns the crossing parameter and its stratum.
fn refine_edge<S: Scalar>(
    phi: &MarginalFunction<S>,
    a: &[S],
    b: &[S],
    piece: usize,
    tol: S,
) -> Result<(S, u8), SemiconcaveError> {
    let at = |s: S| -> Point<S> { a.iter().zip(b).map(|(&u, &v)| u + s * (v - u)).collect() };
    let (mut lo, mut hi) = (S::zero(), S::one());
    for _ in 0..BISECTION_STEPS {
        let mid = (lo + hi) * lit(0.5);
        if phi.argmin(&at(mid)).0 == piece {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = (lo + hi) * lit(0.5);
    let label = phi.stratum_dimension(&at(s), tol)?;
    Ok((s, label as u8))
}

/// Connected components of a strata mask.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ComponentReport {
    /// Mask is `Σ^{≤k}`.
    pub k: usize,
    pub nodes_in_mask: usize,
    pub components: usize,
    /// Largest first.
    pub sizes: Vec<usize>,
}

/// Components of `Σ^{≤k}` under face adjacency.
pub fn connectivity_report<S: Scalar>(
    strata: &StrataGrid<S>,
    k: usize,
) -> Result<ComponentReport, TopologyError> {
    if k > strata.dim() {
        return Err(TopologyError::InvalidParameter(format!(
            "k = {k} exceeds the dimension {}",
            strata.dim()
        )));
    }
    let mask = strata.mask_at_most(k);
    let sizes = component_sizes(&strata.grid, &mask);
    Ok(ComponentReport {
        k,
        nodes_in_mask: mask.iter().filter(|&&m| m).count(),
        components: sizes.len(),
        sizes,
    })
}

/// Sizes of the face-connected components of `mask`, largest first.
pub fn component_sizes<S: Scalar>(grid: &Grid<S>, mask: &[bool]) -> Vec<usize> {
    let counts = grid.counts();
    let st = strides(counts);
    let mut seen = vec![false; mask.len()];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut size = 0;
        while let Some(n) = stack.pop() {
            size += 1;
            for axis in 0..counts.len() {
                for next in [
                    forward(counts, &st, n, axis),
                    backward(counts, &st, n, axis),
                ]
                .into_iter()
                .flatten()
                {
                    if mask[next] && !seen[next] {
                        seen[next] = true;
                        stack.push(next);
                    }
                }
            }
        }
        sizes.push(size);
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semiconcave::{neg_norm, paraboloid};
    use crate::tonelli::DomainSpec;

    #[test]
    fn strides_match_grid_layout() {
        let g = Grid::new(vec![0.0, 0.0, 0.0], 1.0, vec![3, 4, 5]).unwrap();
        let st = strides(g.counts());
        for i in 0..g.len() {
            for axis in 0..3 {
                assert_eq!(forward(g.counts(), &st, i, axis), g.neighbor(i, axis, 1));
                assert_eq!(backward(g.counts(), &st, i, axis), g.neighbor(i, axis, -1));
            }
        }
    }

    #[test]
    fn face_adjacency_does_not_join_diagonals() {
        let g = Grid::new(vec![0.0, 0.0], 1.0, vec![2, 2]).unwrap();
        assert_eq!(component_sizes(&g, &[true, false, false, true]), vec![1, 1]);
        assert_eq!(component_sizes(&g, &[true, true, false, true]), vec![3]);
    }

    #[test]
    fn smooth_function_has_no_singular_nodes() {
        let dom = DomainSpec::symmetric_box(2, 1.0).unwrap();
        let phi = paraboloid(dom, -1.0).unwrap();
        let g = Grid::covering(&[-1.0, -1.0], &[1.0, 1.0], 0.1).unwrap();
        let s = classify_grid(&phi, &g, 1e-9).unwrap();
        assert!(s.labels.iter().all(|&l| l == 0));
        assert!(s.interface.iter().all(Option::is_none));
    }

    #[test]
    fn cone_tip_is_the_only_node_of_top_stratum() {
        let dom = DomainSpec::symmetric_box(2, 1.0).unwrap();
        let phi = neg_norm(dom, 64).unwrap();
        let g = Grid::covering(&[-1.0, -1.0], &[1.0, 1.0], 0.05).unwrap();
        let s = classify_grid(&phi, &g, 1e-9).unwrap();
        let tips: Vec<usize> = (0..g.len()).filter(|&i| s.labels[i] == 2).collect();
        assert_eq!(tips.len(), 1);
        assert!(g.point(tips[0]).iter().all(|v: &f64| v.abs() < 1e-12));
        assert_eq!(s.labels.iter().filter(|&&l| l != 0).count(), 1);
    }
}
