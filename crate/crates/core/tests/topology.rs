use std::collections::HashSet;

use proptest::prelude::*;
use sconclab::grid::Grid;
use sconclab::linalg::{dist, dot};
use sconclab::semiconcave::{min_parabolas, neg_norm, paraboloid, phi1, phi2, two_cones};
use sconclab::tonelli::DomainSpec;
use sconclab::topology::{
    box_counting_dimension, broken_line_path, classify_grid, component_sizes, connectivity_report,
    dyadic_scales, first_singular_point, survey_broken_lines, BrokenLine, PathOptions,
    TopologyError,
};
use sconclab::MarginalFunction64;

const TIE: f64 = 1e-9;

fn plane_box(lo: [f64; 2], hi: [f64; 2]) -> DomainSpec<f64> {
    DomainSpec::new_box(lo.to_vec(), hi.to_vec()).unwrap()
}

fn cone() -> MarginalFunction64 {
    neg_norm(DomainSpec::symmetric_box(2, 2.0).unwrap(), 64).unwrap()
}

/// Abscissae where two pieces of φ₂ tie: 0, −2^{1−n} for n ≤ N, and −2^{−N}.
fn phi2_lines(n_max: i32) -> Vec<f64> {
    let mut v = vec![0.0, -0.5f64.powi(n_max)];
    v.extend((1..=n_max).map(|n| -0.5f64.powi(n - 1)));
    v
}

#[test]
fn phi2_labels_vertical_lines() {
    let phi = phi2(plane_box([-2.0, -1.0], [1.0, 1.0]), 10).unwrap();
    let h = 0.5f64.powi(10);
    let grid = Grid::new(vec![-2.0, -h * 8.0], h, vec![3 * 1024 + 1, 17]).unwrap();
    let s = classify_grid(&phi, &grid, TIE).unwrap();
    let lines = phi2_lines(10);
    for i in 0..grid.len() {
        let x = grid.point(i);
        let on_line = lines.iter().any(|&c| (x[0] - c).abs() < h * 1e-6);
        assert_eq!(s.labels[i] == 1, on_line, "node {x:?}");
        assert!(s.labels[i] <= 1);
    }
    for n in 1..=8 {
        let c = -0.5f64.powi(n - 1);
        let i = grid.flat_index(&[((c + 2.0) / h).round() as usize, 8]);
        assert_eq!(s.labels[i], 1);
    }
}

#[test]
fn interface_refinement_finds_off_grid_crossings() {
    // Lines at −1/2ⁿ fall between nodes of a 0.01 lattice once n ≥ 3.
    let phi = phi1(plane_box([-1.5, -1.5], [0.5, 0.5]), 10).unwrap();
    let grid = Grid::new(vec![-1.5, -0.05], 0.01, vec![201, 11]).unwrap();
    let s = classify_grid(&phi, &grid, TIE).unwrap();
    for n in 3..=6 {
        let c = -0.5f64.powi(n);
        let left = ((c + 1.5) / 0.01).floor() as usize;
        let near: Vec<usize> = [left, left + 1]
            .iter()
            .map(|&col| grid.flat_index(&[col, 5]))
            .collect();
        assert!(near.iter().all(|&i| s.labels[i] == 0));
        assert!(near.iter().any(|&i| s.interface[i] == Some(1)), "line {c}");
        assert!(near.iter().any(|&i| s.refined(i) == 1));
    }
    let k0 = s.mask_at_least(0);
    let k1 = s.mask_at_least(1);
    let k2 = s.mask_at_least(2);
    assert!(k0.iter().all(|&m| m));
    for i in 0..grid.len() {
        assert!(!k1[i] || k0[i]);
        assert!(!k2[i] || k1[i]);
    }
}

#[test]
fn smooth_function_has_only_the_regular_stratum() {
    let phi = paraboloid(DomainSpec::symmetric_box(2, 1.0).unwrap(), -2.0).unwrap();
    let grid = Grid::covering(&[-1.0, -1.0], &[1.0, 1.0], 0.05).unwrap();
    let s = classify_grid(&phi, &grid, TIE).unwrap();
    assert_eq!(s.histogram(), vec![grid.len(), 0, 0]);
}

#[test]
fn classify_rejects_grid_outside_the_domain() {
    let phi = paraboloid(DomainSpec::symmetric_box(2, 1.0).unwrap(), -2.0).unwrap();
    let grid = Grid::covering(&[-1.0, -1.0], &[1.5, 1.0], 0.05).unwrap();
    assert!(matches!(
        classify_grid(&phi, &grid, TIE),
        Err(TopologyError::Semiconcave(_))
    ));
}

#[test]
fn strata_csv_has_one_row_per_node() {
    let grid = Grid::covering(&[-1.0, -1.0], &[1.0, 1.0], 0.5).unwrap();
    let s = classify_grid(&cone(), &grid, TIE).unwrap();
    let mut buf = Vec::new();
    s.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x0,x1,label,interface");
    assert_eq!(lines.len(), grid.len() + 1);
    let centre = lines
        .iter()
        .find(|l| l.split(',').nth(2) == Some("2"))
        .unwrap();
    assert!(centre.starts_with("0.0000000000000000e0,0.0000000000000000e0"));
}

#[test]
fn segment_has_box_dimension_one() {
    let pts: Vec<Vec<f64>> = (0..10_000)
        .map(|i| {
            let s = i as f64 / 9_999.0;
            vec![0.2 + 0.6 * s, 0.1 + 0.8 * s]
        })
        .collect();
    let r = box_counting_dimension(&pts, &dyadic_scales::<f64>(2, 8)).unwrap();
    assert!((r.estimate - 1.0).abs() < 0.1, "{r:?}");
}

/// Box counts of the union of vertical lines at `xs` spanning `height`, on
/// the lattice anchored at the lower-left end of the leftmost line.
fn analytic_line_counts(xs: &[f64], height: f64, scales: &[f64]) -> Vec<usize> {
    let x0 = xs.iter().copied().fold(f64::INFINITY, f64::min);
    scales
        .iter()
        .map(|&e| {
            let cols: HashSet<i64> = xs.iter().map(|&c| ((c - x0) / e).floor() as i64).collect();
            let rows = (height / e).floor() as usize + 1;
            cols.len() * rows
        })
        .collect()
}

fn ls_slope(scales: &[f64], counts: &[usize]) -> f64 {
    let xs: Vec<f64> = scales.iter().map(|e| -e.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn singular_set_of_phi2_has_dimension_near_one() {
    let phi = phi2(plane_box([-2.0, -1.0], [1.0, 1.0]), 10).unwrap();
    let h = 0.5f64.powi(9);
    let grid = Grid::covering(&[-2.0, -1.0], &[1.0, 1.0], h).unwrap();
    let s = classify_grid(&phi, &grid, TIE).unwrap();
    let scales = dyadic_scales::<f64>(3, 7);
    let r = box_counting_dimension(&s.points_at_least(1), &scales).unwrap();
    let oracle = ls_slope(
        &scales,
        &analytic_line_counts(&phi2_lines(10), 2.0, &scales),
    );
    assert!((oracle - 1.191419).abs() < 1e-6, "oracle {oracle}");
    assert_eq!(
        r.counts,
        analytic_line_counts(&phi2_lines(10), 2.0, &scales)
    );
    assert!((r.estimate - 1.0).abs() <= 0.25, "{r:?}");
}

#[test]
fn strata_dimension_respects_codimension_bound() {
    let dom = DomainSpec::symmetric_box(2, 1.5).unwrap();
    let fns = vec![
        phi1(dom.clone(), 8).unwrap(),
        phi2(dom.clone(), 8).unwrap(),
        neg_norm(dom.clone(), 64).unwrap(),
        two_cones(dom.clone(), &[-0.5, 0.0], &[0.5, 0.25], (0.0, 0.1), 64).unwrap(),
        min_parabolas(dom).unwrap(),
    ];
    let h = 0.5f64.powi(9);
    let grid = Grid::covering(&[-1.5, -1.5], &[1.5, 1.5], h).unwrap();
    let scales = dyadic_scales::<f64>(4, 8);
    // Accumulating lines bias the slope upward on any finite window.
    let phi1_lines: Vec<f64> = (0..=8).map(|n| -0.5f64.powi(n)).collect();
    let oracle = ls_slope(&scales, &analytic_line_counts(&phi1_lines, 3.0, &scales));
    assert!((oracle - 1.204409).abs() < 1e-6, "oracle {oracle}");
    for phi in &fns {
        let s = classify_grid(phi, &grid, TIE).unwrap();
        for k in 1..=2 {
            let pts = s.points_at_least(k);
            if pts.is_empty() {
                continue;
            }
            let r = box_counting_dimension(&pts, &scales).unwrap();
            assert!(
                r.estimate <= (2 - k) as f64 + 0.25,
                "{} k={k}: {}",
                phi.name(),
                r.estimate
            );
        }
    }
}

#[test]
fn cone_path_avoids_the_tip() {
    let phi = cone();
    let opts = PathOptions {
        radius: Some(0.5),
        ..PathOptions::default()
    };
    let line = broken_line_path(&phi, &[-1.0, 0.0], &[1.0, 0.0], &opts).unwrap();
    assert_eq!(line.z[0], 0.0);
    assert!(line.z[1] != 0.0 && line.z[1].abs() <= 0.5);
    let chord = BrokenLine::new(vec![-1.0, 0.0], vec![0.0, 0.0], vec![1.0, 0.0]);
    let hit = first_singular_point(&phi, &chord, opts.tol, opts.tol / 2.0).unwrap();
    assert!(dist(&hit.unwrap(), &[0.0, 0.0]) < 0.05);
    let bent = BrokenLine::new(vec![-1.0, 0.0], vec![0.0, 0.3], vec![1.0, 0.0]);
    assert!(first_singular_point(&phi, &bent, opts.tol, opts.tol / 2.0)
        .unwrap()
        .is_none());
}

#[test]
fn smooth_function_accepts_the_first_waypoint() {
    let phi = paraboloid(DomainSpec::symmetric_box(2, 2.0).unwrap(), -1.0).unwrap();
    let line = broken_line_path(&phi, &[-1.0, 0.5], &[1.0, -0.5], &PathOptions::default()).unwrap();
    assert_eq!(line.samples_checked, 1);
}

#[test]
fn path_needs_two_dimensions() {
    let phi = neg_norm(DomainSpec::symmetric_box(1, 2.0).unwrap(), 2).unwrap();
    assert_eq!(
        broken_line_path(&phi, &[-1.0], &[1.0], &PathOptions::default()),
        Err(TopologyError::DimensionTooLow(1))
    );
}

#[test]
fn singular_endpoint_is_rejected() {
    let r = broken_line_path(&cone(), &[0.0, 0.0], &[1.0, 0.0], &PathOptions::default());
    assert!(matches!(
        r,
        Err(TopologyError::EndpointsSingular { stratum: 2, .. })
    ));
}

#[test]
fn tiny_disk_reports_resolution_failure() {
    let opts = PathOptions {
        radius: Some(1e-4),
        n_samples: 5,
        ..PathOptions::default()
    };
    match broken_line_path(&cone(), &[-1.0, 0.0], &[1.0, 0.0], &opts) {
        Err(TopologyError::NoPathFoundAtResolution {
            samples,
            failure_density,
            ..
        }) => {
            assert_eq!(samples, 5);
            assert_eq!(failure_density, 1.0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn seed_sweep_always_finds_a_path() {
    let phi = cone();
    for seed in 0..100 {
        let opts = PathOptions {
            seed,
            ..PathOptions::default()
        };
        let line = broken_line_path(&phi, &[-1.0, 0.0], &[1.0, 0.0], &opts).unwrap();
        assert!(line.samples_checked <= 10);
        if seed % 10 == 0 {
            let fine = first_singular_point(&phi, &line, opts.tol, opts.tol / 20.0).unwrap();
            assert!(fine.is_none(), "seed {seed}");
        }
    }
    let survey = survey_broken_lines(
        &phi,
        &[-1.0, 0.0],
        &[1.0, 0.0],
        &PathOptions {
            n_samples: 50,
            ..PathOptions::default()
        },
    )
    .unwrap();
    assert!(survey.failure_density < 0.1, "{survey:?}");
}

#[test]
fn punctured_plane_is_connected() {
    let grid = Grid::covering(&[-1.0, -1.0], &[1.0, 1.0], 0.05).unwrap();
    let s = classify_grid(&cone(), &grid, TIE).unwrap();
    let r = connectivity_report(&s, 1).unwrap();
    assert_eq!(r.components, 1);
    assert_eq!(r.nodes_in_mask, grid.len() - 1);
    assert_eq!(connectivity_report(&s, 2).unwrap().sizes, vec![grid.len()]);
}

#[test]
fn regular_set_of_phi1_splits_into_slabs() {
    let phi = phi1(plane_box([-1.5, -1.5], [0.5, 0.5]), 10).unwrap();
    let grid = Grid::covering(&[-1.5, -1.5], &[0.5, 0.5], 0.01).unwrap();
    let s = classify_grid(&phi, &grid, TIE).unwrap();
    let r0 = connectivity_report(&s, 0).unwrap();
    assert!(r0.components >= 5, "{r0:?}");
    assert_eq!(connectivity_report(&s, 1).unwrap().components, 1);
}

#[test]
fn connectivity_rejects_k_above_dimension() {
    let grid = Grid::covering(&[-1.0, -1.0], &[1.0, 1.0], 0.5).unwrap();
    let s = classify_grid(&cone(), &grid, TIE).unwrap();
    assert!(connectivity_report(&s, 3).is_err());
}

#[test]
fn lower_strata_stay_connected_on_builtins() {
    let dom = DomainSpec::symmetric_box(2, 1.5).unwrap();
    let fns = vec![
        phi2(dom.clone(), 8).unwrap(),
        neg_norm(dom.clone(), 64).unwrap(),
        two_cones(dom.clone(), &[-0.5, 0.0], &[0.5, 0.25], (0.0, 0.1), 64).unwrap(),
        min_parabolas(dom).unwrap(),
    ];
    for h in [0.05, 0.02] {
        let grid = Grid::covering(&[-1.5, -1.5], &[1.5, 1.5], h).unwrap();
        for phi in &fns {
            let s = classify_grid(phi, &grid, TIE).unwrap();
            let r = connectivity_report(&s, 1).unwrap();
            assert_eq!(r.components, 1, "{} at h={h}", phi.name());
        }
    }
}

#[test]
fn single_precision_classification() {
    let phi = neg_norm(DomainSpec::<f32>::symmetric_box(2, 1.0).unwrap(), 16).unwrap();
    let grid = Grid::covering(&[-1.0f32, -1.0], &[1.0, 1.0], 0.25).unwrap();
    let s = classify_grid(&phi, &grid, 1e-5).unwrap();
    assert_eq!(s.histogram()[2], 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn waypoint_lies_on_the_bisector(
        ax in -1.5f64..1.5, ay in -1.5f64..1.5,
        bx in -1.5f64..1.5, by in -1.5f64..1.5,
        seed in 0u64..1000,
    ) {
        prop_assume!((ax - bx).hypot(ay - by) > 0.1);
        let phi = paraboloid(DomainSpec::symmetric_box(2, 2.0).unwrap(), 1.0).unwrap();
        let opts = PathOptions { seed, n_samples: 1, tol: 1e-2, ..PathOptions::default() };
        let line = broken_line_path(&phi, &[ax, ay], &[bx, by], &opts).unwrap();
        let m = [(ax + bx) / 2.0, (ay + by) / 2.0];
        let off = [line.z[0] - m[0], line.z[1] - m[1]];
        prop_assert!(dot(&off, &[bx - ax, by - ay]).abs() < 1e-12);
        prop_assert!(dist(&line.z, &m) <= (ax - bx).hypot(ay - by) / 4.0 + 1e-12);
    }

    #[test]
    fn masks_are_nested_and_components_cover_the_mask(
        ax in -1.0f64..1.0, ay in -1.0f64..1.0,
        h in 0.04f64..0.15,
    ) {
        let dom = DomainSpec::symmetric_box(2, 1.5).unwrap();
        let phi = two_cones(dom, &[ax, ay], &[-ay, ax], (0.0, 0.2), 32).unwrap();
        let grid = Grid::covering(&[-1.2, -1.2], &[1.2, 1.2], h).unwrap();
        let s = classify_grid(&phi, &grid, TIE).unwrap();
        for k in 0..2 {
            let hi = s.mask_at_least(k + 1);
            let lo = s.mask_at_least(k);
            prop_assert!(hi.iter().zip(&lo).all(|(&a, &b)| !a || b));
        }
        for k in 0..=2 {
            let mask = s.mask_at_most(k);
            let total: usize = component_sizes(&grid, &mask).iter().sum();
            prop_assert_eq!(total, mask.iter().filter(|&&m| m).count());
        }
    }
}
