use serde_json::json;

use sconclab::grid::Grid;
use sconclab::linalg::dot;
use sconclab::semiconcave::MarginalFunction;
use sconclab::topology::{
    box_counting_dimension, broken_line_path, classify_grid, connectivity_report, dyadic_scales,
    first_singular_point, PathOptions, StrataGrid, TopologyError,
};

use super::{axis_names, compute, csv, json, Artifact, Check, Ctx, Outcome};
use crate::config::ComponentCheck;
use crate::CliError;

fn classify(
    ctx: &Ctx,
    phi: &MarginalFunction<f64>,
    grid: &Grid<f64>,
) -> Result<StrataGrid<f64>, CliError> {
    let tol = ctx.positive(ctx.c().classify_tol.unwrap_or(1e-9), "classify_tol")?;
    classify_grid(phi, grid, tol).map_err(compute)
}

fn component_checks(
    ctx: &Ctx,
    strata: &StrataGrid<f64>,
    wanted: &[ComponentCheck],
) -> Result<(serde_json::Value, Vec<Check>), CliError> {
    let mut reports = Vec::new();
    let mut checks = Vec::new();
    for w in wanted {
        if w.k > strata.dim() {
            return Err(ctx.field(
                "components.k",
                "k =",
                format!("k = {} exceeds the dimension", w.k),
            ));
        }
        let r = connectivity_report(strata, w.k).map_err(compute)?;
        let n = r.components as f64;
        let name = format!("components_le_{}", w.k);
        match (w.min, w.max) {
            (Some(lo), Some(hi)) => checks.push(Check::within(&name, n, lo as f64, hi as f64)),
            (Some(lo), None) => checks.push(Check::at_least(&name, n, lo as f64)),
            (None, Some(hi)) => checks.push(Check::at_most(&name, n, hi as f64)),
            (None, None) => {}
        }
        reports.push(r);
    }
    Ok((json(&reports), checks))
}

fn strata_summary(strata: &StrataGrid<f64>) -> serde_json::Value {
    let interface = strata.interface.iter().filter(|l| l.is_some()).count();
    json!({
        "grid": {
            "lower": strata.grid.lower(),
            "spacing": strata.grid.spacing(),
            "counts": strata.grid.counts(),
        },
        "histogram": strata.histogram(),
        "interface_nodes": interface,
    })
}

pub(super) fn strata(ctx: &Ctx) -> Result<Outcome, CliError> {
    let c = ctx.c();
    let d = ctx.dim(2)?;
    let region = ctx.region(d, [-1.0, 1.0])?;
    let domain = ctx.domain(d, &region)?;
    let phi = ctx.function(&domain)?;
    let grid = ctx.grid(&region, 0.01)?;
    let strata = classify(ctx, &phi, &grid)?;
    let wanted = c.components.clone().unwrap_or_else(|| {
        (0..=d)
            .map(|k| ComponentCheck {
                k,
                min: None,
                max: None,
            })
            .collect()
    });
    let (components, checks) = component_checks(ctx, &strata, &wanted)?;
    let mut results = strata_summary(&strata);
    results["components"] = components;
    let mut artifacts = Vec::new();
    if c.write_csv.unwrap_or(true) {
        let mut bytes = Vec::new();
        strata
            .write_csv(&mut bytes)
            .map_err(|e| CliError::Io(e.to_string()))?;
        artifacts.push(Artifact {
            file: "strata.csv".into(),
            bytes,
        });
    }
    Ok(Outcome {
        results,
        checks,
        artifacts,
    })
}

pub(super) fn path(ctx: &Ctx) -> Result<Outcome, CliError> {
    let c = ctx.c();
    let d = ctx.dim(2)?;
    let coords = |p: &Option<crate::config::PointSpec>, name: &str| -> Result<Vec<f64>, CliError> {
        let v = ctx
            .require(p, name)?
            .coords()
            .map_err(|m| ctx.field(name, name, m))?;
        if v.len() != d {
            return Err(ctx.field(
                name,
                name,
                format!("has {} coordinates, expected {d}", v.len()),
            ));
        }
        Ok(v)
    };
    let a = coords(&c.a, "a")?;
    let b = coords(&c.b, "b")?;
    let reach: Vec<[f64; 2]> = (0..d).map(|i| [a[i].min(b[i]), a[i].max(b[i])]).collect();
    let region = match &c.region {
        Some(_) => ctx.region(d, [-1.0, 1.0])?,
        None => reach,
    };
    let domain = ctx.domain(d, &region)?;
    let phi = ctx.function(&domain)?;
    let tol = ctx.positive(c.tol.unwrap_or(1e-4), "tol")?;
    let seeds = c.seeds.unwrap_or(1).max(1);
    let factor = c.recheck_factor.unwrap_or(10);
    let recheck_seeds = c.recheck_seeds.unwrap_or(seeds);
    let base = PathOptions {
        radius: c.radius,
        n_samples: c.samples.unwrap_or(10),
        seed: ctx.seed(),
        tol,
    };
    let ab: Vec<f64> = a.iter().zip(&b).map(|(p, q)| q - p).collect();
    let mid: Vec<f64> = a.iter().zip(&b).map(|(p, q)| 0.5 * (p + q)).collect();
    let mut first = None;
    let mut rows = Vec::with_capacity(seeds);
    let (mut found, mut most_samples, mut recheck_failures, mut rechecked) =
        (0usize, 0usize, 0usize, 0usize);
    let mut worst_bisector = 0.0f64;
    for s in 0..seeds {
        let opts = PathOptions {
            seed: base.seed + s as u64,
            ..base.clone()
        };
        match broken_line_path(&phi, &a, &b, &opts) {
            Ok(line) => {
                found += 1;
                most_samples = most_samples.max(line.samples_checked);
                let zm: Vec<f64> = line.z.iter().zip(&mid).map(|(z, m)| z - m).collect();
                worst_bisector = worst_bisector.max(dot(&zm, &ab).abs());
                let mut clean = 1.0;
                if factor > 0 && s < recheck_seeds {
                    rechecked += 1;
                    let fine = 0.5 * tol / factor as f64;
                    if first_singular_point(&phi, &line, tol, fine)
                        .map_err(compute)?
                        .is_some()
                    {
                        recheck_failures += 1;
                        clean = 0.0;
                    }
                }
                let mut row = vec![opts.seed as f64, 1.0, line.samples_checked as f64, clean];
                row.extend(&line.z);
                rows.push(row);
                if first.is_none() {
                    first = Some(line);
                }
            }
            Err(TopologyError::NoPathFoundAtResolution { samples, .. }) => {
                let mut row = vec![opts.seed as f64, 0.0, samples as f64, 0.0];
                row.extend(std::iter::repeat_n(f64::NAN, d));
                rows.push(row);
            }
            Err(e) => return Err(compute(e)),
        }
    }
    let mut checks = vec![
        Check::at_least("success_rate", found as f64 / seeds as f64, 1.0),
        Check::at_most("recheck_failures", recheck_failures as f64, 0.0),
    ];
    if found > 0 {
        checks.push(Check::at_most("bisector_residual", worst_bisector, 1e-12));
    }
    let mut results = json!({
        "path": first.as_ref().map(json),
        "seeds": seeds,
        "found": found,
        "max_samples_checked": most_samples,
        "rechecked": rechecked,
        "recheck_factor": factor,
        "recheck_failures": recheck_failures,
        "bisector_residual": worst_bisector,
        "tol": tol,
    });
    let mut header = vec![
        "seed".to_string(),
        "found".into(),
        "samples_checked".into(),
        "recheck_clean".into(),
    ];
    header.extend(axis_names("z", d));
    let mut artifacts = vec![Artifact {
        file: "sweep.csv".into(),
        bytes: csv(&header, rows),
    }];
    if let Some(line) = &first {
        let mut bytes = serde_json::to_vec_pretty(&json(line)).expect("path serializes");
        bytes.push(b'\n');
        artifacts.push(Artifact {
            file: "path.json".into(),
            bytes,
        });
    }
    if let Some(wanted) = &c.components {
        let grid_region = ctx.region(d, [-1.0, 1.0])?;
        let grid = ctx.grid(&grid_region, 0.01)?;
        let strata = classify(ctx, &phi, &grid)?;
        let (components, more) = component_checks(ctx, &strata, wanted)?;
        let mut summary = strata_summary(&strata);
        summary["components"] = components;
        results["strata"] = summary;
        checks.extend(more);
    }
    Ok(Outcome {
        results,
        checks,
        artifacts,
    })
}

pub(super) fn dim(ctx: &Ctx) -> Result<Outcome, CliError> {
    let c = ctx.c();
    let d = ctx.dim(2)?;
    let region = ctx.region(d, [-1.0, 1.0])?;
    let domain = ctx.domain(d, &region)?;
    let phi = ctx.function(&domain)?;
    let grid = ctx.grid(&region, 1.0 / 512.0)?;
    let k = c.k.unwrap_or(1);
    if k == 0 || k > d {
        return Err(ctx.field("k", "k =", format!("must lie in [1, {d}]")));
    }
    let [from, to] = c.scales.unwrap_or([4, 9]);
    if from >= to {
        return Err(ctx.field("scales", "scales", "need from < to"));
    }
    let strata = classify(ctx, &phi, &grid)?;
    let points = strata.points_at_least(k);
    let bc = box_counting_dimension(&points, &dyadic_scales::<f64>(from, to)).map_err(compute)?;
    let codim = (d - k) as f64;
    let expect = c.expect.unwrap_or(codim);
    let tol = c.tol.unwrap_or(0.2);
    let slack = c.bound_slack.unwrap_or(0.25);
    let mut checks = vec![
        Check::within("dimension", bc.estimate, expect - tol, expect + tol),
        Check::at_most("codimension_bound", bc.estimate, codim + slack),
    ];
    let mut lines = Vec::new();
    if let Some(abscissae) = &c.label_lines {
        let axis = c.label_axis.unwrap_or(0);
        if axis >= d {
            return Err(ctx.field("label_axis", "label_axis", format!("must be below {d}")));
        }
        let want = c.label_value.unwrap_or(1);
        let (lo, h, n) = (grid.lower()[axis], grid.spacing(), grid.counts()[axis]);
        let mut unit = vec![0; d];
        unit[axis] = 1;
        let stride = grid.flat_index(&unit);
        for &v in abscissae {
            let col = ((v - lo) / h).round();
            if col < 0.0 || col >= n as f64 {
                return Err(ctx.field(
                    "label_lines",
                    "label_lines",
                    format!("{v} lies outside the box"),
                ));
            }
            let col = col as usize;
            let (mut min, mut max, mut nodes) = (u8::MAX, 0u8, 0usize);
            for i in 0..grid.len() {
                if (i / stride) % n == col {
                    let l = strata.refined(i);
                    min = min.min(l);
                    max = max.max(l);
                    nodes += 1;
                }
            }
            let ok = min == want && max == want;
            let offset = grid.coord(axis, col) - v;
            checks.push(Check::holds(&format!("label_at_{v}"), ok));
            lines.push(json!({
                "abscissa": v,
                "node_offset": offset,
                "nodes": nodes,
                "min_label": min,
                "max_label": max,
            }));
        }
    }
    let mut results = strata_summary(&strata);
    results["k"] = json!(k);
    results["sampled_points"] = json!(points.len());
    results["box_count"] = json(&bc);
    results["label_lines"] = json!(lines);
    let rows = bc
        .scales
        .iter()
        .zip(&bc.counts)
        .map(|(&e, &n)| vec![e, n as f64]);
    Ok(Outcome {
        results,
        checks,
        artifacts: vec![Artifact {
            file: "boxcount.csv".into(),
            bytes: csv(&["scale".into(), "count".into()], rows),
        }],
    })
}
