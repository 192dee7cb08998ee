use serde_json::json;

use sconclab::evolution::{
    c11_certificate, estimate_critical_time, evolve_grid, positive_basins,
    verify_inf_representation, CriticalTimeOptions, ScanOptions,
};
use sconclab::semiconcave::FiberDensity;

use super::{axis_names, compute, csv, json, Artifact, Check, Ctx, Outcome};
use crate::CliError;

pub(super) fn critical_time(ctx: &Ctx) -> Result<Outcome, CliError> {
    let c = ctx.c();
    let d = ctx.dim(1)?;
    let region = ctx.region(d, [-2.0, 2.0])?;
    let domain = ctx.domain(d, &region)?;
    let phi = ctx.function(&domain)?;
    let system = ctx.system(&domain)?;
    let grid = ctx.grid(&region, 0.02)?;
    let scan = ScanOptions {
        spacing: ctx.positive(c.scan_spacing.unwrap_or(0.01), "scan_spacing")?,
        radius: c.scan_radius,
        seed: ctx.seed(),
        ..ScanOptions::default()
    };
    let opts = CriticalTimeOptions {
        cap: ctx.positive(c.cap.unwrap_or(100.0), "cap")?,
        bisection_tol: ctx.positive(c.bisection_tol.unwrap_or(0.05), "bisection_tol")?,
        ..CriticalTimeOptions::default()
    };
    let step = ctx.positive(c.t_step.unwrap_or(0.05), "t_step")?;
    let t_max = ctx.positive(c.t_max.unwrap_or(0.7), "t_max")?;
    let t_grid: Vec<f64> = (1..)
        .map(|k| step * k as f64)
        .take_while(|&t| t <= t_max + 1e-12)
        .collect();
    if t_grid.is_empty() {
        return Err(ctx.field("t_step", "t_step", "exceeds t_max"));
    }
    let est =
        estimate_critical_time(&phi, &system, &t_grid, &grid, &scan, &opts).map_err(compute)?;
    let mut checks = Vec::new();
    let mut results = json!({ "estimate": json(&est) });
    let mut artifacts = Vec::new();
    for (label, t, expect_pass) in [("pass", c.pass_t, true), ("fail", c.fail_t, false)] {
        let Some(t) = t else { continue };
        let ev = evolve_grid(&phi, &system, 0.0, t, &grid, &scan, true).map_err(compute)?;
        let cert = c11_certificate(&ev.values, &grid, opts.cap).map_err(compute)?;
        let mut tie = None;
        if cert.pass {
            for i in 0..grid.len() {
                let x = grid.point(i);
                let basins = positive_basins(&phi, &system, 0.0, t, &x, &scan).map_err(compute)?;
                if basins.len() >= 2 && basins[0].value - basins[1].value <= opts.tie_tol {
                    tie = Some(x);
                    break;
                }
            }
        }
        let regular = cert.pass && tie.is_none();
        if expect_pass {
            checks.push(Check::holds(&format!("regular_at_{t}"), regular));
        } else {
            checks.push(Check::holds(&format!("breaks_by_{t}"), !regular));
        }
        results[label] = json!({
            "t": t,
            "certificate": json(&cert),
            "tied_maximizers_at": tie,
            "regular": regular,
        });
        let mut header = axis_names("x", d);
        header.push("value".into());
        let rows = (0..grid.len()).map(|i| {
            let mut r = grid.point(i);
            r.push(ev.values[i]);
            r
        });
        artifacts.push(Artifact {
            file: format!("evolved-{label}.csv"),
            bytes: csv(&header, rows),
        });
    }
    if let Some([lo, hi]) = c.bracket {
        checks.push(Check::at_least("t_phi_lower", est.t_phi_lower, lo));
        checks.push(Check::at_most("t_phi_upper", est.t_phi_upper, hi));
    }
    Ok(Outcome {
        results,
        checks,
        artifacts,
    })
}

pub(super) fn inf_repr(ctx: &Ctx) -> Result<Outcome, CliError> {
    let c = ctx.c();
    let d = ctx.dim(1)?;
    let region = ctx.region(d, [-1.0, 1.0])?;
    let domain = ctx.domain(d, &region)?;
    let phi = ctx.function(&domain)?;
    let system = ctx.system(&domain)?;
    let grid = ctx.grid(&region, 0.005)?;
    let t1 = c.t1.unwrap_or(0.0);
    let t2 = ctx.require(&c.t, "t")?;
    if !(t2 > t1) {
        return Err(ctx.field("t", "t =", "must exceed t1"));
    }
    let scan = ScanOptions {
        spacing: ctx.positive(c.scan_spacing.unwrap_or(0.01), "scan_spacing")?,
        radius: c.scan_radius,
        seed: ctx.seed(),
        ..ScanOptions::default()
    };
    let spacing = ctx.positive(c.fiber_spacing.unwrap_or(0.01), "fiber_spacing")?;
    let r = verify_inf_representation(
        &phi,
        &system,
        t1,
        t2,
        &grid,
        &scan,
        FiberDensity::Spacing(spacing),
    )
    .map_err(compute)?;
    let mut header = axis_names("x", d);
    header.extend(["lhs".into(), "rhs".into()]);
    let rows = (0..grid.len()).map(|i| {
        let mut row = grid.point(i);
        row.extend([r.lhs[i], r.rhs[i]]);
        row
    });
    Ok(Outcome {
        results: json!({
            "t1": t1,
            "t2": t2,
            "max_deviation": r.max_deviation,
            "anchors": r.anchors,
            "family_size": r.family_size,
        }),
        checks: vec![Check::at_most(
            "max_deviation",
            r.max_deviation,
            c.tol.unwrap_or(5e-3),
        )],
        artifacts: vec![Artifact {
            file: "inf-repr.csv".into(),
            bytes: csv(&header, rows),
        }],
    })
}
