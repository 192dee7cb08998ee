use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use sconclab::evolution::{
    evolve_grid, fundamental_solution, lax_oleinik_positive, maximizer_radius, Method, ScanOptions,
};

use super::{axis_names, compute, csv, Artifact, Check, Ctx, Outcome};
use crate::CliError;

fn scan(ctx: &Ctx) -> Result<ScanOptions<f64>, CliError> {
    let c = ctx.c();
    Ok(ScanOptions {
        spacing: ctx.positive(c.scan_spacing.unwrap_or(0.01), "scan_spacing")?,
        radius: c.scan_radius,
        seed: ctx.seed(),
        ..ScanOptions::default()
    })
}

/// `sup_y −|y| − |x − y|²/(2t)`.
fn sup_conv_neg_abs(x: f64, t: f64) -> f64 {
    if x.abs() <= t {
        -x * x / (2.0 * t)
    } else {
        -x.abs() + t / 2.0
    }
}

pub(super) fn run(ctx: &Ctx) -> Result<Outcome, CliError> {
    match ctx.c().check.as_deref().unwrap_or("none") {
        "none" | "closed-form" => grid_run(ctx),
        "localization" => localization(ctx),
        "cross-method" => cross_method(ctx),
        other => Err(ctx.field(
            "check",
            "check",
            format!("unknown check `{other}`; use none, closed-form, localization or cross-method"),
        )),
    }
}

fn grid_run(ctx: &Ctx) -> Result<Outcome, CliError> {
    let c = ctx.c();
    let d = ctx.dim(1)?;
    let region = ctx.region(d, [-2.0, 2.0])?;
    let domain = ctx.domain(d, &region)?;
    let phi = ctx.function(&domain)?;
    let system = ctx.system(&domain)?;
    let grid = ctx.grid(&region, 0.01)?;
    let t1 = c.t1.unwrap_or(0.0);
    let t2 = ctx.require(&c.t, "t")?;
    if !(t2 > t1) {
        return Err(ctx.field("t", "t =", "must exceed t1"));
    }
    let positive = match c.operator.as_deref().unwrap_or("positive") {
        "positive" => true,
        "negative" => false,
        other => {
            return Err(ctx.field(
                "operator",
                "operator",
                format!("unknown operator `{other}`"),
            ))
        }
    };
    let ev = evolve_grid(&phi, &system, t1, t2, &grid, &scan(ctx)?, positive).map_err(compute)?;
    let mut checks = Vec::new();
    let mut results = json!({
        "operator": if positive { "positive" } else { "negative" },
        "t1": t1,
        "t2": t2,
        "grid": {
            "lower": grid.lower(),
            "spacing": grid.spacing(),
            "counts": grid.counts(),
        },
        "values": ev.values,
        "maximizers": ev.arguments,
    });
    if c.check.as_deref() == Some("closed-form") {
        let fname = c.function.as_ref().and_then(|f| f.name.as_deref());
        let sname = c
            .system
            .as_ref()
            .and_then(|s| s.name.as_deref())
            .unwrap_or("free");
        if d != 1 || fname != Some("neg-norm") || sname != "free" || !positive {
            return Err(ctx.field(
                "check",
                "closed-form",
                "the closed form covers the positive operator of neg-norm under the free system in d = 1",
            ));
        }
        let err = (0..grid.len())
            .map(|i| (ev.values[i] - sup_conv_neg_abs(grid.coord(0, i), t2 - t1)).abs())
            .fold(0.0, f64::max);
        results["max_error"] = json!(err);
        checks.push(Check::at_most("max_error", err, c.tol.unwrap_or(1e-4)));
    }
    let mut header = axis_names("x", d);
    header.push("value".into());
    header.extend(axis_names("y", d));
    let rows = (0..grid.len()).map(|i| {
        let mut r = grid.point(i);
        r.push(ev.values[i]);
        r.extend(&ev.arguments[i]);
        r
    });
    Ok(Outcome {
        results,
        checks,
        artifacts: vec![Artifact {
            file: "evolved.csv".into(),
            bytes: csv(&header, rows),
        }],
    })
}

fn localization(ctx: &Ctx) -> Result<Outcome, CliError> {
    let c = ctx.c();
    let d = ctx.dim(1)?;
    let region = ctx.region(d, [-2.0, 2.0])?;
    let domain = ctx.domain(d, &region)?;
    let phi = ctx.function(&domain)?;
    let system = ctx.system(&domain)?;
    let t1 = c.t1.unwrap_or(0.0);
    let t_max = ctx.positive(c.t_max.unwrap_or(0.5), "t_max")?;
    let samples = c.samples.unwrap_or(500);
    let lipschitz = match (
        c.lipschitz,
        c.function.as_ref().and_then(|f| f.name.as_deref()),
    ) {
        (Some(l), _) => l,
        (None, Some("neg-norm")) => 1.0,
        _ => {
            return Err(ctx.field(
                "lipschitz",
                "",
                "is required unless the function is neg-norm",
            ))
        }
    };
    let opts = scan(ctx)?;
    let bound = maximizer_radius(&system, lipschitz, t1, t1 + t_max).map_err(compute)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed());
    let (mut violations, mut worst_ratio) = (0usize, 0.0f64);
    let mut rows = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x: Vec<f64> = region
            .iter()
            .map(|ax| rng.gen_range(ax[0]..ax[1]))
            .collect();
        let tau = t_max * (1.0 - rng.gen::<f64>());
        let v =
            lax_oleinik_positive(&phi, &system, t1, t1 + tau, &x, &opts, None).map_err(compute)?;
        let dist = domain.distance(&x, &v.argument);
        let limit = bound.lambda * tau + 2.0 * opts.spacing;
        if dist > limit {
            violations += 1;
        }
        worst_ratio = worst_ratio.max(dist / limit);
        let mut r = x.clone();
        r.extend([tau, dist, limit]);
        rows.push(r);
    }
    let mut header = axis_names("x", d);
    header.extend(["t".into(), "distance".into(), "limit".into()]);
    Ok(Outcome {
        results: json!({
            "samples": samples,
            "lipschitz": lipschitz,
            "lambda": bound.lambda,
            "spacing": opts.spacing,
            "violations": violations,
            "worst_ratio": worst_ratio,
        }),
        checks: vec![Check::at_most("violations", violations as f64, 0.0)],
        artifacts: vec![Artifact {
            file: "localization.csv".into(),
            bytes: csv(&header, rows),
        }],
    })
}

fn cross_method(ctx: &Ctx) -> Result<Outcome, CliError> {
    let c = ctx.c();
    let d = ctx.dim(1)?;
    let domain = ctx.domain(d, &[])?;
    let system = ctx.system(&domain)?;
    let t_max = ctx.positive(c.t_max.unwrap_or(0.3), "t_max")?;
    let samples = c.samples.unwrap_or(100);
    let knots = c.knots.unwrap_or(64);
    let offset = ctx.positive(c.max_offset.unwrap_or(1.0), "max_offset")?;
    let tol = c.tol.unwrap_or(1e-4);
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed());
    let (mut worst, mut failures) = (0.0f64, 0usize);
    let mut first_failure = None;
    let mut rows = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x = domain.sample_uniform(&mut rng);
        let mut y: Vec<f64> = x
            .iter()
            .map(|&v| v + rng.gen_range(-offset..offset))
            .collect();
        if !domain.is_torus() {
            y = domain.project(&y);
        }
        let t = rng.gen_range(t_max / 6.0..=t_max);
        let direct = fundamental_solution(&system, 0.0, t, &x, &y, knots, Method::Direct, None);
        let shooting = fundamental_solution(&system, 0.0, t, &x, &y, knots, Method::Shooting, None);
        let (a, b) = match (direct, shooting) {
            (Ok((a, _)), Ok((b, _))) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                failures += 1;
                first_failure.get_or_insert_with(|| e.to_string());
                (f64::NAN, f64::NAN)
            }
        };
        if a.is_finite() {
            worst = worst.max((a - b).abs());
        }
        let mut r = x.clone();
        r.extend(&y);
        r.extend([t, a, b]);
        rows.push(r);
    }
    let mut header = axis_names("x", d);
    header.extend(axis_names("y", d));
    header.extend(["t".into(), "direct".into(), "shooting".into()]);
    Ok(Outcome {
        results: json!({
            "samples": samples,
            "knots": knots,
            "t_max": t_max,
            "max_difference": worst,
            "failures": failures,
            "first_failure": first_failure,
        }),
        checks: vec![
            Check::at_most("max_difference", worst, tol),
            Check::at_most("failures", failures as f64, 0.0),
        ],
        artifacts: vec![Artifact {
            file: "pairs.csv".into(),
            bytes: csv(&header, rows),
        }],
    })
}
