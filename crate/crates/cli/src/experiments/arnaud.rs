use sconclab::evolution::ScanOptions;
use sconclab::pseudograph::{
    polar_points, sample_pseudograph, verify_arnaud, ArnaudOptions, PhaseCloud,
};
use sconclab::semiconcave::FiberDensity;

use super::{compute, json, Artifact, Check, Ctx, Outcome};
use crate::CliError;

pub(super) fn run(ctx: &Ctx) -> Result<Outcome, CliError> {
    let c = ctx.c();
    let d = ctx.dim(1)?;
    let region = ctx.region(d, [-1.0, 1.0])?;
    let domain = ctx.domain(d, &region)?;
    let phi = ctx.function(&domain)?;
    let system = ctx.system(&domain)?;
    let grid = ctx.grid(&region, 0.01)?;
    let t = ctx.positive(ctx.require(&c.t, "t")?, "t")?;
    let tol = ctx.positive(c.tol.unwrap_or(0.02), "tol")?;
    let density = match (c.fiber_spacing, c.fiber_points) {
        (Some(s), None) => FiberDensity::Spacing(ctx.positive(s, "fiber_spacing")?),
        (None, n) => FiberDensity::MaxPoints(n.unwrap_or(100)),
        (Some(_), Some(_)) => {
            return Err(ctx.field(
                "fiber_spacing",
                "fiber_points",
                "set fiber_spacing or fiber_points, not both",
            ))
        }
    };
    let b = match &c.polar {
        Some(p) => {
            let center = p.center.clone().unwrap_or_else(|| vec![0.0; d]);
            let xs = polar_points(&center, p.radius, p.dr, p.angles)
                .map_err(|e| ctx.field("polar", "polar", e))?;
            sample_pseudograph(&phi, &xs, density).map_err(compute)?
        }
        None => sample_pseudograph(&phi, &grid.points(), density).map_err(compute)?,
    };
    let opts = ArnaudOptions {
        scan: ScanOptions {
            spacing: ctx.positive(c.scan_spacing.unwrap_or(0.01), "scan_spacing")?,
            radius: c.scan_radius,
            seed: ctx.seed(),
            ..ScanOptions::default()
        },
        cap: c.cap.unwrap_or(100.0),
        tol,
        inclusion_only: c.inclusion_only.unwrap_or(false),
        custom_b: c.polar.as_ref().map(|_| b.clone()),
    };
    let report = verify_arnaud(&phi, &system, t, &grid, density, &opts).map_err(compute)?;
    let mut checks = vec![Check::holds("c11_guard", report.certificate.pass)];
    if opts.inclusion_only {
        checks.push(Check::at_most("directed_ab", report.directed_ab, tol));
    } else {
        checks.push(Check::at_most("hausdorff", report.hausdorff, tol));
    }
    let write = |cloud: &PhaseCloud<f64>| {
        let mut bytes = Vec::new();
        cloud
            .write_csv(&mut bytes)
            .map(|_| bytes)
            .map_err(|e| CliError::Io(e.to_string()))
    };
    Ok(Outcome {
        results: json(&report),
        checks,
        artifacts: vec![
            Artifact {
                file: "pseudograph.csv".into(),
                bytes: write(&b)?,
            },
            Artifact {
                file: "transported.csv".into(),
                bytes: write(&report.transported)?,
            },
        ],
    })
}
