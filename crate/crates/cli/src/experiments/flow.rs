use serde_json::json;

use sconclab::flow::{default_steps, flow_endpoint, forward_flow, variational_flow};
use sconclab::linalg::Matrix;

use super::{axis_names, compute, csv, json, Artifact, Check, Ctx, Outcome};
use crate::CliError;

pub(super) fn run(ctx: &Ctx) -> Result<Outcome, CliError> {
    let c = ctx.c();
    let d = ctx.dim(1)?;
    let point = |p: &Option<crate::config::PointSpec>, name: &str| -> Result<Vec<f64>, CliError> {
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
    let x0 = point(&c.x0, "x0")?;
    let p0 = point(&c.p0, "p0")?;
    let domain = ctx.domain(d, &[])?;
    let system = ctx.system(&domain)?;
    let t1 = c.t1.unwrap_or(0.0);
    let t2 = c.t.unwrap_or(1.0);
    if !(t2 > t1) {
        return Err(ctx.field("t", "t =", "must exceed t1"));
    }
    let steps = c.steps.unwrap_or_else(|| default_steps(t1, t2));
    let traj = forward_flow(&system, t1, t2, &x0, &p0, steps).map_err(compute)?;
    let energy = |t: f64, x: &[f64], p: &[f64]| system.hamiltonian_value(t, x, p).map_err(compute);
    let e0 = energy(t1, &x0, &p0)?;
    let mut drift = 0.0f64;
    let mut rows = Vec::with_capacity(traj.len());
    for q in &traj {
        let e = energy(q.t, &q.x, &q.p)?;
        drift = drift.max((e - e0).abs());
        let mut r = vec![q.t];
        r.extend(&q.x);
        r.extend(&q.p);
        r.push(e);
        rows.push(r);
    }

    // Terminal data (x0, p0) at t2, carried back to t1.
    let var = variational_flow(&system, t1, t2, &x0, &p0, steps).map_err(compute)?;
    let h = ctx.positive(c.fd_step.unwrap_or(1e-5), "fd_step")?;
    let mut fd = vec![vec![0.0; d]; d];
    for j in 0..d {
        let (mut pp, mut pm) = (p0.clone(), p0.clone());
        pp[j] += h;
        pm[j] -= h;
        let a = flow_endpoint(&system, t2, t1, &x0, &pp, steps).map_err(compute)?;
        let b = flow_endpoint(&system, t2, t1, &x0, &pm, steps).map_err(compute)?;
        let disp = domain.displacement(&b.x, &a.x);
        for i in 0..d {
            fd[i][j] = disp[i] / (2.0 * h);
        }
    }
    let fd = Matrix::from_rows(&fd);
    let jac_err = var.x_p.sub(&fd).max_abs();

    let mut checks = Vec::new();
    if system.is_autonomous() {
        checks.push(Check::at_most(
            "energy_drift",
            drift,
            c.energy_tol.unwrap_or(1e-7),
        ));
    }
    checks.push(Check::at_most(
        "jacobian_vs_fd",
        jac_err,
        c.jacobian_tol.unwrap_or(1e-5),
    ));
    let mut results = json!({
        "system": system.name(),
        "t1": t1,
        "t2": t2,
        "steps": steps,
        "energy_start": e0,
        "energy_drift": drift,
        "autonomous": system.is_autonomous(),
        "x_p": json(&var.x_p),
        "p_p": json(&var.p_p),
        "x_p_fd": json(&fd),
        "jacobian_error": jac_err,
    });
    if c.system
        .as_ref()
        .and_then(|s| s.name.as_deref())
        .unwrap_or("free")
        == "free"
    {
        let exact_x = var
            .x_p
            .sub(&Matrix::scaled_identity(d, -(t2 - t1)))
            .max_abs();
        let exact_p = var.p_p.sub(&Matrix::identity(d)).max_abs();
        let tol = c.exact_tol.unwrap_or(1e-14);
        results["free_x_p_error"] = json!(exact_x);
        results["free_p_p_error"] = json!(exact_p);
        checks.push(Check::at_most("free_x_p_exact", exact_x, tol));
        checks.push(Check::at_most("free_p_p_exact", exact_p, tol));
    }
    let mut header = vec!["t".to_string()];
    header.extend(axis_names("x", d));
    header.extend(axis_names("p", d));
    header.push("H".into());
    Ok(Outcome {
        results,
        checks,
        artifacts: vec![Artifact {
            file: "trajectory.csv".into(),
            bytes: csv(&header, rows),
        }],
    })
}
