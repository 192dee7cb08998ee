use sconclab::linalg::Matrix;
use sconclab::semiconcave::{self, MarginalFunction, Piece, QuadraticPiece};
use sconclab::tonelli::{DomainSpec, Potential, TonelliSystem};

use crate::config::{CaseConfig, DomainConfig, FunctionConfig, SystemConfig};

pub struct Entry {
    pub name: &'static str,
    pub params: &'static str,
    pub summary: &'static str,
}

pub const FUNCTIONS: &[Entry] = &[
    Entry {
        name: "phi1",
        params: "n_max = 12",
        summary: "min(0, q1..qN): vertical dyadic segments on x1 < 0",
    },
    Entry {
        name: "phi2",
        params: "n_max = 12",
        summary: "phi1 with the extra piece -x1; singular lines at x1 = 0 and x1 = -1/2^(n-1)",
    },
    Entry {
        name: "neg-norm",
        params: "directions = 64 (exact with 2 in d = 1)",
        summary: "-|x| as a minimum of linear pieces",
    },
    Entry {
        name: "two-cones",
        params: "a, b, heights = [0, 0], directions = 64",
        summary: "min(-|x - a| + ha, -|x - b| + hb)",
    },
    Entry {
        name: "min-parabolas",
        params: "(none)",
        summary: "min(|x - e1|^2, |x + e1|^2), Hessian bound 2",
    },
    Entry {
        name: "paraboloid",
        params: "curvature = 1",
        summary: "(k/2)|x|^2, smooth",
    },
    Entry {
        name: "custom",
        params: "pieces = [{center, value, gradient, hessian}], hessian_bound",
        summary: "minimum of the listed quadratic pieces",
    },
];

pub const SYSTEMS: &[Entry] = &[
    Entry {
        name: "free",
        params: "(none)",
        summary: "H = |p|^2/2",
    },
    Entry {
        name: "mechanical",
        params:
            "potential = \"cos\" | \"polynomial\", amplitude = 1, coefficients, time_modulation = 0",
        summary: "H = |p|^2/2 + (1 + eps sin t) U(x); torus by default",
    },
    Entry {
        name: "pendulum",
        params: "(none)",
        summary: "mechanical with U = cos; torus by default",
    },
    Entry {
        name: "quartic",
        params: "(none)",
        summary: "H = (3/4)|p|^(4/3), L = |v|^4/4",
    },
];

pub const EXPERIMENTS: &[Entry] = &[
    Entry {
        name: "verify-arnaud",
        params: "t, h, box, tol = 0.02, inclusion_only, fiber_spacing | fiber_points = 100, scan_spacing, scan_radius, polar = {center, radius, dr, angles}",
        summary: "transported gradient graph vs sampled pseudo-graph",
    },
    Entry {
        name: "strata",
        params: "box, h, classify_tol = 1e-9, components = [{k, min, max}], write_csv = true",
        summary: "stratum labels on a grid and face-adjacent components",
    },
    Entry {
        name: "path",
        params: "a, b, radius, samples = 10, seeds = 1, tol = 1e-4, recheck_factor = 10, recheck_seeds, components (with box, h)",
        summary: "broken lines avoiding the codimension-two stratum",
    },
    Entry {
        name: "evolve",
        params: "t, t1 = 0, box, h | points, operator = positive, check = none | closed-form | localization | cross-method, samples, t_max, lipschitz, knots = 64, max_offset = 1, tol",
        summary: "Lax-Oleinik operators and fundamental solutions",
    },
    Entry {
        name: "flow",
        params: "x0, p0, t1 = 0, t = 1, steps, energy_tol = 1e-7, jacobian_tol = 1e-5, exact_tol = 1e-14, fd_step = 1e-5",
        summary: "characteristics, energy drift and the variational equation",
    },
    Entry {
        name: "dim",
        params: "box, h, k = 1, scales = [4, 9], expect = d - k, tol = 0.2, bound_slack = 0.25, label_lines, label_axis = 0, label_value = 1",
        summary: "box-counting dimension of a sampled stratum",
    },
    Entry {
        name: "critical-time",
        params: "box, points | h, scan_spacing = 0.01, t_step = 0.05, t_max = 0.7, pass_t, fail_t, bracket, cap = 100, bisection_tol = 0.05",
        summary: "C^{1,1} certificates and the critical-time bracket",
    },
    Entry {
        name: "inf-repr",
        params: "t, box, points | h, fiber_spacing = 0.01, tol = 5e-3",
        summary: "positive operator vs infimum over the touching family",
    },
];

pub fn listing(kind: &str) -> Option<String> {
    let entries = match kind {
        "systems" => SYSTEMS,
        "functions" => FUNCTIONS,
        "experiments" => EXPERIMENTS,
        _ => return None,
    };
    let width = entries.iter().map(|e| e.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for e in entries {
        out.push_str(&format!(
            "{:width$}  {}\n{:width$}    params: {}\n",
            e.name, e.summary, "", e.params
        ));
    }
    Some(out)
}

/// Problem dimension: explicit, else from the box, the endpoints, the domain,
/// or `fallback`.
pub fn dimension(c: &CaseConfig, fallback: usize) -> Result<usize, String> {
    if let Some(d) = c.dim {
        return Ok(d);
    }
    if let Some(b) = &c.region {
        return Ok(b.bounds()?.len());
    }
    if let Some(p) = [&c.a, &c.x0].into_iter().flatten().next() {
        return Ok(p.coords()?.len());
    }
    if let Some(dc) = &c.domain {
        if let Some(v) = [&dc.lower, &dc.period].into_iter().flatten().next() {
            return Ok(v.len());
        }
    }
    Ok(fallback)
}

fn torus_by_default(system: Option<&SystemConfig>) -> bool {
    matches!(
        system.and_then(|s| s.name.as_deref()),
        Some("mechanical") | Some("pendulum")
    )
}

pub fn domain(c: &CaseConfig, d: usize) -> Result<DomainSpec<f64>, String> {
    let dc = c.domain.clone().unwrap_or_default();
    let kind = match dc.kind.as_deref() {
        Some(k) => k.to_string(),
        None if dc.period.is_some() || torus_by_default(c.system.as_ref()) => "torus".into(),
        None => "box".into(),
    };
    let check = |v: &Vec<f64>, what: &str| {
        if v.len() == d {
            Ok(())
        } else {
            Err(format!(
                "domain.{what} has {} entries, expected {d}",
                v.len()
            ))
        }
    };
    let spec = match kind.as_str() {
        "box" => {
            let DomainConfig {
                lower,
                upper,
                half_width,
                ..
            } = dc;
            match (lower, upper) {
                (Some(lo), Some(hi)) => {
                    check(&lo, "lower")?;
                    check(&hi, "upper")?;
                    DomainSpec::new_box(lo, hi)
                }
                (None, None) => DomainSpec::symmetric_box(d, half_width.unwrap_or(3.0)),
                _ => return Err("domain needs both lower and upper".into()),
            }
        }
        "torus" => match dc.period {
            Some(p) => {
                check(&p, "period")?;
                DomainSpec::torus(p)
            }
            None => DomainSpec::standard_torus(d),
        },
        other => return Err(format!("unknown domain kind `{other}`; use box or torus")),
    };
    spec.map_err(|e| e.to_string())
}

pub fn function(
    fc: Option<&FunctionConfig>,
    domain: DomainSpec<f64>,
) -> Result<MarginalFunction<f64>, String> {
    let fc = fc.cloned().unwrap_or_default();
    let name = fc.name.clone().ok_or("function.name is required")?;
    let d = domain.dim();
    let n_max = fc.n_max.unwrap_or(12);
    let dirs = fc.directions.unwrap_or(if d == 1 { 2 } else { 64 });
    let r = match name.as_str() {
        "phi1" => semiconcave::phi1(domain, n_max),
        "phi2" => semiconcave::phi2(domain, n_max),
        "neg-norm" => semiconcave::neg_norm(domain, dirs),
        "two-cones" => {
            let a =
                fc.a.as_ref()
                    .ok_or("two-cones needs function.a")?
                    .coords()?;
            let b =
                fc.b.as_ref()
                    .ok_or("two-cones needs function.b")?
                    .coords()?;
            if a.len() != d || b.len() != d {
                return Err(format!("two-cones apexes must have {d} coordinates"));
            }
            let h = fc.heights.unwrap_or([0.0, 0.0]);
            semiconcave::two_cones(domain, &a, &b, (h[0], h[1]), dirs)
        }
        "min-parabolas" => semiconcave::min_parabolas(domain),
        "paraboloid" => semiconcave::paraboloid(domain, fc.curvature.unwrap_or(1.0)),
        "custom" => {
            let pieces = fc.pieces.as_ref().ok_or("custom needs function.pieces")?;
            let mut out = Vec::with_capacity(pieces.len());
            let mut bound = 0.0f64;
            for (i, p) in pieces.iter().enumerate() {
                let hessian = match &p.hessian {
                    Some(rows) => {
                        if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                            return Err(format!("pieces[{i}].hessian must be {d}x{d}"));
                        }
                        Matrix::from_rows(rows)
                    }
                    None => Matrix::zeros(d, d),
                };
                bound = bound.max(
                    hessian
                        .symmetric_part()
                        .symmetric_eigenvalues()
                        .into_iter()
                        .fold(0.0, f64::max),
                );
                out.push(Piece::Quadratic(QuadraticPiece {
                    center: p.center.clone(),
                    value: p.value,
                    gradient: p.gradient.clone().unwrap_or_else(|| vec![0.0; d]),
                    hessian,
                }));
            }
            MarginalFunction::new("custom", out, fc.hessian_bound.unwrap_or(bound), domain)
        }
        other => {
            let known: Vec<&str> = FUNCTIONS.iter().map(|e| e.name).collect();
            return Err(format!(
                "unknown function `{other}`; known: {}",
                known.join(", ")
            ));
        }
    };
    r.map_err(|e| e.to_string())
}

pub fn system(
    sc: Option<&SystemConfig>,
    domain: DomainSpec<f64>,
) -> Result<TonelliSystem<f64>, String> {
    let sc = sc.cloned().unwrap_or_default();
    let name = sc.name.as_deref().unwrap_or("free");
    Ok(match name {
        "free" => TonelliSystem::free(domain),
        "pendulum" => TonelliSystem::pendulum(domain),
        "quartic" => TonelliSystem::quartic(domain),
        "mechanical" => {
            let potential = match sc.potential.as_deref().unwrap_or("cos") {
                "cos" => Potential::Cos {
                    amplitude: sc.amplitude.unwrap_or(1.0),
                },
                "polynomial" => Potential::Polynomial {
                    coefficients: sc
                        .coefficients
                        .clone()
                        .ok_or("polynomial potential needs system.coefficients")?,
                },
                other => {
                    return Err(format!(
                        "unknown potential `{other}`; use cos or polynomial"
                    ))
                }
            };
            TonelliSystem::mechanical(domain, potential, sc.time_modulation.unwrap_or(0.0))
        }
        other => {
            let known: Vec<&str> = SYSTEMS.iter().map(|e| e.name).collect();
            return Err(format!(
                "unknown system `{other}`; known: {}",
                known.join(", ")
            ));
        }
    })
}
