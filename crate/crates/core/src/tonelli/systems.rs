//! Built-in systems: free particle, mechanical `|p|²/2 + V`, quartic `|v|⁴/4`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    DomainSpec, GrowthConstants, HamiltonianJet, LagrangianJet, Superlinear, TonelliSystem,
};
use crate::linalg::{dot, norm, Matrix};
use crate::scalar::{from_usize, lit, Scalar};

/// Spatial part `U(x)` of a mechanical potential, summed over coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Potential<S> {
    /// `U(x) = a Σᵢ cos xᵢ`
    Cos { amplitude: S },
    /// `U(x) = Σᵢ Σₖ cₖ xᵢᵏ`
    Polynomial { coefficients: Vec<S> },
}

impl<S: Scalar> Potential<S> {
    /// `(U, U_x, U_xx)`; the Hessian is diagonal.
    fn eval(&self, x: &[S]) -> (S, Vec<S>, Vec<S>) {
        match self {
            Potential::Cos { amplitude } => {
                let a = *amplitude;
                (
                    x.iter().map(|&v| a * v.cos()).sum(),
                    x.iter().map(|&v| -a * v.sin()).collect(),
                    x.iter().map(|&v| -a * v.cos()).collect(),
                )
            }
            Potential::Polynomial { coefficients } => {
                let mut val = S::zero();
                let mut grad = Vec::with_capacity(x.len());
                let mut hess = Vec::with_capacity(x.len());
                for &v in x {
                    let (mut f, mut f1, mut f2) = (S::zero(), S::zero(), S::zero());
                    for (k, &c) in coefficients.iter().enumerate() {
                        let kk = from_usize::<S>(k);
                        f = f + c * v.powi(k as i32);
                        if k >= 1 {
                            f1 = f1 + c * kk * v.powi(k as i32 - 1);
                        }
                        if k >= 2 {
                            f2 = f2 + c * kk * (kk - S::one()) * v.powi(k as i32 - 2);
                        }
                    }
                    val = val + f;
                    grad.push(f1);
                    hess.push(f2);
                }
                (val, grad, hess)
            }
        }
    }

    /// `U_x` without allocating.
    fn gradient_into(&self, x: &[S], out: &mut [S]) {
        match self {
            Potential::Cos { amplitude } => {
                for (o, &v) in out.iter_mut().zip(x) {
                    *o = -*amplitude * v.sin();
                }
            }
            Potential::Polynomial { coefficients } => {
                for (o, &v) in out.iter_mut().zip(x) {
                    // Horner on the derivative.
                    let mut f1 = S::zero();
                    for (k, &c) in coefficients.iter().enumerate().skip(1).rev() {
                        f1 = f1 * v + c * from_usize::<S>(k);
                    }
                    *o = f1;
                }
            }
        }
    }

    /// Upper bound of `|U|` over the domain.
    fn sup_abs(&self, domain: &DomainSpec<S>) -> S {
        match self {
            Potential::Cos { amplitude } => amplitude.abs() * from_usize(domain.dim()),
            Potential::Polynomial { coefficients } => {
                // Coordinates separate, so the sup of each 1D term adds up.
                let n = 2001;
                (0..domain.dim())
                    .map(|i| {
                        (0..n)
                            .map(|k| {
                                let v = domain.lower()[i]
                                    + domain.extent(i) * from_usize::<S>(k) / from_usize(n - 1);
                                coefficients
                                    .iter()
                                    .enumerate()
                                    .map(|(j, &c)| c * v.powi(j as i32))
                                    .sum::<S>()
                                    .abs()
                            })
                            .fold(S::zero(), S::max)
                    })
                    .sum()
            }
        }
    }
}

impl<S: Scalar> TonelliSystem<S> {
    /// `L = |v|²/2`, `H = |p|²/2`, with closed-form `h = |y − x|² / (2(t₂ − t₁))`.
    pub fn free(domain: DomainSpec<S>) -> Self {
        let d = domain.dim();
        let half = lit::<S>(0.5);
        let dom = domain.clone();
        Self::from_lagrangian(
            "free",
            domain,
            Arc::new(move |_t, _x, v: &[S]| LagrangianJet {
                value: half * dot(v, v),
                dt: S::zero(),
                dx: vec![S::zero(); d],
                dv: v.to_vec(),
                dvv: Matrix::identity(d),
            }),
        )
        .with_hamiltonian(Arc::new(move |_t, _x, p: &[S]| HamiltonianJet {
            value: half * dot(p, p),
            dx: vec![S::zero(); d],
            dp: p.to_vec(),
            dxx: Matrix::zeros(d, d),
            dxp: Matrix::zeros(d, d),
            dpp: Matrix::identity(d),
        }))
        .with_hamiltonian_gradient(Arc::new(|_t, _x, p: &[S], dx: &mut [S], dp: &mut [S]| {
            dx.fill(S::zero());
            dp.copy_from_slice(p);
        }))
        .with_growth(
            Superlinear::quadratic(),
            GrowthConstants::new(S::zero(), S::zero(), S::zero()),
        )
        .with_autonomous(true)
        .with_separable(true)
        .with_action(Arc::new(move |t1, t2, x: &[S], y: &[S]| {
            let dx = dom.displacement(x, y);
            dot(&dx, &dx) / ((t2 - t1) + (t2 - t1))
        }))
    }

    /// `L = |v|²/2 − V`, `H = |p|²/2 + V` with `V(t, x) = (1 + ε sin t)·U(x)`.
    ///
    /// θ(r) = r²/2, `c0 = sup|V|`, `C1 = |ε|·sup|U|`, `C2 = 0`.
    pub fn mechanical(domain: DomainSpec<S>, potential: Potential<S>, time_modulation: S) -> Self {
        let d = domain.dim();
        let half = lit::<S>(0.5);
        let eps = time_modulation;
        let sup_u = potential.sup_abs(&domain);
        let pot_l = potential.clone();
        let pot_h = potential.clone();
        let pot_g = potential;
        let name = if eps == S::zero() {
            "mechanical"
        } else {
            "mechanical-td"
        };
        let autonomous = eps == S::zero();
        Self::from_lagrangian(
            name,
            domain,
            Arc::new(move |t: S, x: &[S], v: &[S]| {
                let (u, ux, _) = pot_l.eval(x);
                let m = S::one() + eps * t.sin();
                LagrangianJet {
                    value: half * dot(v, v) - m * u,
                    dt: -eps * t.cos() * u,
                    dx: ux.iter().map(|&g| -m * g).collect(),
                    dv: v.to_vec(),
                    dvv: Matrix::identity(d),
                }
            }),
        )
        .with_hamiltonian(Arc::new(move |t: S, x: &[S], p: &[S]| {
            let (u, ux, uxx) = pot_h.eval(x);
            let m = S::one() + eps * t.sin();
            let mut dxx = Matrix::zeros(d, d);
            for (i, &h) in uxx.iter().enumerate() {
                dxx[(i, i)] = m * h;
            }
            HamiltonianJet {
                value: half * dot(p, p) + m * u,
                dx: ux.iter().map(|&g| m * g).collect(),
                dp: p.to_vec(),
                dxx,
                dxp: Matrix::zeros(d, d),
                dpp: Matrix::identity(d),
            }
        }))
        .with_hamiltonian_gradient(Arc::new(
            move |t: S, x: &[S], p: &[S], dx: &mut [S], dp: &mut [S]| {
                let m = S::one() + eps * t.sin();
                pot_g.gradient_into(x, dx);
                for g in dx.iter_mut() {
                    *g = m * *g;
                }
                dp.copy_from_slice(p);
            },
        ))
        .with_growth(
            Superlinear::quadratic(),
            GrowthConstants::new((S::one() + eps.abs()) * sup_u, eps.abs() * sup_u, S::zero()),
        )
        .with_autonomous(autonomous)
        .with_separable(autonomous)
    }

    /// Pendulum `H = |p|²/2 − Σ cos xᵢ`.
    pub fn pendulum(domain: DomainSpec<S>) -> Self {
        let mut s = Self::mechanical(
            domain,
            Potential::Cos {
                amplitude: -S::one(),
            },
            S::zero(),
        );
        s.name = "pendulum".into();
        s
    }

    /// `L = |v|⁴/4`, `H = (3/4)|p|^{4/3}`. `H_pp` blows up at `p = 0`.
    pub fn quartic(domain: DomainSpec<S>) -> Self {
        let d = domain.dim();
        let dom = domain.clone();
        let three = lit::<S>(3.0);
        let four = lit::<S>(4.0);
        Self::from_lagrangian(
            "quartic",
            domain,
            Arc::new(move |_t, _x, v: &[S]| {
                let r2 = dot(v, v);
                let mut dvv = Matrix::scaled_identity(d, r2);
                let vv = Matrix::outer(v, v).scale(S::one() + S::one());
                dvv = dvv.add(&vv);
                LagrangianJet {
                    value: r2 * r2 / four,
                    dt: S::zero(),
                    dx: vec![S::zero(); d],
                    dv: v.iter().map(|&c| r2 * c).collect(),
                    dvv,
                }
            }),
        )
        .with_hamiltonian(Arc::new(move |_t, _x, p: &[S]| {
            let r = norm(p);
            let (dp, dpp) = if r == S::zero() {
                (
                    vec![S::zero(); d],
                    Matrix::scaled_identity(d, S::infinity()),
                )
            } else {
                let k = r.powf(-lit::<S>(2.0) / three);
                let unit: Vec<S> = p.iter().map(|&c| c / r).collect();
                let proj = Matrix::outer(&unit, &unit).scale(lit::<S>(2.0) / three);
                (
                    p.iter().map(|&c| k * c).collect(),
                    Matrix::identity(d).sub(&proj).scale(k),
                )
            };
            HamiltonianJet {
                value: three / four * r.powf(four / three),
                dx: vec![S::zero(); d],
                dp,
                dxx: Matrix::zeros(d, d),
                dxp: Matrix::zeros(d, d),
                dpp,
            }
        }))
        .with_hamiltonian_gradient(Arc::new(
            move |_t, _x, p: &[S], dx: &mut [S], dp: &mut [S]| {
                dx.fill(S::zero());
                let r = norm(p);
                if r == S::zero() {
                    dp.fill(S::zero());
                } else {
                    let k = r.powf(-lit::<S>(2.0) / three);
                    for (o, &c) in dp.iter_mut().zip(p) {
                        *o = k * c;
                    }
                }
            },
        ))
        .with_growth(
            Superlinear::power(four),
            GrowthConstants::new(S::zero(), S::zero(), S::zero()),
        )
        .with_autonomous(true)
        .with_separable(true)
        .with_action(Arc::new(move |t1, t2, x: &[S], y: &[S]| {
            let dx = dom.displacement(x, y);
            let r2 = dot(&dx, &dx);
            let tau = t2 - t1;
            r2 * r2 / (four * tau * tau * tau)
        }))
    }
}
