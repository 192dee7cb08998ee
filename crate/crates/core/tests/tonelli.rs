use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sconclab::linalg::{dot, norm, Matrix};
use sconclab::tonelli::{
    legendre_transform, verify_tonelli, DomainSpec, GrowthConstants, LagrangianJet, Potential,
    SampleWindow, Superlinear, TonelliSystem,
};

fn torus1() -> DomainSpec<f64> {
    DomainSpec::standard_torus(1).unwrap()
}

fn builtins() -> Vec<TonelliSystem<f64>> {
    let mut v = Vec::new();
    for d in 1..=2 {
        let torus = DomainSpec::standard_torus(d).unwrap();
        let boxed = DomainSpec::symmetric_box(d, 2.0).unwrap();
        v.push(TonelliSystem::free(torus.clone()));
        v.push(TonelliSystem::mechanical(
            torus.clone(),
            Potential::Cos { amplitude: 1.0 },
            0.0,
        ));
        v.push(TonelliSystem::mechanical(
            boxed.clone(),
            Potential::Polynomial {
                coefficients: vec![0.0, 0.3, -0.5, 0.0, 0.1],
            },
            0.0,
        ));
        v.push(TonelliSystem::mechanical(
            torus.clone(),
            Potential::Cos { amplitude: 1.0 },
            0.5,
        ));
        v.push(TonelliSystem::quartic(boxed));
    }
    v
}

#[test]
fn free_legendre_is_self_dual() {
    let sys = TonelliSystem::free(torus1());
    let c = legendre_transform(&sys, 0.0, &[0.3], &[2.0], 8.0).unwrap();
    assert!((c.value - 2.0).abs() < 1e-12);
    assert!((c.maximizer[0] - 2.0).abs() < 1e-12);
}

#[test]
fn potential_shifts_hamiltonian() {
    let sys = TonelliSystem::mechanical(torus1(), Potential::Cos { amplitude: 1.0 }, 0.0);
    for &x in &[0.0, 0.7, 2.5, 4.0] {
        let c = legendre_transform(&sys, 0.0, &[x], &[1.0], 8.0).unwrap();
        assert!((c.value - (0.5 + x.cos())).abs() < 1e-12, "x = {x}");
    }
}

#[test]
fn quartic_legendre_value() {
    let sys = TonelliSystem::<f64>::quartic(DomainSpec::symmetric_box(1, 1.0).unwrap());
    let c = legendre_transform(&sys, 0.0, &[0.0], &[1.0], 8.0).unwrap();
    assert!((c.value - 0.75).abs() < 1e-10);
    // (3/4)|p|^{4/3}
    let c = legendre_transform(&sys, 0.0, &[0.0], &[-2.0], 8.0).unwrap();
    assert!((c.value - 0.75 * 2f64.powf(4.0 / 3.0)).abs() < 1e-10);
}

#[test]
fn free_system_passes_every_condition() {
    let sys = TonelliSystem::free(torus1());
    let r = verify_tonelli(&sys, 1000, 7, SampleWindow::default());
    assert!(r.all_pass(), "{:?}", r.failures);
    assert!(r.legendre_residual < 1e-8);
    assert_eq!(r.growth_ok, Some(true));
    assert_eq!(r.time_derivative_ok, Some(true));
}

#[test]
fn mechanical_growth_margin_is_nonnegative() {
    let sys = TonelliSystem::mechanical(torus1(), Potential::Cos { amplitude: 1.0 }, 0.0);
    assert_eq!(sys.constants().unwrap().c0, 1.0);
    let r = verify_tonelli(&sys, 1000, 3, SampleWindow::default());
    // Direct evaluation: L − θ + c0 = 1 − cos x ≥ 0.
    assert!(r.growth_margin.unwrap() >= 0.0);
    assert!(r.all_pass(), "{:?}", r.failures);
}

#[test]
fn negative_c0_is_reported_violated() {
    let sys = TonelliSystem::free(torus1()).with_growth(
        Superlinear::quadratic(),
        GrowthConstants::new(-1.0, 0.0, 0.0),
    );
    let r = verify_tonelli(&sys, 200, 1, SampleWindow::default());
    assert_eq!(r.growth_ok, Some(false));
    assert!(!r.all_pass());
}

#[test]
fn time_dependent_mechanical_satisfies_l3() {
    let sys = TonelliSystem::mechanical(torus1(), Potential::Cos { amplitude: 1.0 }, 0.5);
    assert!(!sys.is_autonomous());
    let r = verify_tonelli(&sys, 500, 11, SampleWindow::default());
    assert!(r.all_pass(), "{:?}", r.failures);
}

#[test]
fn legendre_involution_on_builtins() {
    for sys in builtins() {
        let r = verify_tonelli(&sys, 100, 42, SampleWindow::default());
        assert!(
            r.legendre_residual < 1e-6,
            "{}: residual {}",
            sys.name(),
            r.legendre_residual
        );
    }
}

#[test]
fn maximizer_matches_momentum() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for sys in builtins() {
        let d = sys.dim();
        for _ in 0..100 {
            let t: f64 = rng.gen();
            let x = sys.domain().sample_uniform(&mut rng);
            let p: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.5..2.5)).collect();
            let c = legendre_transform(&sys, t, &x, &p, 8.0).unwrap();
            let lv = sys.lagrangian(t, &x, &c.maximizer).dv;
            let err = norm(&p.iter().zip(&lv).map(|(a, b)| a - b).collect::<Vec<_>>());
            assert!(err < 1e-6, "{}: |p − L_v| = {err}", sys.name());
            let h = sys.hamiltonian(t, &x, &p).unwrap().value;
            assert!((h - c.value).abs() < 1e-8, "{}: H mismatch", sys.name());
        }
    }
}

#[test]
fn autonomous_flag_means_time_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for sys in builtins().into_iter().filter(|s| s.is_autonomous()) {
        for _ in 0..100 {
            let x = sys.domain().sample_uniform(&mut rng);
            let p: Vec<f64> = (0..sys.dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let a = sys.hamiltonian(0.0, &x, &p).unwrap().value;
            let b = sys.hamiltonian(1.7, &x, &p).unwrap().value;
            assert_eq!(a, b);
        }
    }
}

#[test]
fn theta_conjugate_values() {
    let q = Superlinear::<f64>::quadratic();
    assert!((q.conjugate(2.0).unwrap() - 2.0).abs() < 1e-12);
    assert!((q.conjugate(1.0).unwrap() - 0.5).abs() < 1e-12);
    let quart = Superlinear::<f64>::power(4.0);
    assert!((quart.conjugate(1.0).unwrap() - 0.75).abs() < 1e-10);
}

#[test]
fn numeric_hamiltonian_matches_analytic() {
    let torus = DomainSpec::standard_torus(1).unwrap();
    let analytic = TonelliSystem::mechanical(torus.clone(), Potential::Cos { amplitude: 1.0 }, 0.0);
    let custom = TonelliSystem::from_lagrangian(
        "custom",
        torus,
        Arc::new(|_t, x: &[f64], v: &[f64]| LagrangianJet {
            value: 0.5 * dot(v, v) - x[0].cos(),
            dt: 0.0,
            dx: vec![x[0].sin()],
            dv: v.to_vec(),
            dvv: Matrix::identity(1),
        }),
    );
    for &(x, p) in &[(0.3, 0.5), (1.2, -1.0), (2.9, 2.0)] {
        let a = analytic.hamiltonian(0.0, &[x], &[p]).unwrap();
        let n = custom.hamiltonian(0.0, &[x], &[p]).unwrap();
        assert!((a.value - n.value).abs() < 1e-10);
        assert!((a.dx[0] - n.dx[0]).abs() < 1e-8);
        assert!((a.dp[0] - n.dp[0]).abs() < 1e-8);
        assert!((a.dxx[(0, 0)] - n.dxx[(0, 0)]).abs() < 1e-5);
        assert!((a.dpp[(0, 0)] - n.dpp[(0, 0)]).abs() < 1e-5);
        assert!(n.dxp[(0, 0)].abs() < 1e-5);
    }
}

#[test]
fn fast_gradient_agrees_with_full_jet() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for sys in builtins() {
        let d = sys.dim();
        for _ in 0..20 {
            let t: f64 = rng.gen_range(0.0..3.0);
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let p: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let jet = sys.hamiltonian(t, &x, &p).unwrap();
            let (mut hx, mut hp) = (vec![0.0; d], vec![0.0; d]);
            sys.hamiltonian_gradient(t, &x, &p, &mut hx, &mut hp)
                .unwrap();
            for k in 0..d {
                assert!((jet.dx[k] - hx[k]).abs() < 1e-12, "{}", sys.name());
                assert!((jet.dp[k] - hp[k]).abs() < 1e-12, "{}", sys.name());
            }
        }
    }
}

#[test]
fn single_precision_free_legendre() {
    let sys = TonelliSystem::<f32>::free(DomainSpec::standard_torus(1).unwrap());
    let c = legendre_transform(&sys, 0.0f32, &[0.0], &[2.0], 8.0).unwrap();
    assert!((c.value - 2.0).abs() < 1e-5);
}
