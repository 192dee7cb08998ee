use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sconclab::flow::{
    default_steps, diffeo_window, flow_endpoint, flow_map, flow_map_inverse, forward_flow,
    hamiltonian_flow, integrate, symplectic_defect, variational_flow, FlowError, Integrator,
    WindowOptions,
};
use sconclab::linalg::{dist, norm, Matrix};
use sconclab::tonelli::{DomainSpec, TonelliSystem};

fn free(d: usize) -> TonelliSystem<f64> {
    TonelliSystem::free(DomainSpec::symmetric_box(d, 5.0).unwrap())
}

fn pendulum(d: usize) -> TonelliSystem<f64> {
    TonelliSystem::pendulum(DomainSpec::standard_torus(d).unwrap())
}

fn energy(sys: &TonelliSystem<f64>, x: &[f64], p: &[f64]) -> f64 {
    sys.hamiltonian_value(0.0, x, p).unwrap()
}

#[test]
fn free_characteristic_is_a_line() {
    let traj = hamiltonian_flow(&free(1), 0.0, 1.0, &[1.0], &[2.0], 1000).unwrap();
    let end = traj.last().unwrap();
    assert_eq!(end.t, 0.0);
    assert!((end.x[0] + 1.0).abs() < 1e-12);
    assert!((end.p[0] - 2.0).abs() < 1e-15);
    assert_eq!(traj.len(), 1001);
}

#[test]
fn pendulum_energy_drift() {
    let sys = pendulum(1);
    let (x0, p0) = ([0.3], [1.1]);
    let traj = forward_flow(&sys, 0.0, 1.0, &x0, &p0, 1000).unwrap();
    let e0 = energy(&sys, &x0, &p0);
    let drift = traj
        .iter()
        .map(|q| (energy(&sys, &q.x, &q.p) - e0).abs())
        .fold(0.0, f64::max);
    assert!(drift < 1e-8, "drift {drift}");
    assert!(drift / e0.abs() < 1e-7);

    // Reference trajectory at step 1e-5.
    let fine = flow_endpoint(&sys, 0.0, 1.0, &x0, &p0, 100_000).unwrap();
    let coarse = traj.last().unwrap();
    assert!(dist(&fine.x, &coarse.x) < 1e-10);
    assert!(dist(&fine.p, &coarse.p) < 1e-10);
}

#[test]
fn verlet_is_available_for_separable_systems_only() {
    let sys = pendulum(1);
    let traj = integrate(&sys, 0.0, 1.0, &[0.3], &[1.1], 1000, Integrator::Verlet).unwrap();
    let e0 = energy(&sys, &[0.3], &[1.1]);
    let end = traj.last().unwrap();
    assert!((energy(&sys, &end.x, &end.p) - e0).abs() < 1e-5);

    let td = TonelliSystem::mechanical(
        DomainSpec::standard_torus(1).unwrap(),
        sconclab::tonelli::Potential::Cos { amplitude: 1.0 },
        0.5,
    );
    assert!(matches!(
        integrate(&td, 0.0, 1.0, &[0.0], &[1.0], 10, Integrator::Verlet),
        Err(FlowError::InvalidParameter(_))
    ));
}

#[test]
fn round_trip_returns_to_start() {
    for sys in [free(2), pendulum(2)] {
        let (x, p) = ([0.7, 1.3], [0.4, -0.9]);
        let fwd = flow_endpoint(&sys, 0.0, 1.0, &x, &p, 1000).unwrap();
        let back = flow_endpoint(&sys, 1.0, 0.0, &fwd.x, &fwd.p, 1000).unwrap();
        assert!(sys.domain().distance(&back.x, &x) < 1e-8);
        assert!(dist(&back.p, &p) < 1e-8);
    }
}

#[test]
fn free_variational_matrix_is_exact() {
    for d in 1..=3 {
        let v = variational_flow(&free(d), 0.25, 1.0, &vec![0.1; d], &vec![0.5; d], 750).unwrap();
        let expected = Matrix::scaled_identity(d, -0.75);
        assert!(v.x_p.sub(&expected).max_abs() < 1e-14);
        assert!(v.p_p.sub(&Matrix::identity(d)).max_abs() < 1e-14);
    }
}

/// Central differences of the flow map with respect to terminal momentum.
fn fd_jacobian(sys: &TonelliSystem<f64>, x: &[f64], p: &[f64], t1: f64, t2: f64) -> Matrix<f64> {
    let d = x.len();
    let h = 1e-5;
    let steps = default_steps(t1, t2);
    let mut rows = vec![vec![0.0; d]; d];
    for j in 0..d {
        let mut pp = p.to_vec();
        let mut pm = p.to_vec();
        pp[j] += h;
        pm[j] -= h;
        let a = hamiltonian_flow(sys, t1, t2, x, &pp, steps).unwrap();
        let b = hamiltonian_flow(sys, t1, t2, x, &pm, steps).unwrap();
        let disp = sys
            .domain()
            .displacement(&b.last().unwrap().x, &a.last().unwrap().x);
        for i in 0..d {
            rows[i][j] = disp[i] / (2.0 * h);
        }
    }
    Matrix::from_rows(&rows)
}

#[test]
fn pendulum_variational_matrix_matches_finite_differences() {
    let sys = pendulum(2);
    let (x, p) = ([0.4, 2.0], [0.3, -0.6]);
    let v = variational_flow(&sys, 0.9, 1.0, &x, &p, 100).unwrap();
    assert!(v.x_p.sub(&Matrix::scaled_identity(2, -0.1)).max_abs() < 1e-3);
    let fd = fd_jacobian(&sys, &x, &p, 0.9, 1.0);
    assert!(v.x_p.sub(&fd).max_abs() < 1e-5);

    let v = variational_flow(&sys, 0.0, 1.0, &x, &p, 1000).unwrap();
    let fd = fd_jacobian(&sys, &x, &p, 0.0, 1.0);
    assert!(v.x_p.sub(&fd).max_abs() < 1e-5);
}

#[test]
fn monodromy_is_symplectic() {
    for sys in [free(2), pendulum(2), pendulum(1)] {
        let d = sys.dim();
        let defect =
            symplectic_defect(&sys, 0.0, 1.0, &vec![0.5; d], &vec![-0.8; d], 1000).unwrap();
        assert!(defect < 1e-6, "{}: {defect}", sys.name());
    }
}

fn probes() -> Vec<f64> {
    (1..=10).map(|k| 0.1 * k as f64).collect()
}

#[test]
fn free_window_accepts_every_probe() {
    let w = diffeo_window(
        &free(2),
        &[0.0, 0.0],
        3.0,
        &probes(),
        &WindowOptions::default(),
    )
    .unwrap();
    assert_eq!(w.c_r, 1.0);
    assert!((w.t_r - 1.0).abs() < 1e-12);
    assert!((w.m_r - 3.0).abs() < 1e-9);
    assert_eq!(w.probes.len(), 10);
}

#[test]
fn pendulum_window() {
    let opts = WindowOptions {
        t2: 1.0,
        ..WindowOptions::default()
    };
    let w = diffeo_window(&pendulum(1), &[0.0], 2.0, &probes(), &opts).unwrap();
    assert_eq!(w.c_r, 1.0);
    assert!(w.t_r >= 0.5, "t_R = {}", w.t_r);
    assert!(w.m_r > 0.0);
}

#[test]
fn quartic_window_is_rejected() {
    let sys = TonelliSystem::quartic(DomainSpec::symmetric_box(1, 3.0).unwrap());
    let r = diffeo_window(&sys, &[0.0], 1.0, &probes(), &WindowOptions::default());
    assert!(matches!(r, Err(FlowError::NotConvexAtX { .. })));
}

#[test]
fn free_flow_map_and_inverse() {
    let sys = free(2);
    let y = flow_map(&sys, &[0.5, -0.5], 0.0, 0.4, &[1.0, 2.0]).unwrap();
    assert!(dist(&y, &[0.1, -1.3]) < 1e-12);
    let inv = flow_map_inverse(&sys, &[0.5, -0.5], 0.0, 0.4, &y, None).unwrap();
    assert!(dist(&inv.p, &[1.0, 2.0]) < 1e-12);
}

#[test]
fn pendulum_inverse_round_trip_and_injectivity() {
    let sys = pendulum(2);
    let x = [1.0, 2.5];
    let opts = WindowOptions {
        t2: 1.0,
        ..WindowOptions::default()
    };
    let w = diffeo_window(&sys, &x, 2.0, &probes(), &opts).unwrap();
    let (t1, t2) = (1.0 - 0.3, 1.0);
    assert!(t2 - t1 <= w.t_r);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draw = |rng: &mut ChaCha8Rng| loop {
        let p: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
        if norm(&p) <= 2.0 {
            return p;
        }
    };
    for _ in 0..10 {
        let p = draw(&mut rng);
        let y = flow_map(&sys, &x, t1, t2, &p).unwrap();
        let inv = flow_map_inverse(&sys, &x, t1, t2, &y, Some(&w)).unwrap();
        assert!(dist(&inv.p, &p) < 1e-8, "{:?} vs {:?}", inv.p, p);
    }
    for _ in 0..100 {
        let (p1, p2) = (draw(&mut rng), draw(&mut rng));
        let y1 = flow_map(&sys, &x, t1, t2, &p1).unwrap();
        let y2 = flow_map(&sys, &x, t1, t2, &p2).unwrap();
        let bound = w.c_r / 4.0 * (t2 - t1) * dist(&p1, &p2);
        assert!(sys.domain().distance(&y1, &y2) >= bound);
    }

    let far = flow_map_inverse(&sys, &x, 0.0, 1.0 + w.t_r, &x, Some(&w));
    assert!(matches!(far, Err(FlowError::OutsideWindow(_))));
}

#[test]
fn single_precision_flow() {
    let sys = TonelliSystem::<f32>::free(DomainSpec::symmetric_box(1, 5.0).unwrap());
    let end = flow_endpoint(&sys, 1.0, 0.0, &[1.0], &[2.0], 100).unwrap();
    assert!((end.x[0] + 1.0).abs() < 1e-5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pendulum_energy_is_conserved(x in 0.0f64..6.28, p in -2.0f64..2.0) {
        let sys = pendulum(1);
        let end = flow_endpoint(&sys, 0.0, 1.0, &[x], &[p], 1000).unwrap();
        let e0 = energy(&sys, &[x], &[p]);
        prop_assert!((energy(&sys, &end.x, &end.p) - e0).abs() < 1e-7 * (1.0 + e0.abs()));
    }

    #[test]
    fn variational_matches_finite_differences(
        x in prop::collection::vec(0.0f64..6.28, 2),
        p in prop::collection::vec(-1.5f64..1.5, 2),
        tau in 0.05f64..0.8,
    ) {
        let sys = pendulum(2);
        let steps = default_steps(1.0 - tau, 1.0);
        let v = variational_flow(&sys, 1.0 - tau, 1.0, &x, &p, steps).unwrap();
        let fd = fd_jacobian(&sys, &x, &p, 1.0 - tau, 1.0);
        prop_assert!(v.x_p.sub(&fd).max_abs() < 1e-5);
    }

    #[test]
    fn symplectic_on_random_data(
        x in prop::collection::vec(0.0f64..6.28, 2),
        p in prop::collection::vec(-1.5f64..1.5, 2),
    ) {
        let defect = symplectic_defect(&pendulum(2), 0.0, 1.0, &x, &p, 1000).unwrap();
        prop_assert!(defect < 1e-6);
    }
}
