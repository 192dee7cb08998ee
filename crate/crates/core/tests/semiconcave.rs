use proptest::prelude::*;
use sconclab::linalg::{dist, dot, norm, sub};
use sconclab::semiconcave::{
    min_parabolas, neg_norm, paraboloid, phi1, phi2, MarginalFunction, SemiconcaveError,
};
use sconclab::tonelli::DomainSpec;

const TIE: f64 = 1e-9;

fn boxd(d: usize, a: f64) -> DomainSpec<f64> {
    DomainSpec::symmetric_box(d, a).unwrap()
}

/// Piecewise definition of the dyadic example, written out case by case.
fn dyadic_formula(x1: f64, with_ramp: bool) -> f64 {
    if with_ramp && x1 >= 0.0 {
        return -x1;
    }
    for n in 1..=60 {
        let a = -(0.5f64.powi(n - 1));
        let b = -(0.5f64.powi(n));
        if x1 >= a && x1 <= b {
            return (x1 - a) * (x1 - b);
        }
    }
    0.0
}

fn one_sided_slopes(f: impl Fn(f64) -> f64, x: f64) -> (f64, f64) {
    let h = 1e-7;
    ((f(x) - f(x - h)) / h, (f(x + h) - f(x)) / h)
}

fn builtins() -> Vec<MarginalFunction<f64>> {
    vec![
        phi1(boxd(1, 2.0), 12).unwrap(),
        phi2(boxd(1, 2.0), 12).unwrap(),
        phi1(boxd(2, 2.0), 12).unwrap(),
        phi2(boxd(2, 2.0), 12).unwrap(),
        neg_norm(boxd(1, 3.0), 2).unwrap(),
        neg_norm(boxd(2, 3.0), 256).unwrap(),
        neg_norm(boxd(3, 2.0), 200).unwrap(),
        min_parabolas(boxd(1, 3.0)).unwrap(),
        min_parabolas(boxd(2, 3.0)).unwrap(),
        paraboloid(boxd(2, 2.0), -2.0).unwrap(),
    ]
}

#[test]
fn evaluate_examples() {
    let mp = min_parabolas(boxd(1, 3.0)).unwrap();
    assert_eq!(mp.evaluate(&[0.0]).unwrap(), 1.0);

    let p1 = phi1(boxd(1, 2.0), 12).unwrap();
    let oracle = dyadic_formula(-0.75, false);
    assert!((oracle - -0.0625).abs() < 1e-15);
    assert!((p1.evaluate(&[-0.75]).unwrap() - oracle).abs() < 1e-15);

    let p2 = phi2(boxd(1, 3.0), 12).unwrap();
    assert_eq!(p2.evaluate(&[2.0]).unwrap(), -2.0);
}

#[test]
fn truncated_family_matches_formula_above_resolution() {
    let p1 = phi1(boxd(1, 2.0), 12).unwrap();
    let p2 = phi2(boxd(1, 2.0), 12).unwrap();
    for i in 0..=4000 {
        let x = -2.0 + 4.0 * i as f64 / 4000.0;
        if x > -(0.5f64.powi(12)) && x < 0.0 {
            continue;
        }
        assert!((p1.evaluate(&[x]).unwrap() - dyadic_formula(x, false)).abs() < 1e-14);
        assert!((p2.evaluate(&[x]).unwrap() - dyadic_formula(x, true)).abs() < 1e-14);
    }
}

#[test]
fn active_set_examples() {
    let mp = min_parabolas(boxd(1, 3.0)).unwrap();
    assert_eq!(mp.active_set(&[0.5], TIE).unwrap().indices, vec![0]);
    assert_eq!(mp.active_set(&[0.0], TIE).unwrap().indices, vec![0, 1]);
    let p2 = phi2(boxd(1, 2.0), 12).unwrap();
    // Index 0 is the zero piece, index 1 is −x₁.
    assert_eq!(p2.active_set(&[0.0], TIE).unwrap().indices, vec![0, 1]);
    assert!(matches!(
        mp.active_set(&[0.0], 0.0),
        Err(SemiconcaveError::InvalidParameter(_))
    ));
}

fn segment_ends(p: &sconclab::semiconcave::Polytope<f64>) -> (f64, f64) {
    let v: Vec<f64> = p.vertices().iter().map(|v| v[0]).collect();
    (
        v.iter().copied().fold(f64::INFINITY, f64::min),
        v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    )
}

#[test]
fn superdifferential_examples() {
    let nn = neg_norm(boxd(2, 3.0), 256).unwrap();
    let sd = nn.superdifferential(&[1.0, 0.0], TIE).unwrap();
    assert!(sd.is_singleton());
    assert!(dist(&sd.vertices()[0], &[-1.0, 0.0]) < 1e-12);

    let p1 = phi1(boxd(1, 2.0), 12).unwrap();
    let (l, r) = one_sided_slopes(|x| dyadic_formula(x, false), -1.0);
    let (lo, hi) = segment_ends(&p1.superdifferential(&[-1.0], TIE).unwrap());
    assert!((lo - r).abs() < 1e-6 && (hi - l).abs() < 1e-6);
    assert!((lo + 0.5).abs() < 1e-15 && hi.abs() < 1e-15);

    let p2 = phi2(boxd(1, 2.0), 12).unwrap();
    let (l, r) = one_sided_slopes(|x| dyadic_formula(x, true), 0.0);
    let (lo, hi) = segment_ends(&p2.superdifferential(&[0.0], TIE).unwrap());
    assert!((lo - r).abs() < 1e-6 && (hi - l).abs() < 1e-6);
    assert_eq!((lo, hi), (-1.0, 0.0));
}

#[test]
fn reachable_gradient_examples() {
    let nn1 = neg_norm(boxd(1, 3.0), 2).unwrap();
    let mut g: Vec<f64> = nn1
        .reachable_gradients(&[0.0], 0.1, 200, 1)
        .unwrap()
        .iter()
        .map(|v| v[0])
        .collect();
    g.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(g, vec![-1.0, 1.0]);

    let nn2 = neg_norm(boxd(2, 3.0), 256).unwrap();
    let g = nn2
        .reachable_gradients(&[0.0, 0.0], 0.1, 20_000, 2)
        .unwrap();
    assert!(g.len() > 200, "only {} directions reached", g.len());
    assert!(g.iter().all(|v| (norm(v) - 1.0).abs() < 1e-12));

    let p2 = phi2(boxd(1, 2.0), 12).unwrap();
    let (l, r) = one_sided_slopes(|x| dyadic_formula(x, true), -0.25);
    let mut g: Vec<f64> = p2
        .reachable_gradients(&[-0.25], 0.01, 500, 3)
        .unwrap()
        .iter()
        .map(|v| v[0])
        .collect();
    g.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(g.len(), 2);
    assert!((g[0] - r).abs() < 1e-6 && (g[1] - l).abs() < 1e-6);
    assert!((g[0] + 0.125).abs() < 1e-15 && (g[1] - 0.25).abs() < 1e-15);
}

#[test]
fn stratum_dimension_examples() {
    let nn = neg_norm(boxd(2, 3.0), 256).unwrap();
    assert_eq!(nn.stratum_dimension(&[0.3, -0.7], TIE).unwrap(), 0);
    assert_eq!(nn.stratum_dimension(&[0.0, 0.0], TIE).unwrap(), 2);
    let p2 = phi2(boxd(2, 2.0), 12).unwrap();
    assert_eq!(p2.stratum_dimension(&[0.0, 0.3], TIE).unwrap(), 1);
}

#[test]
fn exact_singular_abscissae_have_label_one() {
    let p1 = phi1(boxd(2, 2.0), 12).unwrap();
    let p2 = phi2(boxd(2, 2.0), 12).unwrap();
    for n in 1..=12 {
        let x = -(0.5f64.powi(n - 1));
        assert_eq!(
            p1.stratum_dimension(&[x, 0.1], TIE).unwrap(),
            1,
            "phi1 n={n}"
        );
        assert_eq!(
            p2.stratum_dimension(&[x, 0.1], TIE).unwrap(),
            1,
            "phi2 n={n}"
        );
    }
    // Midpoints of the dyadic segments are smooth.
    for n in 1..=10 {
        let x = -0.75 * 0.5f64.powi(n - 1);
        assert_eq!(p1.stratum_dimension(&[x, 0.0], TIE).unwrap(), 0);
    }
}

#[test]
fn hessian_bounds_hold() {
    for f in builtins() {
        assert!(f.hessian_bound_excess(20, 4) <= 1e-12, "{}", f.name());
    }
}

#[test]
fn single_precision_marginal() {
    let f = min_parabolas::<f32>(DomainSpec::symmetric_box(1, 3.0).unwrap()).unwrap();
    assert_eq!(f.evaluate(&[0.0]).unwrap(), 1.0);
    assert_eq!(f.stratum_dimension(&[0.0], 1e-6).unwrap(), 1);
}

fn point_in(f: &MarginalFunction<f64>, u: &[f64]) -> Vec<f64> {
    let d = f.domain();
    (0..d.dim())
        .map(|i| d.lower()[i] + u[i] * d.extent(i))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn semiconcavity_inequality(
        which in 0usize..10,
        u in prop::collection::vec(0.0f64..1.0, 3),
        w in prop::collection::vec(0.0f64..1.0, 3),
    ) {
        let f = &builtins()[which];
        let x = point_in(f, &u);
        let y = point_in(f, &w);
        let c = f.hessian_bound();
        let sd = f.superdifferential(&x, TIE).unwrap();
        let fx = f.evaluate(&x).unwrap();
        let fy = f.evaluate(&y).unwrap();
        let r = sub(&y, &x);
        for p in sd.vertices() {
            let bound = fx + dot(p, &r) + 0.5 * c * dot(&r, &r) + 1e-8;
            prop_assert!(fy <= bound, "{}: {} > {}", f.name(), fy, bound);
        }
    }

    #[test]
    fn reachable_gradients_lie_in_superdifferential(
        which in 0usize..10,
        u in prop::collection::vec(0.0f64..1.0, 3),
        snap in any::<bool>(),
    ) {
        let f = &builtins()[which];
        let mut x = point_in(f, &u);
        if snap {
            // Land on the interesting loci as well.
            x[0] = match f.name() {
                "phi1" | "phi2" => -0.5,
                _ => 0.0,
            };
        }
        let sd = f.superdifferential(&x, TIE).unwrap();
        let g = f.reachable_gradients(&x, 1e-3, 400, 9).unwrap();
        for p in &g {
            prop_assert!(sd.distance(p) < 1e-9);
        }
    }

    #[test]
    fn piece_gradients_match_central_differences(
        which in 0usize..10,
        u in prop::collection::vec(0.0f64..1.0, 3),
    ) {
        let f = &builtins()[which];
        let x = point_in(f, &u);
        let h = 1e-5;
        for piece in f.pieces() {
            let g = piece.gradient(&x);
            for k in 0..x.len() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let fd = (piece.value(&xp) - piece.value(&xm)) / (2.0 * h);
                prop_assert!((fd - g[k]).abs() < 1e-5);
            }
        }
    }
}
