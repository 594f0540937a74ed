use proptest::prelude::*;
use rand::Rng;

use wicksell::estimators::{
    empirical_slope, iie, profile_projection, projected_iie, projected_naive, q_discrepancy_exact, validate_cone,
    ConeId, EmpiricalFit, EvalGrid, Partition, StepFn,
};
use wicksell::model::{Interval, WicksellModel};
use wicksell::sampling::{sample_batch, SampleBatch, StreamKey};

const M: f64 = 10.0;

fn flat() -> Interval {
    Interval::new(2.0, 3.0).unwrap()
}

fn batch_strategy() -> impl Strategy<Value = SampleBatch> {
    prop::collection::vec(0.01f64..9.99, 1..80).prop_map(|z| SampleBatch::from_values(z, "prop").unwrap())
}

fn full_grid(b: &SampleBatch) -> EvalGrid {
    let mut pts = b.z.clone();
    pts.extend([2.0, 3.0]);
    EvalGrid::new(M, 200, &pts).unwrap()
}

/// Smallest grid maximizer of `U_n(s) - a s` over `0`, the observations and `M`.
fn smallest_argmax(fit: &EmpiricalFit, a: f64) -> f64 {
    let mut best = (0.0, 0.0);
    let pts = fit.u().observations().iter().zip(fit.u_at_observations()).map(|(x, u)| (*x, *u));
    for (s, u) in pts.chain(std::iter::once((M, fit.u().total()))) {
        let v = u - a * s;
        if v > best.1 {
            best = (s, v);
        }
    }
    best.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lcm_majorizes_and_touches_ends(b in batch_strategy()) {
        let fit = EmpiricalFit::new(&b, M).unwrap();
        let h = fit.u_lcm();
        for (x, u) in b.z.iter().zip(fit.u_at_observations()) {
            prop_assert!(h.eval(*x) >= u - 1e-12);
        }
        for x in [0.5, 2.5, 7.0] {
            prop_assert!(h.eval(x) >= fit.u().eval(x) - 1e-12);
        }
        prop_assert_eq!(h.eval(0.0), 0.0);
        prop_assert!((h.eval(M) - fit.u().total()).abs() < 1e-12);
    }

    #[test]
    fn switch_relation(b in batch_strategy(), x in 0.0f64..M, t in 0.0f64..1.2) {
        let fit = EmpiricalFit::new(&b, M).unwrap();
        let a = t * fit.iie_at(0.0);
        let lhs = fit.iie_at(x) <= a;
        let rhs = smallest_argmax(&fit, a) <= x;
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn outputs_lie_in_their_cones(b in batch_strategy()) {
        let g = full_grid(&b);
        let part = Partition::around_flat(flat(), M).unwrap();
        prop_assert!(validate_cone(&iie(&b, &g).unwrap(), ConeId::V, flat(), &part));
        prop_assert!(validate_cone(&projected_iie(&b, flat(), &g).unwrap(), ConeId::VFlat, flat(), &part));
        prop_assert!(validate_cone(&projected_naive(&b, flat(), &g).unwrap(), ConeId::VFlat, flat(), &part));
        prop_assert!(validate_cone(&empirical_slope(&b, &part).unwrap(), ConeId::VBar, flat(), &part));
        prop_assert!(validate_cone(&profile_projection(&b, flat(), &g).unwrap().estimate, ConeId::VFlat, flat(), &part));
    }

    #[test]
    fn projected_iie_is_flat_average(b in batch_strategy()) {
        let g = full_grid(&b);
        let v = iie(&b, &g).unwrap();
        let p = projected_iie(&b, flat(), &g).unwrap();
        prop_assert!((v.integrate(2.0, 3.0) - p.eval(2.5)).abs() < 1e-12);
        let (left, mid, right) = (p.eval(2.0 - 1e-9), p.eval(2.5), p.eval(3.0));
        prop_assert!(left >= mid - 1e-12 && mid >= right - 1e-12, "{} {} {}", left, mid, right);
    }

    #[test]
    fn profile_matches_chord_construction(b in batch_strategy()) {
        let g = full_grid(&b);
        let p = profile_projection(&b, flat(), &g).unwrap();
        let n = projected_naive(&b, flat(), &g).unwrap();
        prop_assert!(p.estimate.sup_distance(&n) <= 1e-6, "distance {}", p.estimate.sup_distance(&n));
    }
}

/// Random member of the requested cone on `[0, M]`.
fn random_member<R: Rng>(rng: &mut R, cone: ConeId, part: &Partition) -> StepFn {
    match cone {
        ConeId::VBar => {
            let bp = part.breakpoints().to_vec();
            let mut vals: Vec<f64> = (0..bp.len() - 1).map(|_| rng.random_range(0.0..2.0)).collect();
            vals.push(0.0);
            StepFn::new(bp, vals).unwrap()
        }
        ConeId::V | ConeId::VFlat => {
            let k = rng.random_range(1..12);
            let mut knots: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..M)).collect();
            if cone == ConeId::VFlat {
                knots.retain(|x| !(*x > 2.0 && *x < 3.0));
                knots.extend([2.0, 3.0]);
            }
            knots.push(0.0);
            knots.sort_by(f64::total_cmp);
            knots.dedup();
            let mut vals: Vec<f64> = (0..knots.len()).map(|_| rng.random_range(0.0..2.0)).collect();
            vals.sort_by(|a, b| b.total_cmp(a));
            knots.push(M);
            vals.push(0.0);
            StepFn::new(knots, vals).unwrap()
        }
    }
}

/// `(1 - t) f + t h` on the union of knots.
fn mix(f: &StepFn, h: &StepFn, t: f64) -> StepFn {
    let mut k: Vec<f64> = f.knots().iter().chain(h.knots()).copied().collect();
    k.sort_by(f64::total_cmp);
    k.dedup();
    let v = k.iter().map(|x| (1.0 - t) * f.eval(*x) + t * h.eval(*x)).collect();
    StepFn::new(k, v).unwrap()
}

#[test]
fn estimators_minimize_their_discrepancy() {
    let model = WicksellModel::preset("paper-sec5").unwrap();
    let m = model.support_bound();
    assert!(m >= M);
    let dom = Interval::new(0.0, M).unwrap();
    let part = Partition::around_flat(flat(), M).unwrap();
    let mut rng = StreamKey::new(11, 0).rng();
    for rep in 0..10u64 {
        let mut b = sample_batch(&model, 60, StreamKey::new(5, rep)).unwrap();
        b.z.retain(|z| *z < M);
        let g = full_grid(&b);
        let fit = EmpiricalFit::new(&b, M).unwrap();
        let u = fit.u();
        let hull = fit.u_lcm();
        let cases: Vec<(StepFn, ConeId, bool)> = vec![
            (iie(&b, &g).unwrap(), ConeId::V, false),
            (empirical_slope(&b, &part).unwrap(), ConeId::VBar, false),
            (projected_naive(&b, flat(), &g).unwrap(), ConeId::VFlat, false),
            (profile_projection(&b, flat(), &g).unwrap().estimate, ConeId::VFlat, false),
            // the projected IIE projects the IIE, not the naive estimator
            (projected_iie(&b, flat(), &g).unwrap(), ConeId::VFlat, true),
        ];
        for (est, cone, against_iie) in cases {
            let q = |h: &StepFn| {
                if against_iie {
                    q_discrepancy_exact(h, hull, dom)
                } else {
                    q_discrepancy_exact(h, u, dom)
                }
            };
            let q_est = q(&est);
            for _ in 0..50 {
                let other = random_member(&mut rng, cone, &part);
                assert!(validate_cone(&other, cone, flat(), &part));
                let t: f64 = rng.random_range(0.0..1.0);
                for cand in [other.clone(), mix(&est, &other, t), mix(&est, &other, 1e-3)] {
                    assert!(q_est <= q(&cand) + 1e-9, "{cone:?} rep {rep}: {q_est} > {}", q(&cand));
                }
            }
        }
    }
}

#[test]
fn population_slope_recovers_v_on_flat() {
    let model = WicksellModel::preset("paper-sec5").unwrap();
    let slope = model.function_u(3.0).unwrap() - model.function_u(2.0).unwrap();
    assert!((slope - model.function_v(2.5)).abs() < 1e-10);
}
