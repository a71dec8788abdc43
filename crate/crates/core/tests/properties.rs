use proptest::prelude::*;

use swarmtime::fluidsim::{oracle_min_time, simulate};
use swarmtime::multiplicity::{multiplicity_function, residual_rate_ur};
use swarmtime::planner::{check_plan, parse_plan, plan_to_text};
use swarmtime::{
    classic_multiplicity, derive_quantities, differentiated_service_time, equal_service_time,
    make_up_distribution, plan_differentiated, plan_equal_service, reduce_ucp_to_up,
    service_multiplicity, DataCategory, InitialDistribution, PeerSwarm,
};

fn swarm(max_n: usize) -> impl Strategy<Value = PeerSwarm> {
    (
        0.5f64..80.0,
        prop::collection::vec(1.0f64..20.0, 2..=max_n),
        prop_oneof![Just(100.0), 1.0f64..5000.0],
    )
        .prop_map(|(c0, mut c, f)| {
            c.sort_by(|a, b| b.total_cmp(a));
            PeerSwarm::new(c0, c, f).unwrap()
        })
}

fn up(s: &PeerSwarm, phi: f64) -> InitialDistribution {
    make_up_distribution(s, phi).unwrap()
}

fn phi_zero(s: &PeerSwarm) -> f64 {
    s.total_peer_upload() / (s.source_upload() + s.total_peer_upload())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn exchange_time_times_upload_is_peer_data(s in swarm(12), phi in 0.0f64..=1.0) {
        let q = derive_quantities(&s, &up(&s, phi)).unwrap();
        let lhs = q.exchange_time * q.total_peer_upload;
        prop_assert!((lhs - phi * s.file_size()).abs() <= 1e-9 * s.file_size());
    }

    #[test]
    fn multiplicity_function_decreases(s in swarm(14)) {
        let f: Vec<f64> = (2..=s.len()).map(|m| multiplicity_function(&s, m).unwrap()).collect();
        prop_assert!(f.windows(2).all(|w| w[1] < w[0]));
        let m = classic_multiplicity(&s).m;
        prop_assert!(m >= 1);
        if m >= 2 {
            prop_assert!(s.source_upload() <= multiplicity_function(&s, m).unwrap());
        }
        if m < s.len() {
            prop_assert!(s.source_upload() > multiplicity_function(&s, m + 1).unwrap());
        }
    }

    #[test]
    fn sorting_never_lowers_classic_multiplicity(c0 in 0.5f64..60.0, c in prop::collection::vec(1.0f64..20.0, 2..12)) {
        let s = PeerSwarm::new(c0, c, 100.0).unwrap();
        prop_assert!(classic_multiplicity(&s.sorted_descending()).m >= classic_multiplicity(&s).m);
    }

    #[test]
    fn ur_strictly_decreasing(s in swarm(12), frac in 0.0f64..1.0) {
        let d = up(&s, frac * phi_zero(&s));
        let ur: Vec<f64> = (2..s.len()).map(|l| residual_rate_ur(&s, &d, l).unwrap()).collect();
        prop_assert!(ur.windows(2).all(|w| w[1] < w[0]), "{:?}", ur);
    }

    #[test]
    fn reduction_is_idempotent(s in swarm(8), phi in 0.05f64..1.0, share in 0.0f64..0.99) {
        let x = share * phi * s.file_size();
        let ratio = (phi * s.file_size() - x) / s.total_peer_upload();
        let a = s.peer_uploads().iter().map(|c| c * ratio).collect();
        let d = InitialDistribution::new(phi, x, a);
        let (s1, d1) = reduce_ucp_to_up(&s, &d).unwrap();
        let (s2, d2) = reduce_ucp_to_up(&s1, &d1).unwrap();
        prop_assert_eq!(&s1, &s2);
        prop_assert_eq!(&d1, &d2);
        prop_assert!((s1.file_size() - (s.file_size() - x)).abs() < 1e-9 * s.file_size());
    }

    #[test]
    fn finish_time_never_beats_the_bottleneck(s in swarm(12), phi in 0.0f64..=1.0) {
        let d = up(&s, phi);
        let q = derive_quantities(&s, &d).unwrap();
        for l in 1..=s.len() {
            let t = differentiated_service_time(&s, &d, l).unwrap().t_last;
            prop_assert!(t >= q.bottleneck_time * (1.0 - 1e-12));
        }
        prop_assert!(equal_service_time(&s, &d).unwrap().t_last >= q.bottleneck_time * (1.0 - 1e-12));
    }

    #[test]
    fn more_peer_data_never_hurts(s in swarm(12), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (dl, dh) = (up(&s, lo), up(&s, hi));
        for l in 1..=s.len() {
            let tl = differentiated_service_time(&s, &dl, l).unwrap().t_last;
            let th = differentiated_service_time(&s, &dh, l).unwrap().t_last;
            prop_assert!(th <= tl * (1.0 + 1e-12), "L={} {} > {}", l, th, tl);
        }
        let ml = service_multiplicity(&s, &dl).unwrap().m;
        let mh = service_multiplicity(&s, &dh).unwrap().m;
        prop_assert!(mh <= ml || lo == 0.0);
    }

    #[test]
    fn flat_up_to_multiplicity_then_rising(s in swarm(12), phi in 0.0f64..=1.0) {
        let d = up(&s, phi);
        let m = service_multiplicity(&s, &d).unwrap().m;
        let t: Vec<f64> = (1..=s.len())
            .map(|l| differentiated_service_time(&s, &d, l).unwrap().t_last)
            .collect();
        for l in 2..=s.len() {
            if l <= m {
                prop_assert_eq!(t[l - 1], t[0]);
            }
            prop_assert!(t[l - 1] >= t[l - 2] * (1.0 - 1e-12));
        }
        if m < s.len() {
            prop_assert!(t[m] > t[0] * (1.0 + 1e-12) || m == 0);
        }
    }

    #[test]
    fn full_set_is_equal_service(s in swarm(12), phi in 0.0f64..=1.0) {
        let d = up(&s, phi);
        let a = differentiated_service_time(&s, &d, s.len()).unwrap().t_last;
        let b = equal_service_time(&s, &d).unwrap().t_last;
        prop_assert!((a - b).abs() <= 1e-9 * b);
    }

    #[test]
    fn plans_are_feasible(s in swarm(9), phi in 0.0f64..=1.0, pick in 0usize..100) {
        let d = up(&s, phi);
        let l = 1 + pick % s.len();
        let plan = plan_differentiated(&s, &d, l).unwrap();
        let t = differentiated_service_time(&s, &d, l).unwrap().t_last;
        prop_assert_eq!(plan.horizon, t);
        prop_assert_eq!(plan.target_count, l);
        let check = check_plan(&plan, &s, &d);
        prop_assert!(check.passed(), "{}", check.report);

        let plan = plan_equal_service(&s, &d).unwrap();
        let check = check_plan(&plan, &s, &d);
        prop_assert!(check.passed(), "{}", check.report);
    }

    #[test]
    fn plan_text_round_trips(s in swarm(6), phi in 0.0f64..=1.0, pick in 0usize..100) {
        let d = up(&s, phi);
        let plan = plan_differentiated(&s, &d, 1 + pick % s.len()).unwrap();
        prop_assert_eq!(parse_plan(&plan_to_text(&plan)).unwrap(), plan);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulation_respects_category_sizes(s in swarm(7), phi in 0.0f64..=1.0, pick in 0usize..100) {
        let d = up(&s, phi);
        let l = 1 + pick % s.len();
        let plan = plan_differentiated(&s, &d, l).unwrap();
        let r = simulate(&s, &d, &plan, plan.horizon / 2000.0).unwrap();
        prop_assert!(r.violations.is_empty(), "{:?}", r.violations);
        let fresh = (1.0 - phi) * s.file_size();
        for p in 0..s.len() {
            prop_assert!(r.amount(p, DataCategory::Fresh) <= fresh * (1.0 + 1e-12));
            for i in 0..s.len() {
                prop_assert!(r.amount(p, DataCategory::Unique(i)) <= d.unique_amounts[i] * (1.0 + 1e-12));
            }
        }
        let t = plan.horizon;
        prop_assert!((r.max_finish(l) - t).abs() <= 2e-3 * t);
    }

    #[test]
    fn oracle_agrees_and_respects_bottleneck(s in swarm(5), phi in 0.0f64..=1.0, pick in 0usize..100) {
        let d = up(&s, phi);
        let l = 1 + pick % s.len();
        let o = oracle_min_time(&s, &d, l, 1e-4 * s.total_peer_upload()).unwrap();
        let q = derive_quantities(&s, &d).unwrap();
        let t = differentiated_service_time(&s, &d, l).unwrap().t_last;
        prop_assert!(o >= q.bottleneck_time * (1.0 - 1e-9));
        prop_assert!(o >= t * (1.0 - 1e-6), "oracle {} below analytic {}", o, t);
        prop_assert!(o <= t * 1.001, "oracle {} vs analytic {}", o, t);
    }
}

/// Error of the simulated finish time shrinks at least in proportion to the
/// step once the step is small.
#[test]
fn simulation_converges_first_order() {
    let s = PeerSwarm::new(
        12.0,
        vec![
            10.0, 10.0, 9.0, 9.0, 8.0, 8.0, 7.0, 7.0, 6.0, 6.0, 5.0, 5.0, 4.0, 4.0, 3.0, 3.0, 2.0,
            2.0,
        ],
        1000.0,
    )
    .unwrap();
    for (phi, l) in [(0.5, 18), (0.1, 12), (0.95, 12), (0.3, 4), (0.0, 12)] {
        let d = up(&s, phi);
        let plan = plan_differentiated(&s, &d, l).unwrap();
        let err = |steps: f64| {
            let r = simulate(&s, &d, &plan, plan.horizon / steps).unwrap();
            (r.max_finish(l) - plan.horizon).abs()
        };
        let (coarse, fine) = (err(500.0), err(1000.0));
        assert!(
            fine <= 0.5 * coarse * (1.0 + 1e-6) || fine <= 1e-9 * plan.horizon,
            "phi={phi} L={l}: {coarse} -> {fine}"
        );
    }
}
