use swarmtime::nested::schedule_nested;
use swarmtime::{equal_service_time, make_up_distribution, PeerSwarm, Regime};

const CANON: [f64; 18] = [
    10.0, 10.0, 9.0, 9.0, 8.0, 8.0, 7.0, 7.0, 6.0, 6.0, 5.0, 5.0, 4.0, 4.0, 3.0, 3.0, 2.0, 2.0,
];

fn canon() -> PeerSwarm {
    PeerSwarm::new(12.0, CANON.to_vec(), 1000.0).unwrap()
}

fn final_time(phi: f64, tiers: &[usize]) -> f64 {
    let s = canon();
    let d = make_up_distribution(&s, phi).unwrap();
    schedule_nested(&s, &d, tiers).unwrap().total_time()
}

/// Merging two adjacent tiers never delays the last tier beyond the
/// simulator's step error (each stage is rebuilt from a simulated run).
#[test]
fn merging_tiers_does_not_delay_the_last_tier() {
    let pairs: [(&[usize], &[usize]); 5] = [
        (&[12, 6], &[18]),
        (&[9, 9], &[18]),
        (&[6, 6, 6], &[12, 6]),
        (&[6, 6, 6], &[6, 12]),
        (&[3, 3, 12], &[6, 12]),
    ];
    for phi in [0.0, 0.1, 0.5, 0.95] {
        for (split, merged) in pairs {
            let (ts, tm) = (final_time(phi, split), final_time(phi, merged));
            assert!(
                tm <= ts * (1.0 + 1e-4),
                "phi={phi}: {split:?} -> {ts}, {merged:?} -> {tm}"
            );
        }
    }
}

#[test]
fn single_tier_matches_equal_service_exactly() {
    let s = canon();
    for phi in [0.0, 0.3, 0.9, 1.0] {
        let d = make_up_distribution(&s, phi).unwrap();
        let sched = schedule_nested(&s, &d, &[18]).unwrap();
        assert_eq!(
            sched.total_time(),
            equal_service_time(&s, &d).unwrap().t_last
        );
    }
}

#[test]
fn singleton_tiers_use_the_single_peer_form() {
    let s = canon();
    let d = make_up_distribution(&s, 0.95).unwrap();
    let sched = schedule_nested(&s, &d, &[1; 18]).unwrap();
    assert_eq!(sched.tiers.len(), 18);
    assert_eq!(sched.tiers[0].regime, Regime::Eq18Single);
    assert!((sched.tiers[0].stage_time - 8.291246).abs() < 1e-5);
    for w in sched.cumulative_times.windows(2) {
        assert!(w[1] > w[0]);
    }
    assert_eq!(sched.stage_distributions.len(), 18);
    assert_eq!(sched.stage_distributions[17].unique_amounts.len(), 1);
}

#[test]
fn stage_distributions_shrink_with_the_swarm() {
    let s = canon();
    let d = make_up_distribution(&s, 0.1).unwrap();
    let sched = schedule_nested(&s, &d, &[6, 6, 6]).unwrap();
    let sizes: Vec<usize> = sched
        .stage_distributions
        .iter()
        .map(|d| d.unique_amounts.len())
        .collect();
    assert_eq!(sizes, vec![18, 12, 6]);
    for d in &sched.stage_distributions {
        assert!((0.0..=1.0).contains(&d.phi));
        assert!(d.unique_amounts.iter().all(|a| *a >= 0.0));
    }
}
