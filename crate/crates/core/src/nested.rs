//! Tiered service: serve the first tier, fold its peers into the source,
//! then serve the next tier from what the remaining peers picked up.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::analytic::{differentiated_service_time, equal_service_time, Regime};
use crate::error::{Error, Result};
use crate::fluidsim::{simulate, SimResult};
use crate::model::{
    make_up_distribution, reduce_ucp_to_up, validate_distribution_with, InitialDistribution,
    PeerSwarm, ValidationReport,
};
use crate::planner::{plan_differentiated, FlowPlan};
use crate::tol::MEASURED_PROP_TOL;

/// Instance left for the next tier once the first `L` peers finished.
#[derive(Debug, Clone, PartialEq)]
pub struct NextStage {
    /// Source plus the finished peers, pooled.
    pub source_upload: f64,
    pub peer_uploads: Vec<f64>,
    pub file_size: f64,
    /// Measured holdings of the remaining peers.
    pub distribution: InitialDistribution,
    /// Distribution checks at the measured-data tolerance.
    pub report: ValidationReport,
}

impl NextStage {
    pub fn is_empty(&self) -> bool {
        self.peer_uploads.is_empty()
    }

    pub fn swarm(&self) -> Result<PeerSwarm> {
        PeerSwarm::new(
            self.source_upload,
            self.peer_uploads.clone(),
            self.file_size,
        )
    }
}

/// Rebuild the instance faced by peers `L+1..N` from the simulator's final
/// holdings. Categories every remaining peer holds in full become common
/// data; the rest is unique.
pub fn post_download_distribution(
    swarm: &PeerSwarm,
    dist: &InitialDistribution,
    l: usize,
    plan: &FlowPlan,
    sim: &SimResult,
) -> Result<NextStage> {
    let n = swarm.len();
    if l < 1 || l > n {
        return Err(Error::Domain(format!(
            "first-set size {l} outside [1, {n}]"
        )));
    }
    if plan.target_count != l {
        return Err(Error::Domain(format!(
            "plan serves {} peers, expected {l}",
            plan.target_count
        )));
    }
    if let Some(p) = (0..l).find(|&p| !sim.finish_times[p].is_finite()) {
        return Err(Error::Stage {
            tier: 1,
            message: format!("peer {} never completed", p + 1),
        });
    }
    let file = swarm.file_size();
    let source_upload = swarm.source_upload() + swarm.head_upload(l);
    let peer_uploads = swarm.peer_uploads()[l..].to_vec();
    let rest: Vec<usize> = (l..n).collect();
    if rest.is_empty() {
        return Ok(NextStage {
            source_upload,
            peer_uploads,
            file_size: file,
            distribution: InitialDistribution::new(0.0, 0.0, Vec::new()),
            report: ValidationReport::default(),
        });
    }

    let mut sizes = vec![(1.0 - dist.phi) * file];
    sizes.extend_from_slice(&dist.unique_amounts);
    let full = |c: usize, p: usize| sim.category_state[p][c] >= sizes[c] * (1.0 - 1e-9);
    let common_cats: Vec<usize> = (0..sizes.len())
        .filter(|&c| sizes[c] > 0.0 && rest.iter().all(|&p| full(c, p)))
        .collect();
    let common = dist.common_data + common_cats.iter().map(|&c| sizes[c]).sum::<f64>();
    let unique: Vec<f64> = rest
        .iter()
        .map(|&p| {
            sim.category_state[p]
                .iter()
                .enumerate()
                .filter(|(c, _)| !common_cats.contains(c))
                .map(|(_, v)| v)
                .sum()
        })
        .collect();
    let phi = ((common + unique.iter().sum::<f64>()) / file).min(1.0);
    let distribution = InitialDistribution::new(phi, common, unique);

    let report = if rest.len() >= 2 {
        let next = PeerSwarm::new(source_upload, peer_uploads.clone(), file)?;
        validate_distribution_with(&next, &distribution, MEASURED_PROP_TOL)
    } else {
        let mut r = ValidationReport::default();
        r.push(
            "single_peer",
            true,
            "one peer left; proportionality is trivial",
        );
        r
    };
    if !report.passed() {
        let failed: Vec<String> = report
            .failures()
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect();
        return Err(Error::Stage {
            tier: 1,
            message: format!(
                "remaining peers' data is not proportional to upload: {}",
                failed.join("; ")
            ),
        });
    }
    Ok(NextStage {
        source_upload,
        peer_uploads,
        file_size: file,
        distribution,
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierStage {
    pub size: usize,
    pub stage_time: f64,
    pub regime: Regime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierSchedule {
    pub tiers: Vec<TierStage>,
    /// Absolute finish time of each tier.
    pub cumulative_times: Vec<f64>,
    /// Input distribution of each stage, as measured.
    pub stage_distributions: Vec<InitialDistribution>,
}

impl TierSchedule {
    pub fn total_time(&self) -> f64 {
        self.cumulative_times.last().copied().unwrap_or(0.0)
    }

    /// `tier,size,stage_time,cumulative_time,regime` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("tier,size,stage_time,cumulative_time,regime\n");
        for (k, (t, cum)) in self.tiers.iter().zip(&self.cumulative_times).enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                k + 1,
                t.size,
                t.stage_time,
                cum,
                t.regime
            );
        }
        s
    }
}

/// Idealised pure UP instance with the same peer-data fraction.
fn idealise(
    swarm: &PeerSwarm,
    dist: &InitialDistribution,
) -> Result<(PeerSwarm, InitialDistribution)> {
    let (reduced, up) = reduce_ucp_to_up(swarm, dist)?;
    let ideal = make_up_distribution(&reduced, up.phi.clamp(0.0, 1.0))?;
    Ok((reduced, ideal))
}

pub fn schedule_nested(
    swarm: &PeerSwarm,
    dist: &InitialDistribution,
    tiers: &[usize],
) -> Result<TierSchedule> {
    schedule_nested_with(swarm, dist, tiers, crate::fluidsim::DEFAULT_STEPS)
}

/// As [`schedule_nested`], simulating each intermediate stage with
/// `steps` time steps per horizon.
pub fn schedule_nested_with(
    swarm: &PeerSwarm,
    dist: &InitialDistribution,
    tiers: &[usize],
    steps: f64,
) -> Result<TierSchedule> {
    if tiers.is_empty() || tiers.contains(&0) {
        return Err(Error::Domain("tier sizes must be positive".into()));
    }
    if tiers.iter().sum::<usize>() != swarm.len() {
        return Err(Error::Domain(format!(
            "tier sizes sum to {}, swarm has {} peers",
            tiers.iter().sum::<usize>(),
            swarm.len()
        )));
    }
    if !(steps >= 1.0) {
        return Err(Error::Domain(format!(
            "steps per horizon must be >= 1, got {steps}"
        )));
    }

    let mut source = swarm.source_upload();
    let mut peers = swarm.peer_uploads().to_vec();
    let file = swarm.file_size();
    let mut current = dist.clone();
    let mut out = TierSchedule {
        tiers: Vec::with_capacity(tiers.len()),
        cumulative_times: Vec::with_capacity(tiers.len()),
        stage_distributions: Vec::with_capacity(tiers.len()),
    };
    let mut elapsed = 0.0;

    for (k, &size) in tiers.iter().enumerate() {
        let tier = k + 1;
        let stage_err = |e: Error| match e {
            Error::Stage { message, .. } => Error::Stage { tier, message },
            other => Error::Stage {
                tier,
                message: other.to_string(),
            },
        };
        out.stage_distributions.push(current.clone());
        let last = k + 1 == tiers.len();

        let (time, regime) = if peers.len() == 1 {
            let missing = file - current.common_data - current.unique_total();
            (missing.max(0.0) / source, Regime::BottleneckBound)
        } else {
            let stage = PeerSwarm::new(source, peers.clone(), file).map_err(stage_err)?;
            let (s, d) = idealise(&stage, &current).map_err(stage_err)?;
            if last {
                let o = equal_service_time(&s, &d).map_err(stage_err)?;
                (o.t_last, o.regime)
            } else {
                let o = differentiated_service_time(&s, &d, size).map_err(stage_err)?;
                let plan = plan_differentiated(&s, &d, size).map_err(stage_err)?;
                let sim =
                    simulate(&s, &d, &plan, plan.horizon / steps.max(1.0)).map_err(stage_err)?;
                let next =
                    post_download_distribution(&s, &d, size, &plan, &sim).map_err(stage_err)?;
                // The common block was factored out of the simulated file.
                let x = current.common_data;
                source = next.source_upload;
                peers = next.peer_uploads;
                current = InitialDistribution::new(
                    (next.distribution.phi * (file - x) + x) / file,
                    next.distribution.common_data + x,
                    next.distribution.unique_amounts,
                );
                (o.t_last, o.regime)
            }
        };
        elapsed += time;
        out.tiers.push(TierStage {
            size,
            stage_time: time,
            regime,
        });
        out.cumulative_times.push(elapsed);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluidsim::default_step;
    use crate::model::{make_up_distribution, validate_distribution_with};
    use approx::assert_relative_eq;

    const CANON: [f64; 18] = [
        10.0, 10.0, 9.0, 9.0, 8.0, 8.0, 7.0, 7.0, 6.0, 6.0, 5.0, 5.0, 4.0, 4.0, 3.0, 3.0, 2.0, 2.0,
    ];

    fn canon(phi: f64) -> (PeerSwarm, InitialDistribution) {
        let s = PeerSwarm::new(12.0, CANON.to_vec(), 1000.0).unwrap();
        let d = make_up_distribution(&s, phi).unwrap();
        (s, d)
    }

    fn stage(phi: f64, l: usize) -> NextStage {
        let (s, d) = canon(phi);
        let plan = plan_differentiated(&s, &d, l).unwrap();
        let sim = simulate(&s, &d, &plan, default_step(&plan)).unwrap();
        post_download_distribution(&s, &d, l, &plan, &sim).unwrap()
    }

    #[test]
    fn relayed_fresh_data_stays_proportional() {
        let next = stage(0.1, 12);
        assert_relative_eq!(next.source_upload, 102.0);
        assert_eq!(next.peer_uploads, vec![4.0, 4.0, 3.0, 3.0, 2.0, 2.0]);
        let a = &next.distribution.unique_amounts;
        for (ai, ci) in a.iter().zip(&next.peer_uploads) {
            assert_relative_eq!(ai / ci, a[0] / 4.0, max_relative = 1e-2);
        }
        assert!(next.distribution.phi > 0.1 * 16.0 / 108.0);
        let report = validate_distribution_with(&next.swarm().unwrap(), &next.distribution, 1e-2);
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn tail_keeps_only_its_own_piece_under_fig5a() {
        let (_, d) = canon(0.95);
        let next = stage(0.95, 12);
        for (k, a) in next.distribution.unique_amounts.iter().enumerate() {
            assert_relative_eq!(*a, d.unique_amounts[12 + k], max_relative = 1e-12);
        }
    }

    #[test]
    fn full_set_leaves_nothing() {
        assert!(stage(0.3, 18).is_empty());
    }

    #[test]
    fn single_tier_is_equal_service() {
        let (s, d) = canon(0.0);
        let sched = schedule_nested(&s, &d, &[18]).unwrap();
        assert_eq!(sched.total_time(), 150.0);
        assert_eq!(
            sched.total_time(),
            equal_service_time(&s, &d).unwrap().t_last
        );
    }

    #[test]
    fn two_tiers() {
        let (s, d) = canon(0.0);
        let sched = schedule_nested(&s, &d, &[12, 6]).unwrap();
        assert_relative_eq!(sched.tiers[0].stage_time, 101.2658, max_relative = 1e-6);
        assert_eq!(sched.tiers[0].regime, Regime::Eq7);
        assert!(sched.cumulative_times[1] > sched.cumulative_times[0]);
        assert_eq!(sched.stage_distributions.len(), 2);
        let csv = sched.to_csv();
        assert!(csv.starts_with("tier,size,stage_time,cumulative_time,regime\n1,12,"));
    }

    #[test]
    fn singleton_tiers() {
        let (s, d) = canon(0.5);
        let sched = schedule_nested_with(&s, &d, &[1; 18], 2000.0).unwrap();
        assert_eq!(sched.tiers.len(), 18);
        for w in sched.cumulative_times.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn rejects_bad_tiers() {
        let (s, d) = canon(0.5);
        assert!(schedule_nested(&s, &d, &[]).is_err());
        assert!(schedule_nested(&s, &d, &[10, 0, 8]).is_err());
        assert!(schedule_nested(&s, &d, &[10, 7]).is_err());
    }
}
