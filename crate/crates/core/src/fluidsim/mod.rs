//! Discrete-time fluid execution of flow plans.
//!
//! Each step moves `rate * step` along every flow, clipped by what the
//! sender can forward and by what the receiver still lacks. Relays forward
//! from the amount they held at the start of the step, so a relay stream
//! trails its feed by one step and finish times converge to first order.

pub mod oracle;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{InitialDistribution, PeerSwarm};
use crate::planner::{DataCategory, FlowPlan, Sender};
use crate::tol::ABS_CAP_TOL;

pub use oracle::oracle_min_time;

/// Default number of steps per planned horizon.
pub const DEFAULT_STEPS: f64 = 1e4;

/// A relay is flagged only if it delivers less than this fraction of its
/// planned share while the receiver is still short.
const STARVATION_FRACTION: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Capacity,
    Causality,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Capacity => "capacity",
            Self::Causality => "causality",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub time: f64,
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// Time each peer held the whole file; infinite if it never did.
    pub finish_times: Vec<f64>,
    /// `category_state[p][0]` is fresh data, `category_state[p][1 + i]`
    /// is peer `i`'s piece.
    pub category_state: Vec<Vec<f64>>,
    pub violations: Vec<Violation>,
    pub step: f64,
    /// Simulated time when the run stopped.
    pub end_time: f64,
}

impl SimResult {
    /// Latest finish among the first `count` peers.
    pub fn max_finish(&self, count: usize) -> f64 {
        self.finish_times[..count]
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }

    pub fn amount(&self, peer: usize, category: DataCategory) -> f64 {
        self.category_state[peer][category_index(category)]
    }

    /// `peer,finish_time` rows, then a `violations` section.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("peer,finish_time\n");
        for (p, t) in self.finish_times.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{}",
                p + 1,
                if t.is_finite() {
                    t.to_string()
                } else {
                    "inf".into()
                }
            );
        }
        s.push_str("\nviolations\ntime,kind,detail\n");
        for v in &self.violations {
            let _ = writeln!(
                s,
                "{},{},\"{}\"",
                v.time,
                v.kind.as_str(),
                v.detail.replace('"', "'")
            );
        }
        s
    }
}

fn category_index(c: DataCategory) -> usize {
    match c {
        DataCategory::Fresh => 0,
        DataCategory::Unique(i) => i + 1,
    }
}

/// How much a sender can push along a flow.
#[derive(Clone, Copy, PartialEq)]
enum Supply {
    /// The source, or a peer sending its own piece.
    Unlimited,
    /// A relay: limited by what reached the sender through non-relay flows.
    Fed,
    /// A non-relay flow of data the sender did not start with: limited by
    /// everything the sender holds of that category.
    Held,
}

struct SimFlow {
    sender: Option<usize>,
    receiver: usize,
    cat: usize,
    rate: f64,
    relay: bool,
    supply: Supply,
}

/// Step size used when none is given: the plan horizon over `DEFAULT_STEPS`.
pub fn default_step(plan: &FlowPlan) -> f64 {
    plan.horizon / DEFAULT_STEPS
}

pub fn simulate(
    swarm: &PeerSwarm,
    dist: &InitialDistribution,
    plan: &FlowPlan,
    step: f64,
) -> Result<SimResult> {
    let n = swarm.len();
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Domain(format!("step must be positive, got {step}")));
    }
    if dist.unique_amounts.len() != n {
        return Err(Error::Config(format!(
            "distribution has {} pieces for {n} peers",
            dist.unique_amounts.len()
        )));
    }
    if plan.target_count > n {
        return Err(Error::Config(format!(
            "plan targets {} peers, swarm has {n}",
            plan.target_count
        )));
    }

    let mut flows = Vec::with_capacity(plan.flows.len());
    for f in &plan.flows {
        let sender = match f.sender {
            Sender::Source => None,
            Sender::Peer(p) => Some(p),
        };
        let cat_peer = match f.category {
            DataCategory::Fresh => None,
            DataCategory::Unique(i) => Some(i),
        };
        let unknown = sender
            .into_iter()
            .chain(cat_peer)
            .chain([f.receiver])
            .find(|&p| p >= n);
        if let Some(p) = unknown {
            return Err(Error::Config(format!(
                "plan references unknown peer {}",
                p + 1
            )));
        }
        if !(f.rate >= 0.0) || !f.rate.is_finite() {
            return Err(Error::Config(format!(
                "flow rate {} is not a finite non-negative number",
                f.rate
            )));
        }
        let supply = match sender {
            None => Supply::Unlimited,
            Some(p) if cat_peer == Some(p) => Supply::Unlimited,
            Some(_) if f.relay => Supply::Fed,
            Some(_) => Supply::Held,
        };
        flows.push(SimFlow {
            sender,
            receiver: f.receiver,
            cat: category_index(f.category),
            rate: f.rate,
            relay: f.relay,
            supply,
        });
    }

    let mut violations = Vec::new();
    let mut load = vec![0.0; n + 1];
    for f in &flows {
        load[f.sender.map_or(0, |p| p + 1)] += f.rate;
    }
    for (idx, &l) in load.iter().enumerate() {
        let (name, cap) = if idx == 0 {
            ("source".to_string(), swarm.source_upload())
        } else {
            (format!("peer {idx}"), swarm.peer_uploads()[idx - 1])
        };
        if l > cap + ABS_CAP_TOL {
            violations.push(Violation {
                time: 0.0,
                kind: ViolationKind::Capacity,
                detail: format!("{name} planned {l} exceeds capacity {cap}"),
            });
        }
    }

    let file = swarm.file_size();
    let cats = n + 1;
    let mut size = vec![(1.0 - dist.phi) * file];
    size.extend_from_slice(&dist.unique_amounts);
    let mut held = vec![0.0; n * cats];
    let mut fed = vec![0.0; n * cats];
    for (i, &a) in dist.unique_amounts.iter().enumerate() {
        held[i * cats + i + 1] = a;
    }
    let mut sent = vec![0.0; flows.len()];
    let mut flagged = vec![false; flows.len()];

    let total = |held: &[f64], p: usize| {
        dist.common_data + held[p * cats..(p + 1) * cats].iter().sum::<f64>()
    };
    let done_at = file * (1.0 - 1e-9);
    let mut finish = vec![f64::INFINITY; n];
    for (p, t) in finish.iter_mut().enumerate() {
        if total(&held, p) >= done_at {
            *t = 0.0;
        }
    }
    let targets = if plan.target_count == 0 {
        n
    } else {
        plan.target_count
    };
    let max_time = 4.0 * plan.horizon.max(step);

    let mut req = vec![0.0; flows.len()];
    let mut demand = vec![0.0; n * cats];
    let mut scale = vec![0.0; n * cats];
    let mut before = vec![0.0; n];
    let mut t = 0.0;
    let mut k: u64 = 0;
    while finish[..targets].iter().any(|f| f.is_infinite()) && t < max_time {
        demand.iter_mut().for_each(|d| *d = 0.0);
        for (i, f) in flows.iter().enumerate() {
            let want = f.rate * step;
            let avail = match (f.supply, f.sender) {
                (Supply::Unlimited, _) | (_, None) => want,
                (Supply::Fed, Some(s)) => fed[s * cats + f.cat] - sent[i],
                (Supply::Held, Some(s)) => held[s * cats + f.cat] - sent[i],
            };
            req[i] = want.min(avail.max(0.0));
            demand[f.receiver * cats + f.cat] += req[i];
        }
        for (idx, s) in scale.iter_mut().enumerate() {
            let need = size[idx % cats] - held[idx];
            *s = if demand[idx] <= need {
                1.0
            } else if need > 0.0 {
                need / demand[idx]
            } else {
                0.0
            };
        }
        for (i, f) in flows.iter().enumerate() {
            let idx = f.receiver * cats + f.cat;
            if f.supply == Supply::Fed
                && k >= 1
                && !flagged[i]
                && req[i] < f.rate * step * STARVATION_FRACTION
                && scale[idx] >= 1.0
                && size[f.cat] - held[idx] - demand[idx] > 1e-12 * size[f.cat]
            {
                flagged[i] = true;
                violations.push(Violation {
                    time: t,
                    kind: ViolationKind::Causality,
                    detail: format!(
                        "peer {} starved relaying {:?} to peer {}",
                        f.sender.map_or(0, |p| p + 1),
                        category_of(f.cat),
                        f.receiver + 1
                    ),
                });
            }
        }

        for (p, b) in before.iter_mut().enumerate() {
            *b = total(&held, p);
        }
        let mut moved = 0.0;
        for (i, f) in flows.iter().enumerate() {
            let idx = f.receiver * cats + f.cat;
            let amt = req[i] * scale[idx];
            if amt <= 0.0 {
                continue;
            }
            held[idx] += amt;
            moved += amt;
            if !f.relay {
                fed[idx] += amt;
            }
            if f.supply != Supply::Unlimited {
                sent[i] += amt;
            }
        }
        for (idx, h) in held.iter_mut().enumerate() {
            *h = h.min(size[idx % cats]);
        }
        for p in 0..n {
            if finish[p].is_finite() {
                continue;
            }
            let after = total(&held, p);
            if after >= done_at {
                let frac = if after > before[p] {
                    ((file - before[p]) / (after - before[p])).clamp(0.0, 1.0)
                } else {
                    1.0
                };
                finish[p] = t + frac * step;
            }
        }
        t += step;
        k += 1;
        if moved <= 0.0 && k > 1 {
            break;
        }
    }

    Ok(SimResult {
        finish_times: finish,
        category_state: held.chunks(cats).map(<[f64]>::to_vec).collect(),
        violations,
        step,
        end_time: t,
    })
}

fn category_of(idx: usize) -> DataCategory {
    if idx == 0 {
        DataCategory::Fresh
    } else {
        DataCategory::Unique(idx - 1)
    }
}
