//! Minimum finish time found by search, independent of the closed forms.
//!
//! For a trial horizon `T` a linear program decides whether the data can be
//! routed through at most one relay hop within every node's upload budget.
//! Each item (source-only data, or one peer's piece) is delivered as a sum
//! of streams: source direct to every needer, origin direct to every needer,
//! or fed by the source or the origin to one relay that replicates it to all
//! needers. A feasible LP solution is turned into a [`FlowPlan`] and must
//! also pass [`check_plan`]. The horizon is then bisected.

use std::collections::BTreeMap;

use minilp::{ComparisonOp, OptimizationDirection, Problem, Variable};

use crate::error::{Error, Result};
use crate::model::{InitialDistribution, PeerSwarm};
use crate::planner::{check_plan, DataCategory, Flow, FlowPlan, Sender, Strategy};

/// Budgets are shrunk by this factor so LP round-off cannot push a plan
/// over capacity. Biases the result upward.
const BUDGET_MARGIN: f64 = 1e-7;

#[derive(Clone, Copy)]
enum Stream {
    SourceDirect,
    OriginDirect,
    SourceFed(usize),
    OriginFed(usize),
}

struct Item {
    category: DataCategory,
    origin: Option<usize>,
    size: f64,
    needers: Vec<usize>,
}

fn items(swarm: &PeerSwarm, dist: &InitialDistribution, l: usize) -> Vec<Item> {
    let n = swarm.len();
    let mut out = Vec::with_capacity(n + 1);
    out.push(Item {
        category: DataCategory::Fresh,
        origin: None,
        size: (1.0 - dist.phi) * swarm.file_size(),
        needers: (0..l).collect(),
    });
    for (o, &a) in dist.unique_amounts.iter().enumerate() {
        out.push(Item {
            category: DataCategory::Unique(o),
            origin: Some(o),
            size: a,
            needers: (0..l).filter(|&t| t != o).collect(),
        });
    }
    out.retain(|it| it.size > 0.0 && !it.needers.is_empty());
    out
}

/// Upload charged to each node (index 0 is the source) per unit volume.
fn stream_load(it: &Item, s: Stream, n: usize) -> Vec<(usize, f64)> {
    let fan = it.needers.len() as f64;
    let forward = |r: usize| fan - f64::from(u8::from(it.needers.contains(&r)));
    let origin = it.origin.map_or(0, |o| o + 1);
    let mut load = match s {
        Stream::SourceDirect => vec![(0, fan)],
        Stream::OriginDirect => vec![(origin, fan)],
        Stream::SourceFed(r) => vec![(0, 1.0), (r + 1, forward(r))],
        Stream::OriginFed(r) => vec![(origin, 1.0), (r + 1, forward(r))],
    };
    load.retain(|&(k, w)| k <= n && w > 0.0);
    load
}

fn streams(it: &Item, n: usize) -> Vec<Stream> {
    let mut s = vec![Stream::SourceDirect];
    match it.origin {
        None => s.extend((0..n).map(Stream::SourceFed)),
        Some(o) => {
            s.push(Stream::OriginDirect);
            for r in (0..n).filter(|&r| r != o) {
                s.push(Stream::SourceFed(r));
                s.push(Stream::OriginFed(r));
            }
        }
    }
    s
}

fn solve_at(swarm: &PeerSwarm, dist: &InitialDistribution, l: usize, t: f64) -> Option<FlowPlan> {
    let n = swarm.len();
    let items = items(swarm, dist, l);
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let mut vars: Vec<(usize, Stream, Variable)> = Vec::new();
    let mut budget: Vec<Vec<(Variable, f64)>> = vec![Vec::new(); n + 1];
    for (d, it) in items.iter().enumerate() {
        let mut cover = Vec::new();
        for s in streams(it, n) {
            let v = lp.add_var(0.0, (0.0, f64::INFINITY));
            for (k, w) in stream_load(it, s, n) {
                budget[k].push((v, w));
            }
            cover.push((v, 1.0));
            vars.push((d, s, v));
        }
        lp.add_constraint(cover.as_slice(), ComparisonOp::Ge, it.size);
    }
    for (k, terms) in budget.iter().enumerate() {
        if terms.is_empty() {
            continue;
        }
        let cap = if k == 0 {
            swarm.source_upload()
        } else {
            swarm.peer_uploads()[k - 1]
        };
        lp.add_constraint(
            terms.as_slice(),
            ComparisonOp::Le,
            cap * t * (1.0 - BUDGET_MARGIN),
        );
    }
    let sol = lp.solve().ok()?;

    let mut merged: BTreeMap<(Sender, usize, DataCategory, bool), f64> = BTreeMap::new();
    let mut add = |s: Sender, r: usize, c: DataCategory, rate: f64, relay: bool| {
        *merged.entry((s, r, c, relay)).or_insert(0.0) += rate;
    };
    for &(d, s, v) in &vars {
        let rate = sol[v] / t;
        if rate <= 0.0 {
            continue;
        }
        let it = &items[d];
        let origin = it.origin.map(Sender::Peer);
        let (feeder, relay) = match s {
            Stream::SourceDirect => (Sender::Source, None),
            Stream::OriginDirect => (origin?, None),
            Stream::SourceFed(r) => (Sender::Source, Some(r)),
            Stream::OriginFed(r) => (origin?, Some(r)),
        };
        match relay {
            None => {
                for &t in &it.needers {
                    add(feeder, t, it.category, rate, false);
                }
            }
            Some(r) => {
                add(feeder, r, it.category, rate, false);
                for &t in it.needers.iter().filter(|&&t| t != r) {
                    add(Sender::Peer(r), t, it.category, rate, true);
                }
            }
        }
    }
    Some(FlowPlan {
        horizon: t,
        target_count: l,
        strategy: if l == n {
            Strategy::Fig3b
        } else {
            Strategy::Fig5c
        },
        splits: BTreeMap::new(),
        flows: merged
            .into_iter()
            .map(|((sender, receiver, category, relay), rate)| Flow {
                sender,
                receiver,
                category,
                rate,
                relay,
            })
            .collect(),
    })
}

/// A plan finishing the first `l` peers by `t`, if one exists within the
/// searched family.
pub fn feasible_plan(
    swarm: &PeerSwarm,
    dist: &InitialDistribution,
    l: usize,
    t: f64,
) -> Option<FlowPlan> {
    solve_at(swarm, dist, l, t).filter(|p| check_plan(p, swarm, dist).passed())
}

/// Smallest horizon (to relative precision `resolution / U`) at which the
/// first `l` peers can all finish. Returns the feasible end of the final
/// bracket, so it never undercuts the true optimum of the searched family.
pub fn oracle_min_time(
    swarm: &PeerSwarm,
    dist: &InitialDistribution,
    l: usize,
    resolution: f64,
) -> Result<f64> {
    let n = swarm.len();
    if l < 1 || l > n {
        return Err(Error::Domain(format!(
            "first-set size {l} outside [1, {n}]"
        )));
    }
    if !(resolution > 0.0) {
        return Err(Error::Domain(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    if !dist.is_pure_up() || dist.unique_amounts.len() != n {
        return Err(Error::Domain(
            "oracle expects a pure UP distribution".into(),
        ));
    }
    let rel = resolution / swarm.total_peer_upload();
    let mut lo = 0.0;
    let mut hi = n as f64 * swarm.file_size() / swarm.source_upload();
    let mut tries = 0;
    while feasible_plan(swarm, dist, l, hi).is_none() {
        lo = hi;
        hi *= 2.0;
        tries += 1;
        if tries > 16 {
            return Err(Error::Internal("no feasible horizon found".into()));
        }
    }
    while hi - lo > hi * rel {
        let mid = 0.5 * (lo + hi);
        if feasible_plan(swarm, dist, l, mid).is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
