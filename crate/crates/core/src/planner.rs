//! Explicit bandwidth allocations that realise the analytic finish times.
//!
//! A plan is a static set of constant-rate flows over `[0, horizon]`. A flow
//! with `relay == false` carries data its sender holds from the start (the
//! source, or a peer sending its own unique piece). A relay flow forwards a
//! stream the sender itself receives through non-relay flows, so its rate is
//! bounded by that inflow.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::analytic::{differentiated_service_time, equal_service_time, Regime};
use crate::error::{Error, Result};
use crate::model::{derive_quantities, InitialDistribution, PeerSwarm, ValidationReport};
use crate::tol::{self, ABS_CAP_TOL, REL_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sender {
    Source,
    /// Zero-based peer index.
    Peer(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DataCategory {
    /// Data only the source holds initially.
    Fresh,
    /// The piece initially held by the given peer.
    Unique(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub sender: Sender,
    pub receiver: usize,
    pub category: DataCategory,
    pub rate: f64,
    pub relay: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Equal service, source helps push peer data.
    Fig3a,
    /// Equal service, peers relay source data.
    Fig3b,
    /// Exchange among peers without source help.
    Fig4,
    /// First set served with source assist on peer data.
    Fig5a,
    /// First set relays source data among itself.
    Fig5b,
    /// Tail peers also relay source data to the first set.
    Fig5c,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Fig3a => "fig3a",
            Self::Fig3b => "fig3b",
            Self::Fig4 => "fig4",
            Self::Fig5a => "fig5a",
            Self::Fig5b => "fig5b",
            Self::Fig5c => "fig5c",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "fig3a" => Self::Fig3a,
            "fig3b" => Self::Fig3b,
            "fig4" => Self::Fig4,
            "fig5a" => Self::Fig5a,
            "fig5b" => Self::Fig5b,
            "fig5c" => Self::Fig5c,
            _ => return None,
        })
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowPlan {
    pub horizon: f64,
    /// The first `target_count` peers must finish by `horizon`.
    pub target_count: usize,
    pub strategy: Strategy,
    /// Solved split variables, by name.
    pub splits: BTreeMap<String, f64>,
    pub flows: Vec<Flow>,
}

impl FlowPlan {
    /// Total planned outgoing rate of a sender.
    pub fn load(&self, sender: Sender) -> f64 {
        self.flows
            .iter()
            .filter(|f| f.sender == sender)
            .map(|f| f.rate)
            .sum()
    }
}

/// Accumulates flows, merging repeats of the same edge and category.
struct Builder<'a> {
    c: &'a [f64],
    targets: usize,
    flows: BTreeMap<(Sender, usize, DataCategory, bool), f64>,
}

impl<'a> Builder<'a> {
    fn new(c: &'a [f64], targets: usize) -> Self {
        Self {
            c,
            targets,
            flows: BTreeMap::new(),
        }
    }

    fn add(
        &mut self,
        sender: Sender,
        receiver: usize,
        category: DataCategory,
        rate: f64,
        relay: bool,
    ) {
        if rate > 0.0 {
            *self
                .flows
                .entry((sender, receiver, category, relay))
                .or_insert(0.0) += rate;
        }
    }

    /// `feeder` streams `rate` to each relay `k`, which forwards the stream
    /// to every target other than itself and the data's origin.
    fn relay(&mut self, feeder: Sender, category: DataCategory, rates: &[(usize, f64)]) {
        for &(k, r) in rates {
            if r <= 0.0 {
                continue;
            }
            if feeder != Sender::Peer(k) {
                self.add(feeder, k, category, r, false);
            }
            for t in 0..self.targets {
                if t != k && category != DataCategory::Unique(t) {
                    self.add(Sender::Peer(k), t, category, r, true);
                }
            }
        }
    }

    fn split_by_upload(&self, total: f64, peers: std::ops::Range<usize>) -> Vec<(usize, f64)> {
        let w: Vec<f64> = peers.clone().map(|k| self.c[k]).collect();
        split(total, peers, &w)
    }

    /// Targets exchange their own pieces; the source adds `assist` per
    /// receiver in total, shared in proportion to upload.
    fn targets_own_data(&mut self, a: &[f64], t: f64, assist: f64) {
        let c_l: f64 = self.c[..self.targets].iter().sum();
        for i in 0..self.targets {
            let s = assist * self.c[i] / c_l;
            for r in 0..self.targets {
                if r != i {
                    self.add(
                        Sender::Peer(i),
                        r,
                        DataCategory::Unique(i),
                        a[i] / t - s,
                        false,
                    );
                    self.add(Sender::Source, r, DataCategory::Unique(i), s, false);
                }
            }
        }
    }

    fn source_direct_fresh(&mut self, rate: f64) {
        for r in 0..self.targets {
            self.add(Sender::Source, r, DataCategory::Fresh, rate, false);
        }
    }

    fn finish(self, horizon: f64, strategy: Strategy, splits: &[(&str, f64)]) -> FlowPlan {
        FlowPlan {
            horizon,
            target_count: self.targets,
            strategy,
            splits: splits.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            flows: self
                .flows
                .into_iter()
                .map(|((sender, receiver, category, relay), rate)| Flow {
                    sender,
                    receiver,
                    category,
                    rate,
                    relay,
                })
                .collect(),
        }
    }
}

fn split(total: f64, peers: std::ops::Range<usize>, weights: &[f64]) -> Vec<(usize, f64)> {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return Vec::new();
    }
    peers
        .zip(weights)
        .map(|(k, w)| (k, total * w / sum))
        .collect()
}

struct Instance<'a> {
    c0: f64,
    c: &'a [f64],
    a: &'a [f64],
    n: usize,
    l: usize,
    t: f64,
    t_a: f64,
    f0: f64,
    c_l: f64,
    c_nl: f64,
    f_l: f64,
    f_nl: f64,
}

impl<'a> Instance<'a> {
    fn new(swarm: &'a PeerSwarm, dist: &'a InitialDistribution, l: usize, t: f64) -> Result<Self> {
        let q = derive_quantities(swarm, dist)?;
        let c_l = swarm.head_upload(l);
        let c_nl = swarm.tail_upload(l);
        Ok(Self {
            c0: swarm.source_upload(),
            c: swarm.peer_uploads(),
            a: &dist.unique_amounts,
            n: swarm.len(),
            l,
            t,
            t_a: q.exchange_time,
            f0: q.source_only_data,
            c_l,
            c_nl,
            f_l: c_l * q.exchange_time,
            f_nl: c_nl * q.exchange_time,
        })
    }

    /// `Q`: per-receiver spare target upload once targets exchange their
    /// own pieces.
    fn target_spare(&self) -> f64 {
        self.c_l / (self.l as f64 - 1.0) - self.f_l / self.t
    }

    /// Upload the tail lacks for pushing its pieces to every target.
    fn tail_deficit(&self) -> f64 {
        self.l as f64 * self.f_nl / self.t - self.c_nl
    }
}

/// Source only limits: the first set finishes at `t_0`.
fn build_bottleneck(inst: &Instance, strategy_if_tail_idle: Strategy) -> FlowPlan {
    let (l, t) = (inst.l, inst.t);
    let lf = l as f64;
    let mut b = Builder::new(inst.c, l);
    b.targets_own_data(inst.a, t, 0.0);

    let tau = inst.t_a / t;
    let mut target_res = inst.c_l - (lf - 1.0) * inst.f_l / t;
    let mut tail_left = Vec::with_capacity(inst.n - l);
    if lf * tau <= 1.0 + REL_TOL {
        for j in l..inst.n {
            for r in 0..l {
                b.add(
                    Sender::Peer(j),
                    r,
                    DataCategory::Unique(j),
                    inst.a[j] / t,
                    false,
                );
            }
            tail_left.push((inst.c[j] - lf * inst.a[j] / t).max(0.0));
        }
    } else {
        // A tail peer cannot push its piece to every target directly, so
        // part of it is relayed by the targets.
        for j in l..inst.n {
            let g = (inst.c[j] - inst.a[j] / t) / (lf - 1.0);
            let h = inst.a[j] / t - g;
            for r in 0..l {
                b.add(Sender::Peer(j), r, DataCategory::Unique(j), g, false);
            }
            let rates = b.split_by_upload(h, 0..l);
            b.relay(Sender::Peer(j), DataCategory::Unique(j), &rates);
            target_res -= (lf - 1.0) * h;
            tail_left.push(0.0);
        }
    }

    let f_s = if l == 1 {
        inst.c0
    } else {
        inst.c0.min(target_res / (lf - 1.0))
    };
    let rates = b.split_by_upload(f_s, 0..l);
    b.relay(Sender::Source, DataCategory::Fresh, &rates);
    let f_n = inst.c0 - f_s;
    let strategy = if f_n > ABS_CAP_TOL {
        let rates = split(f_n, l..inst.n, &tail_left);
        b.relay(Sender::Source, DataCategory::Fresh, &rates);
        Strategy::Fig5c
    } else {
        strategy_if_tail_idle
    };
    let splits = [
        ("x", (lf - 1.0) * f_s),
        ("f_first", f_s),
        ("f_rest", f_n.max(0.0)),
    ];
    b.finish(t, strategy, &splits)
}

/// A single target, served by everybody.
fn build_single(inst: &Instance) -> FlowPlan {
    let t = inst.t;
    let mut b = Builder::new(inst.c, 1);
    b.add(Sender::Source, 0, DataCategory::Fresh, inst.f0 / t, false);
    let mut assist = 0.0;
    for j in 1..inst.n {
        let need = inst.a[j] / t;
        b.add(
            Sender::Peer(j),
            0,
            DataCategory::Unique(j),
            need.min(inst.c[j]),
            false,
        );
        if need > inst.c[j] {
            b.add(
                Sender::Source,
                0,
                DataCategory::Unique(j),
                need - inst.c[j],
                false,
            );
            assist += need - inst.c[j];
        }
    }
    b.finish(t, Strategy::Fig5a, &[("x_nl", assist)])
}

/// Every upload carries needed data. `assist` is the per-receiver source
/// help on target pieces, `relay_fresh` the per-receiver fresh rate relayed
/// by targets and `tail_relay` the per-receiver rate targets spend relaying
/// tail pieces.
fn build_zero_waste(
    inst: &Instance,
    assist: f64,
    relay_fresh: f64,
    tail_relay: f64,
    strategy: Strategy,
    splits: &[(&str, f64)],
) -> FlowPlan {
    let (l, t) = (inst.l, inst.t);
    let lf = l as f64;
    let mut b = Builder::new(inst.c, l);
    b.targets_own_data(inst.a, t, assist);
    for j in l..inst.n {
        let h = tail_relay * inst.c[j] / inst.c_nl;
        let g = (inst.c[j] - h) / lf;
        let s = inst.a[j] / t - g - h;
        for r in 0..l {
            b.add(Sender::Peer(j), r, DataCategory::Unique(j), g, false);
            b.add(Sender::Source, r, DataCategory::Unique(j), s, false);
        }
        let rates = b.split_by_upload(h, 0..l);
        b.relay(Sender::Peer(j), DataCategory::Unique(j), &rates);
    }
    let rates = b.split_by_upload(relay_fresh, 0..l);
    b.relay(Sender::Source, DataCategory::Fresh, &rates);
    b.source_direct_fresh(inst.f0 / t - relay_fresh);
    b.finish(t, strategy, splits)
}

/// Tail peers forward source data to the first set as well.
fn build_full(inst: &Instance) -> FlowPlan {
    let (l, t) = (inst.l, inst.t);
    let lf = l as f64;
    let mut b = Builder::new(inst.c, l);
    b.targets_own_data(inst.a, t, 0.0);
    let mut tail_left = Vec::with_capacity(inst.n - l);
    for j in l..inst.n {
        for r in 0..l {
            b.add(
                Sender::Peer(j),
                r,
                DataCategory::Unique(j),
                inst.a[j] / t,
                false,
            );
        }
        tail_left.push((inst.c[j] - lf * inst.a[j] / t).max(0.0));
    }
    let f_s = (inst.c_l - (lf - 1.0) * inst.f_l / t) / (lf - 1.0);
    let f_n = tail_left.iter().sum::<f64>() / lf;
    let direct = inst.f0 / t - f_s - f_n;
    let rates = b.split_by_upload(f_s, 0..l);
    b.relay(Sender::Source, DataCategory::Fresh, &rates);
    let rates = split(f_n, l..inst.n, &tail_left);
    b.relay(Sender::Source, DataCategory::Fresh, &rates);
    b.source_direct_fresh(direct);
    let splits = [
        ("x_l", (lf - 1.0) * f_s),
        ("x_nl", lf * f_n),
        ("direct", direct),
    ];
    b.finish(t, Strategy::Fig5c, &splits)
}

fn require_up(dist: &InitialDistribution) -> Result<()> {
    if dist.is_pure_up() {
        Ok(())
    } else {
        Err(Error::Domain(
            "planning expects a pure UP distribution; reduce the common block first".into(),
        ))
    }
}

/// Plan in which all `N` peers finish at the equal-service time.
pub fn plan_equal_service(swarm: &PeerSwarm, dist: &InitialDistribution) -> Result<FlowPlan> {
    require_up(dist)?;
    let outcome = equal_service_time(swarm, dist)?;
    let n = swarm.len();
    let inst = Instance::new(swarm, dist, n, outcome.t_last)?;
    if outcome.regime.is_bottleneck() {
        return Ok(build_bottleneck(&inst, Strategy::Fig3b));
    }
    let q = inst.target_spare();
    let fresh_rate = inst.f0 / inst.t;
    Ok(if q < 0.0 {
        let x = inst.c0 - n as f64 * fresh_rate;
        build_zero_waste(&inst, -q, 0.0, 0.0, Strategy::Fig3a, &[("x", x)])
    } else {
        let f_s = q.min(fresh_rate);
        let x = (n as f64 - 1.0) * f_s;
        build_zero_waste(&inst, 0.0, f_s, 0.0, Strategy::Fig3b, &[("x", x)])
    })
}

/// Plan in which the first `l` peers finish at the differentiated-service
/// time.
pub fn plan_differentiated(
    swarm: &PeerSwarm,
    dist: &InitialDistribution,
    l: usize,
) -> Result<FlowPlan> {
    require_up(dist)?;
    let outcome = differentiated_service_time(swarm, dist, l)?;
    let inst = Instance::new(swarm, dist, l, outcome.t_last)?;
    match outcome.regime {
        Regime::BottleneckBound | Regime::Eq6Bottleneck => {
            Ok(build_bottleneck(&inst, Strategy::Fig5b))
        }
        Regime::Eq18Single => Ok(build_single(&inst)),
        Regime::Eq31 | Regime::Eq7 => Ok(build_full(&inst)),
        Regime::Eq24 => plan_zero_waste_first_set(swarm, dist, &inst),
        other => Err(Error::Internal(format!(
            "regime {other} does not arise for differentiated service"
        ))),
    }
}

fn plan_zero_waste_first_set(
    swarm: &PeerSwarm,
    dist: &InitialDistribution,
    inst: &Instance,
) -> Result<FlowPlan> {
    let q = derive_quantities(swarm, dist)?;
    let lf = inst.l as f64;
    let t_l_prime = (lf * q.peer_data - inst.f_l) / q.total_peer_upload;
    let spare = inst.target_spare();
    let deficit = inst.tail_deficit();
    let fresh_rate = inst.f0 / inst.t;

    if tol::approx_le(q.phi_zero, dist.phi) && lf * q.bottleneck_time < t_l_prime {
        // The source's spare upload is split between both groups' pieces
        // in proportion to the upload each exchange needs.
        let spare_source = inst.c0 - lf * fresh_rate;
        let u_l = (lf - 1.0) * inst.f_l / inst.t;
        let u_nl = lf * inst.f_nl / inst.t;
        let x_nl = spare_source * u_nl / (u_l + u_nl);
        let max_relay = inst.c_nl.min(deficit / (lf - 1.0));
        let lo = spare.max(0.0);
        let hi = max_relay.min(spare + inst.f_l / inst.t);
        let h = ((deficit - x_nl) / (lf - 1.0)).clamp(lo, hi.max(lo));
        let splits = [("x_l", spare_source - x_nl), ("x_nl", x_nl)];
        return Ok(build_zero_waste(
            inst,
            h - spare,
            0.0,
            h,
            Strategy::Fig5a,
            &splits,
        ));
    }
    if spare < -ABS_CAP_TOL {
        return Err(Error::Internal(format!(
            "first set has no spare upload for relaying (Q = {spare})"
        )));
    }
    let spare = spare.max(0.0);
    let f_s = spare.min(fresh_rate);
    let tail_relay = spare - f_s;
    let splits = [
        ("x", (lf - 1.0) * f_s),
        ("tail_relay", (lf - 1.0) * tail_relay),
    ];
    Ok(build_zero_waste(
        inst,
        0.0,
        f_s,
        tail_relay,
        Strategy::Fig5b,
        &splits,
    ))
}

/// Feasibility check of a plan, with the worst slack per constraint family.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanCheck {
    pub report: ValidationReport,
    /// Smallest `capacity - load` over senders.
    pub capacity_slack: f64,
    /// Smallest `delivered - needed` over target categories.
    pub demand_slack: f64,
    /// Smallest `inflow - relay rate` over relay flows.
    pub causality_slack: f64,
}

impl PlanCheck {
    pub fn passed(&self) -> bool {
        self.report.passed()
    }
}

fn category_size(dist: &InitialDistribution, f0: f64, cat: DataCategory) -> f64 {
    match cat {
        DataCategory::Fresh => f0,
        DataCategory::Unique(i) => dist.unique_amounts[i],
    }
}

/// Checks capacity, demand, relay causality and completion of the targets.
pub fn check_plan(plan: &FlowPlan, swarm: &PeerSwarm, dist: &InitialDistribution) -> PlanCheck {
    let mut report = ValidationReport::default();
    let n = swarm.len();
    let mut out = PlanCheck {
        report: ValidationReport::default(),
        capacity_slack: f64::INFINITY,
        demand_slack: f64::INFINITY,
        causality_slack: f64::INFINITY,
    };

    let malformed: Vec<String> = plan
        .flows
        .iter()
        .filter(|f| {
            let bad_sender = matches!(f.sender, Sender::Peer(p) if p >= n);
            let bad_cat = matches!(f.category, DataCategory::Unique(i) if i >= n);
            bad_sender || bad_cat || f.receiver >= n || !(f.rate >= 0.0) || !f.rate.is_finite()
        })
        .map(|f| format!("{f:?}"))
        .collect();
    let shape_ok = malformed.is_empty()
        && dist.unique_amounts.len() == n
        && plan.target_count >= 1
        && plan.target_count <= n
        && plan.horizon > 0.0;
    report.push(
        "well_formed",
        shape_ok,
        if shape_ok {
            String::new()
        } else {
            format!(
                "horizon {}, targets {}, bad flows: {}",
                plan.horizon,
                plan.target_count,
                malformed.join("; ")
            )
        },
    );
    if !shape_ok {
        out.report = report;
        return out;
    }
    let f0 = (1.0 - dist.phi) * swarm.file_size();
    let t = plan.horizon;

    let mut load = vec![0.0; n + 1];
    let mut inflow: BTreeMap<(usize, DataCategory), f64> = BTreeMap::new();
    let mut direct_in: BTreeMap<(usize, DataCategory), f64> = BTreeMap::new();
    for f in &plan.flows {
        let idx = match f.sender {
            Sender::Source => 0,
            Sender::Peer(p) => p + 1,
        };
        load[idx] += f.rate;
        *inflow.entry((f.receiver, f.category)).or_default() += f.rate;
        if !f.relay {
            *direct_in.entry((f.receiver, f.category)).or_default() += f.rate;
        }
    }

    let mut over = Vec::new();
    for (idx, &l) in load.iter().enumerate() {
        let cap = if idx == 0 {
            swarm.source_upload()
        } else {
            swarm.peer_uploads()[idx - 1]
        };
        out.capacity_slack = out.capacity_slack.min(cap - l);
        if l > cap + ABS_CAP_TOL {
            over.push(if idx == 0 {
                format!("source {l} > {cap}")
            } else {
                format!("peer {idx} {l} > {cap}")
            });
        }
    }
    report.push(
        "capacity",
        over.is_empty(),
        format!("min slack {:.6e}; {}", out.capacity_slack, over.join("; ")),
    );

    let mut short = Vec::new();
    let mut incomplete = Vec::new();
    for r in 0..plan.target_count {
        let mut have = dist.common_data + dist.unique_amounts[r];
        let mut cats = vec![DataCategory::Fresh];
        cats.extend((0..n).filter(|&i| i != r).map(DataCategory::Unique));
        for cat in cats {
            let need = category_size(dist, f0, cat);
            let got = inflow.get(&(r, cat)).copied().unwrap_or(0.0) * t;
            have += got.min(need);
            out.demand_slack = out.demand_slack.min(got - need);
            if got < need * (1.0 - REL_TOL) - ABS_CAP_TOL {
                short.push(format!("peer {} {:?}: {got} < {need}", r + 1, cat));
            }
        }
        let file = swarm.file_size();
        if have < file * (1.0 - REL_TOL) {
            incomplete.push(format!("peer {} holds {have} of {file}", r + 1));
        }
    }
    report.push(
        "demand",
        short.is_empty(),
        format!("min slack {:.6e}; {}", out.demand_slack, short.join("; ")),
    );

    let mut acausal = Vec::new();
    for f in &plan.flows {
        let Sender::Peer(p) = f.sender else { continue };
        let origin = f.category == DataCategory::Unique(p);
        if f.relay && !origin {
            let fed = direct_in.get(&(p, f.category)).copied().unwrap_or(0.0);
            out.causality_slack = out.causality_slack.min(fed - f.rate);
            if f.rate > fed * (1.0 + REL_TOL) + ABS_CAP_TOL {
                acausal.push(format!(
                    "peer {} relays {:?} at {} but receives {fed}",
                    p + 1,
                    f.category,
                    f.rate
                ));
            }
        } else if !f.relay && !origin {
            acausal.push(format!(
                "peer {} sends {:?} it does not originate",
                p + 1,
                f.category
            ));
        }
    }
    report.push(
        "causality",
        acausal.is_empty(),
        format!(
            "min slack {:.6e}; {}",
            out.causality_slack,
            acausal.join("; ")
        ),
    );
    report.push("completion", incomplete.is_empty(), incomplete.join("; "));
    out.report = report;
    out
}

fn format_sender(s: Sender) -> String {
    match s {
        Sender::Source => "source".into(),
        Sender::Peer(p) => (p + 1).to_string(),
    }
}

fn format_category(c: DataCategory) -> String {
    match c {
        DataCategory::Fresh => "fresh".into(),
        DataCategory::Unique(i) => format!("unique:{}", i + 1),
    }
}

/// Line-oriented text form. Peers are numbered from 1.
pub fn plan_to_text(plan: &FlowPlan) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# horizon {}", plan.horizon);
    let _ = writeln!(s, "# strategy {}", plan.strategy);
    let _ = writeln!(s, "# targets {}", plan.target_count);
    for (k, v) in &plan.splits {
        let _ = writeln!(s, "# split {k} {v}");
    }
    let _ = writeln!(s, "# sender receiver category rate relay");
    for f in &plan.flows {
        let _ = writeln!(
            s,
            "{} {} {} {} {}",
            format_sender(f.sender),
            f.receiver + 1,
            format_category(f.category),
            f.rate,
            u8::from(f.relay)
        );
    }
    s
}

fn parse_peer(tok: &str, line: usize) -> Result<usize> {
    match tok.parse::<usize>() {
        Ok(p) if p >= 1 => Ok(p - 1),
        _ => Err(Error::Config(format!(
            "line {line}: bad peer index `{tok}`"
        ))),
    }
}

fn parse_f64(tok: &str, line: usize, what: &str) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| Error::Config(format!("line {line}: bad {what} `{tok}`")))
}

/// Inverse of [`plan_to_text`].
pub fn parse_plan(text: &str) -> Result<FlowPlan> {
    let mut horizon = None;
    let mut strategy = None;
    let mut targets = None;
    let mut splits = BTreeMap::new();
    let mut flows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        match toks.as_slice() {
            [] => {}
            ["#", "horizon", v] => horizon = Some(parse_f64(v, line, "horizon")?),
            ["#", "strategy", v] => {
                strategy =
                    Some(Strategy::parse(v).ok_or_else(|| {
                        Error::Config(format!("line {line}: unknown strategy `{v}`"))
                    })?)
            }
            ["#", "targets", v] => targets = Some(parse_peer(v, line)? + 1),
            ["#", "split", k, v] => {
                splits.insert(k.to_string(), parse_f64(v, line, "split value")?);
            }
            [first, ..] if first.starts_with('#') => {}
            [sender, receiver, category, rate, relay] => {
                let sender = if *sender == "source" {
                    Sender::Source
                } else {
                    Sender::Peer(parse_peer(sender, line)?)
                };
                let category = match *category {
                    "fresh" => DataCategory::Fresh,
                    c => match c.strip_prefix("unique:") {
                        Some(i) => DataCategory::Unique(parse_peer(i, line)?),
                        None => {
                            return Err(Error::Config(format!("line {line}: bad category `{c}`")))
                        }
                    },
                };
                let relay = match *relay {
                    "0" => false,
                    "1" => true,
                    r => return Err(Error::Config(format!("line {line}: bad relay flag `{r}`"))),
                };
                flows.push(Flow {
                    sender,
                    receiver: parse_peer(receiver, line)?,
                    category,
                    rate: parse_f64(rate, line, "rate")?,
                    relay,
                });
            }
            _ => return Err(Error::Config(format!("line {line}: expected 5 fields"))),
        }
    }
    let missing = |what: &str| Error::Config(format!("plan header lacks `# {what}`"));
    Ok(FlowPlan {
        horizon: horizon.ok_or_else(|| missing("horizon"))?,
        target_count: targets.ok_or_else(|| missing("targets"))?,
        strategy: strategy.ok_or_else(|| missing("strategy"))?,
        splits,
        flows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_up_distribution;
    use approx::assert_relative_eq;

    const CANON: [f64; 18] = [
        10.0, 10.0, 9.0, 9.0, 8.0, 8.0, 7.0, 7.0, 6.0, 6.0, 5.0, 5.0, 4.0, 4.0, 3.0, 3.0, 2.0, 2.0,
    ];

    fn canon(c0: f64, phi: f64) -> (PeerSwarm, InitialDistribution) {
        let s = PeerSwarm::new(c0, CANON.to_vec(), 1000.0).unwrap();
        let d = make_up_distribution(&s, phi).unwrap();
        (s, d)
    }

    fn assert_feasible(plan: &FlowPlan, s: &PeerSwarm, d: &InitialDistribution) {
        let check = check_plan(plan, s, d);
        assert!(check.passed(), "{}", check.report);
    }

    #[test]
    fn equal_service_strategies() {
        let (s, d) = canon(12.0, 0.5);
        let p = plan_equal_service(&s, &d).unwrap();
        assert_eq!(p.strategy, Strategy::Fig3b);
        assert_relative_eq!(p.horizon, 145.83333, max_relative = 1e-6);
        assert_relative_eq!(p.splits["x"], 49.714, max_relative = 1e-4);
        assert_feasible(&p, &s, &d);

        let (s, d) = canon(12.0, 1.0);
        let p = plan_equal_service(&s, &d).unwrap();
        assert_eq!(p.strategy, Strategy::Fig3a);
        assert_relative_eq!(p.splits["x"], 12.0, max_relative = 1e-9);
        assert_relative_eq!(p.horizon, 141.66667, max_relative = 1e-6);
        assert_feasible(&p, &s, &d);

        let (s, d) = canon(12.0, 0.0);
        let p = plan_equal_service(&s, &d).unwrap();
        assert_eq!(p.strategy, Strategy::Fig3b);
        assert_feasible(&p, &s, &d);

        let (s, d) = canon(2.0, 0.05);
        let p = plan_equal_service(&s, &d).unwrap();
        assert_eq!(p.strategy, Strategy::Fig3b);
        assert_relative_eq!(p.horizon, 475.0);
        assert_feasible(&p, &s, &d);
    }

    #[test]
    fn differentiated_strategies() {
        let (s, d) = canon(12.0, 0.95);
        let p = plan_differentiated(&s, &d, 12).unwrap();
        assert_eq!(p.strategy, Strategy::Fig5a);
        assert_relative_eq!(
            p.splits["x_l"] + p.splits["x_nl"],
            5.576,
            max_relative = 1e-3
        );
        assert_feasible(&p, &s, &d);

        let p = plan_differentiated(&s, &d, 1).unwrap();
        assert_eq!(p.strategy, Strategy::Fig5a);
        assert_feasible(&p, &s, &d);

        let (s, d) = canon(12.0, 0.1);
        let p = plan_differentiated(&s, &d, 12).unwrap();
        assert_eq!(p.strategy, Strategy::Fig5c);
        assert_feasible(&p, &s, &d);

        for l in 1..=8 {
            let p = plan_differentiated(&s, &d, l).unwrap();
            assert_relative_eq!(p.horizon, 75.0);
            assert_feasible(&p, &s, &d);
        }
    }

    #[test]
    fn canonical_grid_is_feasible() {
        for c0 in [2.0, 12.0, 40.0] {
            for k in 0..=20 {
                let (s, d) = canon(c0, k as f64 / 20.0);
                assert_feasible(&plan_equal_service(&s, &d).unwrap(), &s, &d);
                for l in 1..=18 {
                    let p = plan_differentiated(&s, &d, l).unwrap();
                    assert_feasible(&p, &s, &d);
                }
            }
        }
    }

    #[test]
    fn halved_horizon_breaks_demand() {
        let (s, d) = canon(12.0, 0.1);
        let mut p = plan_differentiated(&s, &d, 12).unwrap();
        p.horizon /= 2.0;
        let check = check_plan(&p, &s, &d);
        assert!(!check.report.check("demand").unwrap().passed);
        assert!(check.demand_slack < 0.0);
    }

    #[test]
    fn inflated_rate_breaks_capacity() {
        let (s, d) = canon(12.0, 0.1);
        let mut p = plan_differentiated(&s, &d, 12).unwrap();
        p.flows[0].rate += 20.0;
        let check = check_plan(&p, &s, &d);
        assert!(!check.report.check("capacity").unwrap().passed);
    }

    #[test]
    fn relay_without_inflow_breaks_causality() {
        let (s, d) = canon(12.0, 0.1);
        let mut p = plan_differentiated(&s, &d, 12).unwrap();
        p.flows.retain(|f| {
            !(f.sender == Sender::Source && f.receiver == 0 && f.category == DataCategory::Fresh)
        });
        let check = check_plan(&p, &s, &d);
        assert!(!check.report.check("causality").unwrap().passed);
    }

    #[test]
    fn foreign_non_relay_is_rejected() {
        let (s, d) = canon(12.0, 0.5);
        let mut p = plan_equal_service(&s, &d).unwrap();
        p.flows.push(Flow {
            sender: Sender::Peer(0),
            receiver: 1,
            category: DataCategory::Unique(2),
            rate: 0.0,
            relay: false,
        });
        assert!(
            !check_plan(&p, &s, &d)
                .report
                .check("causality")
                .unwrap()
                .passed
        );
    }

    #[test]
    fn text_round_trip() {
        let (s, d) = canon(12.0, 0.95);
        let p = plan_differentiated(&s, &d, 12).unwrap();
        let back = parse_plan(&plan_to_text(&p)).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn parse_errors() {
        assert!(parse_plan("source 1 fresh 1.0 0\n").is_err());
        let head = "# horizon 1\n# strategy fig3a\n# targets 2\n";
        assert!(parse_plan(&format!("{head}0 1 fresh 1 0\n")).is_err());
        assert!(parse_plan(&format!("{head}1 2 stale 1 0\n")).is_err());
        assert!(parse_plan(&format!("{head}1 2 fresh 1 2\n")).is_err());
        assert!(parse_plan(&format!("{head}1 2 fresh\n")).is_err());
        assert!(parse_plan("# horizon 1\n# strategy fig9\n").is_err());
    }

    #[test]
    fn rejects_common_block() {
        let (s, d) = canon(12.0, 0.5);
        let ucp = InitialDistribution::new(0.5, 10.0, d.unique_amounts.clone());
        assert!(plan_equal_service(&s, &ucp).is_err());
        assert!(plan_differentiated(&s, &ucp, 3).is_err());
    }
}
