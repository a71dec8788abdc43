//! Swarm configuration, initial-data distributions and the scalar
//! quantities every other module derives from them.
//!
//! Data is modelled as amounts per category, never as byte ranges of the
//! file. A peer's unique data is disjoint from every other peer's by
//! construction, so the only checks that remain are on amounts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol::{self, REL_TOL};

/// A source and `N >= 2` peers sharing a file of size `F`.
///
/// Peer order is significant: prefix sums `C_m` and the multiplicity are
/// taken in the order given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeerSwarm {
    source_upload: f64,
    peer_uploads: Vec<f64>,
    file_size: f64,
}

impl PeerSwarm {
    pub fn new(source_upload: f64, peer_uploads: Vec<f64>, file_size: f64) -> Result<Self> {
        if !(source_upload.is_finite() && source_upload > 0.0) {
            return Err(Error::Config(format!(
                "source upload must be positive and finite, got {source_upload}"
            )));
        }
        if peer_uploads.len() < 2 {
            return Err(Error::Config(format!(
                "a swarm needs at least 2 peers, got {}",
                peer_uploads.len()
            )));
        }
        if let Some((i, c)) = peer_uploads
            .iter()
            .enumerate()
            .find(|(_, c)| !(c.is_finite() && **c > 0.0))
        {
            return Err(Error::Config(format!(
                "peer {} upload must be positive and finite, got {c}",
                i + 1
            )));
        }
        if !(file_size.is_finite() && file_size > 0.0) {
            return Err(Error::Config(format!(
                "file size must be positive and finite, got {file_size}"
            )));
        }
        Ok(Self {
            source_upload,
            peer_uploads,
            file_size,
        })
    }

    pub fn source_upload(&self) -> f64 {
        self.source_upload
    }

    pub fn peer_uploads(&self) -> &[f64] {
        &self.peer_uploads
    }

    pub fn file_size(&self) -> f64 {
        self.file_size
    }

    /// Number of peers `N`.
    pub fn len(&self) -> usize {
        self.peer_uploads.len()
    }

    /// Always false; a valid swarm has at least two peers.
    pub fn is_empty(&self) -> bool {
        self.peer_uploads.is_empty()
    }

    /// `U`, the aggregate peer upload.
    pub fn total_peer_upload(&self) -> f64 {
        self.peer_uploads.iter().sum()
    }

    /// `C_m`: upload of the first `m` peers.
    pub fn head_upload(&self, m: usize) -> f64 {
        self.peer_uploads[..m.min(self.len())].iter().sum()
    }

    /// `C_{N-m}`: upload of the peers after the first `m`.
    pub fn tail_upload(&self, m: usize) -> f64 {
        self.peer_uploads[m.min(self.len())..].iter().sum()
    }

    /// Same swarm with peers re-ordered by decreasing upload. This is the
    /// order under which the classic multiplicity is maximal.
    pub fn sorted_descending(&self) -> Self {
        let mut peer_uploads = self.peer_uploads.clone();
        peer_uploads.sort_by(|a, b| b.total_cmp(a));
        Self {
            peer_uploads,
            ..self.clone()
        }
    }

    /// Same peers distributing a file of a different size.
    pub fn with_file_size(&self, file_size: f64) -> Result<Self> {
        Self::new(self.source_upload, self.peer_uploads.clone(), file_size)
    }

    /// Same peers served by a source of a different capacity.
    pub fn with_source_upload(&self, source_upload: f64) -> Result<Self> {
        Self::new(source_upload, self.peer_uploads.clone(), self.file_size)
    }
}

/// What peers hold before the download starts.
///
/// `phi` is the fraction of the file present among peers. Under a pure UP
/// distribution `sum(unique_amounts) = phi * F`; with a common block `x`
/// held by everybody, `x + sum(unique_amounts) = phi * F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDistribution {
    pub phi: f64,
    pub common_data: f64,
    pub unique_amounts: Vec<f64>,
}

impl InitialDistribution {
    pub fn new(phi: f64, common_data: f64, unique_amounts: Vec<f64>) -> Self {
        Self {
            phi,
            common_data,
            unique_amounts,
        }
    }

    /// No peer holds anything.
    pub fn empty(n: usize) -> Self {
        Self::new(0.0, 0.0, vec![0.0; n])
    }

    pub fn is_pure_up(&self) -> bool {
        self.common_data == 0.0
    }

    pub fn unique_total(&self) -> f64 {
        self.unique_amounts.iter().sum()
    }
}

/// Scalars derived from a swarm and a (pure UP) distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedQuantities {
    /// `U`
    pub total_peer_upload: f64,
    /// `F_a = phi F`, data held by peers.
    pub peer_data: f64,
    /// `F_0 = (1 - phi) F`, data only the source holds.
    pub source_only_data: f64,
    /// `t_a = phi F / U`, time for every peer to push its own data once.
    pub exchange_time: f64,
    /// `t_0 = F_0 / C_0`, lower bound on any last finish time.
    pub bottleneck_time: f64,
    /// `phi_0 = U / (C_0 + U)`, the fraction at which `t_0 = t_a`.
    pub phi_zero: f64,
    /// `t_b = F / C_0`, the bottleneck time with no initial data.
    pub no_data_bottleneck: f64,
}

fn check_lengths(swarm: &PeerSwarm, dist: &InitialDistribution) -> Result<()> {
    if dist.unique_amounts.len() != swarm.len() {
        return Err(Error::Config(format!(
            "distribution has {} peers, swarm has {}",
            dist.unique_amounts.len(),
            swarm.len()
        )));
    }
    Ok(())
}

pub fn derive_quantities(
    swarm: &PeerSwarm,
    dist: &InitialDistribution,
) -> Result<DerivedQuantities> {
    check_lengths(swarm, dist)?;
    let c0 = swarm.source_upload();
    let f = swarm.file_size();
    let u = swarm.total_peer_upload();
    let phi = dist.phi;
    let peer_data = phi * f;
    let source_only_data = (1.0 - phi) * f;
    Ok(DerivedQuantities {
        total_peer_upload: u,
        peer_data,
        source_only_data,
        exchange_time: peer_data / u,
        bottleneck_time: source_only_data / c0,
        phi_zero: u / (c0 + u),
        no_data_bottleneck: f / c0,
    })
}

/// Unique, upload-proportional distribution holding a fraction `phi` of
/// the file: `a_i = c_i phi F / U`.
pub fn make_up_distribution(swarm: &PeerSwarm, phi: f64) -> Result<InitialDistribution> {
    if !(0.0..=1.0).contains(&phi) {
        return Err(Error::Domain(format!("phi must lie in [0, 1], got {phi}")));
    }
    let ratio = phi * swarm.file_size() / swarm.total_peer_upload();
    let unique_amounts = swarm.peer_uploads().iter().map(|c| c * ratio).collect();
    Ok(InitialDistribution::new(phi, 0.0, unique_amounts))
}

/// Replace a common block `x` held by every peer with a smaller file of
/// size `F - x`: the common block never needs to move.
pub fn reduce_ucp_to_up(
    swarm: &PeerSwarm,
    dist: &InitialDistribution,
) -> Result<(PeerSwarm, InitialDistribution)> {
    check_lengths(swarm, dist)?;
    let f = swarm.file_size();
    let x = dist.common_data;
    if x == 0.0 {
        return Ok((swarm.clone(), dist.clone()));
    }
    if x < 0.0 {
        return Err(Error::Config(format!(
            "common data must be non-negative, got {x}"
        )));
    }
    if x >= f {
        return Err(Error::DegenerateFile { common: x, file: f });
    }
    let held = dist.phi * f;
    if x > held && !tol::approx_eq(x, held) {
        return Err(Error::InconsistentDistribution { common: x, held });
    }
    let reduced_file = f - x;
    let phi = ((held - x) / reduced_file).max(0.0);
    let reduced = swarm.with_file_size(reduced_file)?;
    Ok((
        reduced,
        InitialDistribution::new(phi, 0.0, dist.unique_amounts.clone()),
    ))
}

/// One line of a [`ValidationReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Pass/fail per invariant; never an `Err`.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn push(&mut self, name: &'static str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name,
            passed,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            let mark = if c.passed { "ok  " } else { "FAIL" };
            writeln!(f, "{mark} {:<16} {}", c.name, c.detail)?;
        }
        Ok(())
    }
}

/// Check the UP/UCP invariants with the default relative tolerance.
pub fn validate_distribution(swarm: &PeerSwarm, dist: &InitialDistribution) -> ValidationReport {
    validate_distribution_with(swarm, dist, REL_TOL)
}

/// Check the UP/UCP invariants, using `prop_tol` as the relative tolerance
/// on both proportionality and totals.
pub fn validate_distribution_with(
    swarm: &PeerSwarm,
    dist: &InitialDistribution,
    prop_tol: f64,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = swarm.len();
    let len_ok = dist.unique_amounts.len() == n;
    report.push(
        "length",
        len_ok,
        format!("{} amounts for {} peers", dist.unique_amounts.len(), n),
    );
    if !len_ok {
        return report;
    }

    let negative: Vec<usize> = dist
        .unique_amounts
        .iter()
        .enumerate()
        .filter(|(_, a)| !(a.is_finite() && **a >= 0.0))
        .map(|(i, _)| i + 1)
        .collect();
    let common_ok = dist.common_data.is_finite() && dist.common_data >= 0.0;
    report.push(
        "non_negative",
        negative.is_empty() && common_ok,
        if negative.is_empty() && common_ok {
            "all amounts >= 0".to_string()
        } else {
            format!(
                "negative amounts at peers {negative:?}, common {}",
                dist.common_data
            )
        },
    );

    let f = swarm.file_size();
    let held = dist.common_data + dist.unique_total();
    let expected = dist.phi * f;
    let totals_ok =
        tol::rel_diff(held, expected) <= prop_tol || (held - expected).abs() <= prop_tol * f;
    report.push(
        "totals",
        totals_ok,
        format!("common + sum(a_i) = {held}, phi F = {expected}"),
    );

    let held_fraction = held / f;
    let phi_ok = (0.0..=1.0).contains(&dist.phi) && tol::approx_le(held_fraction, 1.0);
    report.push(
        "phi_bound",
        phi_ok,
        format!("phi = {}, held fraction = {held_fraction}", dist.phi),
    );

    // a_i / c_i must be one value (t_a) for every peer.
    let u = swarm.total_peer_upload();
    let t_a = dist.unique_total() / u;
    let worst = swarm
        .peer_uploads()
        .iter()
        .zip(&dist.unique_amounts)
        .map(|(c, a)| tol::rel_diff(a / c, t_a))
        .fold(0.0, f64::max);
    report.push(
        "proportional",
        worst <= prop_tol,
        format!("max relative deviation of a_i/c_i from {t_a}: {worst:.3e}"),
    );

    report.push(
        "disjoint",
        true,
        "unique amounts are disjoint by construction",
    );
    report
}
