//! Minimum last finish time for equal and differentiated service.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{derive_quantities, DerivedQuantities, InitialDistribution, PeerSwarm};
use crate::multiplicity::service_multiplicity;
use crate::tol;

/// The closed form that produced a last finish time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `T = t_0`: the source's own upload is the only limit.
    BottleneckBound,
    /// Equal service, `T = (N - phi) F / (C_0 + U)`.
    Eq16,
    /// Equal service without peer data, source-limited: `T = F / C_0`.
    Eq1SourceBound,
    /// Equal service without peer data, peer-limited: `T = N F / (C_0 + U)`.
    Eq1PeerBound,
    /// One favoured peer, everybody uploads to it at full rate.
    Eq18Single,
    /// Differentiated service with every upload spent on needed data.
    Eq24,
    /// Differentiated service with the tail peers forwarding source data.
    Eq31,
    /// Differentiated service without peer data, `L <= M`: `T = F / C_0`.
    Eq6Bottleneck,
    /// Differentiated service without peer data, `L > M`.
    Eq7,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::BottleneckBound => "bottleneck_bound",
            Self::Eq16 => "eq16",
            Self::Eq1SourceBound => "eq1_source_bound",
            Self::Eq1PeerBound => "eq1_peer_bound",
            Self::Eq18Single => "eq18_single",
            Self::Eq24 => "eq24",
            Self::Eq31 => "eq31",
            Self::Eq6Bottleneck => "eq6_bottleneck",
            Self::Eq7 => "eq7",
        }
    }

    /// Regimes where the finish time equals the bottleneck time.
    pub fn is_bottleneck(self) -> bool {
        matches!(
            self,
            Self::BottleneckBound | Self::Eq1SourceBound | Self::Eq6Bottleneck
        )
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceOutcome {
    /// Minimum last finish time of the served set.
    pub t_last: f64,
    pub regime: Regime,
    /// `L`; `N` for equal service.
    pub first_set_size: usize,
}

/// Intermediate rates and times used when splitting the swarm into the
/// first `L` peers and the remaining `N - L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HelperQuantities {
    /// `T_L'`: time for the first `L` to collect all peer data unaided.
    pub t_l_prime: f64,
    /// `T_0`: fastest delivery of source-only data using a `1/L` share of
    /// the first set's upload.
    pub t_zero_cap: f64,
    /// `U_L(L, T)`: upload needed to exchange the first set's data in `T`.
    pub u_l: f64,
    /// `U_{N-L}(L, T)`: upload needed to push the tail's data to the first
    /// set in `T`.
    pub u_nl: f64,
    pub u_r_l: f64,
    pub u_r_nl: f64,
    pub u_r_lnl: f64,
    /// `F_L`: data held by the first `L` peers.
    pub f_l: f64,
    /// `F_{N-L}`: data held by the tail.
    pub f_nl: f64,
}

fn require_up(dist: &InitialDistribution) -> Result<()> {
    if dist.is_pure_up() {
        Ok(())
    } else {
        Err(Error::Domain(
            "expected a pure UP distribution; reduce the common block first".into(),
        ))
    }
}

fn check_set_size(swarm: &PeerSwarm, l: usize) -> Result<()> {
    if l < 1 || l > swarm.len() {
        return Err(Error::Domain(format!(
            "first-set size {l} outside [1, {}]",
            swarm.len()
        )));
    }
    Ok(())
}

pub fn helper_quantities(
    swarm: &PeerSwarm,
    dist: &InitialDistribution,
    l: usize,
    t: f64,
) -> Result<HelperQuantities> {
    check_set_size(swarm, l)?;
    if !(t > 0.0) {
        return Err(Error::Domain(format!("horizon must be positive, got {t}")));
    }
    let q = derive_quantities(swarm, dist)?;
    Ok(helpers_from(swarm, &q, l, t))
}

fn helpers_from(swarm: &PeerSwarm, q: &DerivedQuantities, l: usize, t: f64) -> HelperQuantities {
    let lf = l as f64;
    let c_l = swarm.head_upload(l);
    let c_nl = swarm.tail_upload(l);
    let u = q.total_peer_upload;
    let f_l = c_l * q.exchange_time;
    let f_nl = c_nl * q.exchange_time;
    let u_l = (lf - 1.0) * f_l / t;
    let u_nl = lf * f_nl / t;
    let share = (swarm.source_upload() + c_l / lf) / lf;
    HelperQuantities {
        t_l_prime: (lf * q.peer_data - f_l) / u,
        t_zero_cap: (q.source_only_data / share).max(q.bottleneck_time),
        u_l,
        u_nl,
        u_r_l: c_l - u_l,
        u_r_nl: c_nl - u_nl,
        u_r_lnl: u - u_l - u_nl,
        f_l,
        f_nl,
    }
}

/// Every peer served alike; all `N` finish together.
pub fn equal_service_time(swarm: &PeerSwarm, dist: &InitialDistribution) -> Result<ServiceOutcome> {
    require_up(dist)?;
    let q = derive_quantities(swarm, dist)?;
    let n = swarm.len();
    let nf = n as f64;
    let c0 = swarm.source_upload();
    let u = q.total_peer_upload;
    let f = swarm.file_size();

    let (t_last, regime) = if dist.phi == 0.0 {
        let peer_rate = (c0 + u) / nf;
        if tol::approx_le(c0, peer_rate) {
            (f / c0, Regime::Eq1SourceBound)
        } else {
            (f / peer_rate, Regime::Eq1PeerBound)
        }
    } else {
        let exchange = (nf - 1.0) * q.exchange_time;
        let eq16 = (nf - dist.phi) * f / (c0 + u);
        let source_bound = tol::definitely_lt(exchange, q.bottleneck_time) && {
            let residual = u - (nf - 1.0) * q.peer_data / q.bottleneck_time;
            tol::approx_le((nf - 1.0) * c0, residual)
        };
        if source_bound {
            (q.bottleneck_time, Regime::BottleneckBound)
        } else {
            (eq16, Regime::Eq16)
        }
    };
    Ok(ServiceOutcome {
        t_last,
        regime,
        first_set_size: n,
    })
}

/// The first `l` peers served as early as possible, the rest assisting.
pub fn differentiated_service_time(
    swarm: &PeerSwarm,
    dist: &InitialDistribution,
    l: usize,
) -> Result<ServiceOutcome> {
    check_set_size(swarm, l)?;
    require_up(dist)?;
    let q = derive_quantities(swarm, dist)?;
    let m = service_multiplicity(swarm, dist)?.m;
    let lf = l as f64;
    let c0 = swarm.source_upload();
    let u = q.total_peer_upload;
    let f = swarm.file_size();
    let c_nl = swarm.tail_upload(l);
    let outcome = |t_last, regime| ServiceOutcome {
        t_last,
        regime,
        first_set_size: l,
    };

    if dist.phi == 0.0 {
        return Ok(if l <= m {
            outcome(q.no_data_bottleneck, Regime::Eq6Bottleneck)
        } else {
            outcome(lf * f / (c0 + u - c_nl / lf), Regime::Eq7)
        });
    }
    if l <= m {
        return Ok(outcome(q.bottleneck_time, Regime::BottleneckBound));
    }
    if l == 1 && tol::approx_le(q.phi_zero, dist.phi) {
        let a1 = dist.unique_amounts[0];
        let c1 = swarm.peer_uploads()[0];
        return Ok(outcome((f - a1) / (c0 + u - c1), Regime::Eq18Single));
    }
    let h = helpers_from(swarm, &q, l, 1.0);
    if tol::approx_le(h.t_zero_cap, lf * q.exchange_time) {
        Ok(outcome((lf * f - h.f_l) / (c0 + u), Regime::Eq24))
    } else {
        Ok(outcome(
            (lf - dist.phi) * f / (c0 + u - c_nl / lf),
            Regime::Eq31,
        ))
    }
}
