//! How many of the first peers can finish within the bottleneck time.
//!
//! The classic multiplicity covers peers that start empty; the
//! phi-multiplicity extends it to peers holding a UP distribution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{derive_quantities, DerivedQuantities, InitialDistribution, PeerSwarm};
use crate::tol;

/// Which branch produced a multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplicityRule {
    PhiAbovePhi0,
    PhiEqualPhi0,
    #[serde(rename = "ineq32_at_Lprime_plus_1")]
    Ineq32AtLPrimePlus1,
    Ineq34Search,
    ClassicFallback,
}

impl MultiplicityRule {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::PhiAbovePhi0 => "phi_above_phi0",
            Self::PhiEqualPhi0 => "phi_equal_phi0",
            Self::Ineq32AtLPrimePlus1 => "ineq32_at_Lprime_plus_1",
            Self::Ineq34Search => "ineq34_search",
            Self::ClassicFallback => "classic_fallback",
        }
    }
}

impl std::fmt::Display for MultiplicityRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiplicityResult {
    /// Number of leading peers that can all finish at the bottleneck time.
    pub m: usize,
    pub rule_used: MultiplicityRule,
    /// `L'` with `L' t_a < t_0 <= (L'+1) t_a`, when that branch applies.
    pub l_prime: Option<usize>,
}

/// `F(m) = C_m/(m-1) + C_{N-m}/m`, with `F(N) = C_N/(N-1)` and
/// `F(1) = +inf`.
pub fn multiplicity_function(swarm: &PeerSwarm, m: usize) -> Result<f64> {
    let n = swarm.len();
    if m < 1 || m > n {
        return Err(Error::Domain(format!(
            "multiplicity argument {m} outside [1, {n}]"
        )));
    }
    if m == 1 {
        return Ok(f64::INFINITY);
    }
    let head = swarm.head_upload(m) / (m - 1) as f64;
    if m == n {
        return Ok(head);
    }
    Ok(head + swarm.tail_upload(m) / m as f64)
}

/// Largest `M` with `C_0 <= F(M)` for peers in the given order.
pub fn classic_multiplicity(swarm: &PeerSwarm) -> MultiplicityResult {
    let c0 = swarm.source_upload();
    let m = (1..=swarm.len())
        .rev()
        .find(|&m| c0 <= multiplicity_function(swarm, m).expect("m in range"))
        .unwrap_or(1);
    MultiplicityResult {
        m,
        rule_used: MultiplicityRule::ClassicFallback,
        l_prime: None,
    }
}

/// Classic multiplicity after ordering peers by decreasing upload, which
/// maximises it.
pub fn max_classic_multiplicity(swarm: &PeerSwarm) -> MultiplicityResult {
    classic_multiplicity(&swarm.sorted_descending())
}

fn below_phi_zero(q: &DerivedQuantities, phi: f64) -> Result<()> {
    if tol::definitely_lt(phi, q.phi_zero) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "requires phi < phi_0 = {}, got {phi}",
            q.phi_zero
        )))
    }
}

/// `L'` such that `L' t_a < t_0 <= (L'+1) t_a`, clamped to `[1, N-1]`.
///
/// With no peer data `t_a = 0` and the bracket is unbounded; the top case
/// `L' = N - 1` applies.
pub fn l_prime(q: &DerivedQuantities, n: usize) -> usize {
    let top = n - 1;
    if q.exchange_time <= 0.0 {
        return top;
    }
    let ratio = q.bottleneck_time / q.exchange_time;
    if !ratio.is_finite() || ratio >= top as f64 + 1.0 {
        return top;
    }
    let nearest = ratio.round();
    let k = if tol::approx_eq(ratio, nearest) {
        nearest
    } else {
        ratio.ceil()
    };
    ((k as usize).saturating_sub(1)).clamp(1, top)
}

/// `ur(l) = U/(l-1) - F_a/t_0 - C_{N-l}/(l(l-1))`.
pub fn residual_rate_ur(swarm: &PeerSwarm, dist: &InitialDistribution, l: usize) -> Result<f64> {
    let n = swarm.len();
    if l < 2 || l + 1 > n {
        return Err(Error::Domain(format!(
            "ur argument {l} outside [2, {}]",
            n - 1
        )));
    }
    let q = derive_quantities(swarm, dist)?;
    below_phi_zero(&q, dist.phi)?;
    let lf = l as f64;
    Ok(q.total_peer_upload / (lf - 1.0)
        - q.peer_data / q.bottleneck_time
        - swarm.tail_upload(l) / (lf * (lf - 1.0)))
}

/// `C_0 <= (1 - phi) F(L)`: the first `L` peers finish at `t_0` when
/// every peer relays source data.
pub fn check_ineq_34(swarm: &PeerSwarm, dist: &InitialDistribution, l: usize) -> Result<bool> {
    let q = derive_quantities(swarm, dist)?;
    below_phi_zero(&q, dist.phi)?;
    let f = multiplicity_function(swarm, l)?;
    Ok(swarm.source_upload() <= (1.0 - dist.phi) * f)
}

/// `U - ((L-1) F_a + F_{N-L}) / t_0`, the residual peer upload at `t_0`
/// once every exchange of peer data is accounted for.
pub fn ineq32_residual(swarm: &PeerSwarm, dist: &InitialDistribution, l: usize) -> Result<f64> {
    let n = swarm.len();
    if l < 1 || l > n {
        return Err(Error::Domain(format!("L = {l} outside [1, {n}]")));
    }
    let q = derive_quantities(swarm, dist)?;
    let tail_data = swarm.tail_upload(l) * q.exchange_time;
    Ok(q.total_peer_upload - ((l - 1) as f64 * q.peer_data + tail_data) / q.bottleneck_time)
}

/// `U_{r,L,N-L}(L, t_0) >= (L-1) C_0`, evaluated only at `L = L' + 1`.
pub fn check_ineq_32(swarm: &PeerSwarm, dist: &InitialDistribution, l: usize) -> Result<bool> {
    let q = derive_quantities(swarm, dist)?;
    below_phi_zero(&q, dist.phi)?;
    let lp = l_prime(&q, swarm.len());
    if l != lp + 1 {
        return Err(Error::Domain(format!(
            "the L' + 1 test applies at L = {}, got {l}",
            lp + 1
        )));
    }
    let residual = ineq32_residual(swarm, dist, l)?;
    Ok(residual >= (l - 1) as f64 * swarm.source_upload())
}

/// The phi-multiplicity of a pure UP distribution.
pub fn phi_multiplicity(
    swarm: &PeerSwarm,
    dist: &InitialDistribution,
) -> Result<MultiplicityResult> {
    if !dist.is_pure_up() {
        return Err(Error::Domain(
            "phi-multiplicity needs a pure UP distribution; reduce the common block first".into(),
        ));
    }
    let q = derive_quantities(swarm, dist)?;
    let phi = dist.phi;
    if tol::approx_eq(phi, q.phi_zero) {
        return Ok(MultiplicityResult {
            m: 1,
            rule_used: MultiplicityRule::PhiEqualPhi0,
            l_prime: None,
        });
    }
    if phi > q.phi_zero {
        return Ok(MultiplicityResult {
            m: 0,
            rule_used: MultiplicityRule::PhiAbovePhi0,
            l_prime: None,
        });
    }
    let lp = l_prime(&q, swarm.len());
    if check_ineq_32(swarm, dist, lp + 1)? {
        return Ok(MultiplicityResult {
            m: lp + 1,
            rule_used: MultiplicityRule::Ineq32AtLPrimePlus1,
            l_prime: Some(lp),
        });
    }
    let mut m = 1;
    for l in (1..=lp).rev() {
        if check_ineq_34(swarm, dist, l)? {
            m = l;
            break;
        }
    }
    Ok(MultiplicityResult {
        m,
        rule_used: MultiplicityRule::Ineq34Search,
        l_prime: Some(lp),
    })
}

/// Multiplicity governing differentiated service: the classic value when
/// peers start empty, the phi-multiplicity otherwise.
pub fn service_multiplicity(
    swarm: &PeerSwarm,
    dist: &InitialDistribution,
) -> Result<MultiplicityResult> {
    if dist.phi == 0.0 {
        derive_quantities(swarm, dist)?;
        Ok(classic_multiplicity(swarm))
    } else {
        phi_multiplicity(swarm, dist)
    }
}
