//! Finish time over a grid of `phi` and first-set sizes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::analytic::{differentiated_service_time, Regime};
use crate::config::RunConfig;
use crate::error::Result;
use crate::multiplicity::service_multiplicity;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub phi: f64,
    pub l: usize,
    pub t_l: f64,
    pub regime: Regime,
    pub multiplicity: usize,
}

/// Rows ordered by `phi`, then `L`.
pub fn run_sweep(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for phi in cfg.phi_grid() {
        let (swarm, dist) = cfg.instance_at(phi)?;
        let m = service_multiplicity(&swarm, &dist)?.m;
        for l in cfg.l_range() {
            let o = differentiated_service_time(&swarm, &dist, l)?;
            rows.push(SweepRow {
                phi,
                l,
                t_l: o.t_last,
                regime: o.regime,
                multiplicity: m,
            });
        }
    }
    Ok(rows)
}

/// `x` with six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = 5 - magnitude;
    if decimals >= 0 {
        format!("{x:.*}", decimals as usize)
    } else {
        let unit = 10f64.powi(-decimals);
        format!("{:.0}", (x / unit).round() * unit)
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("phi,L,T_L,regime,multiplicity\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            sig6(r.phi),
            r.l,
            sig6(r.t_l),
            r.regime,
            r.multiplicity
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn significant_digits() {
        assert_eq!(sig6(100.421940928), "100.422");
        assert_eq!(sig6(150.0), "150.000");
        assert_eq!(sig6(0.1), "0.100000");
        assert_eq!(sig6(8.29124579), "8.29125");
        assert_eq!(sig6(1234567.0), "1234570");
        assert_eq!(sig6(0.0), "0");
    }

    #[test]
    fn canonical_sweep() {
        let cfg = parse_config(
            r#"{"source_upload": 12,
                "peer_uploads": [10,10,9,9,8,8,7,7,6,6,5,5,4,4,3,3,2,2],
                "file_size": 1000, "phi_start": 0, "phi_stop": 1, "phi_steps": 11}"#,
        )
        .unwrap();
        let rows = run_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 11 * 18);
        let r = rows
            .iter()
            .find(|r| (r.phi - 0.1).abs() < 1e-12 && r.l == 12)
            .unwrap();
        assert!((r.t_l - 100.4219).abs() < 1e-3);
        assert_eq!(r.multiplicity, 8);
        let csv = sweep_csv(&rows);
        assert!(csv.starts_with("phi,L,T_L,regime,multiplicity\n0,1,83.3333,eq6_bottleneck,9\n"));
        assert!(csv.contains("\n0.100000,12,100.422,eq31,8\n"), "{csv}");
    }
}
