//! Flat JSON run configuration shared by the command-line verbs.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{reduce_ucp_to_up, InitialDistribution, PeerSwarm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub source_upload: f64,
    pub peer_uploads: Vec<f64>,
    pub file_size: f64,
    #[serde(default)]
    pub phi: f64,
    /// Data every peer holds; the rest of `phi F` is spread in proportion
    /// to upload.
    #[serde(default)]
    pub common_data: f64,
    #[serde(default)]
    pub first_set_size: Option<usize>,
    #[serde(default)]
    pub phi_start: Option<f64>,
    #[serde(default)]
    pub phi_stop: Option<f64>,
    #[serde(default)]
    pub phi_steps: Option<usize>,
    #[serde(default)]
    pub l_min: Option<usize>,
    #[serde(default)]
    pub l_max: Option<usize>,
    #[serde(default)]
    pub sim_step: Option<f64>,
    #[serde(default)]
    pub tiers: Option<Vec<usize>>,
    #[serde(default)]
    pub output: Option<String>,
    /// Sort peers by descending upload before use.
    #[serde(default)]
    pub sort_descending: bool,
}

fn field_error(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("`{field}`: {msg}"))
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(field_error(
            field,
            format!("must be a positive number, got {v}"),
        ))
    }
}

fn fraction(field: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(field_error(field, format!("must lie in [0, 1], got {v}")))
    }
}

/// Parse and validate. Syntax errors carry line and column.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        positive("source_upload", self.source_upload)?;
        positive("file_size", self.file_size)?;
        if self.peer_uploads.len() < 2 {
            return Err(field_error("peer_uploads", "needs at least two peers"));
        }
        for (i, &c) in self.peer_uploads.iter().enumerate() {
            positive(&format!("peer_uploads[{i}]"), c)?;
        }
        fraction("phi", self.phi)?;
        if !(self.common_data.is_finite() && self.common_data >= 0.0) {
            return Err(field_error("common_data", "must be non-negative"));
        }
        if self.common_data > self.phi * self.file_size {
            return Err(field_error("common_data", "exceeds phi * file_size"));
        }
        let n = self.peer_uploads.len();
        let in_range = |field: &str, v: Option<usize>| match v {
            Some(l) if l < 1 || l > n => {
                Err(field_error(field, format!("must lie in [1, {n}], got {l}")))
            }
            _ => Ok(()),
        };
        in_range("first_set_size", self.first_set_size)?;
        in_range("l_min", self.l_min)?;
        in_range("l_max", self.l_max)?;
        if self.l_range().is_empty() {
            return Err(field_error("l_min", "exceeds l_max"));
        }
        for (field, v) in [("phi_start", self.phi_start), ("phi_stop", self.phi_stop)] {
            if let Some(v) = v {
                fraction(field, v)?;
            }
        }
        if self.phi_steps == Some(0) {
            return Err(field_error("phi_steps", "must be at least 1"));
        }
        if let Some(s) = self.sim_step {
            positive("sim_step", s)?;
        }
        if let Some(t) = &self.tiers {
            if t.is_empty() || t.contains(&0) || t.iter().sum::<usize>() != n {
                return Err(field_error(
                    "tiers",
                    format!("must be positive sizes summing to {n}"),
                ));
            }
        }
        Ok(())
    }

    pub fn swarm(&self) -> Result<PeerSwarm> {
        let s = PeerSwarm::new(
            self.source_upload,
            self.peer_uploads.clone(),
            self.file_size,
        )?;
        Ok(if self.sort_descending {
            s.sorted_descending()
        } else {
            s
        })
    }

    /// Common block plus upload-proportional unique pieces for a given `phi`.
    pub fn distribution_at(&self, phi: f64) -> Result<InitialDistribution> {
        fraction("phi", phi)?;
        let swarm = self.swarm()?;
        let spread = phi * self.file_size - self.common_data;
        if spread < 0.0 {
            return Err(Error::InconsistentDistribution {
                common: self.common_data,
                held: phi * self.file_size,
            });
        }
        let ratio = spread / swarm.total_peer_upload();
        let unique = swarm.peer_uploads().iter().map(|c| c * ratio).collect();
        Ok(InitialDistribution::new(phi, self.common_data, unique))
    }

    pub fn distribution(&self) -> Result<InitialDistribution> {
        self.distribution_at(self.phi)
    }

    /// Pure UP instance at `phi`, with any common block factored out.
    pub fn instance_at(&self, phi: f64) -> Result<(PeerSwarm, InitialDistribution)> {
        reduce_ucp_to_up(&self.swarm()?, &self.distribution_at(phi)?)
    }

    pub fn instance(&self) -> Result<(PeerSwarm, InitialDistribution)> {
        self.instance_at(self.phi)
    }

    /// Evenly spaced sweep values; defaults to `phi` alone.
    pub fn phi_grid(&self) -> Vec<f64> {
        let start = self.phi_start.unwrap_or(self.phi);
        let stop = self.phi_stop.unwrap_or(start);
        let steps = self.phi_steps.unwrap_or(1);
        if steps == 1 {
            return vec![start];
        }
        (0..steps)
            .map(|k| start + (stop - start) * k as f64 / (steps - 1) as f64)
            .collect()
    }

    pub fn l_range(&self) -> RangeInclusive<usize> {
        self.l_min.unwrap_or(1)..=self.l_max.unwrap_or(self.peer_uploads.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{"source_upload": 12, "peer_uploads": [3, 2, 1], "file_size": 100"#;

    fn cfg(extra: &str) -> Result<RunConfig> {
        parse_config(&format!("{BASE}{extra}}}"))
    }

    #[test]
    fn minimal_config() {
        let c = cfg("").unwrap();
        assert_eq!(c.phi, 0.0);
        assert_eq!(c.phi_grid(), vec![0.0]);
        assert_eq!(c.l_range(), 1..=3);
    }

    #[test]
    fn grid() {
        let c = cfg(r#", "phi_start": 0, "phi_stop": 1, "phi_steps": 11, "l_min": 2"#).unwrap();
        let g = c.phi_grid();
        assert_eq!(g.len(), 11);
        assert!((g[3] - 0.3).abs() < 1e-12);
        assert_eq!(c.l_range(), 2..=3);
    }

    #[test]
    fn syntax_errors_carry_position() {
        let e = parse_config("{\n  \"source_upload\": 12,\n  oops\n}").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
    }

    #[test]
    fn validation_names_the_field() {
        for (extra, field) in [
            (r#", "phi": 1.5"#, "phi"),
            (r#", "first_set_size": 4"#, "first_set_size"),
            (r#", "phi_steps": 0"#, "phi_steps"),
            (r#", "l_min": 3, "l_max": 2"#, "l_min"),
            (r#", "phi": 0.1, "common_data": 20"#, "common_data"),
            (r#", "tiers": [2, 2]"#, "tiers"),
        ] {
            let e = cfg(extra).unwrap_err().to_string();
            assert!(e.contains(field), "{extra}: {e}");
        }
        let e = parse_config(r#"{"source_upload": 12, "peer_uploads": [], "file_size": 1}"#)
            .unwrap_err();
        assert!(e.to_string().contains("peer_uploads"));
        assert!(cfg(r#", "typo": 1"#).is_err());
    }

    #[test]
    fn common_block_is_factored_out() {
        let c = cfg(r#", "phi": 0.5, "common_data": 20"#).unwrap();
        let d = c.distribution().unwrap();
        assert!((d.unique_total() - 30.0).abs() < 1e-12);
        let (s, up) = c.instance().unwrap();
        assert_eq!(s.file_size(), 80.0);
        assert!((up.phi - 30.0 / 80.0).abs() < 1e-12);
    }
}
