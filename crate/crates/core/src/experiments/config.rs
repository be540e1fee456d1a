use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::correlation::{xpd_from_db, XpdSpec};
use crate::error::{Error, Result};
use crate::scenario::DropModel;
use crate::units::{dbm_to_mw, PolPair};

/// Simulation parameters. Keys in the TOML file match the serialized names
/// below; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    /// Total BS ports; the dual array has `M/2` dual-polarized elements and
    /// the uni baseline `M/2` single-polarized antennas.
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub tau_c: usize,
    /// Dual-polarized pilot length, `2K` when absent.
    pub tau_p: Option<usize>,
    /// Uni-polarized pilot length, `K` when absent.
    pub tau_uni_p: Option<usize>,
    /// Cross-polar discrimination; `inf` disables leakage.
    pub xpd_db: f64,
    pub n_clusters: usize,
    pub asd_deg: f64,
    pub sigma_sf: f64,
    pub noise_dbm: f64,
    #[serde(rename = "p_kV")]
    pub p_kv: f64,
    #[serde(rename = "p_kH")]
    pub p_kh: f64,
    #[serde(rename = "rho_kV")]
    pub rho_kv: f64,
    #[serde(rename = "rho_kH")]
    pub rho_kh: f64,
    pub p_uni: f64,
    pub rho_uni: f64,
    /// Recorded only; SE is per Hz.
    pub bandwidth_mhz: f64,
    pub seed: u64,
    pub drops: usize,
    pub mc_trials: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            m: 100,
            k: 10,
            tau_c: 200,
            tau_p: None,
            tau_uni_p: None,
            xpd_db: 7.0,
            n_clusters: 6,
            asd_deg: 5.0,
            sigma_sf: 7.0,
            noise_dbm: -94.0,
            p_kv: 100.0,
            p_kh: 100.0,
            rho_kv: 100.0,
            rho_kh: 100.0,
            p_uni: 200.0,
            rho_uni: 200.0,
            bandwidth_mhz: 20.0,
            seed: 1,
            drops: 200,
            mc_trials: 1000,
        }
    }
}

impl SystemConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: SystemConfig = toml::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn tau_p(&self) -> usize {
        self.tau_p.unwrap_or(2 * self.k)
    }

    pub fn tau_uni_p(&self) -> usize {
        self.tau_uni_p.unwrap_or(self.k)
    }

    pub fn noise_var(&self) -> f64 {
        dbm_to_mw(self.noise_dbm)
    }

    pub fn xpd(&self) -> XpdSpec {
        xpd_from_db(self.xpd_db)
    }

    pub fn pilot_powers(&self) -> PolPair {
        PolPair::new(self.p_kv, self.p_kh)
    }

    pub fn downlink_powers(&self) -> PolPair {
        PolPair::new(self.rho_kv, self.rho_kh)
    }

    pub fn asd_rad(&self) -> f64 {
        self.asd_deg.to_radians()
    }

    pub fn drop_model(&self) -> DropModel {
        DropModel { shadow_std_db: self.sigma_sf, n_clusters: self.n_clusters, ..DropModel::default() }
    }

    /// SHA-256 over the canonical TOML form, hex encoded.
    pub fn digest(&self) -> String {
        Sha256::digest(self.to_toml_string().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.m < 2 || self.m % 2 != 0 {
            return bad(format!("M = {} must be even and at least 2", self.m));
        }
        if self.k == 0 {
            return bad("K must be at least 1".into());
        }
        if self.tau_p() != 2 * self.k {
            return bad(format!("tau_p = {} must equal 2K = {}", self.tau_p(), 2 * self.k));
        }
        if self.tau_p() >= self.tau_c {
            return bad(format!("tau_p = {} leaves no data symbols in tau_c = {}", self.tau_p(), self.tau_c));
        }
        if self.tau_uni_p() < self.k || self.tau_uni_p() >= self.tau_c {
            return bad(format!("tau_uni_p = {} must lie in [K, tau_c)", self.tau_uni_p()));
        }
        if self.xpd_db.is_nan() || self.xpd_db == f64::NEG_INFINITY {
            return bad(format!("xpd_db = {} must be a real number or inf", self.xpd_db));
        }
        if self.n_clusters == 0 {
            return bad("n_clusters must be at least 1".into());
        }
        for (name, v) in [("asd_deg", self.asd_deg), ("sigma_sf", self.sigma_sf)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be nonnegative"));
            }
        }
        if !self.noise_dbm.is_finite() {
            return bad("noise_dbm must be finite".into());
        }
        for (name, v) in [
            ("p_kV", self.p_kv),
            ("p_kH", self.p_kh),
            ("rho_kV", self.rho_kv),
            ("rho_kH", self.rho_kh),
            ("p_uni", self.p_uni),
            ("rho_uni", self.rho_uni),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be a nonnegative power"));
            }
        }
        if self.drops == 0 {
            return bad("drops must be at least 1".into());
        }
        if self.mc_trials < 100 {
            return bad(format!("mc_trials = {} must be at least 100", self.mc_trials));
        }
        Ok(())
    }
}
