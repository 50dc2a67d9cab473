//! System parameters and the flat key-value config file.
//!
//! Keys use the conventional symbols of the system model (`W`, `M`, `K`,
//! `tau_p`, ...) and SI units. Any key left out keeps its default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// System bandwidth in Hz.
    #[serde(rename = "W")]
    pub bandwidth_hz: f64,
    /// Carrier frequency in Hz. Recorded for completeness; the adopted
    /// path-loss constants already fold it in.
    pub f0: f64,
    #[serde(rename = "h_AP")]
    pub ap_height_m: f64,
    #[serde(rename = "h_MS")]
    pub ms_height_m: f64,
    /// Receiver noise figure, applied at both APs and MSs.
    #[serde(rename = "noise_figure_dB")]
    pub noise_figure_db: f64,
    #[serde(rename = "M")]
    pub num_aps: usize,
    #[serde(rename = "N_AP")]
    pub antennas_per_ap: usize,
    #[serde(rename = "K")]
    pub num_users: usize,
    pub tau_p: usize,
    pub tau_c: usize,
    pub tau_u: usize,
    pub tau_d: usize,
    /// APs serving each MS.
    #[serde(rename = "N_serving")]
    pub serving_aps: usize,
    /// Per-MS pilot symbol power in W.
    pub p_k: f64,
    /// Per-AP DL power budget in W.
    #[serde(rename = "P_dl_m")]
    pub ap_power_w: f64,
    #[serde(rename = "P0_ul")]
    pub ul_target_w: f64,
    #[serde(rename = "P_max_ul")]
    pub ul_max_w: f64,
    pub alpha_dl: f64,
    pub alpha_ul: f64,
    /// Side of the square, wrapped-around deployment area in meters.
    pub side: f64,
    #[serde(rename = "pl_const_dB")]
    pub pl_const_db: f64,
    pub pl_slope: f64,
    #[serde(rename = "sigma_sh_dB")]
    pub sigma_sh_db: f64,
    /// Distance at which MS-side shadowing correlation halves, in meters.
    pub d_decorr: f64,
    /// Weight of the AP-side shadowing component.
    pub delta_sh: f64,
    /// Horizontal distances below this are clamped before path loss.
    pub d_min: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let tau_c = 200;
        let tau_p = 8;
        SystemConfig {
            bandwidth_hz: 20e6,
            f0: 1.9e9,
            ap_height_m: 10.0,
            ms_height_m: 1.65,
            noise_figure_db: 9.0,
            num_aps: 100,
            antennas_per_ap: 4,
            num_users: 40,
            tau_p,
            tau_c,
            tau_u: (tau_c - tau_p) / 2,
            tau_d: (tau_c - tau_p) / 2,
            serving_aps: 20,
            p_k: 0.1,
            ap_power_w: 0.2,
            ul_target_w: 1e-4,
            ul_max_w: 0.1,
            alpha_dl: -0.5,
            alpha_ul: 0.5,
            side: 1000.0,
            pl_const_db: 140.7,
            pl_slope: 36.7,
            sigma_sh_db: 8.0,
            d_decorr: 9.0,
            delta_sh: 0.5,
            d_min: 10.0,
        }
    }
}

impl SystemConfig {
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Reads and validates a config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::from_toml_str(&text).map_err(|source| Error::ConfigParse {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Training energy `tau_p * p_k` of every MS.
    pub fn training_energy(&self) -> f64 {
        self.tau_p as f64 * self.p_k
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_aps == 0 || self.num_users == 0 || self.antennas_per_ap == 0 {
            return fail("M, K and N_AP must be at least 1".into());
        }
        if self.tau_p == 0 || self.tau_p >= self.tau_c {
            return fail(format!(
                "need 1 <= tau_p < tau_c, got tau_p={} tau_c={}",
                self.tau_p, self.tau_c
            ));
        }
        if self.tau_u + self.tau_d + self.tau_p > self.tau_c {
            return fail(format!(
                "tau_u + tau_d + tau_p = {} exceeds tau_c = {}",
                self.tau_u + self.tau_d + self.tau_p,
                self.tau_c
            ));
        }
        if self.serving_aps == 0 || self.serving_aps > self.num_aps {
            return fail(format!(
                "N_serving must lie in 1..={}, got {}",
                self.num_aps, self.serving_aps
            ));
        }
        let positive = [
            ("W", self.bandwidth_hz),
            ("p_k", self.p_k),
            ("P_dl_m", self.ap_power_w),
            ("P0_ul", self.ul_target_w),
            ("P_max_ul", self.ul_max_w),
            ("side", self.side),
            ("d_decorr", self.d_decorr),
            ("d_min", self.d_min),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return fail(format!("{name} must be positive, got {value}"));
            }
        }
        let finite = [
            ("f0", self.f0),
            ("h_AP", self.ap_height_m),
            ("h_MS", self.ms_height_m),
            ("noise_figure_dB", self.noise_figure_db),
            ("alpha_dl", self.alpha_dl),
            ("alpha_ul", self.alpha_ul),
            ("pl_const_dB", self.pl_const_db),
            ("pl_slope", self.pl_slope),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return fail(format!("{name} must be finite, got {value}"));
            }
        }
        if !(self.sigma_sh_db.is_finite() && self.sigma_sh_db >= 0.0) {
            return fail(format!(
                "sigma_sh_dB must be nonnegative, got {}",
                self.sigma_sh_db
            ));
        }
        if !(0.0..=1.0).contains(&self.delta_sh) {
            return fail(format!(
                "delta_sh must lie in [0, 1], got {}",
                self.delta_sh
            ));
        }
        Ok(())
    }
}
