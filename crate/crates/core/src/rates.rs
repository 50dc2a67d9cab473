//! Channel-estimate statistics, power control and the DL/UL achievable-rate
//! lower bounds (use-and-then-forget, conjugate beamforming on the DL,
//! matched filtering on the UL).
//!
//! Pilots are identified by labels: two users interfere in the training
//! phase iff their labels are equal. Labels `>= tau_p` are valid and act as
//! extra orthogonal sequences; the pilot-assignment search uses them to take
//! users out of every co-pilot group.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::network::{Drop, ServingSets};

/// Thermal noise power in W over `bandwidth_hz` for a receiver with the
/// given noise figure, from a -174 dBm/Hz density.
pub fn noise_power(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    10f64.powf((-174.0 + noise_figure_db + 10.0 * bandwidth_hz.log10() - 30.0) / 10.0)
}

/// DL power-control rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DlPowerMode {
    /// Each AP splits its budget in proportion to `γ`.
    SumRate,
    /// Fractional rule with exponent `alpha_dl`, favouring weak users.
    MinRate,
}

impl DlPowerMode {
    pub fn short_name(self) -> &'static str {
        match self {
            DlPowerMode::SumRate => "sr",
            DlPowerMode::MinRate => "mr",
        }
    }
}

/// How the DL coefficients enter the DL bound.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DlBound {
    /// Coefficients are per-link transmit powers (W) and the precoder is the
    /// unit-power conjugate beam: desired amplitude `√(p γ)`, non-coherent
    /// interference `p β`.
    #[default]
    TransmitPower,
    /// The coefficient expression taken literally: desired amplitude `η γ`,
    /// non-coherent interference `η β γ`. Dimensionally inconsistent when `η`
    /// is in watts, kept for cross-checking transcriptions.
    Literal,
}

/// Rate evaluation knobs that are not part of [`SystemConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSettings {
    pub dl_mode: DlPowerMode,
    pub dl_bound: DlBound,
}

impl RateSettings {
    pub fn new(dl_mode: DlPowerMode) -> Self {
        RateSettings {
            dl_mode,
            dl_bound: DlBound::default(),
        }
    }
}

/// `γ[k][m] = N_AP η̃_k β[k][m]² / (Σ_{j ~ k} η̃_j β[j][m] + σ_w²)`, the sum
/// running over every user holding the same pilot label as `k` (including `k`).
pub fn compute_gamma(beta: &Array2<f64>, pilots: &[usize], cfg: &SystemConfig) -> Array2<f64> {
    let (k_count, m_count) = beta.dim();
    assert_eq!(pilots.len(), k_count, "one pilot label per user");
    let sigma2 = noise_power(cfg.bandwidth_hz, cfg.noise_figure_db);
    let energy = cfg.training_energy();
    let labels = pilots.iter().max().map_or(0, |&p| p + 1);
    let mut received = Array2::<f64>::zeros((labels, m_count));
    for (k, &p) in pilots.iter().enumerate() {
        for m in 0..m_count {
            received[[p, m]] += energy * beta[[k, m]];
        }
    }
    Array2::from_shape_fn((k_count, m_count), |(k, m)| {
        gamma_entry(cfg, beta[[k, m]], received[[pilots[k], m]], sigma2)
    })
}

pub(crate) fn gamma_entry(cfg: &SystemConfig, b: f64, received: f64, sigma2: f64) -> f64 {
    cfg.antennas_per_ap as f64 * cfg.training_energy() * b * b / (received + sigma2)
}

/// DL power coefficients for every (MS, AP) pair, zero outside the serving sets.
#[derive(Debug, Clone, PartialEq)]
pub struct DlPower {
    pub mode: DlPowerMode,
    /// `η[k][m]` as given by the power-control rule.
    pub coefficients: Array2<f64>,
    /// Radiated power `p[k][m]` in W. Equals `η` under `SumRate` and `η γ`
    /// under `MinRate`; in both modes each serving AP radiates its full budget.
    pub transmit: Array2<f64>,
}

pub fn dl_power_coefficients(
    gamma: &Array2<f64>,
    serving: &ServingSets,
    mode: DlPowerMode,
    cfg: &SystemConfig,
) -> DlPower {
    let mut coefficients = Array2::<f64>::zeros(gamma.dim());
    let mut transmit = Array2::<f64>::zeros(gamma.dim());
    for (m, users) in serving.users_of_ap.iter().enumerate() {
        let total = users
            .iter()
            .map(|&k| ap_weight(mode, cfg, gamma[[k, m]]))
            .sum();
        for &k in users {
            let (eta, p) = dl_split(mode, cfg, gamma[[k, m]], total);
            coefficients[[k, m]] = eta;
            transmit[[k, m]] = p;
        }
    }
    DlPower {
        mode,
        coefficients,
        transmit,
    }
}

/// Share of AP budget claimed by a link with estimate gain `g`, before normalization.
pub(crate) fn ap_weight(mode: DlPowerMode, cfg: &SystemConfig, g: f64) -> f64 {
    match mode {
        DlPowerMode::SumRate => g,
        DlPowerMode::MinRate => pow(g, -cfg.alpha_dl),
    }
}

/// `(η, p)` for a link with gain `g` at an AP whose weights sum to `total`.
pub(crate) fn dl_split(mode: DlPowerMode, cfg: &SystemConfig, g: f64, total: f64) -> (f64, f64) {
    let budget = cfg.ap_power_w;
    match mode {
        DlPowerMode::SumRate if total > 0.0 => {
            let eta = g * budget / total;
            (eta, eta)
        }
        DlPowerMode::MinRate if total > 0.0 && total.is_finite() => {
            let eta = pow(g, -(cfg.alpha_dl + 1.0)) * budget / total;
            (eta, eta * g)
        }
        _ => (0.0, 0.0),
    }
}

/// `η_k = min(P_max, P_0 γ̄_k^(-α_UL))` with `γ̄_k = √(Σ_{m ∈ M_k} γ[k][m])`.
pub fn ul_power_coefficients(
    gamma: &Array2<f64>,
    serving: &ServingSets,
    cfg: &SystemConfig,
) -> Array1<f64> {
    serving
        .aps_of_user
        .iter()
        .enumerate()
        .map(|(k, aps)| ul_power(cfg, aps.iter().map(|&m| gamma[[k, m]]).sum()))
        .collect()
}

/// `x^e`, with the square-root exponents of the default power rules special-cased.
fn pow(x: f64, e: f64) -> f64 {
    if e == 0.5 {
        x.sqrt()
    } else if e == -0.5 {
        x.sqrt().recip()
    } else {
        x.powf(e)
    }
}

pub(crate) fn ul_power(cfg: &SystemConfig, gain: f64) -> f64 {
    let mean_gain = gain.sqrt();
    if mean_gain > 0.0 {
        cfg.ul_max_w
            .min(cfg.ul_target_w * pow(mean_gain, -cfg.alpha_ul))
    } else {
        cfg.ul_max_w
    }
}

/// Everything the rate bounds need for one pilot assignment.
#[derive(Debug, Clone)]
pub struct ChannelStats {
    pub gamma: Array2<f64>,
    pub dl: DlPower,
    pub ul: Array1<f64>,
    /// Per-AP aggregate of the DL non-coherent interference term.
    dl_ap_load: Array1<f64>,
    /// `Σ_j η_j β[j][m]` for every AP.
    ul_ap_load: Array1<f64>,
}

/// What the rate bounds read from a pilot assignment's statistics.
pub(crate) trait LinkView {
    fn gamma(&self, k: usize, m: usize) -> f64;
    /// Coherent DL amplitude of link `(k, m)`, as set by the [`DlBound`].
    fn amplitude(&self, k: usize, m: usize) -> f64;
    /// `Σ_j` of the DL non-coherent interference weights at AP `m`.
    fn dl_load(&self, m: usize) -> f64;
    fn ul_power(&self, k: usize) -> f64;
    /// `Σ_j η_j β[j][m]`.
    fn ul_load(&self, m: usize) -> f64;
    /// Users other than `k` with `k`'s label, ascending.
    fn co_pilots(&self, k: usize) -> impl Iterator<Item = usize>;
}

pub(crate) fn dl_amplitude(bound: DlBound, coefficient: f64, transmit: f64, gamma: f64) -> f64 {
    match bound {
        DlBound::TransmitPower => (transmit * gamma).sqrt(),
        DlBound::Literal => coefficient * gamma,
    }
}

pub(crate) fn dl_load_term(bound: DlBound, coefficient: f64, transmit: f64, gamma: f64) -> f64 {
    match bound {
        DlBound::TransmitPower => transmit,
        DlBound::Literal => coefficient * gamma,
    }
}

struct FullView<'s> {
    stats: &'s ChannelStats,
    pilots: &'s [usize],
    bound: DlBound,
}

impl LinkView for FullView<'_> {
    fn gamma(&self, k: usize, m: usize) -> f64 {
        self.stats.gamma[[k, m]]
    }

    fn amplitude(&self, k: usize, m: usize) -> f64 {
        let dl = &self.stats.dl;
        dl_amplitude(
            self.bound,
            dl.coefficients[[k, m]],
            dl.transmit[[k, m]],
            self.stats.gamma[[k, m]],
        )
    }

    fn dl_load(&self, m: usize) -> f64 {
        self.stats.dl_ap_load[m]
    }

    fn ul_power(&self, k: usize) -> f64 {
        self.stats.ul[k]
    }

    fn ul_load(&self, m: usize) -> f64 {
        self.stats.ul_ap_load[m]
    }

    fn co_pilots(&self, k: usize) -> impl Iterator<Item = usize> {
        let own = self.pilots[k];
        self.pilots
            .iter()
            .enumerate()
            .filter(move |&(j, &p)| j != k && p == own)
            .map(|(j, _)| j)
    }
}

/// Per-user DL and UL rates in bit/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateVector {
    pub dl: Vec<f64>,
    pub ul: Vec<f64>,
}

impl RateVector {
    pub fn len(&self) -> usize {
        self.dl.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dl.is_empty()
    }

    /// `R_k^DL · R_k^UL`.
    pub fn product(&self, k: usize) -> f64 {
        self.dl[k] * self.ul[k]
    }

    pub fn products(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.product(k))
    }
}

/// Rate evaluation for one drop under fixed settings.
#[derive(Debug, Clone)]
pub struct RateModel<'a> {
    pub drop: &'a Drop,
    pub cfg: &'a SystemConfig,
    pub settings: RateSettings,
    noise: f64,
    inv_beta: Array2<f64>,
}

impl<'a> RateModel<'a> {
    pub fn new(drop: &'a Drop, cfg: &'a SystemConfig, settings: RateSettings) -> Self {
        let noise = noise_power(cfg.bandwidth_hz, cfg.noise_figure_db);
        RateModel {
            drop,
            cfg,
            settings,
            noise,
            inv_beta: drop.beta.mapv(f64::recip),
        }
    }

    /// Recomputes `γ` and both sets of power coefficients from scratch.
    pub fn stats(&self, pilots: &[usize]) -> ChannelStats {
        let drop = self.drop;
        let gamma = compute_gamma(&drop.beta, pilots, self.cfg);
        let dl = dl_power_coefficients(&gamma, &drop.serving, self.settings.dl_mode, self.cfg);
        let ul = ul_power_coefficients(&gamma, &drop.serving, self.cfg);

        let dl_ap_load = drop
            .serving
            .users_of_ap
            .iter()
            .enumerate()
            .map(|(m, users)| {
                users
                    .iter()
                    .map(|&j| {
                        dl_load_term(
                            self.settings.dl_bound,
                            dl.coefficients[[j, m]],
                            dl.transmit[[j, m]],
                            gamma[[j, m]],
                        )
                    })
                    .sum()
            })
            .collect();
        let mut ul_ap_load = Array1::<f64>::zeros(drop.num_aps());
        for (j, row) in drop.beta.outer_iter().enumerate() {
            ul_ap_load.scaled_add(ul[j], &row);
        }
        ChannelStats {
            gamma,
            dl,
            ul,
            dl_ap_load,
            ul_ap_load,
        }
    }

    /// DL rate of user `k` in bit/s.
    pub fn dl_rate(&self, k: usize, stats: &ChannelStats, pilots: &[usize]) -> Result<f64> {
        self.dl_rate_in(&self.view(stats, pilots), k)
    }

    /// UL rate of user `k` in bit/s.
    pub fn ul_rate(&self, k: usize, stats: &ChannelStats, pilots: &[usize]) -> Result<f64> {
        self.ul_rate_in(&self.view(stats, pilots), k)
    }

    pub(crate) fn dl_rate_in<V: LinkView>(&self, view: &V, k: usize) -> Result<f64> {
        let sinr = self.dl_terms_in(view, k).sinr("DL")?;
        Ok(self.prelog(self.cfg.tau_d) * (1.0 + sinr).log2())
    }

    pub(crate) fn ul_rate_in<V: LinkView>(&self, view: &V, k: usize) -> Result<f64> {
        let sinr = self.ul_terms_in(view, k).sinr("UL")?;
        Ok(self.prelog(self.cfg.tau_u) * (1.0 + sinr).log2())
    }

    fn dl_terms_in<V: LinkView>(&self, view: &V, k: usize) -> SinrTerms {
        let beta = &self.drop.beta;
        let aps_of = &self.drop.serving.aps_of_user;

        let signal = aps_of[k]
            .iter()
            .map(|&m| view.amplitude(k, m))
            .sum::<f64>()
            .powi(2);
        let non_coherent: f64 = (0..self.drop.num_aps())
            .map(|m| beta[[k, m]] * view.dl_load(m))
            .sum();
        let mut coherent = 0.0;
        for j in view.co_pilots(k) {
            // every MS trains with the same energy, so the energy ratio is 1
            let leak: f64 = aps_of[j]
                .iter()
                .map(|&m| view.amplitude(j, m) * beta[[k, m]] * self.inv_beta[[j, m]])
                .sum();
            coherent += leak * leak;
        }
        SinrTerms {
            signal,
            non_coherent,
            coherent,
            noise: self.noise,
        }
    }

    fn ul_terms_in<V: LinkView>(&self, view: &V, k: usize) -> SinrTerms {
        let beta = &self.drop.beta;
        let aps = &self.drop.serving.aps_of_user[k];

        let own_gain: f64 = aps.iter().map(|&m| view.gamma(k, m)).sum();
        let signal = view.ul_power(k) * own_gain * own_gain;
        let non_coherent: f64 = aps
            .iter()
            .map(|&m| view.gamma(k, m) * view.ul_load(m))
            .sum();
        let mut coherent = 0.0;
        for j in view.co_pilots(k) {
            let leak: f64 = aps
                .iter()
                .map(|&m| view.gamma(k, m) * beta[[j, m]] * self.inv_beta[[k, m]])
                .sum();
            coherent += view.ul_power(j) * leak * leak;
        }
        SinrTerms {
            signal,
            non_coherent,
            coherent,
            noise: self.noise * own_gain,
        }
    }

    /// The four parts of user `k`'s DL SINR.
    pub fn dl_terms(&self, k: usize, stats: &ChannelStats, pilots: &[usize]) -> SinrTerms {
        self.dl_terms_in(&self.view(stats, pilots), k)
    }

    /// The four parts of user `k`'s UL SINR.
    pub fn ul_terms(&self, k: usize, stats: &ChannelStats, pilots: &[usize]) -> SinrTerms {
        self.ul_terms_in(&self.view(stats, pilots), k)
    }

    fn view<'s>(&self, stats: &'s ChannelStats, pilots: &'s [usize]) -> FullView<'s> {
        FullView {
            stats,
            pilots,
            bound: self.settings.dl_bound,
        }
    }

    /// `R^DL · R^UL` of user `k`.
    pub fn rate_product(&self, k: usize, stats: &ChannelStats, pilots: &[usize]) -> Result<f64> {
        Ok(self.dl_rate(k, stats, pilots)? * self.ul_rate(k, stats, pilots)?)
    }

    /// Rates of every user.
    pub fn rates(&self, pilots: &[usize]) -> Result<RateVector> {
        let stats = self.stats(pilots);
        let users = 0..self.drop.num_users();
        Ok(RateVector {
            dl: users
                .clone()
                .map(|k| self.dl_rate(k, &stats, pilots))
                .collect::<Result<_>>()?,
            ul: users
                .map(|k| self.ul_rate(k, &stats, pilots))
                .collect::<Result<_>>()?,
        })
    }

    pub(crate) fn noise(&self) -> f64 {
        self.noise
    }

    fn prelog(&self, data_samples: usize) -> f64 {
        data_samples as f64 / self.cfg.tau_c as f64 * self.cfg.bandwidth_hz
    }
}

/// SINR of one user split into its parts: coherent signal, non-coherent
/// interference, coherent pilot-contamination interference and noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrTerms {
    pub signal: f64,
    pub non_coherent: f64,
    pub coherent: f64,
    pub noise: f64,
}

impl SinrTerms {
    fn sinr(&self, link: &'static str) -> Result<f64> {
        checked_sinr(
            link,
            self.signal,
            self.non_coherent + self.coherent + self.noise,
        )
    }
}

fn checked_sinr(link: &'static str, signal: f64, disturbance: f64) -> Result<f64> {
    if !(signal >= 0.0 && disturbance >= 0.0) {
        return Err(Error::NegativeTerm(link));
    }
    if signal == 0.0 {
        return Ok(0.0);
    }
    Ok(signal / disturbance)
}
