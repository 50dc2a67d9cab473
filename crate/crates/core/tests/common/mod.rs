//! Scalar reference implementations used as oracles by the integration tests.
//! Written from the rate and power-control formulas directly, with plain
//! loops and no shared code with the library.

#![allow(dead_code)]

use cfpa_core::{DlBound, DlPowerMode, SystemConfig};
use ndarray::Array2;

pub fn noise_w(cfg: &SystemConfig) -> f64 {
    let dbm = -174.0 + cfg.noise_figure_db + 10.0 * cfg.bandwidth_hz.log10();
    10f64.powf(dbm / 10.0) / 1000.0
}

pub fn gamma(beta: &Array2<f64>, pilots: &[usize], cfg: &SystemConfig) -> Vec<Vec<f64>> {
    let (k_count, m_count) = beta.dim();
    let train = cfg.tau_p as f64 * cfg.p_k;
    let s2 = noise_w(cfg);
    let n_ap = cfg.antennas_per_ap as f64;
    let mut out = vec![vec![0.0; m_count]; k_count];
    for k in 0..k_count {
        for m in 0..m_count {
            let mut den = s2;
            for j in 0..k_count {
                if pilots[j] == pilots[k] {
                    den += train * beta[[j, m]];
                }
            }
            out[k][m] = n_ap * train * beta[[k, m]] * beta[[k, m]] / den;
        }
    }
    out
}

/// DL coefficients as printed (`eta`) and the power each link radiates.
pub struct DlCoefficients {
    pub eta: Vec<Vec<f64>>,
    pub radiated: Vec<Vec<f64>>,
}

pub fn dl_coefficients(
    g: &[Vec<f64>],
    aps_of_user: &[Vec<usize>],
    mode: DlPowerMode,
    cfg: &SystemConfig,
) -> DlCoefficients {
    let k_count = g.len();
    let m_count = g.first().map_or(0, Vec::len);
    let mut eta = vec![vec![0.0; m_count]; k_count];
    let mut radiated = vec![vec![0.0; m_count]; k_count];
    let a = cfg.alpha_dl;
    for m in 0..m_count {
        let served: Vec<usize> = (0..k_count)
            .filter(|&k| aps_of_user[k].contains(&m))
            .collect();
        let total: f64 = served
            .iter()
            .map(|&k| match mode {
                DlPowerMode::SumRate => g[k][m],
                DlPowerMode::MinRate => g[k][m].powf(-a),
            })
            .sum();
        for &k in &served {
            match mode {
                DlPowerMode::SumRate => {
                    eta[k][m] = g[k][m] * cfg.ap_power_w / total;
                    radiated[k][m] = eta[k][m];
                }
                DlPowerMode::MinRate => {
                    eta[k][m] = g[k][m].powf(-(a + 1.0)) * cfg.ap_power_w / total;
                    radiated[k][m] = eta[k][m] * g[k][m];
                }
            }
        }
    }
    DlCoefficients { eta, radiated }
}

pub fn ul_powers(g: &[Vec<f64>], aps_of_user: &[Vec<usize>], cfg: &SystemConfig) -> Vec<f64> {
    (0..g.len())
        .map(|k| {
            let bar = aps_of_user[k].iter().map(|&m| g[k][m]).sum::<f64>().sqrt();
            if bar == 0.0 {
                cfg.ul_max_w
            } else {
                cfg.ul_max_w.min(cfg.ul_target_w * bar.powf(-cfg.alpha_ul))
            }
        })
        .collect()
}

/// SINR parts of one user: signal, non-coherent, coherent, noise.
#[derive(Debug, Clone, Copy)]
pub struct Parts {
    pub signal: f64,
    pub non_coherent: f64,
    pub coherent: f64,
    pub noise: f64,
}

impl Parts {
    pub fn sinr(&self) -> f64 {
        self.signal / (self.non_coherent + self.coherent + self.noise)
    }
}

pub struct Oracle {
    pub dl: Vec<Parts>,
    pub ul: Vec<Parts>,
    pub dl_rate: Vec<f64>,
    pub ul_rate: Vec<f64>,
}

pub fn evaluate(
    beta: &Array2<f64>,
    aps_of_user: &[Vec<usize>],
    pilots: &[usize],
    cfg: &SystemConfig,
    mode: DlPowerMode,
    bound: DlBound,
) -> Oracle {
    let k_count = beta.nrows();
    let g = gamma(beta, pilots, cfg);
    let c = dl_coefficients(&g, aps_of_user, mode, cfg);
    let ul_eta = ul_powers(&g, aps_of_user, cfg);
    let s2 = noise_w(cfg);
    // uniform training power, so the ratio under the root is one
    let train_ratio = 1.0f64;

    let amp = |j: usize, m: usize| match bound {
        DlBound::TransmitPower => (c.radiated[j][m] * g[j][m]).sqrt(),
        DlBound::Literal => c.eta[j][m] * train_ratio.sqrt() * g[j][m],
    };

    let mut dl = Vec::new();
    let mut ul = Vec::new();
    for k in 0..k_count {
        let mut desired = 0.0;
        for &m in &aps_of_user[k] {
            desired += amp(k, m);
        }
        let mut non_coherent = 0.0;
        for j in 0..k_count {
            for &m in &aps_of_user[j] {
                non_coherent += match bound {
                    DlBound::TransmitPower => c.radiated[j][m] * beta[[k, m]],
                    DlBound::Literal => c.eta[j][m] * beta[[k, m]] * g[j][m],
                };
            }
        }
        let mut coherent = 0.0;
        for j in 0..k_count {
            if j == k || pilots[j] != pilots[k] {
                continue;
            }
            let mut leak = 0.0;
            for &m in &aps_of_user[j] {
                leak += amp(j, m) * beta[[k, m]] / beta[[j, m]];
            }
            coherent += leak * leak;
        }
        dl.push(Parts {
            signal: desired * desired,
            non_coherent,
            coherent,
            noise: s2,
        });

        let own: f64 = aps_of_user[k].iter().map(|&m| g[k][m]).sum();
        let mut non_coherent = 0.0;
        for j in 0..k_count {
            let mut s = 0.0;
            for &m in &aps_of_user[k] {
                s += beta[[j, m]] * g[k][m];
            }
            non_coherent += ul_eta[j] * s;
        }
        let mut coherent = 0.0;
        for j in 0..k_count {
            if j == k || pilots[j] != pilots[k] {
                continue;
            }
            let mut leak = 0.0;
            for &m in &aps_of_user[k] {
                leak += g[k][m] * beta[[j, m]] / beta[[k, m]];
            }
            coherent += ul_eta[j] * leak * leak;
        }
        ul.push(Parts {
            signal: ul_eta[k] * own * own,
            non_coherent,
            coherent,
            noise: s2 * own,
        });
    }
    let pre = |samples: usize| samples as f64 / cfg.tau_c as f64 * cfg.bandwidth_hz;
    let dl_rate = dl
        .iter()
        .map(|p| pre(cfg.tau_d) * (1.0 + p.sinr()).log2())
        .collect();
    let ul_rate = ul
        .iter()
        .map(|p| pre(cfg.tau_u) * (1.0 + p.sinr()).log2())
        .collect();
    Oracle {
        dl,
        ul,
        dl_rate,
        ul_rate,
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
