//! Random network drops: AP/MS placement on a wrapped-around square, path
//! loss, two-component correlated shadowing, large-scale fading and the
//! MS-centric serving sets.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    fn uniform<R: Rng + ?Sized>(rng: &mut R, side: f64) -> Self {
        Position {
            x: rng.random::<f64>() * side,
            y: rng.random::<f64>() * side,
        }
    }
}

/// Distance between `p` and the nearest of the nine toroidal images of `q`.
pub fn wrap_distance(p: Position, q: Position, side: f64) -> f64 {
    let fold = |a: f64, b: f64| {
        let d = (a - b).abs() % side;
        d.min(side - d)
    };
    fold(p.x, q.x).hypot(fold(p.y, q.y))
}

/// Path loss in dB at distance `d` meters: `pl_const + pl_slope * log10(d / 1 km)`,
/// with `d` clamped below at `d_min`.
pub fn path_loss_db(d: f64, cfg: &SystemConfig) -> f64 {
    cfg.pl_const_db + cfg.pl_slope * (d.max(cfg.d_min) / 1000.0).log10()
}

/// AP and MS positions of one drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub aps: Vec<Position>,
    pub users: Vec<Position>,
}

impl Geometry {
    pub fn random<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Self {
        let aps = (0..cfg.num_aps)
            .map(|_| Position::uniform(rng, cfg.side))
            .collect();
        let users = (0..cfg.num_users)
            .map(|_| Position::uniform(rng, cfg.side))
            .collect();
        Geometry { aps, users }
    }
}

/// Draws the K×M shadowing matrix in dB.
///
/// `Z[k][m] = σ (√δ a_m + √(1-δ) b_k)` with `a_m` i.i.d. standard normal per AP
/// and `b` a standard normal vector over MSs whose correlation decays as
/// `2^(-d / d_decorr)` in the wrapped distance.
pub fn generate_shadowing<R: Rng + ?Sized>(
    geometry: &Geometry,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<Array2<f64>> {
    let (k_count, m_count) = (geometry.users.len(), geometry.aps.len());
    let ap_part: Vec<f64> = (0..m_count).map(|_| rng.sample(StandardNormal)).collect();
    let iid: Array1<f64> = (0..k_count)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    if cfg.sigma_sh_db == 0.0 {
        return Ok(Array2::zeros((k_count, m_count)));
    }

    let corr = Array2::from_shape_fn((k_count, k_count), |(i, j)| {
        let d = wrap_distance(geometry.users[i], geometry.users[j], cfg.side);
        2f64.powf(-d / cfg.d_decorr)
    });
    let factor = semidefinite_cholesky(&corr)?;
    let ms_part = factor.dot(&iid);

    let (wa, wb) = (cfg.delta_sh.sqrt(), (1.0 - cfg.delta_sh).sqrt());
    Ok(Array2::from_shape_fn((k_count, m_count), |(k, m)| {
        cfg.sigma_sh_db * (wa * ap_part[m] + wb * ms_part[k])
    }))
}

/// Lower-triangular `L` with `L Lᵀ = a` for a positive semidefinite `a`.
/// Pivots that vanish to rounding leave a zero column, so coincident users
/// get identical rows.
fn semidefinite_cholesky(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[[i, i]].abs()).fold(0.0, f64::max).max(1.0);
    let tol = 1e-10 * scale;
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let pivot = a[[j, j]] - (0..j).map(|p| l[[j, p]] * l[[j, p]]).sum::<f64>();
        if pivot < -tol {
            return Err(Error::NotPositiveSemidefinite { row: j, pivot });
        }
        if pivot <= tol {
            continue;
        }
        let root = pivot.sqrt();
        l[[j, j]] = root;
        for i in j + 1..n {
            let dot: f64 = (0..j).map(|p| l[[i, p]] * l[[j, p]]).sum();
            l[[i, j]] = (a[[i, j]] - dot) / root;
        }
    }
    Ok(l)
}

/// Linear LSF coefficients `β = 10^(-(PL(d3) + Z)/10)` where `d3` is the 3-D
/// wrapped distance including the antenna height difference.
pub fn compute_lsf(
    geometry: &Geometry,
    shadowing_db: &Array2<f64>,
    cfg: &SystemConfig,
) -> Array2<f64> {
    let dh = cfg.ap_height_m - cfg.ms_height_m;
    Array2::from_shape_fn((geometry.users.len(), geometry.aps.len()), |(k, m)| {
        let d2 = wrap_distance(geometry.users[k], geometry.aps[m], cfg.side).max(cfg.d_min);
        let d3 = d2.hypot(dh);
        10f64.powf(-(path_loss_db(d3, cfg) + shadowing_db[[k, m]]) / 10.0)
    })
}

/// Serving relation between MSs and APs. Both families are kept sorted by index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServingSets {
    /// `aps_of_user[k]` is the set of APs serving MS `k`.
    pub aps_of_user: Vec<Vec<usize>>,
    /// `users_of_ap[m]` is the set of MSs served by AP `m`.
    pub users_of_ap: Vec<Vec<usize>>,
}

/// Each MS is served by its `n_serving` strongest APs (ties go to the smaller AP index).
pub fn serving_sets(beta: &Array2<f64>, n_serving: usize) -> ServingSets {
    let (k_count, m_count) = beta.dim();
    let mut users_of_ap = vec![Vec::new(); m_count];
    let aps_of_user = (0..k_count)
        .map(|k| {
            let mut order: Vec<usize> = (0..m_count).collect();
            order.sort_by(|&a, &b| beta[[k, b]].total_cmp(&beta[[k, a]]).then(a.cmp(&b)));
            order.truncate(n_serving);
            order.sort_unstable();
            for &m in &order {
                users_of_ap[m].push(k);
            }
            order
        })
        .collect();
    ServingSets {
        aps_of_user,
        users_of_ap,
    }
}

/// One network realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drop {
    /// Positions; empty for drops assembled directly from an LSF matrix.
    pub geometry: Geometry,
    /// K×M linear LSF coefficients.
    pub beta: Array2<f64>,
    pub serving: ServingSets,
}

impl Drop {
    pub fn generate(cfg: &SystemConfig, seed: u64) -> Result<Self> {
        Self::generate_with(cfg, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn generate_with<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<Self> {
        let geometry = Geometry::random(cfg, rng);
        let shadowing = generate_shadowing(&geometry, cfg, rng)?;
        let beta = compute_lsf(&geometry, &shadowing, cfg);
        let serving = serving_sets(&beta, cfg.serving_aps);
        Ok(Drop {
            geometry,
            beta,
            serving,
        })
    }

    /// Builds a drop from a given LSF matrix, without positions.
    pub fn from_beta(beta: Array2<f64>, n_serving: usize) -> Self {
        let serving = serving_sets(&beta, n_serving);
        Drop {
            geometry: Geometry {
                aps: Vec::new(),
                users: Vec::new(),
            },
            beta,
            serving,
        }
    }

    pub fn num_users(&self) -> usize {
        self.beta.nrows()
    }

    pub fn num_aps(&self) -> usize {
        self.beta.ncols()
    }
}
