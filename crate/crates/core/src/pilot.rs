//! Pilot assignment: the iterative Hungarian procedure with throughput
//! (SHPA) or fairness (MHPA) rewards, random assignment, and the greedy
//! worst-user baseline.
//!
//! One sweep visits every MS `k` in index order. For each, the `tau_p - 1`
//! users with the largest LSF coefficient at `k`'s strongest AP join `k` in
//! the neighbor set, and the `tau_p` pilots are matched to the neighbor set
//! by [`solve_max`] with every other user's pilot held fixed. The matching
//! is applied before moving to the next `k`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hungarian::{solve_max, RewardMatrix};
use crate::incremental::RateState;
use crate::rates::{RateModel, RateVector};

/// Pilot index (0-based, `< tau_p`) of every MS.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PilotAssignment {
    tau_p: usize,
    pilot_of: Vec<usize>,
}

impl PilotAssignment {
    pub fn new(pilot_of: Vec<usize>, tau_p: usize) -> Result<Self> {
        if let Some((user, &pilot)) = pilot_of.iter().enumerate().find(|(_, &p)| p >= tau_p) {
            return Err(Error::PilotOutOfRange {
                user,
                pilot,
                pilots: tau_p,
            });
        }
        Ok(PilotAssignment { tau_p, pilot_of })
    }

    /// Users `0..K` on pilots `0..K`, for `K <= tau_p`.
    fn distinct(num_users: usize, tau_p: usize) -> Self {
        debug_assert!(num_users <= tau_p);
        PilotAssignment {
            tau_p,
            pilot_of: (0..num_users).collect(),
        }
    }

    pub fn tau_p(&self) -> usize {
        self.tau_p
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.pilot_of
    }

    pub fn pilot(&self, user: usize) -> usize {
        self.pilot_of[user]
    }

    pub fn len(&self) -> usize {
        self.pilot_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pilot_of.is_empty()
    }

    fn set(&mut self, user: usize, pilot: usize) -> bool {
        debug_assert!(pilot < self.tau_p);
        std::mem::replace(&mut self.pilot_of[user], pilot) != pilot
    }
}

/// Random pilots, i.i.d. uniform over `0..tau_p`. With no more users than
/// pilots every user gets its own pilot instead.
pub fn random_assignment<R: Rng + ?Sized>(
    num_users: usize,
    tau_p: usize,
    rng: &mut R,
) -> PilotAssignment {
    if num_users <= tau_p {
        return PilotAssignment::distinct(num_users, tau_p);
    }
    let pilot_of = (0..num_users).map(|_| rng.random_range(0..tau_p)).collect();
    PilotAssignment { tau_p, pilot_of }
}

/// The users whose pilots are re-matched around user `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborSets {
    /// `k` first, then the `tau_p - 1` users strongest at `k`'s best AP.
    pub members: Vec<usize>,
    /// Everyone else, ascending.
    pub rest: Vec<usize>,
}

pub fn neighbor_set(k: usize, beta: &ndarray::Array2<f64>, tau_p: usize) -> Result<NeighborSets> {
    let (k_count, m_count) = beta.dim();
    if k_count < tau_p {
        return Err(Error::TooFewUsers {
            users: k_count,
            pilots: tau_p,
        });
    }
    let best_ap = (0..m_count)
        .reduce(|a, b| if beta[[k, b]] > beta[[k, a]] { b } else { a })
        .expect("at least one AP");
    let mut others: Vec<usize> = (0..k_count).filter(|&j| j != k).collect();
    others.sort_by(|&a, &b| {
        beta[[b, best_ap]]
            .total_cmp(&beta[[a, best_ap]])
            .then(a.cmp(&b))
    });
    let mut rest = others.split_off(tau_p - 1);
    rest.sort_unstable();
    let mut members = Vec::with_capacity(tau_p);
    members.push(k);
    members.extend(others);
    Ok(NeighborSets { members, rest })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    /// Reward is the candidate's own `R^DL · R^UL`.
    Shpa,
    /// Reward is the smallest `R^DL · R^UL` among the candidate and the
    /// fixed users already on the candidate pilot.
    Mhpa,
}

/// Reward `a[ℓ][q]` of giving pilot `q` to the `ℓ`-th member of the neighbor set.
///
/// The candidate state keeps every user outside the neighbor set on its
/// current pilot and moves the other members onto private orthogonal
/// labels, so the only co-pilot users of the candidate are the fixed users
/// on pilot `q`.
pub fn reward_matrix(
    model: &RateModel<'_>,
    assignment: &PilotAssignment,
    neighbors: &NeighborSets,
    mode: RewardMode,
) -> Result<RewardMatrix> {
    let mut state = RateState::new(model, assignment.as_slice());
    park(&mut state, neighbors, assignment.tau_p());
    rewards_in(&mut state, neighbors, assignment.tau_p(), mode)
}

/// Moves every member of the neighbor set onto its private label `tau_p + user`.
fn park(state: &mut RateState<'_, '_>, neighbors: &NeighborSets, tau_p: usize) {
    state.set_labels(neighbors.members.iter().map(|&s| (s, tau_p + s)));
}

fn rewards_in(
    state: &mut RateState<'_, '_>,
    neighbors: &NeighborSets,
    tau_p: usize,
    mode: RewardMode,
) -> Result<RewardMatrix> {
    let n = neighbors.members.len();
    let mut data = Vec::with_capacity(n * n);
    for &user in &neighbors.members {
        for q in 0..tau_p {
            let reward = state.with_move(user, q, |s| {
                let own = s.rate_product(user)?;
                match mode {
                    RewardMode::Shpa => Ok(own),
                    // with the other members parked, everyone else on q is in T_k
                    RewardMode::Mhpa => s
                        .group(q)
                        .iter()
                        .filter(|&&j| j != user)
                        .try_fold(own, |worst, &j| s.rate_product(j).map(|r| worst.min(r))),
                }
            })?;
            data.push(reward);
        }
    }
    RewardMatrix::from_row_major(n, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaRunConfig {
    pub reward: RewardMode,
    pub max_sweeps: usize,
    pub rel_tol: f64,
}

impl PaRunConfig {
    pub fn new(reward: RewardMode) -> Self {
        PaRunConfig {
            reward,
            max_sweeps: 20,
            rel_tol: 1e-6,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_sweeps == 0 || self.rel_tol.is_nan() || self.rel_tol <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "need max_sweeps >= 1 and rel_tol > 0, got {} and {}",
                self.max_sweeps, self.rel_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaResult {
    /// Best assignment reached: a final sweep that lowers the objective is not kept.
    pub assignment: PilotAssignment,
    pub sweeps_used: usize,
    /// Objective after each sweep.
    pub objective_trace: Vec<f64>,
    pub rates: RateVector,
}

/// SHPA maximizes the sum of rate products, MHPA the smallest one.
pub fn objective(rates: &RateVector, reward: RewardMode) -> f64 {
    match reward {
        RewardMode::Shpa => rates.products().sum(),
        RewardMode::Mhpa => rates.products().fold(f64::INFINITY, f64::min),
    }
}

fn num_pilots(model: &RateModel<'_>) -> usize {
    model.cfg.tau_p
}

/// Runs the Hungarian procedure from a random start.
pub fn run_hungarian_pa<R: Rng + ?Sized>(
    model: &RateModel<'_>,
    pa: &PaRunConfig,
    rng: &mut R,
) -> Result<PaResult> {
    let start = random_assignment(model.drop.num_users(), num_pilots(model), rng);
    run_hungarian_pa_from(model, pa, start)
}

/// Runs the Hungarian procedure from a given assignment.
pub fn run_hungarian_pa_from(
    model: &RateModel<'_>,
    pa: &PaRunConfig,
    start: PilotAssignment,
) -> Result<PaResult> {
    pa.validate()?;
    let mut assignment = start;
    let num_users = assignment.len();
    let tau_p = assignment.tau_p();

    if num_users <= tau_p {
        assignment = PilotAssignment::distinct(num_users, tau_p);
        let rates = model.rates(assignment.as_slice())?;
        let trace = vec![objective(&rates, pa.reward)];
        return Ok(PaResult {
            assignment,
            sweeps_used: 1,
            objective_trace: trace,
            rates,
        });
    }

    let mut rates = model.rates(assignment.as_slice())?;
    let mut previous = objective(&rates, pa.reward);
    let mut trace = Vec::new();
    loop {
        let incumbent = (assignment.clone(), rates);
        let changed = sweep(model, pa.reward, &mut assignment)?;
        rates = model.rates(assignment.as_slice())?;
        let current = objective(&rates, pa.reward);
        trace.push(current);
        // signed: a sweep that fails to raise the objective by rel_tol ends the
        // run, and one that lowers it is rolled back
        if current < previous {
            (assignment, rates) = incumbent;
            break;
        }
        let settled = current - previous < pa.rel_tol * previous.abs().max(f64::MIN_POSITIVE);
        if !changed || settled || trace.len() == pa.max_sweeps {
            break;
        }
        previous = current;
    }
    Ok(PaResult {
        assignment,
        sweeps_used: trace.len(),
        objective_trace: trace,
        rates,
    })
}

/// One pass over all users. Returns whether any pilot changed.
pub fn sweep(
    model: &RateModel<'_>,
    reward: RewardMode,
    assignment: &mut PilotAssignment,
) -> Result<bool> {
    let tau_p = assignment.tau_p();
    let mut state = RateState::new(model, assignment.as_slice());
    let mut changed = false;
    for k in 0..assignment.len() {
        let neighbors = neighbor_set(k, &model.drop.beta, tau_p)?;
        park(&mut state, &neighbors, tau_p);
        let matching = best_matching(rewards_in(&mut state, &neighbors, tau_p, reward)?)?;
        for (&user, &pilot) in neighbors.members.iter().zip(&matching) {
            changed |= assignment.set(user, pilot);
        }
        state.set_labels(neighbors.members.iter().copied().zip(matching));
    }
    Ok(changed)
}

/// Best pilot permutation for the neighbor set, indexed like `members`.
pub fn match_neighbors(
    model: &RateModel<'_>,
    reward: RewardMode,
    assignment: &PilotAssignment,
    neighbors: &NeighborSets,
) -> Result<Vec<usize>> {
    best_matching(reward_matrix(model, assignment, neighbors, reward)?)
}

fn best_matching(rewards: RewardMatrix) -> Result<Vec<usize>> {
    // rate products are ~1e14; normalizing keeps the duals well scaled
    let top = rewards.max_entry();
    let rewards = if top > 0.0 && (1.0 / top).is_finite() {
        rewards.scaled(1.0 / top)?
    } else {
        rewards
    };
    Ok(solve_max(&rewards).perm)
}

/// Random assignment, evaluated once.
pub fn run_rpa<R: Rng + ?Sized>(model: &RateModel<'_>, rng: &mut R) -> Result<PaResult> {
    let assignment = random_assignment(model.drop.num_users(), num_pilots(model), rng);
    let rates = model.rates(assignment.as_slice())?;
    Ok(PaResult {
        assignment,
        sweeps_used: 0,
        objective_trace: Vec::new(),
        rates,
    })
}

/// Greedy baseline: repeatedly move the user with the smallest rate product
/// to the pilot that maximizes its own product, all other pilots fixed. Stops
/// when that user already holds its best pilot or after `max_sweeps * K`
/// updates. A sweep here is a block of `K` updates; the trace records the
/// smallest rate product after each block.
pub fn run_greedy_baseline<R: Rng + ?Sized>(
    model: &RateModel<'_>,
    pa: &PaRunConfig,
    rng: &mut R,
) -> Result<PaResult> {
    pa.validate()?;
    let num_users = model.drop.num_users();
    let tau_p = num_pilots(model);
    let mut assignment = random_assignment(num_users, tau_p, rng);
    let mut rates = model.rates(assignment.as_slice())?;
    if num_users <= tau_p {
        return Ok(PaResult {
            assignment,
            sweeps_used: 0,
            objective_trace: Vec::new(),
            rates,
        });
    }

    let limit = pa.max_sweeps * num_users;
    let mut state = RateState::new(model, assignment.as_slice());
    let mut trace = Vec::new();
    let mut updates = 0;
    while updates < limit {
        let step = greedy_step(&mut state, &rates)?;
        updates += 1;
        let Some(step) = step else { break };
        assignment.set(step.user, step.pilot);
        state.set_labels([(step.user, step.pilot)]);
        rates = state.rates()?;
        if updates % num_users == 0 {
            trace.push(objective(&rates, RewardMode::Mhpa));
        }
    }
    if updates % num_users != 0 {
        trace.push(objective(&rates, RewardMode::Mhpa));
    }
    Ok(PaResult {
        assignment,
        sweeps_used: trace.len(),
        objective_trace: trace,
        rates,
    })
}

/// One greedy update: the user with the smallest rate product and the pilot
/// that maximizes that product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyStep {
    pub user: usize,
    pub pilot: usize,
    /// Rate product of `user` after the move.
    pub product: f64,
}

/// Finds the greedy update for the pilots held by `state`, whose rates are
/// `rates`. `None` when the worst user already holds its best pilot.
pub fn greedy_step(
    state: &mut RateState<'_, '_>,
    rates: &RateVector,
) -> Result<Option<GreedyStep>> {
    let worst = argmin(rates.products());
    let current = state.labels()[worst];
    let mut best = GreedyStep {
        user: worst,
        pilot: current,
        product: rates.product(worst),
    };
    for q in (0..state.model().cfg.tau_p).filter(|&q| q != current) {
        let product = state.with_move(worst, q, |s| s.rate_product(worst))?;
        if product > best.product {
            best = GreedyStep {
                user: worst,
                pilot: q,
                product,
            };
        }
    }
    Ok((best.pilot != current).then_some(best))
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    values
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |best, (i, v)| if v < best.1 { (i, v) } else { best },
        )
        .0
}
