//! Incremental rate evaluation for single-user pilot moves.
//!
//! [`RateState`] holds the statistics of one pilot labelling. A trial move
//! ([`RateState::with_move`]) only touches the co-pilot group the user
//! joins: the group's received training power, the `γ` of its members on
//! their serving links, the per-AP power normalizers of those links and the
//! members' UL powers. That is `O(M + |group| · N)` work instead of a full
//! `O(K · M)` rebuild, and every change is undone exactly afterwards.
//!
//! Sums are re-accumulated rather than patched wherever a difference could
//! cancel; only the UL interference load is carried as a base value plus
//! pending corrections. Results agree with [`RateModel::stats`] to
//! rounding, not bitwise.

use crate::error::Result;
use crate::rates::{
    ap_weight, gamma_entry, ul_power, DlBound, DlPowerMode, LinkView, RateModel, RateVector,
};

#[derive(Debug, Clone, Copy)]
enum Slot {
    Received(usize),
    Gamma(usize),
    Weight(usize),
    ApTotal(usize),
    ApLoad(usize),
    DlLoad(usize),
    Scale(usize),
    UlPower(usize),
}

#[derive(Debug, Clone)]
pub struct RateState<'m, 'a> {
    model: &'m RateModel<'a>,
    labels: Vec<usize>,
    /// Members of every label, ascending.
    groups: Vec<Vec<usize>>,
    /// `received[label * M + m] = Σ_{j in label} η̃ β[j][m]`.
    received: Vec<f64>,
    /// `γ` and its power-control weight, row-major `K × M`; only serving links are kept.
    gamma: Vec<f64>,
    weight: Vec<f64>,
    /// Per AP: sum of weights, and the sum whose ratio to it gives the DL load.
    ap_total: Vec<f64>,
    ap_load: Vec<f64>,
    /// DL non-coherent load `P · ap_load / ap_total`.
    dl_load: Vec<f64>,
    /// `P / ap_total`, or zero where the power rule leaves the AP silent.
    scale: Vec<f64>,
    ul_power: Vec<f64>,
    /// `Σ_j η_j β[j][m]` as of the last rebuild; `pending` holds UL power
    /// changes made since.
    ul_base: Vec<f64>,
    pending: Vec<(usize, f64)>,
    undo: Vec<(Slot, f64)>,
    ap_mark: Vec<bool>,
}

impl<'m, 'a> RateState<'m, 'a> {
    /// Builds the state for `labels`. Labels may go up to `tau_p + K - 1`.
    pub fn new(model: &'m RateModel<'a>, labels: &[usize]) -> Self {
        let (k_count, m_count) = model.drop.beta.dim();
        assert_eq!(labels.len(), k_count, "one pilot label per user");
        let capacity = labels
            .iter()
            .map(|&p| p + 1)
            .max()
            .unwrap_or(0)
            .max(model.cfg.tau_p + k_count);
        let mut state = RateState {
            model,
            labels: labels.to_vec(),
            groups: vec![Vec::new(); capacity],
            received: vec![0.0; capacity * m_count],
            gamma: vec![0.0; k_count * m_count],
            weight: vec![0.0; k_count * m_count],
            ap_total: vec![0.0; m_count],
            ap_load: vec![0.0; m_count],
            dl_load: vec![0.0; m_count],
            scale: vec![0.0; m_count],
            ul_power: vec![0.0; k_count],
            ul_base: vec![0.0; m_count],
            pending: Vec::new(),
            undo: Vec::new(),
            ap_mark: vec![false; m_count],
        };
        state.rebuild();
        state
    }

    pub fn model(&self) -> &'m RateModel<'a> {
        self.model
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Users holding `label`, ascending.
    pub fn group(&self, label: usize) -> &[usize] {
        &self.groups[label]
    }

    /// Relabels several users and recomputes everything from scratch.
    pub fn set_labels(&mut self, moves: impl IntoIterator<Item = (usize, usize)>) {
        for (user, label) in moves {
            if label >= self.groups.len() {
                self.groups.resize(label + 1, Vec::new());
                self.received.resize((label + 1) * self.m_count(), 0.0);
            }
            self.labels[user] = label;
        }
        self.rebuild();
    }

    /// Evaluates `f` with `user` moved to `label`, then restores the state exactly.
    pub fn with_move<T>(&mut self, user: usize, label: usize, f: impl FnOnce(&Self) -> T) -> T {
        let old = self.labels[user];
        if old == label {
            return f(self);
        }
        debug_assert!(self.undo.is_empty() && self.pending.is_empty());
        self.move_user(user, label);
        let out = f(self);
        self.relink(user, old);
        while let Some((slot, value)) = self.undo.pop() {
            *self.slot(slot) = value;
        }
        self.pending.clear();
        out
    }

    pub fn dl_rate(&self, k: usize) -> Result<f64> {
        self.model.dl_rate_in(self, k)
    }

    pub fn ul_rate(&self, k: usize) -> Result<f64> {
        self.model.ul_rate_in(self, k)
    }

    pub fn rate_product(&self, k: usize) -> Result<f64> {
        Ok(self.dl_rate(k)? * self.ul_rate(k)?)
    }

    pub fn rates(&self) -> Result<RateVector> {
        let users = 0..self.labels.len();
        Ok(RateVector {
            dl: users
                .clone()
                .map(|k| self.dl_rate(k))
                .collect::<Result<_>>()?,
            ul: users.map(|k| self.ul_rate(k)).collect::<Result<_>>()?,
        })
    }

    fn m_count(&self) -> usize {
        self.ap_total.len()
    }

    fn rebuild(&mut self) {
        let drop = self.model.drop;
        let (cfg, noise) = (self.model.cfg, self.model.noise());
        let energy = cfg.training_energy();
        let m_count = self.m_count();

        self.groups.iter_mut().for_each(Vec::clear);
        for (k, &p) in self.labels.iter().enumerate() {
            self.groups[p].push(k);
        }
        self.received.fill(0.0);
        for (k, &p) in self.labels.iter().enumerate() {
            for (r, &b) in self.received[p * m_count..(p + 1) * m_count]
                .iter_mut()
                .zip(drop.beta.row(k))
            {
                *r += energy * b;
            }
        }
        self.ul_base.fill(0.0);
        for (k, aps) in drop.serving.aps_of_user.iter().enumerate() {
            let mut gain = 0.0;
            for &m in aps {
                let at = k * m_count + m;
                let g = gamma_entry(
                    cfg,
                    drop.beta[[k, m]],
                    self.received[self.labels[k] * m_count + m],
                    noise,
                );
                let w = self.link_weight(g);
                (self.gamma[at], self.weight[at]) = (g, w);
                gain += g;
            }
            self.ul_power[k] = ul_power(cfg, gain);
            for (load, &b) in self.ul_base.iter_mut().zip(drop.beta.row(k)) {
                *load += self.ul_power[k] * b;
            }
        }
        for m in 0..m_count {
            (self.ap_total[m], self.ap_load[m]) = self.ap_sums(m);
            self.scale[m] = self.ap_scale(m);
            self.dl_load[m] = self.scale[m] * self.ap_load[m];
        }
        self.pending.clear();
        self.undo.clear();
    }

    fn move_user(&mut self, user: usize, label: usize) {
        let drop = self.model.drop;
        let (cfg, noise) = (self.model.cfg, self.model.noise());
        let energy = cfg.training_energy();
        let m_count = self.m_count();
        let old = self.labels[user];
        self.relink(user, label);

        // the group left behind is re-summed: subtracting a dominant user
        // would leave the rest with only a few correct digits
        for (m, &b) in drop.beta.row(user).iter().enumerate() {
            let rest = self.groups[old]
                .iter()
                .map(|&j| energy * drop.beta[[j, m]])
                .sum();
            self.set(Slot::Received(old * m_count + m), rest);
            self.set(
                Slot::Received(label * m_count + m),
                self.received[label * m_count + m] + energy * b,
            );
        }
        let mut touched = Vec::new();
        for g in [old, label] {
            for i in 0..self.groups[g].len() {
                let j = self.groups[g][i];
                let mut gain = 0.0;
                for &m in &drop.serving.aps_of_user[j] {
                    let at = j * m_count + m;
                    let g_new = gamma_entry(
                        cfg,
                        drop.beta[[j, m]],
                        self.received[g * m_count + m],
                        noise,
                    );
                    self.set(Slot::Gamma(at), g_new);
                    self.set(Slot::Weight(at), self.link_weight(g_new));
                    if !std::mem::replace(&mut self.ap_mark[m], true) {
                        touched.push(m);
                    }
                    gain += g_new;
                }
                let eta = ul_power(cfg, gain);
                let delta = eta - self.ul_power[j];
                if delta != 0.0 {
                    self.set(Slot::UlPower(j), eta);
                    self.pending.push((j, delta));
                }
            }
        }
        for m in touched {
            self.ap_mark[m] = false;
            let (total, load) = self.ap_sums(m);
            self.set(Slot::ApTotal(m), total);
            self.set(Slot::ApLoad(m), load);
            self.set(Slot::Scale(m), self.ap_scale(m));
            self.set(Slot::DlLoad(m), self.scale[m] * self.ap_load[m]);
        }
    }

    /// Weight sum and load sum at AP `m` from the cached link values.
    fn ap_sums(&self, m: usize) -> (f64, f64) {
        let m_count = self.m_count();
        self.model.drop.serving.users_of_ap[m]
            .iter()
            .fold((0.0, 0.0), |(total, load), &k| {
                let (g, w) = (self.gamma[k * m_count + m], self.weight[k * m_count + m]);
                (total + w, load + self.load_weight(g, w))
            })
    }

    fn relink(&mut self, user: usize, label: usize) {
        let old = self.labels[user];
        let at = self.groups[old]
            .binary_search(&user)
            .expect("user is in its group");
        self.groups[old].remove(at);
        let at = self.groups[label].binary_search(&user).unwrap_err();
        self.groups[label].insert(at, user);
        self.labels[user] = label;
    }

    fn set(&mut self, slot: Slot, value: f64) {
        let cell = self.slot(slot);
        let old = std::mem::replace(cell, value);
        self.undo.push((slot, old));
    }

    fn slot(&mut self, slot: Slot) -> &mut f64 {
        match slot {
            Slot::Received(i) => &mut self.received[i],
            Slot::Gamma(i) => &mut self.gamma[i],
            Slot::Weight(i) => &mut self.weight[i],
            Slot::ApTotal(m) => &mut self.ap_total[m],
            Slot::ApLoad(m) => &mut self.ap_load[m],
            Slot::DlLoad(m) => &mut self.dl_load[m],
            Slot::Scale(m) => &mut self.scale[m],
            Slot::UlPower(k) => &mut self.ul_power[k],
        }
    }

    fn ap_scale(&self, m: usize) -> f64 {
        let total = self.ap_total[m];
        let valid = match self.model.settings.dl_mode {
            DlPowerMode::SumRate => total > 0.0,
            DlPowerMode::MinRate => total > 0.0 && total.is_finite(),
        };
        if valid {
            self.model.cfg.ap_power_w / total
        } else {
            0.0
        }
    }

    fn link_weight(&self, g: f64) -> f64 {
        ap_weight(self.model.settings.dl_mode, self.model.cfg, g)
    }

    /// Per-link contribution `u` to the DL load, which is `P · Σu / Σw` at every AP.
    fn load_weight(&self, g: f64, w: f64) -> f64 {
        match (self.model.settings.dl_bound, self.model.settings.dl_mode) {
            // η γ = γ² P / Σγ
            (DlBound::Literal, DlPowerMode::SumRate) => g * g,
            // every other combination radiates or weights exactly w P / Σw
            _ => w,
        }
    }
}

impl LinkView for RateState<'_, '_> {
    fn gamma(&self, k: usize, m: usize) -> f64 {
        self.gamma[k * self.m_count() + m]
    }

    fn amplitude(&self, k: usize, m: usize) -> f64 {
        let at = k * self.m_count() + m;
        let (g, w) = (self.gamma[at], self.weight[at]);
        match self.model.settings.dl_bound {
            // p = w P / Σw in both power modes
            DlBound::TransmitPower => (w * self.scale[m] * g).sqrt(),
            DlBound::Literal => self.load_weight(g, w) * self.scale[m],
        }
    }

    fn dl_load(&self, m: usize) -> f64 {
        self.dl_load[m]
    }

    fn ul_power(&self, k: usize) -> f64 {
        self.ul_power[k]
    }

    fn ul_load(&self, m: usize) -> f64 {
        let beta = &self.model.drop.beta;
        self.pending
            .iter()
            .fold(self.ul_base[m], |load, &(j, delta)| {
                load + delta * beta[[j, m]]
            })
    }

    fn co_pilots(&self, k: usize) -> impl Iterator<Item = usize> {
        self.groups[self.labels[k]]
            .iter()
            .copied()
            .filter(move |&j| j != k)
    }
}
