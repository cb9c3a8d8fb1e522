//! Storage scheduling over one day of shortfall.
//!
//! Stores start each day full and are never recharged within the day. Only
//! periods with positive depth draw on storage.
//!
//! [`dispatch_min_eeu`] is the production policy: in every shortfall period
//! the depth is reduced as far as possible, drawing first on the stores with
//! the longest residual lifetime (remaining energy / power). Within a period
//! this is applied continuously, which amounts to water-filling on residual
//! lifetimes: every store that serves ends the period either at full power or
//! at a common lifetime level. Stores of equal lifetime are drained together,
//! so no tie-break is needed.
//!
//! [`dispatch_min_lole`] and [`dispatch_min_peak`] are the single-store
//! illustrative policies that minimise shortfall duration and shortfall
//! depth respectively.

use serde::Serialize;

use crate::system::Store;

/// Relative remaining-energy threshold below which a store counts as empty.
const EMPTY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispatchResult {
    /// `discharge[i][t]`: MW delivered by store `i` in period `t`.
    pub discharge: Vec<Vec<f64>>,
    /// Depth per period after storage, MW.
    pub residual: Vec<f64>,
    /// Ids of stores empty at the end of the day.
    pub empty_set: Vec<String>,
}

impl DispatchResult {
    fn passthrough(stores: usize, depths: &[f64]) -> Self {
        DispatchResult {
            discharge: vec![vec![0.0; depths.len()]; stores],
            residual: depths.iter().map(|d| d.max(0.0)).collect(),
            empty_set: Vec::new(),
        }
    }

    /// Unserved energy after storage, MWh.
    pub fn unserved_energy(&self, period_length: f64) -> f64 {
        self.residual.iter().filter(|&&r| r > 0.0).sum::<f64>() * period_length
    }

    /// Number of periods still in shortfall.
    pub fn shortfall_periods(&self) -> usize {
        self.residual.iter().filter(|&&r| r > 0.0).count()
    }

    /// Energy delivered by store `i`, MWh.
    pub fn delivered(&self, i: usize, period_length: f64) -> f64 {
        self.discharge[i].iter().sum::<f64>() * period_length
    }
}

/// Per-store working state for the greedy dispatch. Reused across days.
#[derive(Debug, Default)]
pub(crate) struct Dispatcher {
    remaining: Vec<f64>,
    events: Vec<(f64, f64)>,
}

impl Dispatcher {
    pub(crate) fn reset(&mut self, stores: &[Store]) {
        self.remaining.clear();
        self.remaining.extend(stores.iter().map(|s| s.energy));
    }

    pub(crate) fn is_empty(&self, stores: &[Store], i: usize) -> bool {
        self.remaining[i] <= EMPTY_TOL * stores[i].energy.max(1.0)
    }

    /// Serves one period of `depth` MW; returns the residual depth and
    /// records each store's discharge (MW) through `on_discharge`.
    pub(crate) fn serve(
        &mut self,
        stores: &[Store],
        depth: f64,
        period_length: f64,
        mut on_discharge: impl FnMut(usize, f64),
    ) -> f64 {
        if depth <= 0.0 || stores.is_empty() {
            return depth.max(0.0);
        }
        let need = depth * period_length;
        let cap = |i: usize, remaining: &[f64]| (stores[i].power * period_length).min(remaining[i]);
        let total: f64 = (0..stores.len()).map(|i| cap(i, &self.remaining)).sum();
        if total <= need {
            for i in 0..stores.len() {
                let cap = cap(i, &self.remaining);
                if cap > 0.0 {
                    self.remaining[i] = 0.0_f64.max(self.remaining[i] - cap);
                    on_discharge(i, cap / period_length);
                }
            }
            return (need - total) / period_length;
        }

        let level = self.water_level(stores, need, period_length);
        for (i, s) in stores.iter().enumerate() {
            let lifetime = self.remaining[i] / s.power;
            let energy = s.power * (lifetime - level).clamp(0.0, period_length);
            if energy > 0.0 {
                self.remaining[i] = 0.0_f64.max(self.remaining[i] - energy);
                on_discharge(i, energy / period_length);
            }
        }
        0.0
    }

    /// Lifetime level `l >= 0` with `sum_i P_i * clamp(tau_i - l, 0, L) = need`,
    /// assuming `need` is below the total deliverable energy.
    fn water_level(&mut self, stores: &[Store], need: f64, period_length: f64) -> f64 {
        // Each store adds slope P_i while tau_i - L < l < tau_i.
        self.events.clear();
        for (s, &e) in stores.iter().zip(&self.remaining) {
            if e <= 0.0 {
                continue;
            }
            let tau = e / s.power;
            self.events.push((tau, s.power));
            self.events.push((tau - period_length, -s.power));
        }
        self.events
            .sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));

        let mut slope = 0.0;
        let mut supplied = 0.0;
        let mut level = f64::INFINITY;
        for &(at, dslope) in &self.events {
            if slope > 0.0 {
                let gain = slope * (level - at);
                if supplied + gain >= need {
                    return (level - (need - supplied) / slope).max(0.0);
                }
                supplied += gain;
            }
            level = at;
            slope += dslope;
            if level <= 0.0 {
                break;
            }
        }
        if slope > 0.0 {
            (level - (need - supplied) / slope).max(0.0)
        } else {
            level.max(0.0)
        }
    }
}

/// EEU-optimal greedy dispatch of `stores` over one day of shortfall depths.
pub fn dispatch_min_eeu(
    stores: &[Store],
    day_depths: &[f64],
    period_length: f64,
) -> DispatchResult {
    let mut out = DispatchResult::passthrough(stores.len(), day_depths);
    let mut dispatcher = Dispatcher::default();
    dispatcher.reset(stores);
    for (t, &depth) in day_depths.iter().enumerate() {
        out.residual[t] = dispatcher.serve(stores, depth, period_length, |i, mw| {
            out.discharge[i][t] = mw;
        });
    }
    out.empty_set = stores
        .iter()
        .enumerate()
        .filter(|&(i, _)| dispatcher.is_empty(stores, i))
        .map(|(_, s)| s.id.clone())
        .collect();
    out
}

/// Eliminates shortfall in as many periods as possible: the shallowest
/// periods that the store's power can cover are cleared first. Energy left
/// over shaves the remaining periods, shallowest first.
pub fn dispatch_min_lole(store: &Store, day_depths: &[f64], period_length: f64) -> DispatchResult {
    let mut out = DispatchResult::passthrough(1, day_depths);
    let mut energy = store.energy;
    let mut order: Vec<usize> = (0..day_depths.len())
        .filter(|&t| day_depths[t] > 0.0)
        .collect();
    order.sort_by(|&a, &b| day_depths[a].total_cmp(&day_depths[b]).then(a.cmp(&b)));

    for &t in &order {
        let d = day_depths[t];
        if d > store.power || d * period_length > energy {
            continue;
        }
        energy -= d * period_length;
        out.discharge[0][t] = d;
        out.residual[t] = 0.0;
    }
    for &t in &order {
        if energy <= 0.0 {
            break;
        }
        if out.residual[t] <= 0.0 {
            continue;
        }
        let mw = store.power.min(out.residual[t]).min(energy / period_length);
        energy -= mw * period_length;
        out.discharge[0][t] += mw;
        out.residual[t] -= mw;
    }
    if energy <= EMPTY_TOL * store.energy.max(1.0) {
        out.empty_set.push(store.id.clone());
    }
    out
}

/// Shaves the deepest shortfall first: residual depths are `min(d, level)`
/// subject to the per-period power cap, with the level set so the store
/// delivers as much of its energy as the caps allow.
pub fn dispatch_min_peak(store: &Store, day_depths: &[f64], period_length: f64) -> DispatchResult {
    let mut out = DispatchResult::passthrough(1, day_depths);
    let shavable = |level: f64| -> f64 {
        day_depths
            .iter()
            .map(|&d| store.power.min((d - level).max(0.0)))
            .sum::<f64>()
            * period_length
    };
    let target = store.energy.min(shavable(0.0));
    if target <= 0.0 {
        return out;
    }

    // shavable() is piecewise linear and nonincreasing; breakpoints at d and d - P.
    let mut knots: Vec<f64> = day_depths
        .iter()
        .flat_map(|&d| [d, d - store.power])
        .filter(|&x| x > 0.0)
        .collect();
    knots.push(0.0);
    knots.sort_by(|a, b| b.total_cmp(a));
    knots.dedup();
    let mut level = 0.0;
    for pair in knots.windows(2) {
        let (hi, lo) = (pair[0], pair[1]);
        let (s_hi, s_lo) = (shavable(hi), shavable(lo));
        if s_lo >= target {
            level = if s_lo > s_hi {
                hi - (target - s_hi) / (s_lo - s_hi) * (hi - lo)
            } else {
                hi
            };
            break;
        }
    }

    let mut delivered = 0.0;
    for (t, &d) in day_depths.iter().enumerate() {
        let mw = store.power.min((d - level).max(0.0));
        out.discharge[0][t] = mw;
        out.residual[t] = (d - mw).max(0.0);
        delivered += mw * period_length;
    }
    if store.energy - delivered <= EMPTY_TOL * store.energy.max(1.0) {
        out.empty_set.push(store.id.clone());
    }
    out
}

/// CSV rows `period,depth_before,depth_after,policy` for plotting.
pub fn write_dispatch_csv<W: std::io::Write>(
    writer: W,
    policy: &str,
    day_depths: &[f64],
    result: &DispatchResult,
) -> crate::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["period", "depth_before", "depth_after", "policy"])?;
    for (t, (&before, &after)) in day_depths.iter().zip(&result.residual).enumerate() {
        w.write_record([
            t.to_string(),
            crate::io::fmt6(before.max(0.0)),
            crate::io::fmt6(after),
            policy.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
