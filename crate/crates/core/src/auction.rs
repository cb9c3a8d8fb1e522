//! Capacity auction clearing.
//!
//! Each bid offers a resource (a firm block or a store) for a minimum total
//! price `c_i`. Bids are valued by their EFC against a reference resource set
//! and ranked by unit price `c_i / efc_i` (the merit-order stack). Bids are
//! admitted in order until a full risk evaluation of the admitted set meets
//! the standard; the clearing price is the unit price of the marginal bid
//! and each accepted bid is paid `price * efc_i`.
//!
//! [`clear`] repeats this with EFCs re-estimated against each new accepted
//! set until the set stops changing, which yields a price and set satisfying
//!
//! ```text
//! c_i <= p * efc_i(R)  for i in R,      c_i > p * efc_i(R)  for i not in R
//! ```
//!
//! with `rho(R) <= k`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::efc;
use crate::error::{Error, Result};
use crate::io::fmt6;
use crate::risk::{self, Metric};
use crate::system::{ResourceSet, ShortfallEnsemble, Store};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum BidResource {
    /// Firm capacity block, MW.
    Firm(f64),
    Store(Store),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bid {
    pub id: String,
    pub resource: BidResource,
    pub min_total_price: f64,
}

impl Bid {
    /// A store bid's store takes the bid id.
    pub fn new(id: impl Into<String>, resource: BidResource, min_total_price: f64) -> Result<Self> {
        let id = id.into();
        if !(min_total_price.is_finite() && min_total_price >= 0.0) {
            return Err(Error::config(format!(
                "bid {id}: min_total_price must be non-negative"
            )));
        }
        let resource = match resource {
            BidResource::Firm(mw) => {
                if !(mw.is_finite() && mw > 0.0) {
                    return Err(Error::config(format!("bid {id}: firm MW must be positive")));
                }
                BidResource::Firm(mw)
            }
            BidResource::Store(mut s) => {
                s.id = id.clone();
                s.validate()?;
                BidResource::Store(s)
            }
        };
        Ok(Bid {
            id,
            resource,
            min_total_price,
        })
    }

    pub fn firm(id: impl Into<String>, mw: f64, price: f64) -> Result<Self> {
        Self::new(id, BidResource::Firm(mw), price)
    }

    pub fn store(id: impl Into<String>, power: f64, energy: f64, price: f64) -> Result<Self> {
        let id = id.into();
        let store = Store::new(id.clone(), power, energy)?;
        Self::new(id, BidResource::Store(store), price)
    }

    pub fn is_store(&self) -> bool {
        matches!(self.resource, BidResource::Store(_))
    }

    pub fn nominal(&self) -> f64 {
        match &self.resource {
            BidResource::Firm(mw) => *mw,
            BidResource::Store(s) => s.power,
        }
    }

    pub fn as_set(&self) -> ResourceSet {
        match &self.resource {
            BidResource::Firm(mw) => ResourceSet::firm(*mw),
            BidResource::Store(s) => ResourceSet::store(s.clone()),
        }
    }
}

pub(crate) fn check_unique(bids: &[Bid]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for b in bids {
        if !seen.insert(b.id.as_str()) {
            return Err(Error::config(format!("duplicate bid id {}", b.id)));
        }
    }
    Ok(())
}

/// Resource set formed by the bids whose ids are in `ids`, in input order.
pub fn set_of(bids: &[Bid], ids: &BTreeSet<String>) -> ResourceSet {
    let mut set = ResourceSet::empty();
    for b in bids.iter().filter(|b| ids.contains(&b.id)) {
        match &b.resource {
            BidResource::Firm(mw) => set.firm += mw,
            BidResource::Store(s) => set.stores.push(s.clone()),
        }
    }
    set
}

/// Reliability standard `rho(R) <= k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standard {
    pub metric: Metric,
    pub k: f64,
}

impl Standard {
    pub fn new(metric: Metric, k: f64) -> Result<Self> {
        if !(k.is_finite() && k >= 0.0) {
            return Err(Error::config(format!(
                "standard level must be non-negative, got {k}"
            )));
        }
        Ok(Standard { metric, k })
    }

    pub fn met(&self, set: &ResourceSet, bg: &ShortfallEnsemble) -> Result<bool> {
        Ok(risk::rho(set, bg, self.metric)? <= self.k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClearOptions {
    pub max_iter: usize,
    /// Bisection tolerance (MW) for calibration and whole-set EFCs.
    pub efc_tol: f64,
}

impl Default for ClearOptions {
    fn default() -> Self {
        ClearOptions {
            max_iter: 20,
            efc_tol: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClearMode {
    Naive,
    FixedPoint,
    Clock,
    DemandCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuctionOutcome {
    pub mode: ClearMode,
    /// Accepted bid ids, sorted.
    pub accepted: Vec<String>,
    /// Price per MW of EFC.
    pub clearing_price: f64,
    /// EFC of every bid relative to the reference set the outcome was cleared against.
    pub efc: BTreeMap<String, f64>,
    pub payments: BTreeMap<String, f64>,
    /// Sum of payments, pay-as-clear.
    pub total_cost: f64,
    /// Sum of the accepted bids' minimum total prices.
    pub bid_cost: f64,
    pub risk_achieved: f64,
    pub standard: Standard,
    pub iterations: usize,
    pub accepted_firm_mw: f64,
    pub marginal_storage_efc: f64,
    /// EFC of all accepted stores taken together, against the accepted firm capacity.
    pub whole_set_storage_efc: f64,
    /// Firm capacity alone meeting the standard (the initial reference set).
    pub reference_firm_mw: f64,
}

impl AuctionOutcome {
    pub fn accepted_set(&self) -> BTreeSet<String> {
        self.accepted.iter().cloned().collect()
    }

    pub fn unit_price(&self, bid: &Bid) -> f64 {
        unit_price(
            bid.min_total_price,
            self.efc.get(&bid.id).copied().unwrap_or(0.0),
        )
    }
}

fn unit_price(cost: f64, efc: f64) -> f64 {
    if efc > 0.0 {
        cost / efc
    } else {
        f64::INFINITY
    }
}

/// Marginal EFCs of every bid against `reference`. Bids inside the reference
/// set are valued by removal, the rest by addition; both use the EEU slope
/// at `reference`. Firm blocks are their own EFC.
pub fn efcs_against(
    bids: &[Bid],
    reference: &ResourceSet,
    members: &BTreeSet<String>,
    bg: &ShortfallEnsemble,
) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    if bids.iter().all(|b| !b.is_store()) {
        for b in bids {
            out.insert(b.id.clone(), b.nominal());
        }
        return Ok(out);
    }
    let (eeu_ref, slope) = risk::eeu_and_slope(reference, bg)?;
    if slope == 0.0 {
        return flat_efcs(bids, reference, members, bg, eeu_ref);
    }
    // Identical stores share a value; key on (power, energy, membership).
    let mut memo: HashMap<(u64, u64, bool), f64> = HashMap::new();
    for b in bids {
        let value = match &b.resource {
            BidResource::Firm(mw) => *mw,
            BidResource::Store(s) => {
                let inside = members.contains(&b.id);
                let key = (s.power.to_bits(), s.energy.to_bits(), inside);
                if let Some(v) = memo.get(&key) {
                    *v
                } else {
                    let v = if inside {
                        let without = reference.without_store(&s.id);
                        let eeu_without = risk::rho(&without, bg, Metric::Eeu)?;
                        (eeu_ref - eeu_without) / slope
                    } else {
                        efc::efc_marginal_with(&b.as_set(), reference, bg, eeu_ref, slope)?.value
                    };
                    memo.insert(key, v);
                    v
                }
            }
        };
        out.insert(b.id.clone(), value);
    }
    Ok(out)
}

/// EFCs where the reference set leaves no firm-capacity slope: added
/// resources are worth nothing at the margin, and each member is worth the
/// firm capacity that would replace it exactly.
fn flat_efcs(
    bids: &[Bid],
    reference: &ResourceSet,
    members: &BTreeSet<String>,
    bg: &ShortfallEnsemble,
    eeu_ref: f64,
) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for b in bids {
        let value = match &b.resource {
            BidResource::Firm(mw) => *mw,
            BidResource::Store(s) if members.contains(&b.id) => efc::calibrate_firm_on(
                &reference.without_store(&s.id),
                bg,
                Metric::Eeu,
                eeu_ref,
                FLAT_TOL,
            )?,
            BidResource::Store(_) => 0.0,
        };
        out.insert(b.id.clone(), value);
    }
    Ok(out)
}

const FLAT_TOL: f64 = 1e-4;

/// Bid indices sorted by unit price, then id.
fn merit_order(bids: &[Bid], efcs: &BTreeMap<String, f64>) -> Vec<(usize, f64)> {
    let mut order: Vec<(usize, f64)> = bids
        .iter()
        .enumerate()
        .map(|(i, b)| (i, unit_price(b.min_total_price, efcs[&b.id])))
        .filter(|(_, u)| u.is_finite())
        .collect();
    order.sort_by(|a, b| {
        a.1.total_cmp(&b.1)
            .then_with(|| bids[a.0].id.cmp(&bids[b.0].id))
    });
    order
}

/// Shortest merit-order prefix meeting the standard, by full risk evaluation.
/// Risk is nonincreasing along the stack, so the prefix length is bisected.
fn merit_clear(
    bids: &[Bid],
    efcs: &BTreeMap<String, f64>,
    bg: &ShortfallEnsemble,
    standard: &Standard,
) -> Result<(BTreeSet<String>, f64)> {
    let order = merit_order(bids, efcs);
    let prefix = |m: usize| -> BTreeSet<String> {
        order[..m]
            .iter()
            .map(|(i, _)| bids[*i].id.clone())
            .collect()
    };
    let meets = |m: usize| standard.met(&set_of(bids, &prefix(m)), bg);
    if meets(0)? {
        return Ok((BTreeSet::new(), 0.0));
    }
    if !meets(order.len())? {
        return Err(Error::Infeasible(format!(
            "all {} offered resources together do not meet {} <= {}",
            order.len(),
            standard.metric,
            standard.k
        )));
    }
    let (mut lo, mut hi) = (0, order.len());
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if meets(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((prefix(hi), order[hi - 1].1))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    mode: ClearMode,
    bids: &[Bid],
    accepted: BTreeSet<String>,
    price: f64,
    efcs: BTreeMap<String, f64>,
    bg: &ShortfallEnsemble,
    standard: &Standard,
    iterations: usize,
    reference_firm_mw: f64,
    opts: &ClearOptions,
) -> Result<AuctionOutcome> {
    let set = set_of(bids, &accepted);
    let risk_achieved = risk::rho(&set, bg, standard.metric)?;
    let payments: BTreeMap<String, f64> = accepted
        .iter()
        .map(|id| (id.clone(), price * efcs[id]))
        .collect();
    let total_cost = payments.values().sum();
    let bid_cost = bids
        .iter()
        .filter(|b| accepted.contains(&b.id))
        .map(|b| b.min_total_price)
        .sum();
    let marginal_storage_efc = bids
        .iter()
        .filter(|b| b.is_store() && accepted.contains(&b.id))
        .map(|b| efcs[&b.id])
        .sum();
    let whole_set_storage_efc = if set.stores.is_empty() {
        0.0
    } else {
        let bundle = ResourceSet::from_stores(set.stores.clone());
        efc::efc_exact(
            &bundle,
            &set.without_stores(),
            bg,
            Metric::Eeu,
            opts.efc_tol,
        )?
        .value
    };
    Ok(AuctionOutcome {
        mode,
        accepted: accepted.into_iter().collect(),
        clearing_price: price,
        efc: efcs,
        payments,
        total_cost,
        bid_cost,
        risk_achieved,
        standard: *standard,
        iterations,
        accepted_firm_mw: set.firm,
        marginal_storage_efc,
        whole_set_storage_efc,
        reference_firm_mw,
    })
}

fn validate_inputs(bids: &[Bid], standard: &Standard) -> Result<()> {
    if bids.is_empty() {
        return Err(Error::Infeasible("no bids".into()));
    }
    check_unique(bids)?;
    Standard::new(standard.metric, standard.k)?;
    Ok(())
}

fn reference_firm(bg: &ShortfallEnsemble, standard: &Standard, opts: &ClearOptions) -> Result<f64> {
    efc::calibrate_firm(bg, standard.metric, standard.k, opts.efc_tol)
}

/// Single-pass clearing with EFCs estimated once against the firm capacity
/// that alone meets the standard.
pub fn clear_naive_firm_efc(
    bids: &[Bid],
    bg: &ShortfallEnsemble,
    standard: &Standard,
    opts: &ClearOptions,
) -> Result<AuctionOutcome> {
    validate_inputs(bids, standard)?;
    let y0 = reference_firm(bg, standard, opts)?;
    let efcs = efcs_against(bids, &ResourceSet::firm(y0), &BTreeSet::new(), bg)?;
    let (accepted, price) = merit_clear(bids, &efcs, bg, standard)?;
    finish(
        ClearMode::Naive,
        bids,
        accepted,
        price,
        efcs,
        bg,
        standard,
        1,
        y0,
        opts,
    )
}

/// Fixed-point clearing: EFCs are re-estimated against each accepted set
/// until the set repeats.
pub fn clear(
    bids: &[Bid],
    bg: &ShortfallEnsemble,
    standard: &Standard,
    opts: &ClearOptions,
) -> Result<AuctionOutcome> {
    validate_inputs(bids, standard)?;
    let y0 = reference_firm(bg, standard, opts)?;
    let mut efcs = efcs_against(bids, &ResourceSet::firm(y0), &BTreeSet::new(), bg)?;
    let (mut accepted, mut price) = merit_clear(bids, &efcs, bg, standard)?;
    if bids.iter().all(|b| !b.is_store()) {
        return finish(
            ClearMode::FixedPoint,
            bids,
            accepted,
            price,
            efcs,
            bg,
            standard,
            1,
            y0,
            opts,
        );
    }

    let mut history = vec![accepted.clone()];
    let mut prev_efcs = efcs.clone();
    let mut damped = false;
    for iteration in 2..=opts.max_iter.max(2) {
        let next_efcs = efcs_against(bids, &set_of(bids, &accepted), &accepted, bg)?;
        let (mut next, mut next_price) = merit_clear(bids, &next_efcs, bg, standard)?;
        let mut used_efcs = next_efcs;
        if next == accepted {
            return finish(
                ClearMode::FixedPoint,
                bids,
                next,
                next_price,
                used_efcs,
                bg,
                standard,
                iteration,
                y0,
                opts,
            );
        }
        let cycling = history.len() >= 2 && history[history.len() - 2] == next;
        if cycling {
            if damped {
                return Err(Error::NonConvergence {
                    iterations: iteration,
                    last_sets: [
                        accepted.iter().cloned().collect(),
                        next.iter().cloned().collect(),
                    ],
                });
            }
            damped = true;
            let averaged: BTreeMap<String, f64> = used_efcs
                .iter()
                .map(|(id, v)| (id.clone(), 0.5 * (v + efcs[id])))
                .collect();
            (next, next_price) = merit_clear(bids, &averaged, bg, standard)?;
            used_efcs = averaged;
        }
        prev_efcs = std::mem::replace(&mut efcs, used_efcs);
        history.push(next.clone());
        accepted = next;
        price = next_price;
    }
    let _ = (price, prev_efcs);
    let n = history.len();
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        last_sets: [
            history[n.saturating_sub(2)].iter().cloned().collect(),
            history[n - 1].iter().cloned().collect(),
        ],
    })
}

/// Bids still in the auction at `price`: those with unit price at most `price`.
fn remaining_at(bids: &[Bid], efcs: &BTreeMap<String, f64>, price: f64) -> BTreeSet<String> {
    bids.iter()
        .filter(|b| unit_price(b.min_total_price, efcs[&b.id]) <= price)
        .map(|b| b.id.clone())
        .collect()
}

/// Lowest grid price at which the remaining bids pass `feasible`; the price
/// grid is searched from the top down. `feasible` must be monotone in price.
pub(crate) fn clock_search(
    bids: &[Bid],
    efcs: &BTreeMap<String, f64>,
    price_grid: &[f64],
    mut feasible: impl FnMut(f64, &ResourceSet) -> Result<bool>,
) -> Result<(BTreeSet<String>, f64)> {
    let mut grid: Vec<f64> = price_grid.to_vec();
    grid.sort_by(|a, b| b.total_cmp(a));
    grid.dedup();
    if grid.is_empty() || bids.is_empty() {
        return Err(Error::Infeasible("empty bid list or price grid".into()));
    }
    let mut check = |i: usize| -> Result<bool> {
        let ids = remaining_at(bids, efcs, grid[i]);
        feasible(grid[i], &set_of(bids, &ids))
    };
    if !check(0)? {
        return Err(Error::Infeasible(format!(
            "offered capacity at the opening price {} does not meet the target",
            grid[0]
        )));
    }
    // Feasibility is monotone in price; find the last feasible step down the grid.
    let (mut lo, mut hi) = (0, grid.len());
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if check(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((remaining_at(bids, efcs, grid[lo]), grid[lo]))
}

/// Descending clock auction with EFCs fixed in advance.
pub fn descending_clock(
    bids: &[Bid],
    bg: &ShortfallEnsemble,
    standard: &Standard,
    efcs: &BTreeMap<String, f64>,
    price_grid: &[f64],
    opts: &ClearOptions,
) -> Result<AuctionOutcome> {
    validate_inputs(bids, standard)?;
    for b in bids {
        if !efcs.contains_key(&b.id) {
            return Err(Error::config(format!("no EFC supplied for bid {}", b.id)));
        }
    }
    let (accepted, price) = clock_search(bids, efcs, price_grid, |_, set| standard.met(set, bg))?;
    finish(
        ClearMode::Clock,
        bids,
        accepted,
        price,
        efcs.clone(),
        bg,
        standard,
        1,
        f64::NAN,
        opts,
    )
    .map(|mut o| {
        o.reference_firm_mw = 0.0;
        o
    })
}

/// Evenly spaced descending price grid from `top` to 0 with `steps` intervals.
pub fn price_grid(top: f64, steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|i| top * (steps - i) as f64 / steps as f64)
        .collect()
}

/// Tries to undo overshoot from large accepted resources: for each accepted
/// bid whose EFC exceeds `share` of the accepted total, drop it and admit
/// rejected bids in merit order until the standard is met again. The single
/// swap with the largest saving in bid cost is applied.
pub fn lumpy_recheck(
    outcome: &AuctionOutcome,
    bids: &[Bid],
    bg: &ShortfallEnsemble,
    standard: &Standard,
    share: f64,
) -> Result<AuctionOutcome> {
    let accepted = outcome.accepted_set();
    let total_efc: f64 = accepted.iter().map(|id| outcome.efc[id]).sum();
    let order = merit_order(bids, &outcome.efc);
    let cost_of = |ids: &BTreeSet<String>| -> f64 {
        bids.iter()
            .filter(|b| ids.contains(&b.id))
            .map(|b| b.min_total_price)
            .sum()
    };

    let mut best: Option<(f64, BTreeSet<String>)> = None;
    for id in &accepted {
        if outcome.efc[id] <= share * total_efc {
            continue;
        }
        let mut candidate = accepted.clone();
        candidate.remove(id);
        let mut rejected = order
            .iter()
            .map(|(i, _)| &bids[*i].id)
            .filter(|b| !accepted.contains(*b));
        let mut ok = standard.met(&set_of(bids, &candidate), bg)?;
        while !ok {
            match rejected.next() {
                Some(next) => {
                    candidate.insert(next.clone());
                    ok = standard.met(&set_of(bids, &candidate), bg)?;
                }
                None => break,
            }
        }
        let cost = cost_of(&candidate);
        if ok && cost < outcome.bid_cost && best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, candidate));
        }
    }

    let Some((_, chosen)) = best else {
        return Ok(outcome.clone());
    };
    // Pay-as-clear at the highest accepted unit price keeps every payment >= c_i.
    let price = bids
        .iter()
        .filter(|b| chosen.contains(&b.id))
        .map(|b| outcome.unit_price(b))
        .fold(0.0, f64::max);
    let set = set_of(bids, &chosen);
    let payments: BTreeMap<String, f64> = chosen
        .iter()
        .map(|id| (id.clone(), price * outcome.efc[id]))
        .collect();
    let mut adjusted = outcome.clone();
    adjusted.total_cost = payments.values().sum();
    adjusted.payments = payments;
    adjusted.bid_cost = cost_of(&chosen);
    adjusted.clearing_price = price;
    adjusted.risk_achieved = risk::rho(&set, bg, standard.metric)?;
    adjusted.accepted_firm_mw = set.firm;
    adjusted.marginal_storage_efc = bids
        .iter()
        .filter(|b| b.is_store() && chosen.contains(&b.id))
        .map(|b| outcome.efc[&b.id])
        .sum();
    adjusted.accepted = chosen.into_iter().collect();
    Ok(adjusted)
}

/// Result of re-checking an outcome with freshly computed EFCs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub reliability_met: bool,
    pub risk: f64,
    /// Ids violating `c_i <= p * efc_i` (accepted) or `c_i > p * efc_i` (rejected).
    pub violations: Vec<String>,
    pub efc: BTreeMap<String, f64>,
}

impl Certificate {
    pub fn holds(&self) -> bool {
        self.reliability_met && self.violations.is_empty()
    }
}

/// Recomputes every bid's EFC against the accepted set and re-evaluates risk.
/// Rejected bids tied exactly at the clearing price are allowed (ties are
/// resolved toward rejection), as is a relative slack of `rel_tol`.
pub fn verify_equilibrium(
    outcome: &AuctionOutcome,
    bids: &[Bid],
    bg: &ShortfallEnsemble,
    rel_tol: f64,
) -> Result<Certificate> {
    let accepted = outcome.accepted_set();
    let set = set_of(bids, &accepted);
    let efcs = efcs_against(bids, &set, &accepted, bg)?;
    let risk = risk::rho(&set, bg, outcome.standard.metric)?;
    let p = outcome.clearing_price;
    let violations = bids
        .iter()
        .filter(|b| {
            let value = p * efcs[&b.id];
            let slack = rel_tol * b.min_total_price.max(value).max(1e-12);
            if accepted.contains(&b.id) {
                b.min_total_price > value + slack
            } else {
                b.min_total_price < value - slack
            }
        })
        .map(|b| b.id.clone())
        .collect();
    Ok(Certificate {
        reliability_met: risk <= outcome.standard.k,
        risk,
        violations,
        efc: efcs,
    })
}

/// Per-bid rows `id,efc_mw,unit_price,accepted,payment`.
pub fn write_outcome_csv<W: std::io::Write>(
    writer: W,
    outcome: &AuctionOutcome,
    bids: &[Bid],
) -> Result<()> {
    let accepted = outcome.accepted_set();
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "efc_mw", "unit_price", "accepted", "payment"])?;
    for b in bids {
        let efc = outcome.efc.get(&b.id).copied().unwrap_or(0.0);
        let unit = outcome.unit_price(b);
        w.write_record([
            b.id.clone(),
            fmt6(efc),
            if unit.is_finite() {
                fmt6(unit)
            } else {
                "inf".into()
            },
            accepted.contains(&b.id).to_string(),
            fmt6(outcome.payments.get(&b.id).copied().unwrap_or(0.0)),
        ])?;
    }
    w.flush()?;
    Ok(())
}
