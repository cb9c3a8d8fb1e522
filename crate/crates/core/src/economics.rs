//! Economic adequacy: total cost `VOLL * EEU + procurement cost`, the firm
//! capacity minimizing it, demand-curve clearing, and the check that LOLE is
//! a function of EEU across a family of resource mixes.
//!
//! For firm capacity `y` with convex procurement cost `c(y)` the derivative of
//! total cost is `c'(y) - VOLL * LOLE(y)`, so the optimum sits where
//! `LOLE = c' / VOLL`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::auction::{self, AuctionOutcome, Bid, ClearMode, ClearOptions, Standard};
use crate::efc;
use crate::error::{Error, Result};
use crate::io::fmt6;
use crate::par;
use crate::risk::{self, Metric};
use crate::system::{ResourceSet, ShortfallEnsemble, VariableSource};

/// Piecewise-linear target capacity as a function of price. Knots are
/// strictly increasing in price with nonincreasing capacity; outside the
/// knot range the end values are held.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct DemandCurve {
    knots: Vec<(f64, f64)>,
}

impl DemandCurve {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::config("demand curve needs at least one knot"));
        }
        for &(p, c) in &knots {
            if !(p.is_finite() && c.is_finite() && p >= 0.0 && c >= 0.0) {
                return Err(Error::config(
                    "demand curve knots must be finite and non-negative",
                ));
            }
        }
        for w in knots.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::config(
                    "demand curve prices must be strictly increasing",
                ));
            }
            if w[1].1 > w[0].1 {
                return Err(Error::config(
                    "demand curve capacity must not increase with price",
                ));
            }
        }
        Ok(DemandCurve { knots })
    }

    /// A fixed capacity at every price.
    pub fn vertical(capacity: f64) -> Result<Self> {
        Self::new(vec![(0.0, capacity)])
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn capacity_at(&self, price: f64) -> f64 {
        let k = &self.knots;
        if price <= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            let ((p0, c0), (p1, c1)) = (w[0], w[1]);
            if price <= p1 {
                return c0 + (c1 - c0) * (price - p0) / (p1 - p0);
            }
        }
        k[k.len() - 1].1
    }

    /// Curve whose capacity at price `p` is the firm capacity with
    /// `LOLE = p / voll` against `bg`.
    pub fn from_voll(bg: &ShortfallEnsemble, voll: f64, prices: &[f64], tol: f64) -> Result<Self> {
        let mut knots = Vec::with_capacity(prices.len());
        for &p in prices {
            let y = efc::calibrate_firm(bg, Metric::Lole, p / voll, tol)?;
            knots.push((p, y));
        }
        // Monte Carlo steps can leave equal neighbours out of order by a bisection tolerance.
        for i in 1..knots.len() {
            knots[i].1 = knots[i].1.min(knots[i - 1].1);
        }
        Self::new(knots)
    }
}

impl TryFrom<Vec<(f64, f64)>> for DemandCurve {
    type Error = Error;

    fn try_from(knots: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(knots)
    }
}

impl From<DemandCurve> for Vec<(f64, f64)> {
    fn from(c: DemandCurve) -> Self {
        c.knots
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconParams {
    /// Currency per MWh unserved.
    pub voll: f64,
    /// Currency per MW per season.
    #[serde(default)]
    pub cone: Option<f64>,
    #[serde(default)]
    pub demand_curve: Option<DemandCurve>,
}

impl EconParams {
    pub fn new(voll: f64) -> Result<Self> {
        let p = EconParams {
            voll,
            cone: None,
            demand_curve: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.voll.is_finite() && self.voll > 0.0) {
            return Err(Error::config("voll must be positive"));
        }
        if let Some(c) = self.cone {
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::config("cone must be non-negative"));
            }
        }
        Ok(())
    }
}

pub fn total_cost(
    resources: &ResourceSet,
    bg: &ShortfallEnsemble,
    econ: &EconParams,
    procurement_cost: f64,
) -> Result<f64> {
    econ.validate()?;
    Ok(econ.voll * risk::rho(resources, bg, Metric::Eeu)? + procurement_cost)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirmOptimum {
    /// Firm capacity added to the base, MW.
    pub firm_mw: f64,
    pub lole: f64,
    pub eeu: f64,
    /// Finite-difference marginal procurement cost at the optimum.
    pub marginal_cost: f64,
    /// `marginal_cost / voll`, the LOLE the optimum should show.
    pub implied_lole: f64,
    pub total_cost: f64,
    /// Total-cost slope just below and just above the optimum.
    pub slope_below: f64,
    pub slope_above: f64,
}

/// Firm capacity in `[lo, hi]` minimizing `voll * EEU(base + y) + cost(y)`.
///
/// `cost` must be convex and increasing; its slope is a centred difference
/// with step `step`. The base may not contain stores. An optimum at either
/// end of the bracket is reported as [`Error::BoundaryOptimum`].
pub fn optimal_firm(
    base: &ResourceSet,
    bg: &ShortfallEnsemble,
    econ: &EconParams,
    cost: impl Fn(f64) -> f64,
    bracket: (f64, f64),
    step: f64,
    tol: f64,
) -> Result<FirmOptimum> {
    econ.validate()?;
    if !base.stores.is_empty() {
        return Err(Error::StorageNotPivotable);
    }
    let (lo, hi) = bracket;
    if !(lo.is_finite() && hi.is_finite() && lo < hi && step > 0.0 && tol > 0.0) {
        return Err(Error::config("bad bracket, step or tolerance"));
    }
    let slope_cost = |y: f64| (cost(y + step) - cost(y - step)) / (2.0 * step);
    let lole = |y: f64| risk::rho(&base.plus_firm(y), bg, Metric::Lole);
    let g = |y: f64| -> Result<f64> { Ok(slope_cost(y) - econ.voll * lole(y)?) };

    if g(lo)? >= 0.0 {
        return Err(Error::BoundaryOptimum { at: lo });
    }
    if g(hi)? <= 0.0 {
        return Err(Error::BoundaryOptimum { at: hi });
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > 2.0 * tol {
        let m = 0.5 * (a + b);
        if g(m)? < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let y = 0.5 * (a + b);
    let report = risk::evaluate(&base.plus_firm(y), bg)?;
    let marginal_cost = slope_cost(y);
    Ok(FirmOptimum {
        firm_mw: y,
        lole: report.lole,
        eeu: report.eeu,
        marginal_cost,
        implied_lole: marginal_cost / econ.voll,
        total_cost: econ.voll * report.eeu + cost(y),
        slope_below: g(a)?,
        slope_above: g(b)?,
    })
}

/// Total cost over a grid of firm additions, for bases where the LOLE
/// pivot does not apply (for example with stores).
pub fn total_cost_scan(
    base: &ResourceSet,
    bg: &ShortfallEnsemble,
    econ: &EconParams,
    cost: impl Fn(f64) -> f64 + Sync,
    firm_grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    econ.validate()?;
    par::map_indexed(firm_grid.len(), |i| {
        let y = firm_grid[i];
        total_cost(&base.plus_firm(y), bg, econ, cost(y)).map(|c| (y, c))
    })
    .into_iter()
    .collect()
}

/// Descending clock where the target at price `q` is the risk of firm
/// capacity `curve(q)`. EFCs are held fixed.
pub fn clear_with_demand_curve(
    bids: &[Bid],
    bg: &ShortfallEnsemble,
    curve: &DemandCurve,
    metric: Metric,
    efcs: &BTreeMap<String, f64>,
    price_grid: &[f64],
    opts: &ClearOptions,
) -> Result<AuctionOutcome> {
    let target = |q: f64| risk::rho(&ResourceSet::firm(curve.capacity_at(q)), bg, metric);
    let (accepted, price) = auction::clock_search(bids, efcs, price_grid, |q, set| {
        Ok(risk::rho(set, bg, metric)? <= target(q)?)
    })
    .map_err(|e| match e {
        Error::Infeasible(_) => Error::Infeasible("demand curve never met by offers".into()),
        other => other,
    })?;
    let standard = Standard::new(metric, target(price)?)?;
    let ids: Vec<String> = accepted.iter().cloned().collect();
    let mut out = auction::descending_clock(bids, bg, &standard, efcs, &[price], opts)?;
    debug_assert_eq!(out.accepted, ids);
    out.mode = ClearMode::DemandCurve;
    Ok(out)
}

/// One member of a family of resource mixes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyPoint {
    pub label: String,
    pub eeu: f64,
    pub lole: f64,
    /// LOLE range of firm-only capacity with the same EEU.
    pub reference_lole: (f64, f64),
    /// Hours outside the reference range.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OneOneReport {
    pub points: Vec<FamilyPoint>,
    pub max_deviation: f64,
    /// Largest deviation relative to the reference LOLE.
    pub max_relative_deviation: f64,
    pub threshold: f64,
    /// Consecutive members where EEU fell while LOLE did not move.
    pub eeu_only_steps: usize,
    /// Steps, in EEU order, where LOLE does not strictly follow EEU.
    pub discordant_steps: usize,
    pub holds: bool,
}

/// Checks whether LOLE is a strictly increasing function of EEU across
/// `family`. Members are sorted by EEU; the check holds when the share of
/// adjacent pairs whose LOLE fails to follow is at most `threshold`.
/// Each member is also compared with firm-only capacity of equal EEU and
/// the gap is reported as scatter.
pub fn check_one_one(
    bg: &ShortfallEnsemble,
    family: &[(String, ResourceSet)],
    threshold: f64,
    tol: f64,
) -> Result<OneOneReport> {
    if family.iter().any(|(_, r)| !r.stores.is_empty()) {
        return Err(Error::StorageNotPivotable);
    }
    let points = par::map_indexed(family.len(), |i| -> Result<FamilyPoint> {
        let (label, set) = &family[i];
        let r = risk::evaluate(set, bg)?;
        let y = efc::calibrate_firm(bg, Metric::Eeu, r.eeu, tol)?;
        let hi = risk::rho(&ResourceSet::firm((y - tol).max(0.0)), bg, Metric::Lole)?;
        let lo = risk::rho(&ResourceSet::firm(y + tol), bg, Metric::Lole)?;
        let deviation = if r.lole < lo {
            lo - r.lole
        } else if r.lole > hi {
            r.lole - hi
        } else {
            0.0
        };
        Ok(FamilyPoint {
            label: label.clone(),
            eeu: r.eeu,
            lole: r.lole,
            reference_lole: (lo, hi),
            deviation,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let max_deviation = points.iter().map(|p| p.deviation).fold(0.0, f64::max);
    let max_relative_deviation = points
        .iter()
        .map(|p| {
            if p.deviation == 0.0 {
                0.0
            } else {
                p.deviation / p.reference_lole.1.max(f64::MIN_POSITIVE)
            }
        })
        .fold(0.0, f64::max);
    let eeu_only_steps = points
        .windows(2)
        .filter(|w| w[1].eeu < w[0].eeu && w[1].lole == w[0].lole)
        .count();
    let mut order: Vec<&FamilyPoint> = points.iter().collect();
    order.sort_by(|a, b| a.eeu.total_cmp(&b.eeu));
    let steps = order.windows(2).filter(|w| w[1].eeu > w[0].eeu).count();
    let discordant_steps = order
        .windows(2)
        .filter(|w| w[1].eeu > w[0].eeu && w[1].lole <= w[0].lole)
        .count();
    let holds = steps == 0 || discordant_steps as f64 <= threshold * steps as f64;
    Ok(OneOneReport {
        points,
        max_deviation,
        max_relative_deviation,
        threshold,
        eeu_only_steps,
        discordant_steps,
        holds,
    })
}

/// `base` plus firm blocks of each size.
pub fn firm_family(base: &ResourceSet, sizes: &[f64]) -> Vec<(String, ResourceSet)> {
    sizes
        .iter()
        .map(|&y| (format!("firm-{}", fmt6(y)), base.plus_firm(y)))
        .collect()
}

/// `base` plus a variable source with profile `shape` scaled by each factor.
pub fn variable_family(
    base: &ResourceSet,
    shape: &[f64],
    scales: &[f64],
) -> Result<Vec<(String, ResourceSet)>> {
    scales
        .iter()
        .map(|&s| {
            let mut set = base.clone();
            let id = format!("variable-x{}", fmt6(s));
            set.variable.push(VariableSource::new(
                id.clone(),
                shape.iter().map(|v| v * s).collect(),
            )?);
            Ok((id, set))
        })
        .collect()
}

/// Daily profile that produces `mw` only in periods where every day of every
/// trace is already in shortfall against `base_firm` by more than `mw`, so
/// it trims depth without ending any shortfall period.
pub fn inside_shortfall_profile(bg: &ShortfallEnsemble, base_firm: f64, mw: f64) -> Vec<f64> {
    let ppd = bg.grid().periods_per_day;
    (0..ppd)
        .map(|i| {
            let always_deep = bg
                .traces()
                .iter()
                .all(|tr| tr.iter().skip(i).step_by(ppd).all(|&d| d - base_firm > mw));
            if always_deep {
                mw
            } else {
                0.0
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::TimeGrid;
    use approx::assert_abs_diff_eq;

    fn hand() -> ShortfallEnsemble {
        let g = TimeGrid::new(3, 1).unwrap();
        ShortfallEnsemble::from_traces(g, vec![vec![30.0, 10.0, 0.0]], 0).unwrap()
    }

    #[test]
    fn total_cost_arithmetic() {
        let econ = EconParams::new(17_000.0).unwrap();
        let c = total_cost(&ResourceSet::firm(10.0), &hand(), &econ, 0.0).unwrap();
        assert_abs_diff_eq!(c, 340_000.0);
        let c = total_cost(&ResourceSet::firm(40.0), &hand(), &econ, 123.0).unwrap();
        assert_eq!(c, 123.0);
        assert!(EconParams::new(0.0).is_err());
    }

    #[test]
    fn demand_curve_interpolates_and_clamps() {
        let c = DemandCurve::new(vec![(10.0, 100.0), (20.0, 50.0)]).unwrap();
        assert_eq!(c.capacity_at(0.0), 100.0);
        assert_eq!(c.capacity_at(15.0), 75.0);
        assert_eq!(c.capacity_at(99.0), 50.0);
        assert!(DemandCurve::new(vec![(10.0, 50.0), (20.0, 60.0)]).is_err());
        assert!(DemandCurve::new(vec![(10.0, 50.0), (10.0, 40.0)]).is_err());
        assert!(DemandCurve::new(vec![]).is_err());
    }

    /// 100 traces, one period each, depths 1..=100 MW.
    fn ladder() -> ShortfallEnsemble {
        let g = TimeGrid::new(1, 1).unwrap();
        let traces = (1..=100).map(|d| vec![d as f64]).collect();
        ShortfallEnsemble::from_traces(g, traces, 0).unwrap()
    }

    #[test]
    fn optimum_matches_cone_over_voll() {
        // LOLE(y) = (100 - ceil(y)) / 100; CONE / VOLL = 0.305.
        let econ = EconParams::new(1000.0).unwrap();
        let opt = optimal_firm(
            &ResourceSet::empty(),
            &ladder(),
            &econ,
            |y| 305.0 * y,
            (0.0, 100.0),
            0.5,
            1e-6,
        )
        .unwrap();
        assert_abs_diff_eq!(opt.implied_lole, 0.305, epsilon = 1e-9);
        assert!((opt.lole - 0.305).abs() <= 0.01);
        assert!(opt.slope_below < 0.0 && opt.slope_above > 0.0);
        // Moving away from the optimum costs more.
        let at = |y: f64| total_cost(&ResourceSet::firm(y), &ladder(), &econ, 305.0 * y).unwrap();
        assert!(at(opt.firm_mw + 5.0) > opt.total_cost);
        assert!(at(opt.firm_mw - 5.0) > opt.total_cost);
    }

    #[test]
    fn optimum_errors() {
        let econ = EconParams::new(1000.0).unwrap();
        let bg = ladder();
        let err = optimal_firm(
            &ResourceSet::empty(),
            &bg,
            &econ,
            |y| 2000.0 * y,
            (0.0, 100.0),
            0.5,
            1e-3,
        )
        .unwrap_err();
        assert_eq!(err.code(), "boundary_optimum");
        let mut with_store = ResourceSet::empty();
        with_store
            .stores
            .push(crate::system::Store::new("s", 1.0, 1.0).unwrap());
        let err =
            optimal_firm(&with_store, &bg, &econ, |y| y, (0.0, 100.0), 0.5, 1e-3).unwrap_err();
        assert_eq!(err.code(), "storage_not_pivotable");
    }

    #[test]
    fn firm_family_is_one_one() {
        let bg = ladder();
        let family = firm_family(&ResourceSet::empty(), &[0.0, 10.5, 30.25, 60.0, 90.5]);
        let r = check_one_one(&bg, &family, 0.0, 1e-6).unwrap();
        assert!(r.holds, "{r:?}");
        assert_eq!(r.max_deviation, 0.0);
        assert_eq!(r.discordant_steps, 0);
    }

    #[test]
    fn inside_shortfall_generation_breaks_correspondence() {
        let g = TimeGrid::new(5, 4).unwrap();
        let day = [0.0, 2.0, 40.0, 2.0, 0.0];
        let traces = vec![
            day.repeat(4),
            day.iter().map(|d| d * 1.2).collect::<Vec<_>>().repeat(4),
        ];
        let bg = ShortfallEnsemble::from_traces(g, traces, 0).unwrap();
        let shape = inside_shortfall_profile(&bg, 0.0, 1.0);
        assert_eq!(shape, vec![0.0, 1.0, 1.0, 1.0, 0.0]);
        let deep = inside_shortfall_profile(&bg, 0.0, 35.0);
        assert_eq!(deep, vec![0.0, 0.0, 35.0, 0.0, 0.0]);
        let family = variable_family(&ResourceSet::empty(), &deep, &[0.0, 0.5, 1.0]).unwrap();
        let r = check_one_one(&bg, &family, 0.1, 1e-6).unwrap();
        assert!(!r.holds);
        assert_eq!(r.eeu_only_steps, 2);
        assert_eq!(r.discordant_steps, 2);
    }
}
