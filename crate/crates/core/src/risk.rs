//! LOLE and EEU of a resource set against a background ensemble.
//!
//! Per trace: firm capacity, generator availability and variable output are
//! netted off the residual demand, stores are dispatched day by day with the
//! EEU-optimal greedy policy, and the remaining shortfall is counted. A
//! period is in shortfall only if its residual depth is strictly positive.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dispatch::Dispatcher;
use crate::error::{Error, Result};
use crate::par;
use crate::rng::Domain;
use crate::system::{unit_availability, ResourceSet, ShortfallEnsemble};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Lole,
    Eeu,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Lole => "lole",
            Metric::Eeu => "eeu",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lole" => Ok(Metric::Lole),
            "eeu" => Ok(Metric::Eeu),
            other => Err(Error::config(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRisk {
    pub shortfall_periods: usize,
    pub unserved_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    /// Expected hours of shortfall per season.
    pub lole: f64,
    /// Expected unserved energy per season, MWh.
    pub eeu: f64,
    pub per_trace: Vec<TraceRisk>,
}

impl RiskReport {
    pub fn metric(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Lole => self.lole,
            Metric::Eeu => self.eeu,
        }
    }
}

/// Per-trace tallies, including the count behind the firm-capacity
/// derivative of EEU.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Tally {
    pub shortfall_periods: usize,
    pub unserved: f64,
    /// Periods whose depth exceeds the power of the stores left non-empty at
    /// the end of that day.
    pub slope_periods: usize,
}

pub(crate) fn tally_trace(resources: &ResourceSet, bg: &ShortfallEnsemble, k: usize) -> Tally {
    let grid = bg.grid();
    let ppd = grid.periods_per_day;
    let len = grid.period_length;
    let trace = &bg.traces()[k];
    let gens: Vec<Vec<f64>> = resources
        .generators
        .iter()
        .map(|g| unit_availability(g, grid, bg.seed(), Domain::Resource, k))
        .collect();

    let mut tally = Tally::default();
    let mut depths = vec![0.0; ppd];
    let mut dispatcher = Dispatcher::default();
    for day in bg.days_above(k, resources.firm) {
        let start = day * ppd;
        let mut any = false;
        for (i, depth) in depths.iter_mut().enumerate() {
            let t = start + i;
            let mut d = trace[t] - resources.firm;
            for g in &gens {
                d -= g[t];
            }
            for v in &resources.variable {
                d -= v.output(t, grid);
            }
            *depth = d;
            any |= d > 0.0;
        }
        if !any {
            continue;
        }
        let stores = &resources.stores;
        dispatcher.reset(stores);
        for &d in &depths {
            let r = dispatcher.serve(stores, d, len, |_, _| {});
            if r > 0.0 {
                tally.shortfall_periods += 1;
                tally.unserved += r * len;
            }
        }
        let live_power: f64 = stores
            .iter()
            .enumerate()
            .filter(|&(i, _)| !dispatcher.is_empty(stores, i))
            .map(|(_, s)| s.power)
            .sum();
        tally.slope_periods += depths.iter().filter(|&&d| d - live_power > 0.0).count();
    }
    tally
}

pub(crate) fn tally_all(resources: &ResourceSet, bg: &ShortfallEnsemble) -> Vec<Tally> {
    par::map_indexed(bg.num_traces(), |k| tally_trace(resources, bg, k))
}

fn check(resources: &ResourceSet, bg: &ShortfallEnsemble) -> Result<()> {
    if !resources.firm.is_finite() {
        return Err(Error::config("firm capacity must be finite"));
    }
    resources.check_grid(bg.grid())
}

/// Evaluates LOLE and EEU of `resources` with storage optimally dispatched.
pub fn evaluate(resources: &ResourceSet, bg: &ShortfallEnsemble) -> Result<RiskReport> {
    check(resources, bg)?;
    let len = bg.grid().period_length;
    let per_trace: Vec<TraceRisk> = tally_all(resources, bg)
        .into_iter()
        .map(|t| TraceRisk {
            shortfall_periods: t.shortfall_periods,
            unserved_energy: t.unserved,
        })
        .collect();
    let n = per_trace.len() as f64;
    let lole = per_trace
        .iter()
        .map(|t| t.shortfall_periods as f64 * len)
        .sum::<f64>()
        / n;
    let eeu = per_trace.iter().map(|t| t.unserved_energy).sum::<f64>() / n;
    Ok(RiskReport {
        lole,
        eeu,
        per_trace,
    })
}

/// One metric of [`evaluate`].
pub fn rho(resources: &ResourceSet, bg: &ShortfallEnsemble, metric: Metric) -> Result<f64> {
    Ok(evaluate(resources, bg)?.metric(metric))
}

/// Firm-capacity derivative of EEU together with EEU itself.
pub(crate) fn eeu_and_slope(resources: &ResourceSet, bg: &ShortfallEnsemble) -> Result<(f64, f64)> {
    check(resources, bg)?;
    let len = bg.grid().period_length;
    let tallies = tally_all(resources, bg);
    let n = tallies.len() as f64;
    let eeu = tallies.iter().map(|t| t.unserved).sum::<f64>() / n;
    let lole_live = tallies
        .iter()
        .map(|t| t.slope_periods as f64 * len)
        .sum::<f64>()
        / n;
    Ok((eeu, -lole_live))
}

/// Per-trace rows `trace,shortfall_periods,unserved_mwh`.
pub fn write_risk_csv<W: std::io::Write>(writer: W, report: &RiskReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["trace", "shortfall_periods", "unserved_mwh"])?;
    for (k, t) in report.per_trace.iter().enumerate() {
        w.write_record([
            k.to_string(),
            t.shortfall_periods.to_string(),
            crate::io::fmt6(t.unserved_energy),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{Store, TimeGrid};
    use approx::assert_abs_diff_eq;

    fn hand() -> ShortfallEnsemble {
        let g = TimeGrid::new(3, 1).unwrap();
        ShortfallEnsemble::from_traces(g, vec![vec![30.0, 10.0, 0.0]], 0).unwrap()
    }

    #[test]
    fn no_shortfall_background() {
        let g = TimeGrid::new(4, 2).unwrap();
        let bg = ShortfallEnsemble::from_traces(g, vec![vec![-5.0; 8], vec![0.0; 8]], 0).unwrap();
        let r = evaluate(&ResourceSet::empty(), &bg).unwrap();
        assert_eq!((r.lole, r.eeu), (0.0, 0.0));
    }

    #[test]
    fn hand_trace_with_firm() {
        let r = evaluate(&ResourceSet::firm(10.0), &hand()).unwrap();
        assert_abs_diff_eq!(r.lole, 1.0);
        assert_abs_diff_eq!(r.eeu, 20.0);
    }

    #[test]
    fn hand_trace_with_store() {
        let mut set = ResourceSet::firm(10.0);
        set.stores.push(Store::new("s", 20.0, 20.0).unwrap());
        let r = evaluate(&set, &hand()).unwrap();
        assert_abs_diff_eq!(r.lole, 0.0);
        assert_abs_diff_eq!(r.eeu, 0.0);
    }

    #[test]
    fn exact_zero_depth_is_not_shortfall() {
        let r = evaluate(&ResourceSet::firm(30.0), &hand()).unwrap();
        assert_eq!(r.lole, 0.0);
    }

    #[test]
    fn metric_parses() {
        assert_eq!("EEU".parse::<Metric>().unwrap(), Metric::Eeu);
        assert!("x".parse::<Metric>().is_err());
    }

    #[test]
    fn csv_rows() {
        let r = evaluate(&ResourceSet::firm(10.0), &hand()).unwrap();
        let mut buf = Vec::new();
        write_risk_csv(&mut buf, &r).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "trace,shortfall_periods,unserved_mwh\n0,1,20\n"
        );
    }
}
