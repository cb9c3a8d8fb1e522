//! Checks of the continuity and local-additivity assumptions behind marginal
//! EFC clearing.
//!
//! [`continuity_scan`] adds bids in merit order and tracks the residual EEU
//! against the firm capacity that would replace everything added so far.
//! [`smoothness_grid`] compares the risk reduction of a probe store with and
//! without a second probe store present.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::auction::{set_of, Bid};
use crate::efc;
use crate::error::{Error, Result};
use crate::io::fmt6;
use crate::par;
use crate::risk::{self, Metric};
use crate::system::{ResourceSet, ShortfallEnsemble, Store};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanPoint {
    /// Id of the bid added at this step; empty for the starting point.
    pub id: String,
    pub cumulative_efc: f64,
    pub residual_eeu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityScan {
    pub points: Vec<ScanPoint>,
    pub target_eeu: f64,
    /// EFC step of the segment whose EEU range contains the target.
    pub gap_at_target: f64,
    pub max_gap: f64,
}

/// Adds bids in the given order (usually merit order) and records, after each
/// step, the residual EEU and the firm capacity with the same EEU.
pub fn continuity_scan(
    bids: &[Bid],
    order: &[String],
    bg: &ShortfallEnsemble,
    target_eeu: f64,
    tol: f64,
) -> Result<ContinuityScan> {
    if bids.is_empty() {
        return Err(Error::config("continuity scan needs at least one bid"));
    }
    let index: BTreeMap<&str, usize> = bids
        .iter()
        .enumerate()
        .map(|(i, b)| (b.id.as_str(), i))
        .collect();
    let mut steps = Vec::with_capacity(order.len());
    for id in order {
        let i = *index
            .get(id.as_str())
            .ok_or_else(|| Error::config(format!("unknown bid {id} in scan order")))?;
        steps.push(i);
    }

    let points = par::map_indexed(steps.len() + 1, |n| -> Result<ScanPoint> {
        let ids = steps[..n].iter().map(|&i| bids[i].id.clone()).collect();
        let eeu = risk::rho(&set_of(bids, &ids), bg, Metric::Eeu)?;
        let cumulative_efc = efc::calibrate_firm(bg, Metric::Eeu, eeu, tol)?;
        Ok(ScanPoint {
            id: if n == 0 {
                String::new()
            } else {
                bids[steps[n - 1]].id.clone()
            },
            cumulative_efc,
            residual_eeu: eeu,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut gap_at_target = 0.0;
    let mut max_gap: f64 = 0.0;
    for w in points.windows(2) {
        let gap = w[1].cumulative_efc - w[0].cumulative_efc;
        max_gap = max_gap.max(gap);
        if w[0].residual_eeu >= target_eeu && w[1].residual_eeu <= target_eeu {
            gap_at_target = gap;
        }
    }
    Ok(ContinuityScan {
        points,
        target_eeu,
        gap_at_target,
        max_gap,
    })
}

/// Rows `step,id,cumulative_efc_mw,residual_eeu_mwh`.
pub fn write_scan_csv<W: std::io::Write>(writer: W, scan: &ContinuityScan) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["step", "id", "cumulative_efc_mw", "residual_eeu_mwh"])?;
    for (n, p) in scan.points.iter().enumerate() {
        w.write_record([
            n.to_string(),
            p.id.clone(),
            fmt6(p.cumulative_efc),
            fmt6(p.residual_eeu),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothnessGrid {
    pub energy: f64,
    pub powers: Vec<f64>,
    /// `deviation[i][j]`: percentage difference between the risk reduction of
    /// probe `i` with probe `j` present and without it.
    pub deviation: Vec<Vec<f64>>,
    /// Deviations below this are reported as 0.
    pub noise_floor: f64,
}

impl SmoothnessGrid {
    pub fn max_deviation(&self) -> f64 {
        self.deviation.iter().flatten().copied().fold(0.0, f64::max)
    }

    pub fn at(&self, pi: f64, pj: f64) -> Option<f64> {
        let i = self.powers.iter().position(|&p| p == pi)?;
        let j = self.powers.iter().position(|&p| p == pj)?;
        Some(self.deviation[i][j])
    }
}

fn probe(tag: &str, power: f64, energy: f64) -> Result<ResourceSet> {
    Ok(ResourceSet::store(Store::new(
        format!("probe-{tag}-{}", fmt6(power)),
        power,
        energy,
    )?))
}

/// Percentage deviation for one pair of probe stores.
pub fn smoothness_cell(
    base: &ResourceSet,
    bg: &ShortfallEnsemble,
    metric: Metric,
    energy: f64,
    pi: f64,
    pj: f64,
) -> Result<f64> {
    if pi == 0.0 || energy == 0.0 {
        return Ok(0.0);
    }
    let i = probe("i", pi, energy)?;
    let with_j = if pj == 0.0 {
        base.clone()
    } else {
        base.union(&probe("j", pj, energy)?)
    };
    let r = risk::rho(base, bg, metric)?;
    let ri = risk::rho(&base.union(&i), bg, metric)?;
    let rj = risk::rho(&with_j, bg, metric)?;
    let rij = risk::rho(&with_j.union(&i), bg, metric)?;
    let alone = ri - r;
    if alone == 0.0 {
        return Ok(0.0);
    }
    Ok(100.0 * ((rij - rj) - alone).abs() / alone.abs())
}

/// Deviation grid over all ordered pairs of probe powers; cells are
/// evaluated in parallel.
pub fn smoothness_grid(
    base: &ResourceSet,
    bg: &ShortfallEnsemble,
    metric: Metric,
    energy: f64,
    powers: &[f64],
    noise_floor: f64,
) -> Result<SmoothnessGrid> {
    let n = powers.len();
    let cells = par::map_indexed(n * n, |c| {
        smoothness_cell(base, bg, metric, energy, powers[c / n], powers[c % n])
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let deviation = cells
        .chunks(n.max(1))
        .map(|row| {
            row.iter()
                .map(|&d| if d < noise_floor { 0.0 } else { d })
                .collect()
        })
        .collect();
    Ok(SmoothnessGrid {
        energy,
        powers: powers.to_vec(),
        deviation,
        noise_floor,
    })
}

/// Spread (sample standard deviation) of one cell across independently
/// seeded backgrounds.
pub fn noise_floor(
    base: &ResourceSet,
    replicas: &[ShortfallEnsemble],
    metric: Metric,
    energy: f64,
    pi: f64,
    pj: f64,
) -> Result<f64> {
    if replicas.len() < 2 {
        return Err(Error::config("noise floor needs at least two backgrounds"));
    }
    let values = replicas
        .iter()
        .map(|bg| smoothness_cell(base, bg, metric, energy, pi, pj))
        .collect::<Result<Vec<_>>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(var.sqrt())
}

/// Rows `power_i_mw,power_j_mw,deviation_pct`.
pub fn write_grid_csv<W: std::io::Write>(writer: W, grid: &SmoothnessGrid) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["power_i_mw", "power_j_mw", "deviation_pct"])?;
    for (i, row) in grid.deviation.iter().enumerate() {
        for (j, d) in row.iter().enumerate() {
            w.write_record([fmt6(grid.powers[i]), fmt6(grid.powers[j]), fmt6(*d)])?;
        }
    }
    w.flush()?;
    Ok(())
}
