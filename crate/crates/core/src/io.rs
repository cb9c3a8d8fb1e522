//! File formats: demand and fleet CSVs, bid CSV, demand-curve CSV, and the
//! fixed-precision number formatting used by every report.

use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use crate::auction::{Bid, BidResource};
use crate::economics::DemandCurve;
use crate::error::{Error, Result};
use crate::system::{DemandTrace, GeneratorUnit, Store, TimeGrid};

/// Rounds to 6 significant digits.
pub fn round6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

/// Formats with 6 significant digits in plain decimal form.
pub fn fmt6(x: f64) -> String {
    let r = round6(x);
    if r == 0.0 {
        return "0".into();
    }
    format!("{r}")
}

fn round_value(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64().map(round6) {
                *v = if x == 0.0 {
                    serde_json::Value::from(0)
                } else if x.fract() == 0.0 && x.abs() < 1e15 {
                    serde_json::Value::from(x as i64)
                } else {
                    serde_json::Value::from(x)
                };
            }
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(round_value),
        serde_json::Value::Object(o) => o.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with every number rounded to 6 significant digits.
pub fn to_json_6<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_value(&mut v);
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

#[derive(Deserialize)]
struct DemandRow {
    #[allow(dead_code)]
    period: usize,
    mwh: f64,
}

/// Reads `period,mwh` rows. Values are energy per period; with a period
/// length other than one hour they are converted to MW.
pub fn read_demand_csv<R: Read>(reader: R, label: &str, grid: &TimeGrid) -> Result<DemandTrace> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["period", "mwh"] {
        return Err(Error::config("demand CSV header must be `period,mwh`"));
    }
    let mut values = Vec::new();
    for row in rdr.deserialize::<DemandRow>() {
        values.push(row?.mwh / grid.period_length);
    }
    let trace = DemandTrace::new(label, values)?;
    trace.check_grid(grid)?;
    Ok(trace)
}

pub fn write_demand_csv<W: std::io::Write>(
    writer: W,
    trace: &DemandTrace,
    grid: &TimeGrid,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["period", "mwh"])?;
    for (t, v) in trace.values.iter().enumerate() {
        w.write_record([t.to_string(), fmt6(v * grid.period_length)])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct FleetRow {
    id: String,
    capacity_mw: f64,
    mttf_h: f64,
    mttr_h: f64,
}

/// Reads `id,capacity_mw,mttf_h,mttr_h` rows.
pub fn read_fleet_csv<R: Read>(reader: R) -> Result<Vec<GeneratorUnit>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize::<FleetRow>()
        .map(|row| {
            let row = row?;
            GeneratorUnit::new(row.id, row.capacity_mw, row.mttf_h, row.mttr_h)
        })
        .collect()
}

pub fn write_fleet_csv<W: std::io::Write>(writer: W, fleet: &[GeneratorUnit]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "capacity_mw", "mttf_h", "mttr_h"])?;
    for g in fleet {
        w.write_record([g.id.clone(), fmt6(g.capacity), fmt6(g.mttf), fmt6(g.mttr)])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct BidRow {
    id: String,
    #[serde(rename = "type")]
    kind: String,
    power_mw: f64,
    #[serde(default)]
    energy_mwh: Option<f64>,
    min_total_price: f64,
}

/// Reads `id,type,power_mw,energy_mwh,min_total_price` rows; `type` is
/// `firm` or `store` and `energy_mwh` is empty for firm blocks.
pub fn read_bids_csv<R: Read>(reader: R) -> Result<Vec<Bid>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut bids = Vec::new();
    for row in rdr.deserialize::<BidRow>() {
        let row = row?;
        let resource = match row.kind.as_str() {
            "firm" => BidResource::Firm(row.power_mw),
            "store" => {
                let energy = row.energy_mwh.ok_or_else(|| {
                    Error::config(format!("store bid {} has no energy_mwh", row.id))
                })?;
                BidResource::Store(Store::new(row.id.clone(), row.power_mw, energy)?)
            }
            other => {
                return Err(Error::config(format!(
                    "bid {}: unknown type {other:?}",
                    row.id
                )))
            }
        };
        bids.push(Bid::new(row.id, resource, row.min_total_price)?);
    }
    crate::auction::check_unique(&bids)?;
    Ok(bids)
}

pub fn write_bids_csv<W: std::io::Write>(writer: W, bids: &[Bid]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "type", "power_mw", "energy_mwh", "min_total_price"])?;
    for b in bids {
        let (kind, power, energy) = match &b.resource {
            BidResource::Firm(mw) => ("firm", *mw, String::new()),
            BidResource::Store(s) => ("store", s.power, fmt6(s.energy)),
        };
        w.write_record([
            b.id.clone(),
            kind.to_string(),
            fmt6(power),
            energy,
            fmt6(b.min_total_price),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct CurveRow {
    price: f64,
    capacity_mw: f64,
}

/// Reads `price,capacity_mw` knots.
pub fn read_demand_curve_csv<R: Read>(reader: R) -> Result<DemandCurve> {
    let mut rdr = csv::Reader::from_reader(reader);
    let knots = rdr
        .deserialize::<CurveRow>()
        .map(|row| row.map(|r| (r.price, r.capacity_mw)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    DemandCurve::new(knots)
}

pub fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path)
        .map_err(|e| Error::config(format!("cannot open {}: {e}", path.display())))
}
