//! WebAssembly bindings for the browser demo. Every call returns a JSON
//! string, or an error message.

use adequacy::dispatch::{dispatch_min_eeu, dispatch_min_lole, dispatch_min_peak, DispatchResult};
use adequacy::efc;
use adequacy::risk::{self, Metric};
use adequacy::system::{
    build_background, DemandTrace, GeneratorUnit, ResourceSet, ShortfallEnsemble, Store, TimeGrid,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

type Out = Result<String, String>;

fn json<T: Serialize>(v: &T) -> Out {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

fn err(e: adequacy::Error) -> String {
    e.to_string()
}

#[derive(Serialize)]
struct Policy {
    residual: Vec<f64>,
    discharge: Vec<f64>,
    unserved_mwh: f64,
    shortfall_periods: usize,
}

impl From<DispatchResult> for Policy {
    fn from(r: DispatchResult) -> Self {
        Policy {
            unserved_mwh: r.unserved_energy(1.0),
            shortfall_periods: r.shortfall_periods(),
            discharge: r.discharge.into_iter().next().unwrap_or_default(),
            residual: r.residual,
        }
    }
}

/// Runs the three single-store policies on one day of hourly shortfall depths.
#[wasm_bindgen]
pub fn dispatch_day(depths: Vec<f64>, power: f64, energy: f64) -> Out {
    if depths.iter().any(|d| !d.is_finite()) {
        return Err("depths must be finite".into());
    }
    let store = Store::new("store", power, energy).map_err(err)?;
    #[derive(Serialize)]
    struct Day {
        min_eeu: Policy,
        min_lole: Policy,
        min_peak: Policy,
    }
    json(&Day {
        min_eeu: dispatch_min_eeu(std::slice::from_ref(&store), &depths, 1.0).into(),
        min_lole: dispatch_min_lole(&store, &depths, 1.0).into(),
        min_peak: dispatch_min_peak(&store, &depths, 1.0).into(),
    })
}

/// A simulated system: identical thermal units against a daily demand cycle.
#[wasm_bindgen]
pub struct Demo {
    bg: ShortfallEnsemble,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(
        units: usize,
        unit_mw: f64,
        availability: f64,
        peak_mw: f64,
        days: usize,
        traces: usize,
        seed: u64,
    ) -> Result<Demo, String> {
        let grid = TimeGrid::new(24, days).map_err(err)?;
        let fleet = (0..units)
            .map(|i| GeneratorUnit::with_availability(format!("g{i}"), unit_mw, 50.0, availability))
            .collect::<adequacy::Result<Vec<_>>>()
            .map_err(err)?;
        let values = (0..grid.len())
            .map(|t| {
                let h = (t % 24) as f64;
                let daily = 0.5 - 0.5 * (std::f64::consts::TAU * (h - 6.0) / 24.0).cos();
                let weekly = if (t / 24) % 7 >= 5 { 0.9 } else { 1.0 };
                peak_mw * weekly * (0.6 + 0.4 * daily)
            })
            .collect();
        let demand = DemandTrace::new("demand", values).map_err(err)?;
        let bg = build_background(&fleet, &demand, &grid, traces, seed).map_err(err)?;
        Ok(Demo { bg })
    }

    /// LOLE and EEU as firm capacity rises from zero to `max_mw`.
    pub fn risk_curve(&self, max_mw: f64, steps: usize) -> Out {
        #[derive(Serialize)]
        struct Point {
            firm_mw: f64,
            lole_h: f64,
            eeu_mwh: f64,
        }
        let steps = steps.max(1);
        let points = (0..=steps)
            .map(|i| {
                let y = max_mw * i as f64 / steps as f64;
                let r = risk::evaluate(&ResourceSet::firm(y), &self.bg).map_err(err)?;
                Ok(Point {
                    firm_mw: y,
                    lole_h: r.lole,
                    eeu_mwh: r.eeu,
                })
            })
            .collect::<Result<Vec<_>, String>>()?;
        json(&points)
    }

    /// Exact and marginal EFC of one store added to `firm_mw` of firm capacity.
    pub fn store_efc(&self, firm_mw: f64, power: f64, energy: f64) -> Out {
        let base = ResourceSet::firm(firm_mw);
        let store = ResourceSet::store(Store::new("store", power, energy).map_err(err)?);
        let exact = efc::efc_exact(&store, &base, &self.bg, Metric::Eeu, 0.01).map_err(err)?;
        let marginal = efc::efc_marginal(&store, &base, &self.bg).map_err(err)?;
        let before = risk::evaluate(&base, &self.bg).map_err(err)?;
        let after = risk::evaluate(&base.union(&store), &self.bg).map_err(err)?;
        #[derive(Serialize)]
        struct Efc {
            exact_mw: f64,
            marginal_mw: f64,
            lole_before: f64,
            lole_after: f64,
            eeu_before: f64,
            eeu_after: f64,
        }
        json(&Efc {
            exact_mw: exact.value,
            marginal_mw: marginal.value,
            lole_before: before.lole,
            lole_after: after.lole,
            eeu_before: before.eeu,
            eeu_after: after.eeu,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn day_policies() {
        let v: serde_json::Value =
            serde_json::from_str(&dispatch_day(vec![2.0, 6.0, 10.0, 6.0, 2.0], 5.0, 6.0).unwrap())
                .unwrap();
        assert_eq!(v["min_lole"]["shortfall_periods"], 3);
        assert_eq!(v["min_peak"]["shortfall_periods"], 5);
        assert_eq!(v["min_eeu"]["unserved_mwh"], 20.0);
        assert!(dispatch_day(vec![1.0], -1.0, 1.0).is_err());
    }

    #[test]
    fn demo_curve_and_efc() {
        let demo = Demo::new(30, 100.0, 0.9, 2600.0, 14, 50, 3).unwrap();
        let curve: Vec<serde_json::Value> =
            serde_json::from_str(&demo.risk_curve(800.0, 4).unwrap()).unwrap();
        assert_eq!(curve.len(), 5);
        let eeu: Vec<f64> = curve
            .iter()
            .map(|p| p["eeu_mwh"].as_f64().unwrap())
            .collect();
        assert!(eeu.windows(2).all(|w| w[1] <= w[0]));
        let v: serde_json::Value =
            serde_json::from_str(&demo.store_efc(200.0, 100.0, 300.0).unwrap()).unwrap();
        let exact = v["exact_mw"].as_f64().unwrap();
        assert!(exact > 0.0 && exact <= 100.0 + 0.01, "{v}");
    }
}
