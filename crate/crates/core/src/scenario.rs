//! Scenario files and the bundled fixture generators.
//!
//! A scenario is a JSON document naming a fleet CSV, a demand CSV, optional
//! bid and resource CSVs, and either a reliability standard or economic
//! parameters. Paths are resolved relative to the scenario file.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::auction::{self, Bid, BidResource, ClearOptions, Standard};
use crate::economics::{DemandCurve, EconParams};
use crate::efc;
use crate::error::{Error, Result};
use crate::io;
use crate::risk::Metric;
use crate::rng::{substream, Domain};
use crate::system::{
    build_background, DemandTrace, GeneratorUnit, ResourceSet, ShortfallEnsemble, TimeGrid,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub grid: TimeGrid,
    pub fleet: PathBuf,
    pub demand: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bids: Option<PathBuf>,
    /// Resources (bid-file format, prices ignored) already in the evaluated set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resources: Option<PathBuf>,
    /// Firm capacity already in the evaluated set, MW.
    #[serde(default)]
    pub firm_mw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standard: Option<Standard>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub econ: Option<EconParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand_curve: Option<PathBuf>,
    pub num_traces: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        let mut s: Scenario = serde_json::from_str(&text)?;
        s.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.num_traces == 0 {
            return Err(Error::config("num_traces must be at least 1"));
        }
        match (&self.standard, &self.econ) {
            (Some(st), None) => {
                Standard::new(st.metric, st.k)?;
            }
            (None, Some(econ)) => econ.validate()?,
            _ => {
                return Err(Error::config(
                    "scenario must set exactly one of `standard` and `econ`",
                ))
            }
        }
        if !(self.firm_mw.is_finite() && self.firm_mw >= 0.0) {
            return Err(Error::config("firm_mw must be non-negative"));
        }
        for p in [
            Some(&self.fleet),
            Some(&self.demand),
            self.bids.as_ref(),
            self.resources.as_ref(),
            self.demand_curve.as_ref(),
        ]
        .into_iter()
        .flatten()
        {
            let full = self.resolve(p);
            if !full.is_file() {
                return Err(Error::config(format!("missing file {}", full.display())));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn fleet_units(&self) -> Result<Vec<GeneratorUnit>> {
        io::read_fleet_csv(io::open(&self.resolve(&self.fleet))?)
    }

    pub fn demand_trace(&self) -> Result<DemandTrace> {
        io::read_demand_csv(io::open(&self.resolve(&self.demand))?, "demand", &self.grid)
    }

    /// Background ensemble; `seed` overrides the scenario seed.
    pub fn background(&self, seed: Option<u64>) -> Result<ShortfallEnsemble> {
        build_background(
            &self.fleet_units()?,
            &self.demand_trace()?,
            &self.grid,
            self.num_traces,
            seed.unwrap_or(self.seed),
        )
    }

    pub fn bid_list(&self) -> Result<Vec<Bid>> {
        let path = self
            .bids
            .as_ref()
            .ok_or_else(|| Error::config("scenario has no bids file"))?;
        io::read_bids_csv(io::open(&self.resolve(path))?)
    }

    /// `firm_mw` plus everything in the resources file.
    pub fn base_resources(&self) -> Result<ResourceSet> {
        let mut set = ResourceSet::firm(self.firm_mw);
        if let Some(path) = &self.resources {
            for b in io::read_bids_csv(io::open(&self.resolve(path))?)? {
                match b.resource {
                    BidResource::Firm(mw) => set.firm += mw,
                    BidResource::Store(s) => set.stores.push(s),
                }
            }
        }
        set.validate()?;
        Ok(set)
    }

    pub fn curve(&self) -> Result<Option<DemandCurve>> {
        if let Some(path) = &self.demand_curve {
            return io::read_demand_curve_csv(io::open(&self.resolve(path))?).map(Some);
        }
        Ok(self.econ.as_ref().and_then(|e| e.demand_curve.clone()))
    }
}

/// In-memory contents of a bundled fixture.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub scenario: Scenario,
    pub fleet: Vec<GeneratorUnit>,
    pub demand: DemandTrace,
    pub bids: Vec<Bid>,
}

impl Fixture {
    /// Writes `<name>.json`, `<name>-fleet.csv`, `<name>-demand.csv` and,
    /// when there are bids, `<name>-bids.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let name = &self.scenario.name;
        let write = |file: &str, f: &dyn Fn(std::fs::File) -> Result<()>| -> Result<()> {
            f(std::fs::File::create(dir.join(file))?)
        };
        write(&self.scenario.fleet.to_string_lossy(), &|w| {
            io::write_fleet_csv(w, &self.fleet)
        })?;
        write(&self.scenario.demand.to_string_lossy(), &|w| {
            io::write_demand_csv(w, &self.demand, &self.scenario.grid)
        })?;
        if let Some(b) = &self.scenario.bids {
            write(&b.to_string_lossy(), &|w| io::write_bids_csv(w, &self.bids))?;
        }
        let path = dir.join(format!("{name}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&self.scenario)? + "\n")?;
        Ok(path)
    }

    /// Background built from the fixture's own data.
    pub fn background(&self) -> Result<ShortfallEnsemble> {
        build_background(
            &self.fleet,
            &self.demand,
            &self.scenario.grid,
            self.scenario.num_traces,
            self.scenario.seed,
        )
    }
}

fn scenario(name: &str, grid: TimeGrid, num_traces: usize, seed: u64, with_bids: bool) -> Scenario {
    Scenario {
        name: name.into(),
        grid,
        fleet: format!("{name}-fleet.csv").into(),
        demand: format!("{name}-demand.csv").into(),
        bids: with_bids.then(|| format!("{name}-bids.csv").into()),
        resources: None,
        firm_mw: 0.0,
        standard: None,
        econ: None,
        demand_curve: None,
        num_traces,
        seed,
        output: None,
        base_dir: PathBuf::new(),
    }
}

/// Round-trips values through the 6-digit CSV format so in-memory fixtures
/// match what is read back from disk.
fn as_written(values: Vec<f64>) -> Vec<f64> {
    values.into_iter().map(io::round6).collect()
}

/// Three hourly periods, one day, one practically never-failing 10 MW unit
/// and demand `[40, 20, 10]`: residual depths `[30, 10, 0]`, LOLE 2 h and
/// EEU 40 MWh. The EEU standard of 5 MWh needs 25 MW of firm capacity.
pub fn hand() -> Result<Fixture> {
    let grid = TimeGrid::new(3, 1)?;
    let mut s = scenario("hand", grid, 4, 7, true);
    s.standard = Some(Standard::new(Metric::Eeu, 5.0)?);
    Ok(Fixture {
        scenario: s,
        fleet: vec![GeneratorUnit::new("u1", 10.0, 1e9, 1e-6)?],
        demand: DemandTrace::new("demand", vec![40.0, 20.0, 10.0])?,
        bids: vec![
            Bid::firm("f30", 30.0, 60.0)?,
            Bid::store("s20", 20.0, 20.0, 25.0)?,
            Bid::firm("f10", 10.0, 15.0)?,
        ],
    })
}

/// The hand fixture with demand below the fleet everywhere.
pub fn zero_shortfall() -> Result<Fixture> {
    let mut f = hand()?;
    f.scenario = scenario("zero", f.scenario.grid, 4, 7, false);
    f.scenario.standard = Some(Standard::new(Metric::Eeu, 0.0)?);
    f.demand = DemandTrace::new("demand", vec![5.0, 8.0, 2.0])?;
    f.bids.clear();
    Ok(f)
}

pub const STORAGE_HEAVY_SEED: u64 = 20_160_101;
/// EEU standard, MWh per season.
pub const STORAGE_HEAVY_EEU: f64 = 2746.0;
/// Firm capacity that alone meets the standard, MW.
pub const STORAGE_HEAVY_FIRM: f64 = 1973.0;
/// Bid price per MW of EFC before noise.
pub const PRICE_PER_MW: f64 = 22_000.0;

/// 230 two-state units, 61.36 GW in total, mean time to failure 50 h, with
/// outage probabilities between 4% and 14%.
fn gb_fleet(seed: u64) -> Result<Vec<GeneratorUnit>> {
    let mut rng = substream(seed, Domain::Fixture, 0, "fleet");
    let raw: Vec<f64> = (0..230)
        .map(|_| {
            let u: f64 = rng.gen_range(0.0..1.0);
            match u {
                u if u < 0.04 => rng.gen_range(900.0..1300.0),
                u if u < 0.45 => rng.gen_range(350.0..800.0),
                _ => rng.gen_range(20.0..300.0),
            }
        })
        .collect();
    let scale = 61_360.0 / raw.iter().sum::<f64>();
    raw.iter()
        .enumerate()
        .map(|(i, c)| {
            let q: f64 = rng.gen_range(0.04..0.14);
            GeneratorUnit::new(
                format!("g{:03}", i + 1),
                io::round6(c * scale),
                50.0,
                io::round6(50.0 * q / (1.0 - q)),
            )
        })
        .collect()
}

/// Hourly winter demand net of 14 GW of wind: seasonal and weekly level,
/// autocorrelated daily weather, an evening-peaking daily shape, and a
/// persistent wind capacity factor.
fn gb_net_demand(seed: u64, grid: &TimeGrid) -> Vec<f64> {
    const SHAPE: [f64; 24] = [
        0.70, 0.67, 0.65, 0.64, 0.64, 0.67, 0.75, 0.85, 0.90, 0.91, 0.91, 0.90, 0.89, 0.88, 0.88,
        0.90, 0.96, 1.00, 0.99, 0.95, 0.90, 0.85, 0.80, 0.74,
    ];
    let mut rng = substream(seed, Domain::Fixture, 0, "demand");
    let mut weather = 0.0_f64;
    let mut wind_z = 0.0_f64;
    let mut out = Vec::with_capacity(grid.len());
    for day in 0..grid.num_days {
        let x = day as f64 / grid.num_days as f64;
        let seasonal = 47_000.0 + 5_000.0 * (std::f64::consts::PI * x).sin();
        let weekend = if day % 7 >= 5 { -3_500.0 } else { 0.0 };
        weather = 0.8 * weather + 900.0 * rng.gen_range(-1.7..1.7_f64);
        let level = seasonal + weekend + weather;
        for h in 0..grid.periods_per_day {
            wind_z = 0.97 * wind_z + 0.25 * rng.gen_range(-1.7..1.7_f64);
            let cf = 0.35 / (1.0 + (-1.6 * wind_z).exp()) * 2.0;
            let shape = SHAPE[h * 24 / grid.periods_per_day];
            out.push(level * shape - 14_000.0 * cf.min(0.95));
        }
    }
    out
}

/// Stores of the storage-heavy auction: (power MW, energy MWh, count).
pub const STORE_MIX: [(f64, f64, usize); 8] = [
    (50.0, 12.5, 10),
    (50.0, 25.0, 15),
    (50.0, 50.0, 15),
    (50.0, 100.0, 20),
    (100.0, 25.0, 10),
    (100.0, 50.0, 15),
    (100.0, 100.0, 15),
    (100.0, 200.0, 20),
];

/// Storage-heavy scenario shaped like a national winter system: the fleet
/// and demand above, 100 traces, an EEU standard of 2746 MWh met by 1973 MW
/// of firm capacity alone, and 120 store bids plus 30 firm bids (three each
/// of 10..=100 MW). Bid prices are proportional to EFC against an
/// approximate final accepted set, with +-15% noise.
pub fn storage_heavy() -> Result<Fixture> {
    let seed = STORAGE_HEAVY_SEED;
    let grid = TimeGrid::new(24, 120)?;
    let fleet = gb_fleet(seed)?;
    let raw = DemandTrace::new("demand", as_written(gb_net_demand(seed, &grid)))?;
    let num_traces = 100;

    // A constant shift in demand is a firm offset; place the calibration point.
    let bg = build_background(&fleet, &raw, &grid, num_traces, seed)?;
    let floor = -30_000.0;
    let y0 = floor
        + efc::calibrate_firm_on(
            &ResourceSet::firm(floor),
            &bg,
            Metric::Eeu,
            STORAGE_HEAVY_EEU,
            1e-3,
        )?;
    let demand = DemandTrace::new(
        "demand",
        as_written(
            raw.values
                .iter()
                .map(|v| v - (y0 - STORAGE_HEAVY_FIRM))
                .collect(),
        ),
    )?;
    let bg = build_background(&fleet, &demand, &grid, num_traces, seed)?;

    let mut rng = substream(seed, Domain::Fixture, 0, "bids");
    let mut shapes = Vec::new();
    for &(p, e, n) in &STORE_MIX {
        for _ in 0..n {
            shapes.push((format!("s{:03}", shapes.len() + 1), Some((p, e))));
        }
    }
    for i in 0..30 {
        shapes.push((format!("f{:02}", i + 1), None));
    }
    let mut firm_sizes = (1..=10).flat_map(|m| [10.0 * m as f64; 3]);
    let noise: Vec<f64> = shapes.iter().map(|_| rng.gen_range(0.85..1.15)).collect();

    let make = |efcs: &dyn Fn(&str) -> f64,
                firm_sizes: &mut dyn Iterator<Item = f64>|
     -> Result<Vec<Bid>> {
        shapes
            .iter()
            .zip(&noise)
            .map(|((id, shape), n)| match shape {
                Some((p, e)) => {
                    Bid::store(id.clone(), *p, *e, io::round6(PRICE_PER_MW * efcs(id) * n))
                }
                None => {
                    let mw = firm_sizes.next().expect("30 firm sizes");
                    Bid::firm(id.clone(), mw, io::round6(PRICE_PER_MW * mw * n))
                }
            })
            .collect()
    };

    // First pass: prices from EFCs against firm capacity alone.
    let standard = Standard::new(Metric::Eeu, STORAGE_HEAVY_EEU)?;
    let placeholder = make(&|_| 1.0, &mut firm_sizes.clone())?;
    let naive = auction::efcs_against(
        &placeholder,
        &ResourceSet::firm(STORAGE_HEAVY_FIRM),
        &Default::default(),
        &bg,
    )?;
    let first = make(&|id| naive[id], &mut firm_sizes.clone())?;
    let approx = auction::clear(&first, &bg, &standard, &ClearOptions::default())?;
    let refined = auction::efcs_against(
        &first,
        &auction::set_of(&first, &approx.accepted_set()),
        &approx.accepted_set(),
        &bg,
    )?;
    let bids = make(&|id| refined[id].max(0.0), &mut firm_sizes)?;

    let mut s = scenario("storage-heavy", grid, num_traces, seed, true);
    s.standard = Some(standard);
    Ok(Fixture {
        scenario: s,
        fleet,
        demand,
        bids,
    })
}

/// Storage-free variant of the storage-heavy system with its own scenario
/// for the economic criterion: VOLL 17,000 per MWh and CONE 49,000 per MW.
pub fn storage_heavy_econ(base: &Fixture) -> Fixture {
    let mut f = base.clone();
    let mut s = scenario(
        "storage-heavy-econ",
        base.scenario.grid,
        base.scenario.num_traces,
        base.scenario.seed,
        false,
    );
    s.fleet = base.scenario.fleet.clone();
    s.demand = base.scenario.demand.clone();
    s.econ = Some(EconParams {
        voll: 17_000.0,
        cone: Some(49_000.0),
        demand_curve: None,
    });
    f.scenario = s;
    f.bids.clear();
    f
}

/// Smaller system for derivative checks with many traces: 40 units of 100 MW
/// (outage probability 8%) over 20 days of hourly demand peaking near the
/// fleet's expected output.
pub fn derivative_system(num_traces: usize, seed: u64) -> Result<ShortfallEnsemble> {
    let grid = TimeGrid::new(24, 20)?;
    let fleet = (0..40)
        .map(|i| GeneratorUnit::with_availability(format!("d{i:02}"), 100.0, 30.0, 0.92))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = substream(seed, Domain::Fixture, 0, "derivative-demand");
    let values = (0..grid.len())
        .map(|t| {
            let h = (t % 24) as f64;
            let daily = 3_300.0 + 350.0 * (-(h - 18.0).powi(2) / 8.0).exp()
                - 500.0 * (-(h - 4.0).powi(2) / 12.0).exp();
            daily + rng.gen_range(-120.0..120.0)
        })
        .collect();
    build_background(
        &fleet,
        &DemandTrace::new("demand", values)?,
        &grid,
        num_traces,
        seed,
    )
}
