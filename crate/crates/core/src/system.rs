//! Physical resources and the simulated background shortfall ensemble.
//!
//! Units throughout: power in MW, energy in MWh, time in hours. With the
//! default one-hour period, MW and MWh-per-period coincide numerically.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::rng::{self, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub periods_per_day: usize,
    pub num_days: usize,
    #[serde(default = "default_period_length")]
    pub period_length: f64,
}

fn default_period_length() -> f64 {
    1.0
}

impl TimeGrid {
    pub fn new(periods_per_day: usize, num_days: usize) -> Result<Self> {
        Self::with_period_length(periods_per_day, num_days, 1.0)
    }

    pub fn with_period_length(
        periods_per_day: usize,
        num_days: usize,
        period_length: f64,
    ) -> Result<Self> {
        let grid = TimeGrid {
            periods_per_day,
            num_days,
            period_length,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.periods_per_day == 0 || self.num_days == 0 {
            return Err(Error::config(format!(
                "time grid must have at least one period (got {} x {})",
                self.periods_per_day, self.num_days
            )));
        }
        if !(self.period_length.is_finite() && self.period_length > 0.0) {
            return Err(Error::config(format!(
                "period length must be positive, got {}",
                self.period_length
            )));
        }
        Ok(())
    }

    /// Total number of periods in the season.
    pub fn len(&self) -> usize {
        self.periods_per_day * self.num_days
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Season length in hours.
    pub fn hours(&self) -> f64 {
        self.len() as f64 * self.period_length
    }
}

/// Conventional unit with two-state Markov availability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorUnit {
    pub id: String,
    pub capacity: f64,
    pub mttf: f64,
    pub mttr: f64,
}

impl GeneratorUnit {
    pub fn new(id: impl Into<String>, capacity: f64, mttf: f64, mttr: f64) -> Result<Self> {
        let unit = GeneratorUnit {
            id: id.into(),
            capacity,
            mttf,
            mttr,
        };
        unit.validate()?;
        Ok(unit)
    }

    /// Unit whose MTTR is set so the equilibrium availability equals `availability`.
    pub fn with_availability(
        id: impl Into<String>,
        capacity: f64,
        mttf: f64,
        availability: f64,
    ) -> Result<Self> {
        if !(availability > 0.0 && availability < 1.0) {
            return Err(Error::config(format!(
                "availability must lie in (0, 1), got {availability}"
            )));
        }
        Self::new(
            id,
            capacity,
            mttf,
            mttf * (1.0 - availability) / availability,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(self.capacity) || !ok(self.mttf) || !ok(self.mttr) {
            return Err(Error::config(format!(
                "generator {}: capacity, mttf and mttr must be positive",
                self.id
            )));
        }
        Ok(())
    }

    pub fn availability(&self) -> f64 {
        self.mttf / (self.mttf + self.mttr)
    }

    /// Per-period transition probabilities (up to down, down to up) of the
    /// continuous-time chain observed at period boundaries.
    pub fn transition_probabilities(&self, period_length: f64) -> (f64, f64) {
        let fail = 1.0 / self.mttf;
        let repair = 1.0 / self.mttr;
        let total = fail + repair;
        let settle = -(-total * period_length).exp_m1();
        (fail / total * settle, repair / total * settle)
    }
}

/// Simulates available capacity per period: each value is 0 or `unit.capacity`.
///
/// The initial state is drawn from the equilibrium distribution, so the chain
/// is stationary from the first period.
pub fn simulate_availability<R: Rng + ?Sized>(
    unit: &GeneratorUnit,
    grid: &TimeGrid,
    rng: &mut R,
) -> Result<Vec<f64>> {
    grid.validate()?;
    unit.validate()?;
    let mut out = vec![0.0; grid.len()];
    fill_availability(unit, grid, rng, |t, a| out[t] = a);
    Ok(out)
}

fn fill_availability<R: Rng + ?Sized>(
    unit: &GeneratorUnit,
    grid: &TimeGrid,
    rng: &mut R,
    mut sink: impl FnMut(usize, f64),
) {
    let (p_fail, p_repair) = unit.transition_probabilities(grid.period_length);
    let mut up = rng.gen::<f64>() < unit.availability();
    for t in 0..grid.len() {
        if up {
            sink(t, unit.capacity);
        }
        let u = rng.gen::<f64>();
        up = if up { u >= p_fail } else { u < p_repair };
    }
}

/// Available capacity of `unit` in trace `trace`, drawn from its own substream.
pub(crate) fn unit_availability(
    unit: &GeneratorUnit,
    grid: &TimeGrid,
    seed: u64,
    domain: Domain,
    trace: usize,
) -> Vec<f64> {
    let mut rng = rng::substream(seed, domain, trace, &unit.id);
    let mut out = vec![0.0; grid.len()];
    fill_availability(unit, grid, &mut rng, |t, a| out[t] = a);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandTrace {
    pub label: String,
    pub values: Vec<f64>,
}

impl DemandTrace {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let trace = DemandTrace {
            label: label.into(),
            values,
        };
        if trace.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config(format!(
                "demand trace {} contains non-finite values",
                trace.label
            )));
        }
        Ok(trace)
    }

    pub fn constant(label: impl Into<String>, value: f64, grid: &TimeGrid) -> Self {
        DemandTrace {
            label: label.into(),
            values: vec![value; grid.len()],
        }
    }

    pub fn check_grid(&self, grid: &TimeGrid) -> Result<()> {
        if self.values.len() != grid.len() {
            return Err(Error::config(format!(
                "demand trace {} has {} periods, grid has {}",
                self.label,
                self.values.len(),
                grid.len()
            )));
        }
        Ok(())
    }
}

/// Energy-limited, rate-limited store. Recharges fully at every day boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Store {
    pub id: String,
    pub power: f64,
    pub energy: f64,
}

impl Store {
    pub fn new(id: impl Into<String>, power: f64, energy: f64) -> Result<Self> {
        let store = Store {
            id: id.into(),
            power,
            energy,
        };
        store.validate()?;
        Ok(store)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(self.power) || !ok(self.energy) {
            return Err(Error::config(format!(
                "store {}: power and energy must be positive",
                self.id
            )));
        }
        Ok(())
    }

    /// Hours the store can run at full power from full charge.
    pub fn lifetime(&self) -> f64 {
        self.energy / self.power
    }
}

/// Variable generation with a fixed output profile (MW per period).
///
/// A profile of length `periods_per_day` repeats every day; a profile of the
/// full grid length is used as is. Output is identical across traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSource {
    pub id: String,
    pub profile: Vec<f64>,
}

impl VariableSource {
    pub fn new(id: impl Into<String>, profile: Vec<f64>) -> Result<Self> {
        let source = VariableSource {
            id: id.into(),
            profile,
        };
        if source.profile.is_empty() || source.profile.iter().any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::config(format!(
                "variable source {}: profile must be non-empty and non-negative",
                source.id
            )));
        }
        Ok(source)
    }

    pub fn output(&self, t: usize, grid: &TimeGrid) -> f64 {
        if self.profile.len() == grid.len() {
            self.profile[t]
        } else {
            self.profile[t % self.profile.len()]
        }
    }

    fn check_grid(&self, grid: &TimeGrid) -> Result<()> {
        let n = self.profile.len();
        if n != grid.len() && n != grid.periods_per_day {
            return Err(Error::config(format!(
                "variable source {}: profile length {n} matches neither the day nor the season",
                self.id
            )));
        }
        Ok(())
    }

    pub fn peak(&self) -> f64 {
        self.profile.iter().copied().fold(0.0, f64::max)
    }
}

/// A portfolio of capacity-providing resources.
///
/// `firm` may go negative inside the engine, where it stands for added load
/// (load-carrying-capability searches); user input is checked by
/// [`ResourceSet::validate`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResourceSet {
    #[serde(default)]
    pub firm: f64,
    #[serde(default)]
    pub generators: Vec<GeneratorUnit>,
    #[serde(default)]
    pub stores: Vec<Store>,
    #[serde(default)]
    pub variable: Vec<VariableSource>,
}

impl ResourceSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn firm(mw: f64) -> Self {
        ResourceSet {
            firm: mw,
            ..Self::default()
        }
    }

    pub fn from_stores(stores: Vec<Store>) -> Self {
        ResourceSet {
            stores,
            ..Self::default()
        }
    }

    pub fn store(store: Store) -> Self {
        Self::from_stores(vec![store])
    }

    /// `R + y`: the same set with `y` MW more firm capacity.
    pub fn plus_firm(&self, y: f64) -> Self {
        let mut out = self.clone();
        out.firm += y;
        out
    }

    /// `R ∪ other`.
    pub fn union(&self, other: &ResourceSet) -> Self {
        let mut out = self.clone();
        out.firm += other.firm;
        out.generators.extend(other.generators.iter().cloned());
        out.stores.extend(other.stores.iter().cloned());
        out.variable.extend(other.variable.iter().cloned());
        out
    }

    pub fn without_stores(&self) -> Self {
        ResourceSet {
            stores: Vec::new(),
            ..self.clone()
        }
    }

    pub fn without_store(&self, id: &str) -> Self {
        let mut out = self.clone();
        out.stores.retain(|s| s.id != id);
        out
    }

    /// Nominal capacity: firm + generator ratings + store powers + variable peaks.
    pub fn nominal_capacity(&self) -> f64 {
        self.firm
            + self.generators.iter().map(|g| g.capacity).sum::<f64>()
            + self.stores.iter().map(|s| s.power).sum::<f64>()
            + self.variable.iter().map(VariableSource::peak).sum::<f64>()
    }

    pub fn total_store_power(&self) -> f64 {
        self.stores.iter().map(|s| s.power).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.firm == 0.0
            && self.generators.is_empty()
            && self.stores.is_empty()
            && self.variable.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.firm.is_finite() && self.firm >= 0.0) {
            return Err(Error::config(format!(
                "firm capacity must be non-negative, got {}",
                self.firm
            )));
        }
        let mut seen = HashSet::new();
        let ids = self
            .generators
            .iter()
            .map(|g| &g.id)
            .chain(self.stores.iter().map(|s| &s.id))
            .chain(self.variable.iter().map(|v| &v.id));
        for id in ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::config(format!("duplicate resource id {id}")));
            }
        }
        self.generators
            .iter()
            .try_for_each(GeneratorUnit::validate)?;
        self.stores.iter().try_for_each(Store::validate)?;
        Ok(())
    }

    pub(crate) fn check_grid(&self, grid: &TimeGrid) -> Result<()> {
        self.variable.iter().try_for_each(|v| v.check_grid(grid))
    }
}

/// Simulated residual demand (MW, positive = shortfall before storage), one
/// trace per Monte Carlo sample. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortfallEnsemble {
    grid: TimeGrid,
    seed: u64,
    traces: Vec<Vec<f64>>,
    /// Per trace, day indices sorted by descending daily peak, with the peaks.
    peaks: Vec<Vec<(usize, f64)>>,
}

impl ShortfallEnsemble {
    pub fn from_traces(grid: TimeGrid, traces: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        grid.validate()?;
        if traces.is_empty() {
            return Err(Error::config("background needs at least one trace"));
        }
        for (k, tr) in traces.iter().enumerate() {
            if tr.len() != grid.len() {
                return Err(Error::config(format!(
                    "trace {k} has {} periods, grid has {}",
                    tr.len(),
                    grid.len()
                )));
            }
            if tr.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(format!("trace {k} has non-finite values")));
            }
        }
        let peaks = traces
            .iter()
            .map(|tr| {
                let mut days: Vec<(usize, f64)> = tr
                    .chunks(grid.periods_per_day)
                    .enumerate()
                    .map(|(d, day)| (d, day.iter().copied().fold(f64::NEG_INFINITY, f64::max)))
                    .collect();
                days.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                days
            })
            .collect();
        Ok(ShortfallEnsemble {
            grid,
            seed,
            traces,
            peaks,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn traces(&self) -> &[Vec<f64>] {
        &self.traces
    }

    pub fn num_traces(&self) -> usize {
        self.traces.len()
    }

    /// Days of trace `k` whose peak residual demand exceeds `threshold`,
    /// in descending order of peak.
    pub(crate) fn days_above(&self, k: usize, threshold: f64) -> impl Iterator<Item = usize> + '_ {
        self.peaks[k]
            .iter()
            .take_while(move |(_, peak)| *peak > threshold)
            .map(|(d, _)| *d)
    }

    /// Largest residual demand over all traces and periods.
    pub fn max_depth(&self) -> f64 {
        self.peaks
            .iter()
            .filter_map(|p| p.first().map(|x| x.1))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// The same ensemble with every trace shifted by `delta` MW of demand.
    pub fn shifted(&self, delta: f64) -> Self {
        let traces = self
            .traces
            .iter()
            .map(|tr| tr.iter().map(|v| v + delta).collect())
            .collect();
        Self::from_traces(self.grid, traces, self.seed).expect("shift keeps traces valid")
    }
}

/// Builds the background: trace `k` is net demand minus an independent
/// availability draw of every fleet unit.
pub fn build_background(
    fleet: &[GeneratorUnit],
    demand_net_wind: &DemandTrace,
    grid: &TimeGrid,
    num_traces: usize,
    seed: u64,
) -> Result<ShortfallEnsemble> {
    build_background_multi(
        fleet,
        std::slice::from_ref(demand_net_wind),
        grid,
        num_traces,
        seed,
    )
}

/// As [`build_background`], cycling through several net-demand traces
/// (weather years): trace `k` uses `demands[k % demands.len()]`.
pub fn build_background_multi(
    fleet: &[GeneratorUnit],
    demands: &[DemandTrace],
    grid: &TimeGrid,
    num_traces: usize,
    seed: u64,
) -> Result<ShortfallEnsemble> {
    grid.validate()?;
    if num_traces == 0 {
        return Err(Error::config("num_traces must be at least 1"));
    }
    if demands.is_empty() {
        return Err(Error::config("at least one demand trace is required"));
    }
    for d in demands {
        d.check_grid(grid)?;
        if d.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config(format!(
                "demand trace {} is not finite",
                d.label
            )));
        }
    }
    fleet.iter().try_for_each(GeneratorUnit::validate)?;
    let traces = par::map_indexed(num_traces, |k| {
        let mut trace = demands[k % demands.len()].values.clone();
        for unit in fleet {
            let mut rng = rng::substream(seed, Domain::Background, k, &unit.id);
            fill_availability(unit, grid, &mut rng, |t, a| trace[t] -= a);
        }
        trace
    });
    ShortfallEnsemble::from_traces(*grid, traces, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(24, n.div_ceil(24)).unwrap()
    }

    #[test]
    fn empty_grid_is_rejected() {
        assert!(TimeGrid::new(0, 5).is_err());
        assert!(TimeGrid::new(24, 0).is_err());
        assert!(TimeGrid::with_period_length(24, 1, 0.0).is_err());
        let bad = TimeGrid {
            periods_per_day: 0,
            num_days: 1,
            period_length: 1.0,
        };
        let unit = GeneratorUnit::new("g", 10.0, 50.0, 5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            simulate_availability(&unit, &bad, &mut rng),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn tiny_mttr_is_always_available() {
        let g = grid(10_000);
        let unit = GeneratorUnit::new("g", 100.0, 50.0, 1e-12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let avail = simulate_availability(&unit, &g, &mut rng).unwrap();
        assert!(avail.iter().all(|&a| a == 100.0));
    }

    fn empirical_availability(unit: &GeneratorUnit, seed: u64) -> f64 {
        let g = TimeGrid::new(1000, 100).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let avail = simulate_availability(unit, &g, &mut rng).unwrap();
        avail.iter().filter(|&&a| a > 0.0).count() as f64 / avail.len() as f64
    }

    #[test]
    fn equal_mttf_mttr_gives_half_availability() {
        let unit = GeneratorUnit::new("g", 1.0, 50.0, 50.0).unwrap();
        let a = empirical_availability(&unit, 11);
        assert!((a - 0.5).abs() < 0.02, "{a}");
    }

    #[test]
    fn ninety_percent_availability() {
        let unit = GeneratorUnit::new("g", 1.0, 50.0, 50.0 / 9.0).unwrap();
        assert!((unit.availability() - 0.9).abs() < 1e-12);
        let a = empirical_availability(&unit, 12);
        assert!((a - 0.9).abs() < 0.02, "{a}");
    }

    #[test]
    fn transition_probabilities_approach_rate_times_length() {
        let unit = GeneratorUnit::new("g", 1.0, 5000.0, 2000.0).unwrap();
        let (pf, pr) = unit.transition_probabilities(1.0);
        assert!((pf - 1.0 / 5000.0).abs() / (1.0 / 5000.0) < 1e-3);
        assert!((pr - 1.0 / 2000.0).abs() / (1.0 / 2000.0) < 1e-3);
    }

    #[test]
    fn reliable_fleet_leaves_no_shortfall() {
        let g = grid(240);
        let fleet = vec![
            GeneratorUnit::new("a", 60.0, 50.0, 1e-12).unwrap(),
            GeneratorUnit::new("b", 60.0, 50.0, 1e-12).unwrap(),
        ];
        let demand =
            DemandTrace::new("d", (0..g.len()).map(|t| 80.0 + (t % 24) as f64).collect()).unwrap();
        let bg = build_background(&fleet, &demand, &g, 20, 5).unwrap();
        assert!(bg.traces().iter().flatten().all(|&v| v <= 0.0));
    }

    #[test]
    fn single_unit_shortfall_fraction() {
        let g = TimeGrid::new(24, 1000).unwrap();
        let fleet = vec![GeneratorUnit::new("u", 100.0, 50.0, 50.0).unwrap()];
        let demand = DemandTrace::constant("d", 50.0, &g);
        let bg = build_background(&fleet, &demand, &g, 4, 9).unwrap();
        let short = bg.traces().iter().flatten().filter(|&&v| v > 0.0).count();
        let frac = short as f64 / (4 * g.len()) as f64;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
    }

    #[test]
    fn mismatched_demand_is_rejected() {
        let g = grid(48);
        let demand = DemandTrace::new("d", vec![1.0; 47]).unwrap();
        assert!(build_background(&[], &demand, &g, 1, 0).is_err());
        let demand = DemandTrace::new("d", vec![1.0; 48]).unwrap();
        assert!(build_background(&[], &demand, &g, 0, 0).is_err());
        // empty fleet: residual is the demand itself
        let bg = build_background(&[], &demand, &g, 2, 0).unwrap();
        assert!(bg.traces().iter().flatten().all(|&v| v == 1.0));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let set = ResourceSet::from_stores(vec![
            Store::new("s", 1.0, 1.0).unwrap(),
            Store::new("s", 2.0, 1.0).unwrap(),
        ]);
        assert!(set.validate().is_err());
        assert!(ResourceSet::firm(-1.0).validate().is_err());
    }

    #[test]
    fn days_above_is_sorted_and_filtered() {
        let g = TimeGrid::new(2, 3).unwrap();
        let bg = ShortfallEnsemble::from_traces(g, vec![vec![1.0, 5.0, -1.0, 0.0, 3.0, 2.0]], 0)
            .unwrap();
        let days: Vec<_> = bg.days_above(0, 0.5).collect();
        assert_eq!(days, vec![0, 2]);
        assert_eq!(bg.max_depth(), 5.0);
    }
}
