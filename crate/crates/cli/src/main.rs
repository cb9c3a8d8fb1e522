use std::collections::BTreeSet;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adequacy::auction::{self, AuctionOutcome, Bid, ClearOptions, Standard};
use adequacy::diagnostics;
use adequacy::economics::{self, DemandCurve};
use adequacy::efc::{self, EfcRow};
use adequacy::io::{fmt6, to_json_6};
use adequacy::risk::{self, Metric};
use adequacy::scenario::{self, Scenario};
use adequacy::system::ResourceSet;
use adequacy::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "adequacy",
    version,
    about = "Capacity adequacy, equivalent firm capacity and capacity auctions"
)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the scenario's `output`, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Naive,
    Fixedpoint,
    Clock,
    Demandcurve,
}

#[derive(Subcommand)]
enum Command {
    /// LOLE and EEU of the scenario's resources.
    Risk {
        #[command(flatten)]
        common: Common,
    },
    /// Exact and marginal EFC of every bid against the scenario's resources.
    Efc {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "eeu")]
        metric: Metric,
        #[arg(long, default_value_t = 0.01)]
        tol_mw: f64,
    },
    /// Clear the capacity auction.
    Clear {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "fixedpoint")]
        mode: Mode,
        /// Shorthand for `--mode naive`.
        #[arg(long)]
        naive: bool,
        #[arg(long, default_value_t = 0.01)]
        tol_mw: f64,
        #[arg(long, default_value_t = 20)]
        max_iter: usize,
        /// Steps in the clock price grid.
        #[arg(long, default_value_t = 2000)]
        price_steps: usize,
        /// Run the overshoot recheck for accepted bids above this share of accepted EFC.
        #[arg(long)]
        lumpy_share: Option<f64>,
    },
    /// Firm capacity that alone meets the standard.
    Calibrate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        metric: Option<Metric>,
        /// Target level (default: the scenario standard's k).
        #[arg(long)]
        target: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        tol_mw: f64,
    },
    /// Continuity scan along the merit order and local-additivity grid.
    Diagnose {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.01)]
        tol_mw: f64,
        /// Probe store energy, MWh.
        #[arg(long, default_value_t = 100.0)]
        energy: f64,
        #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50")]
        powers: Vec<f64>,
        /// Extra independently seeded backgrounds for the noise floor (0: no floor).
        #[arg(long, default_value_t = 0)]
        noise_reps: usize,
    },
    /// Economic optimum of firm capacity and the LOLE/EEU correspondence.
    Economics {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.01)]
        tol_mw: f64,
    },
    /// Write the bundled fixtures.
    Fixture {
        #[arg(long)]
        dir: PathBuf,
    },
}

struct Run {
    scenario: Scenario,
    seed: u64,
    out: PathBuf,
}

impl Run {
    fn new(common: &Common) -> Result<Self> {
        let scenario = Scenario::load(&common.scenario)?;
        let seed = common.seed.unwrap_or(scenario.seed);
        let out = common
            .out
            .clone()
            .or_else(|| scenario.output.as_ref().map(|p| scenario.resolve(p)))
            .unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&out)?;
        Ok(Run {
            scenario,
            seed,
            out,
        })
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        std::fs::write(self.out.join(name), to_json_6(value)?)?;
        Ok(())
    }

    fn csv(&self, name: &str) -> Result<File> {
        Ok(File::create(self.out.join(name))?)
    }

    fn standard(&self) -> Result<Standard> {
        self.scenario
            .standard
            .ok_or_else(|| Error::config("this command needs a scenario with `standard`"))
    }
}

fn standard_line(standard: &Standard, achieved: f64) {
    println!(
        "standard {} <= {}: achieved {} ({})",
        standard.metric,
        fmt6(standard.k),
        fmt6(achieved),
        if achieved <= standard.k {
            "met"
        } else {
            "not met"
        }
    );
}

#[derive(Serialize)]
struct RiskSummary<'a> {
    scenario: &'a str,
    seed: u64,
    num_traces: usize,
    lole_h: f64,
    eeu_mwh: f64,
    standard: Option<Standard>,
}

fn cmd_risk(common: &Common) -> Result<()> {
    let run = Run::new(common)?;
    let bg = run.scenario.background(Some(run.seed))?;
    let report = risk::evaluate(&run.scenario.base_resources()?, &bg)?;
    run.json(
        "risk.json",
        &RiskSummary {
            scenario: &run.scenario.name,
            seed: run.seed,
            num_traces: bg.num_traces(),
            lole_h: report.lole,
            eeu_mwh: report.eeu,
            standard: run.scenario.standard,
        },
    )?;
    risk::write_risk_csv(run.csv("risk.csv")?, &report)?;
    println!("lole {} h, eeu {} MWh", fmt6(report.lole), fmt6(report.eeu));
    if let Some(st) = run.scenario.standard {
        standard_line(&st, report.metric(st.metric));
    }
    Ok(())
}

fn cmd_efc(common: &Common, metric: Metric, tol: f64) -> Result<()> {
    let run = Run::new(common)?;
    let bg = run.scenario.background(Some(run.seed))?;
    let base = run.scenario.base_resources()?;
    let bids = run.scenario.bid_list()?;
    let mut rows = Vec::new();
    for b in &bids {
        let exact = efc::efc_exact(&b.as_set(), &base, &bg, metric, tol)?;
        let marginal = efc::efc_marginal(&b.as_set(), &base, &bg)?;
        for e in [exact, marginal] {
            rows.push(EfcRow {
                id: b.id.clone(),
                method: e.method,
                value_mw: e.value,
                tolerance: e.tolerance,
                derivative: e.derivative,
            });
        }
    }
    run.json("efc.json", &rows)?;
    efc::write_efc_csv(run.csv("efc.csv")?, &rows)?;
    println!("{} EFC rows written to {}", rows.len(), run.out.display());
    Ok(())
}

#[derive(Serialize)]
struct ClearSummary<'a> {
    scenario: &'a str,
    seed: u64,
    #[serde(flatten)]
    outcome: &'a AuctionOutcome,
    accepted_stores: usize,
    implied_cone: Option<f64>,
}

fn naive_efcs(
    bids: &[Bid],
    bg: &adequacy::system::ShortfallEnsemble,
    standard: &Standard,
    tol: f64,
) -> Result<std::collections::BTreeMap<String, f64>> {
    let y0 = efc::calibrate_firm(bg, standard.metric, standard.k, tol)?;
    auction::efcs_against(bids, &ResourceSet::firm(y0), &BTreeSet::new(), bg)
}

fn top_price(bids: &[Bid], efcs: &std::collections::BTreeMap<String, f64>) -> f64 {
    bids.iter()
        .filter(|b| efcs[&b.id] > 0.0)
        .map(|b| b.min_total_price / efcs[&b.id])
        .fold(0.0, f64::max)
        * 1.05
}

#[allow(clippy::too_many_arguments)]
fn cmd_clear(
    common: &Common,
    mode: Mode,
    tol: f64,
    max_iter: usize,
    price_steps: usize,
    lumpy_share: Option<f64>,
) -> Result<()> {
    let run = Run::new(common)?;
    let bg = run.scenario.background(Some(run.seed))?;
    let bids = run.scenario.bid_list()?;
    let opts = ClearOptions {
        max_iter,
        efc_tol: tol,
    };
    let metric = run
        .scenario
        .standard
        .map(|s| s.metric)
        .unwrap_or(Metric::Eeu);
    let mut outcome = match mode {
        Mode::Naive => auction::clear_naive_firm_efc(&bids, &bg, &run.standard()?, &opts)?,
        Mode::Fixedpoint => auction::clear(&bids, &bg, &run.standard()?, &opts)?,
        Mode::Clock => {
            let standard = run.standard()?;
            let efcs = naive_efcs(&bids, &bg, &standard, tol)?;
            let grid = auction::price_grid(top_price(&bids, &efcs), price_steps);
            auction::descending_clock(&bids, &bg, &standard, &efcs, &grid, &opts)?
        }
        Mode::Demandcurve => {
            let curve: DemandCurve = run
                .scenario
                .curve()?
                .ok_or_else(|| Error::config("demand-curve clearing needs a demand curve"))?;
            let reference = Standard::new(
                metric,
                risk::rho(&ResourceSet::firm(curve.capacity_at(0.0)), &bg, metric)?,
            )?;
            let efcs = naive_efcs(&bids, &bg, &reference, tol)?;
            let grid = auction::price_grid(top_price(&bids, &efcs), price_steps);
            economics::clear_with_demand_curve(&bids, &bg, &curve, metric, &efcs, &grid, &opts)?
        }
    };
    if let Some(share) = lumpy_share {
        outcome = auction::lumpy_recheck(&outcome, &bids, &bg, &outcome.standard.clone(), share)?;
    }
    let accepted_stores = bids
        .iter()
        .filter(|b| b.is_store() && outcome.accepted.contains(&b.id))
        .count();
    run.json(
        "clear.json",
        &ClearSummary {
            scenario: &run.scenario.name,
            seed: run.seed,
            outcome: &outcome,
            accepted_stores,
            implied_cone: matches!(mode, Mode::Demandcurve).then_some(outcome.clearing_price),
        },
    )?;
    auction::write_outcome_csv(run.csv("clear.csv")?, &outcome, &bids)?;
    println!(
        "accepted {} bids ({} firm MW, {} stores), price {}, total cost {}, iterations {}",
        outcome.accepted.len(),
        fmt6(outcome.accepted_firm_mw),
        accepted_stores,
        fmt6(outcome.clearing_price),
        fmt6(outcome.total_cost),
        outcome.iterations
    );
    standard_line(&outcome.standard, outcome.risk_achieved);
    Ok(())
}

#[derive(Serialize)]
struct CalibrateSummary {
    metric: Metric,
    target: f64,
    firm_mw: f64,
    tol_mw: f64,
}

fn cmd_calibrate(
    common: &Common,
    metric: Option<Metric>,
    target: Option<f64>,
    tol: f64,
) -> Result<()> {
    let run = Run::new(common)?;
    let bg = run.scenario.background(Some(run.seed))?;
    let standard = run.scenario.standard;
    let metric = metric.or(standard.map(|s| s.metric)).unwrap_or(Metric::Eeu);
    let target = target
        .or(standard.map(|s| s.k))
        .ok_or_else(|| Error::config("no target given and the scenario has no standard"))?;
    let y = efc::calibrate_firm_on(&run.scenario.base_resources()?, &bg, metric, target, tol)?;
    run.json(
        "calibrate.json",
        &CalibrateSummary {
            metric,
            target,
            firm_mw: y,
            tol_mw: tol,
        },
    )?;
    println!(
        "firm capacity for {metric} <= {}: {} MW",
        fmt6(target),
        fmt6(y)
    );
    Ok(())
}

#[derive(Serialize)]
struct DiagnoseSummary {
    target_eeu: f64,
    scan_points: usize,
    gap_at_target_mw: f64,
    max_gap_mw: f64,
    smoothness_max_deviation_pct: f64,
    noise_floor_pct: f64,
    deviation_pct: Vec<Vec<f64>>,
    powers_mw: Vec<f64>,
    energy_mwh: f64,
}

fn cmd_diagnose(
    common: &Common,
    tol: f64,
    energy: f64,
    powers: &[f64],
    noise_reps: usize,
) -> Result<()> {
    let run = Run::new(common)?;
    let bg = run.scenario.background(Some(run.seed))?;
    let bids = run.scenario.bid_list()?;
    let standard = run.standard()?;
    let outcome = auction::clear(
        &bids,
        &bg,
        &standard,
        &ClearOptions {
            max_iter: 20,
            efc_tol: tol,
        },
    )?;
    let mut order: Vec<(f64, &str)> = bids
        .iter()
        .map(|b| (outcome.unit_price(b), b.id.as_str()))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
    let order: Vec<String> = order.into_iter().map(|(_, id)| id.to_string()).collect();
    let target = match standard.metric {
        Metric::Eeu => standard.k,
        Metric::Lole => outcome.risk_achieved,
    };
    let scan = diagnostics::continuity_scan(&bids, &order, &bg, target, tol)?;

    let base = auction::set_of(&bids, &outcome.accepted_set());
    let floor = if noise_reps >= 2 {
        let replicas = (1..=noise_reps as u64)
            .map(|r| run.scenario.background(Some(run.seed.wrapping_add(r))))
            .collect::<Result<Vec<_>>>()?;
        let p = powers.iter().copied().fold(0.0, f64::max);
        diagnostics::noise_floor(&base, &replicas, Metric::Eeu, energy, p, p)?
    } else {
        0.0
    };
    let grid = diagnostics::smoothness_grid(&base, &bg, Metric::Eeu, energy, powers, floor)?;
    diagnostics::write_scan_csv(run.csv("scan.csv")?, &scan)?;
    diagnostics::write_grid_csv(run.csv("grid.csv")?, &grid)?;
    run.json(
        "diagnose.json",
        &DiagnoseSummary {
            target_eeu: target,
            scan_points: scan.points.len(),
            gap_at_target_mw: scan.gap_at_target,
            max_gap_mw: scan.max_gap,
            smoothness_max_deviation_pct: grid.max_deviation(),
            noise_floor_pct: floor,
            deviation_pct: grid.deviation.clone(),
            powers_mw: grid.powers.clone(),
            energy_mwh: energy,
        },
    )?;
    println!(
        "scan: {} points, EFC gap at target {} MW; smoothness: max deviation {}%",
        scan.points.len(),
        fmt6(scan.gap_at_target),
        fmt6(grid.max_deviation())
    );
    Ok(())
}

#[derive(Serialize)]
struct EconomicsSummary {
    voll: f64,
    cone: f64,
    pivotable: bool,
    optimum: Option<economics::FirmOptimum>,
    /// Total cost over firm additions when the base holds stores.
    cost_scan: Vec<(f64, f64)>,
    one_one: Option<economics::OneOneReport>,
}

fn cmd_economics(common: &Common, tol: f64) -> Result<()> {
    let run = Run::new(common)?;
    let econ = run
        .scenario
        .econ
        .clone()
        .ok_or_else(|| Error::config("economics needs a scenario with `econ`"))?;
    let cone = econ.cone.ok_or_else(|| {
        Error::config("economics needs `econ.cone` for a linear procurement cost")
    })?;
    let bg = run.scenario.background(Some(run.seed))?;
    let base = run.scenario.base_resources()?;
    let upper = bg.max_depth() - base.firm + 1.0;
    let summary = if base.stores.is_empty() {
        let opt = economics::optimal_firm(&base, &bg, &econ, |y| cone * y, (0.0, upper), 1.0, tol)?;
        let sizes: Vec<f64> = (0..=10).map(|i| opt.firm_mw * i as f64 / 5.0).collect();
        let family = economics::firm_family(&base, &sizes);
        let report = economics::check_one_one(&bg, &family, 0.05, tol)?;
        println!(
            "optimum {} MW firm: lole {} h vs cone/voll {} h",
            fmt6(opt.firm_mw),
            fmt6(opt.lole),
            fmt6(opt.implied_lole)
        );
        EconomicsSummary {
            voll: econ.voll,
            cone,
            pivotable: true,
            optimum: Some(opt),
            cost_scan: Vec::new(),
            one_one: Some(report),
        }
    } else {
        let grid: Vec<f64> = (0..=50).map(|i| upper * i as f64 / 50.0).collect();
        let scan = economics::total_cost_scan(&base, &bg, &econ, |y| cone * y, &grid)?;
        let best = scan
            .iter()
            .copied()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0.0, 0.0));
        println!(
            "base holds stores: not pivotable to an LOLE standard; grid minimum {} at {} MW",
            fmt6(best.1),
            fmt6(best.0)
        );
        EconomicsSummary {
            voll: econ.voll,
            cone,
            pivotable: false,
            optimum: None,
            cost_scan: scan,
            one_one: None,
        }
    };
    run.json("economics.json", &summary)?;
    Ok(())
}

fn cmd_fixture(dir: &Path) -> Result<()> {
    let heavy = scenario::storage_heavy()?;
    for f in [
        scenario::hand()?,
        scenario::zero_shortfall()?,
        scenario::storage_heavy_econ(&heavy),
        heavy,
    ] {
        let path = f.write(dir)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Risk { common } => cmd_risk(common),
        Command::Efc {
            common,
            metric,
            tol_mw,
        } => cmd_efc(common, *metric, *tol_mw),
        Command::Clear {
            common,
            mode,
            naive,
            tol_mw,
            max_iter,
            price_steps,
            lumpy_share,
        } => {
            let mode = if *naive { Mode::Naive } else { *mode };
            cmd_clear(common, mode, *tol_mw, *max_iter, *price_steps, *lumpy_share)
        }
        Command::Calibrate {
            common,
            metric,
            target,
            tol_mw,
        } => cmd_calibrate(common, *metric, *target, *tol_mw),
        Command::Diagnose {
            common,
            tol_mw,
            energy,
            powers,
            noise_reps,
        } => cmd_diagnose(common, *tol_mw, *energy, powers, *noise_reps),
        Command::Economics { common, tol_mw } => cmd_economics(common, *tol_mw),
        Command::Fixture { dir } => cmd_fixture(dir),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::to_string(&e.report())
                .unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", e.code()));
            println!("{report}");
            ExitCode::from(2)
        }
    }
}
