//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails outside the documented known-red list.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use adequacy::auction::{self, Bid, ClearOptions, Standard};
use adequacy::diagnostics;
use adequacy::dispatch::{dispatch_min_eeu, dispatch_min_lole, dispatch_min_peak};
use adequacy::economics::{self, EconParams};
use adequacy::efc;
use adequacy::risk::{self, Metric};
use adequacy::scenario::{self, Scenario};
use adequacy::system::{ResourceSet, ShortfallEnsemble, Store, TimeGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;
type Criterion = (usize, &'static str, fn() -> Outcome);

/// Criteria expected to fail, with the reason printed next to the result.
const KNOWN_RED: &[(usize, &str)] = &[(
    6,
    "merit-order clearing with indivisible bids is not a subset optimizer; see README",
)];

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn heavy() -> Scenario {
    Scenario::load(&fixtures().join("storage-heavy.json")).expect("bundled fixture")
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

// 1 -------------------------------------------------------------------------

fn firm_identity() -> Outcome {
    let s = heavy();
    let bg = s.background(None).map_err(e)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let tol = 0.01;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let mut base = ResourceSet::firm(rng.gen_range(1200.0..2400.0));
        for j in 0..rng.gen_range(0..6) {
            let (p, en, _) = scenario::STORE_MIX[rng.gen_range(0..8)];
            base.stores
                .push(Store::new(format!("b{j}"), p, en).map_err(e)?);
        }
        let y = rng.gen_range(1.0..5.0);
        let block = ResourceSet::firm(y);
        let exact = efc::efc_exact(&block, &base, &bg, Metric::Eeu, tol)
            .map_err(e)?
            .value;
        let marginal = efc::efc_marginal(&block, &base, &bg).map_err(e)?.value;
        let allowed = tol.max(0.01 * y);
        for v in [exact, marginal] {
            worst = worst.max((v - y).abs() / allowed);
        }
    }
    Ok((
        worst <= 1.0,
        format!("20 bases, worst error {worst:.3} of allowance max(tol, 1%)"),
    ))
}

// 2, 3 ----------------------------------------------------------------------

fn fd_slope(set: &ResourceSet, bg: &ShortfallEnsemble) -> Result<f64, String> {
    let up = risk::rho(&set.plus_firm(1.0), bg, Metric::Eeu).map_err(e)?;
    let down = risk::rho(&set.plus_firm(-1.0), bg, Metric::Eeu).map_err(e)?;
    Ok((up - down) / 2.0)
}

fn derivative_storage_free() -> Outcome {
    let bg = scenario::derivative_system(1000, 5).map_err(e)?;
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for target in [1.0, 3.0, 10.0] {
        let y = efc::calibrate_firm(&bg, Metric::Lole, target, 0.01).map_err(e)?;
        let set = ResourceSet::firm(y);
        let lole = risk::rho(&set, &bg, Metric::Lole).map_err(e)?;
        let fd = fd_slope(&set, &bg)?;
        let rel = (fd + lole).abs() / lole;
        worst = worst.max(rel);
        notes.push(format!("LOLE {lole:.3} h: dEEU/dy {fd:.3}"));
    }
    Ok((
        worst <= 0.02,
        format!(
            "1000 traces, worst rel. error {:.2}% ({})",
            100.0 * worst,
            notes.join("; ")
        ),
    ))
}

fn derivative_with_stores() -> Outcome {
    let bg = scenario::derivative_system(1000, 5).map_err(e)?;
    let mut worst: f64 = 0.0;
    let mut exact_reduction = true;
    let mut notes = Vec::new();
    let store_sets: [&[(f64, f64)]; 3] = [
        &[(50.0, 100.0)],
        &[(100.0, 200.0), (50.0, 50.0)],
        &[(100.0, 400.0), (100.0, 100.0), (50.0, 200.0)],
    ];
    for (n, stores) in store_sets.iter().enumerate() {
        let y = efc::calibrate_firm(&bg, Metric::Lole, 4.0, 0.01).map_err(e)?;
        let mut set = ResourceSet::firm(y - 50.0 * n as f64);
        for (j, &(p, en)) in stores.iter().enumerate() {
            set.stores
                .push(Store::new(format!("s{j}"), p, en).map_err(e)?);
        }
        let est = efc::eeu_derivative(&set, &bg).map_err(e)?;
        let fd = fd_slope(&set, &bg)?;
        let rel = (fd - est).abs() / est.abs();
        worst = worst.max(rel);
        notes.push(format!("{} stores: fd {fd:.3} est {est:.3}", stores.len()));

        let bare = set.without_stores();
        let d = efc::eeu_derivative(&bare, &bg).map_err(e)?;
        let lole = risk::rho(&bare, &bg, Metric::Lole).map_err(e)?;
        exact_reduction &= d == -lole;
    }
    Ok((
        worst <= 0.03 && exact_reduction,
        format!(
            "1000 traces, worst rel. error {:.2}% ({}); storage-free reduction exact: {exact_reduction}",
            100.0 * worst,
            notes.join("; ")
        ),
    ))
}

// 4 -------------------------------------------------------------------------

/// Least unserved energy over 1 MW integer discharge schedules.
fn dispatch_oracle(stores: &[(u32, u32)], depths: &[u32]) -> u32 {
    fn go(
        t: usize,
        left: Vec<u32>,
        st: &[(u32, u32)],
        d: &[u32],
        memo: &mut HashMap<(usize, Vec<u32>), u32>,
    ) -> u32 {
        if t == d.len() {
            return 0;
        }
        if let Some(&v) = memo.get(&(t, left.clone())) {
            return v;
        }
        let mut best = u32::MAX;
        let mut choice = vec![0u32; st.len()];
        'outer: loop {
            let total: u32 = choice.iter().sum();
            if total <= d[t] {
                let next = left.iter().zip(&choice).map(|(l, c)| l - c).collect();
                best = best.min(d[t] - total + go(t + 1, next, st, d, memo));
            }
            for i in 0..st.len() {
                if choice[i] < st[i].0.min(left[i]) {
                    choice[i] += 1;
                    continue 'outer;
                }
                choice[i] = 0;
            }
            break;
        }
        memo.insert((t, left), best);
        best
    }
    go(
        0,
        stores.iter().map(|s| s.1).collect(),
        stores,
        depths,
        &mut HashMap::new(),
    )
}

fn greedy_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0;
    let n = 300;
    for _ in 0..n {
        let sizes: Vec<(u32, u32)> = (0..rng.gen_range(1..=3))
            .map(|_| (rng.gen_range(1..10), rng.gen_range(1..20)))
            .collect();
        let depths: Vec<u32> = (0..rng.gen_range(1..=6))
            .map(|_| rng.gen_range(0..18))
            .collect();
        let stores: Vec<Store> = sizes
            .iter()
            .enumerate()
            .map(|(i, &(p, en))| Store::new(format!("s{i}"), p as f64, en as f64).unwrap())
            .collect();
        let d: Vec<f64> = depths.iter().map(|&x| x as f64).collect();
        let got = dispatch_min_eeu(&stores, &d, 1.0).unserved_energy(1.0);
        // Integer data make the optimum integral; the slack covers float error only.
        if got > dispatch_oracle(&sizes, &depths) as f64 + 1e-6 {
            violations += 1;
        }
    }
    Ok((
        violations == 0,
        format!("{n} instances, {violations} violations"),
    ))
}

// 5 -------------------------------------------------------------------------

fn local_additivity() -> Outcome {
    let s = heavy();
    let bg = s.background(None).map_err(e)?;
    let bids = s.bid_list().map_err(e)?;
    let standard = s.standard.unwrap();
    let out = auction::clear(&bids, &bg, &standard, &ClearOptions::default()).map_err(e)?;
    let base = auction::set_of(&bids, &out.accepted_set());
    let replicas = (1..=4)
        .map(|r| s.background(Some(s.seed + r)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(e)?;
    let floor =
        diagnostics::noise_floor(&base, &replicas, Metric::Eeu, 100.0, 50.0, 50.0).map_err(e)?;
    let powers = [10.0, 20.0, 30.0, 40.0, 50.0];
    let grid =
        diagnostics::smoothness_grid(&base, &bg, Metric::Eeu, 100.0, &powers, 0.0).map_err(e)?;
    let max = grid.max_deviation();
    let corner = grid.at(10.0, 10.0).unwrap();
    let far = grid.at(50.0, 50.0).unwrap();
    Ok((
        max <= 5.0 && corner <= far + floor,
        format!("max deviation {max:.2}% (limit 5%); (10,10) {corner:.2}% vs (50,50) {far:.2}% + floor {floor:.2}%"),
    ))
}

// 6 -------------------------------------------------------------------------

fn exhaustive_min_cost(bids: &[Bid], bg: &ShortfallEnsemble, st: &Standard) -> Result<f64, String> {
    let n = bids.len();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        let ids: BTreeSet<String> = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| bids[i].id.clone())
            .collect();
        let cost: f64 = bids
            .iter()
            .filter(|b| ids.contains(&b.id))
            .map(|b| b.min_total_price)
            .sum();
        if cost < best && st.met(&auction::set_of(bids, &ids), bg).map_err(e)? {
            best = cost;
        }
    }
    Ok(best)
}

fn auction_certificate() -> Outcome {
    let bg = scenario::derivative_system(50, 6).map_err(e)?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut instances, mut eq12, mut eq11, mut agree, mut agree_recheck) = (0, 0, 0, 0, 0);
    let mut worst_gap: f64 = 0.0;
    while instances < 60 {
        let n = rng.gen_range(4..=12);
        let bids: Vec<Bid> = (0..n)
            .map(|i| {
                let c: f64 = rng.gen_range(0.7..1.3);
                if rng.gen_bool(0.5) {
                    let mw = [20.0, 40.0][rng.gen_range(0..2)];
                    Bid::firm(format!("f{i}"), mw, mw * c).unwrap()
                } else {
                    let en = [20.0, 40.0, 80.0][rng.gen_range(0..3)];
                    Bid::store(format!("s{i}"), 20.0, en, 16.0 * c).unwrap()
                }
            })
            .collect();
        let need = rng.gen_range(40.0..140.0);
        let k = risk::rho(&ResourceSet::firm(need), &bg, Metric::Eeu).map_err(e)?;
        let st = Standard::new(Metric::Eeu, k).map_err(e)?;
        let out = match auction::clear(&bids, &bg, &st, &ClearOptions::default()) {
            Ok(o) => o,
            Err(adequacy::Error::Infeasible(_)) => continue,
            Err(err) => return Err(err.to_string()),
        };
        instances += 1;
        let cert = auction::verify_equilibrium(&out, &bids, &bg, 1e-9).map_err(e)?;
        eq12 += cert.violations.is_empty() as usize;
        let achieved = risk::evaluate(&auction::set_of(&bids, &out.accepted_set()), &bg)
            .map_err(e)?
            .eeu;
        eq11 += (achieved <= k) as usize;
        let best = exhaustive_min_cost(&bids, &bg, &st)?;
        let rechecked = auction::lumpy_recheck(&out, &bids, &bg, &st, 0.0).map_err(e)?;
        agree += ((out.bid_cost - best).abs() <= 1e-9 * best.max(1.0)) as usize;
        agree_recheck += ((rechecked.bid_cost - best).abs() <= 1e-9 * best.max(1.0)) as usize;
        worst_gap = worst_gap.max(out.bid_cost / best - 1.0);
    }
    let pass = eq12 == instances && eq11 == instances && agree == instances;
    Ok((
        pass,
        format!(
            "{instances} instances: equilibrium {eq12}/{instances}, reliability {eq11}/{instances}, \
             oracle agreement {agree}/{instances} ({agree_recheck}/{instances} after overshoot recheck, \
             worst excess cost {:.1}%)",
            100.0 * worst_gap
        ),
    ))
}

// 7 -------------------------------------------------------------------------

fn storage_heavy_structure() -> Outcome {
    let start = Instant::now();
    let s = heavy();
    let bg = s.background(None).map_err(e)?;
    let bids = s.bid_list().map_err(e)?;
    let standard = s.standard.unwrap();
    let opts = ClearOptions::default();
    let fp = auction::clear(&bids, &bg, &standard, &opts).map_err(e)?;
    let naive = auction::clear_naive_firm_efc(&bids, &bg, &standard, &opts).map_err(e)?;
    let stores: Vec<&Bid> = bids.iter().filter(|b| b.is_store()).collect();
    let over = stores
        .iter()
        .filter(|b| naive.efc[&b.id] > fp.efc[&b.id])
        .count();
    let naive_all_storage = naive.accepted_firm_mw == 0.0;
    let a = fp.iterations <= 10;
    let b = over == stores.len();
    let c = naive.total_cost > fp.total_cost;
    let d = fp.whole_set_storage_efc > fp.marginal_storage_efc;
    Ok((
        a && b && c && d,
        format!(
            "(a) {} iterations; (b) naive > final for {over}/{} stores; (c) naive cost {:.4e} vs {:.4e} \
             ({:.1}% saving, naive all-storage: {naive_all_storage}); (d) whole-set {:.0} MW > sum of marginals {:.0} MW; \
             accepted firm {:.0} MW; {:.1} s",
            fp.iterations,
            stores.len(),
            naive.total_cost,
            fp.total_cost,
            100.0 * (1.0 - fp.total_cost / naive.total_cost),
            fp.whole_set_storage_efc,
            fp.marginal_storage_efc,
            fp.accepted_firm_mw,
            start.elapsed().as_secs_f64()
        ),
    ))
}

// 8 -------------------------------------------------------------------------

fn pivot() -> Outcome {
    let s = Scenario::load(&fixtures().join("storage-heavy-econ.json")).map_err(e)?;
    let bg = s.background(None).map_err(e)?;
    let econ: EconParams = s.econ.clone().unwrap();
    let cone = econ.cone.unwrap();
    let gb: f64 = 49.0 / 17.0;
    let arithmetic = (gb - 2.88).abs() < 0.005;
    let opt = economics::optimal_firm(
        &ResourceSet::empty(),
        &bg,
        &econ,
        |y| cone * y,
        (0.0, bg.max_depth()),
        1.0,
        0.01,
    )
    .map_err(e)?;
    let gap = (opt.lole - cone / econ.voll).abs();
    Ok((
        gap <= 0.25 && arithmetic,
        format!(
            "optimum {:.1} MW, LOLE {:.3} h vs CONE/VOLL {:.3} h (|diff| {gap:.3} <= 0.25); 49/17 = {gb:.4}",
            opt.firm_mw,
            opt.lole,
            cone / econ.voll
        ),
    ))
}

// 9 -------------------------------------------------------------------------

fn one_one() -> Outcome {
    let s = heavy();
    let bg = s.background(None).map_err(e)?;
    let y0 = efc::calibrate_firm(&bg, Metric::Eeu, 2746.0, 0.01).map_err(e)?;
    let base = ResourceSet::firm(y0 - 400.0);
    let threshold = 0.1;

    let sizes: Vec<f64> = (0..=8).map(|i| 100.0 * i as f64).collect();
    let firm =
        economics::check_one_one(&bg, &economics::firm_family(&base, &sizes), threshold, 0.01)
            .map_err(e)?;

    // Output drawn independently of demand, hour by hour, across the season.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let shape: Vec<f64> = (0..bg.grid().len())
        .map(|_| rng.gen_range(0.0..1.0))
        .collect();
    let scales: Vec<f64> = (0..=8).map(|i| 100.0 * i as f64).collect();
    let wind = economics::check_one_one(
        &bg,
        &economics::variable_family(&base, &shape, &scales).map_err(e)?,
        threshold,
        0.01,
    )
    .map_err(e)?;

    // Midday generation inside an evening-to-morning shortfall block.
    let g = TimeGrid::new(6, 10).map_err(e)?;
    let day = [5.0, 40.0, 60.0, 60.0, 40.0, 5.0];
    let traces = (0..10)
        .map(|k| {
            day.iter()
                .map(|d| d * (1.0 + 0.03 * k as f64))
                .collect::<Vec<_>>()
                .repeat(10)
        })
        .collect();
    let hand = ShortfallEnsemble::from_traces(g, traces, 0).map_err(e)?;
    let solar_shape = economics::inside_shortfall_profile(&hand, 0.0, 30.0);
    let solar = economics::check_one_one(
        &hand,
        &economics::variable_family(
            &ResourceSet::empty(),
            &solar_shape,
            &[0.0, 0.25, 0.5, 0.75, 1.0],
        )
        .map_err(e)?,
        threshold,
        1e-6,
    )
    .map_err(e)?;
    let pts = &solar.points;
    let mechanism = pts
        .windows(2)
        .all(|w| w[1].eeu < w[0].eeu && w[1].lole == w[0].lole);

    Ok((
        firm.holds && wind.holds && !solar.holds && mechanism,
        format!(
            "discordant steps: firm {}/8 (holds {}), independent variable {}/8 (holds {}, \
             scatter vs firm curve {:.1}%), inside-shortfall solar {}/4 (holds {}); solar EEU {:.0} -> {:.0} MWh at LOLE {:.0} h",
            firm.discordant_steps,
            firm.holds,
            wind.discordant_steps,
            wind.holds,
            100.0 * wind.max_relative_deviation,
            solar.discordant_steps,
            solar.holds,
            pts[0].eeu,
            pts[pts.len() - 1].eeu,
            pts[0].lole
        ),
    ))
}

// 10 ------------------------------------------------------------------------

fn single_store_policies() -> Outcome {
    let depths = [2.0, 6.0, 10.0, 6.0, 2.0];
    let store = Store::new("s", 5.0, 6.0).map_err(e)?;
    let before_periods = depths.iter().filter(|&&d| d > 0.0).count();
    let before_energy: f64 = depths.iter().sum();
    let lole = dispatch_min_lole(&store, &depths, 1.0);
    let peak = dispatch_min_peak(&store, &depths, 1.0);
    let red_l = before_energy - lole.unserved_energy(1.0);
    let red_p = before_energy - peak.unserved_energy(1.0);
    let pass = lole.shortfall_periods() < before_periods
        && peak.shortfall_periods() == before_periods
        && (red_l - red_p).abs() <= 1e-9
        && red_l > 0.0;
    Ok((
        pass,
        format!(
            "shortfall periods {before_periods} -> {} (min-LOLE) / {} (min-peak); EEU reduction {red_l} / {red_p} MWh",
            lole.shortfall_periods(),
            peak.shortfall_periods()
        ),
    ))
}

// 11 ------------------------------------------------------------------------

fn run_cli(args: &[&str], out: &Path, threads: usize) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_adequacy"))
        .args(args)
        .arg("--out")
        .arg(out)
        .arg("--threads")
        .arg(threads.to_string())
        .output()
        .map_err(e)?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stdout).into_owned());
    }
    Ok(())
}

fn determinism() -> Outcome {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let scenario = fixtures().join("storage-heavy.json");
    let scenario = scenario.to_str().unwrap();
    let runs: [(&str, &[&str], &[&str]); 3] = [
        (
            "risk",
            &["risk", "--scenario", scenario],
            &["risk.json", "risk.csv"],
        ),
        (
            "clear",
            &["clear", "--scenario", scenario],
            &["clear.json", "clear.csv"],
        ),
        (
            "naive",
            &["clear", "--naive", "--scenario", scenario],
            &["clear.json", "clear.csv"],
        ),
    ];
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for (tag, args, files) in runs {
        let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
        for (dir, threads) in dirs.iter().zip([1, 2, 4]) {
            run_cli(args, dir.path(), threads)?;
        }
        for f in files {
            let want = std::fs::read(golden.join(format!("{tag}-{f}")))
                .map_err(|err| format!("golden {tag}-{f}: {err}"))?;
            for dir in &dirs {
                compared += 1;
                if std::fs::read(dir.path().join(f)).map_err(e)? != want {
                    mismatches.push(format!("{tag}/{f}"));
                }
            }
        }
    }
    Ok((
        mismatches.is_empty(),
        format!("{compared} outputs over --threads 1/2/4 byte-identical to golden files; mismatches {mismatches:?}"),
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "firm-capacity identity", firm_identity),
        (
            2,
            "EEU derivative equals -LOLE without storage",
            derivative_storage_free,
        ),
        (
            3,
            "EEU derivative equals -LOLE(R \\ S_e) with storage",
            derivative_with_stores,
        ),
        (4, "greedy dispatch optimality", greedy_optimality),
        (5, "local additivity of store EFCs", local_additivity),
        (
            6,
            "auction equilibrium certificate and subset oracle",
            auction_certificate,
        ),
        (
            7,
            "storage-heavy auction structure",
            storage_heavy_structure,
        ),
        (8, "LOLE = CONE/VOLL at the economic optimum", pivot),
        (
            9,
            "LOLE/EEU one-one correspondence and its breakdown",
            one_one,
        ),
        (
            10,
            "min-LOLE versus min-peak single-store policies",
            single_store_policies,
        ),
        (
            11,
            "deterministic golden outputs across thread counts",
            determinism,
        ),
    ];
    let mut unexpected = Vec::new();
    for (n, name, f) in criteria {
        let start = Instant::now();
        let (pass, detail) = match f() {
            Ok(r) => r,
            Err(err) => (false, format!("error: {err}")),
        };
        let known = KNOWN_RED.iter().find(|(k, _)| *k == n).map(|(_, why)| *why);
        let verdict = match (pass, known) {
            (true, _) => "PASS",
            (false, Some(_)) => "FAIL (known)",
            (false, None) => "FAIL",
        };
        println!(
            "[{verdict}] {n:>2}. {name}: {detail} [{:.1} s]",
            start.elapsed().as_secs_f64()
        );
        if let (false, Some(why)) = (pass, known) {
            println!("        known red: {why}");
        }
        if !pass && known.is_none() {
            unexpected.push(n);
        }
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
