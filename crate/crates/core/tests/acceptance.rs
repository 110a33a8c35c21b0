//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs without the libtest harness so the lines always
//! print.

mod common;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cpmm_arb_core::data::{load_prices, load_snapshot, synthetic_market, write_prices, write_snapshot};
use cpmm_arb_core::oracle::{convex_grid, single_entry_grid};
use cpmm_arb_core::pipeline::{comparison_csv, compare, detect, PipelineConfig, StrategySet};
use cpmm_arb_core::strategies::bisect_optimal_input;
use cpmm_arb_core::{
    compose_path, maxmax, maxprice, optimize_single_entry, relative_price, solve_convex, Error, Hop, Loop, Pool,
    PriceTable, TokenId, DEFAULT_TOLERANCE,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn check(failures: &mut Vec<String>, cond: bool, what: impl FnOnce() -> String) {
    if !cond {
        failures.push(what());
    }
}

fn verdict(failures: Vec<String>, summary: String) -> Outcome {
    if failures.is_empty() {
        Ok(summary)
    } else {
        let shown: Vec<_> = failures.iter().take(5).cloned().collect();
        Err(format!("{} ({} failure(s): {})", summary, failures.len(), shown.join("; ")))
    }
}

fn near(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol
}

fn worked_example() -> Outcome {
    let started = Instant::now();
    let pools = load_snapshot(fixture("worked_pools.csv")).map_err(|e| e.to_string())?;
    let prices = load_prices(fixture("worked_prices.csv")).map_err(|e| e.to_string())?;
    let lp = Loop::from_tokens(&pools, &["X".into(), "Y".into(), "Z".into()]).map_err(|e| e.to_string())?;
    let mut f = Vec::new();

    let expected = [("X", 27.0, 16.8, 33.7), ("Y", 31.5, 19.7, 201.1), ("Z", 16.4, 10.3, 205.6)];
    for (token, input, profit, usd) in expected {
        let r = optimize_single_entry(&lp, &token.into(), &prices).map_err(|e| e.to_string())?;
        check(&mut f, near(r.optimal_input, input, 0.1), || format!("{token} input {}", r.optimal_input));
        check(&mut f, near(r.profit_tokens, profit, 0.1), || format!("{token} profit {}", r.profit_tokens));
        check(&mut f, near(r.monetized_profit, usd, 0.5), || format!("{token} usd {}", r.monetized_profit));
    }
    let mm = maxmax(&lp, &prices).map_err(|e| e.to_string())?;
    let mp = maxprice(&lp, &prices).map_err(|e| e.to_string())?;
    check(&mut f, near(mm.monetized_profit, 205.6, 0.5), || format!("MaxMax {}", mm.monetized_profit));
    check(&mut f, near(mp.monetized_profit, 205.6, 0.5), || format!("MaxPrice {}", mp.monetized_profit));

    let cv = solve_convex(&lp, &prices, DEFAULT_TOLERANCE).map_err(|e| e.to_string())?;
    check(&mut f, near(cv.monetized_profit, 206.1, 0.5), || format!("Convex {}", cv.monetized_profit));
    let (ins, outs) = ([31.3, 42.6, 17.1], [47.6, 24.8, 31.3]);
    for i in 0..3 {
        check(&mut f, near(cv.flows.inputs[i], ins[i], 0.2), || format!("convex input {i} {}", cv.flows.inputs[i]));
        check(&mut f, near(cv.flows.outputs[i], outs[i], 0.2), || format!("convex output {i} {}", cv.flows.outputs[i]));
    }
    let net = |t: &str| cv.profit_by_token.get(&TokenId::from(t)).copied().unwrap_or(0.0);
    check(&mut f, near(net("Y"), 5.0, 0.2) && near(net("Z"), 7.7, 0.2), || format!("nets Y {} Z {}", net("Y"), net("Z")));

    let elapsed = started.elapsed();
    check(&mut f, elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"));
    verdict(
        f,
        format!(
            "entries 33.74/201.14/205.59 USD, MaxMax {:.3}, MaxPrice {:.3}, Convex {:.3}, in {:?}",
            mm.monetized_profit, mp.monetized_profit, cv.monetized_profit, elapsed
        ),
    )
}

fn price_product() -> Outcome {
    let pools: Vec<Pool> = common::worked_pools().iter().map(|p| p.with_fee_rate(0.0).unwrap()).collect();
    let product = relative_price(&pools[0], &"X".into()).unwrap()
        * relative_price(&pools[1], &"Y".into()).unwrap()
        * relative_price(&pools[2], &"Z".into()).unwrap();
    if product == 8.0 / 3.0 {
        Ok(format!("product {product:?} == 8/3"))
    } else {
        Err(format!("product {product:?} != {:?}", 8.0 / 3.0))
    }
}

struct DominanceStats {
    worst_kkt: f64,
    converged: usize,
    bisection_worst: f64,
}

fn dominance(stats: &mut DominanceStats) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut f = Vec::new();
    let loops = 1200;
    let mut arbitrage = 0;
    for case in 0..loops {
        let (lp, prices) = common::random_instance(&mut rng, 3 + case % 3);
        arbitrage += usize::from(lp.log_price_sum() > 0.0);
        let mm = maxmax(&lp, &prices).unwrap();
        let mp = maxprice(&lp, &prices).unwrap();
        for r in &mm.per_entry {
            check(&mut f, r.monetized_profit <= mm.monetized_profit, || format!("case {case}: entry above MaxMax"));
            if r.optimal_input > 0.0 {
                let rotated = lp.rotated_to(&r.entry_token).unwrap();
                let b = bisect_optimal_input(&rotated.composed());
                stats.bisection_worst = stats.bisection_worst.max((b - r.optimal_input).abs() / r.optimal_input);
            }
        }
        check(&mut f, mp.monetized_profit <= mm.monetized_profit, || format!("case {case}: MaxPrice above MaxMax"));
        match solve_convex(&lp, &prices, DEFAULT_TOLERANCE) {
            Ok(cv) => {
                stats.converged += 1;
                stats.worst_kkt = stats.worst_kkt.max(cv.kkt_residual);
                check(&mut f, mm.monetized_profit <= cv.monetized_profit + 1e-6 * (1.0 + cv.monetized_profit), || {
                    format!("case {case}: MaxMax {} above Convex {}", mm.monetized_profit, cv.monetized_profit)
                });
            }
            Err(Error::NotConverged { iterations, .. }) => f.push(format!("case {case}: no convergence in {iterations} steps")),
            Err(e) => f.push(format!("case {case}: {e}")),
        }
    }
    verdict(f, format!("{loops} loops ({arbitrage} with arbitrage), lengths 3-5"))
}

fn no_arbitrage() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4048);
    let mut f = Vec::new();
    let mut worst: f64 = 0.0;
    let loops = 1200;
    for case in 0..loops {
        let (lp, prices) = common::random_oriented(&mut rng, 3 + case % 3, false);
        for t in lp.tokens() {
            let r = optimize_single_entry(&lp, t, &prices).unwrap();
            check(&mut f, r.optimal_input == 0.0, || format!("case {case}: entry {t} input {}", r.optimal_input));
        }
        match solve_convex(&lp, &prices, DEFAULT_TOLERANCE) {
            Ok(cv) => {
                worst = worst.max(cv.monetized_profit);
                check(&mut f, cv.monetized_profit <= 1e-6, || format!("case {case}: convex {}", cv.monetized_profit));
            }
            Err(e) => f.push(format!("case {case}: {e}")),
        }
    }
    verdict(f, format!("{loops} non-arbitrage loops, largest convex profit {worst:e}"))
}

fn oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut f = Vec::new();
    let mut worst_1d: f64 = 0.0;
    let mut worst_3d = f64::NEG_INFINITY;
    for case in 0..50 {
        let (lp, prices) = common::random_oriented(&mut rng, 3, true);
        for t in lp.tokens() {
            let g = single_entry_grid(&lp, t, 1_000_000).unwrap();
            let exact = optimize_single_entry(&lp, t, &prices).unwrap().profit_tokens;
            let slack = 1e-9 * (1.0 + exact.abs());
            worst_1d = worst_1d.max((exact - g.best_profit) / (g.bound + slack));
            check(&mut f, g.best_profit <= exact + slack && exact - g.best_profit <= g.bound + slack, || {
                format!("case {case} entry {t}: grid {} closed form {exact} bound {}", g.best_profit, g.bound)
            });
        }
        let g = convex_grid(&lp, &prices, 200).unwrap();
        let solved = solve_convex(&lp, &prices, DEFAULT_TOLERANCE).map_err(|e| e.to_string())?.monetized_profit;
        worst_3d = worst_3d.max((g.best_value - solved) / g.bound.max(f64::MIN_POSITIVE));
        check(&mut f, g.best_value <= solved + g.bound, || {
            format!("case {case}: grid {} solver {solved} bound {}", g.best_value, g.bound)
        });
    }
    verdict(
        f,
        format!(
            "50 loops: 1-D shortfall at most {worst_1d:.2e} of its bound, 3-D excess over solver at most {worst_3d:.2e} of its bound"
        ),
    )
}

fn certification(stats: &DominanceStats) -> Outcome {
    let mut f = Vec::new();
    check(&mut f, stats.worst_kkt <= 1e-8, || format!("worst KKT residual {:e}", stats.worst_kkt));
    check(&mut f, stats.bisection_worst <= 1e-9, || format!("bisection off by {:e}", stats.bisection_worst));

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst_comp: f64 = 0.0;
    for _ in 0..2000 {
        let len = rng.gen_range(1..=10);
        let hops: Vec<Hop> = (0..len)
            .map(|i| {
                let a = TokenId::new(format!("T{i}")).unwrap();
                let b = TokenId::new(format!("T{}", i + 1)).unwrap();
                let ra = 10f64.powf(rng.gen_range(2.0..7.0));
                let rb = 10f64.powf(rng.gen_range(2.0..7.0));
                Hop::new(Pool::new(a.clone(), b, ra, rb, 0.003).unwrap(), &a).unwrap()
            })
            .collect();
        let composed = compose_path(&hops).unwrap();
        let amount = 10f64.powf(rng.gen_range(-2.0..7.0));
        let nested = hops.iter().fold(amount, |a, h| h.swap(a));
        worst_comp = worst_comp.max((composed.output(amount) - nested).abs() / nested);
    }
    check(&mut f, worst_comp <= 1e-12, || format!("composition off by {worst_comp:e}"));
    verdict(
        f,
        format!(
            "KKT worst {:.2e} over {} solves; bisection worst {:.2e}; composition worst {:.2e} over 2000 chains",
            stats.worst_kkt, stats.converged, stats.bisection_worst, worst_comp
        ),
    )
}

fn length_ten() -> (Loop, PriceTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    common::random_oriented(&mut rng, 10, true)
}

fn runtime() -> Outcome {
    let (lp, prices) = length_ten();
    let mut f = Vec::new();
    let started = Instant::now();
    let mm = maxmax(&lp, &prices).unwrap();
    let t_mm = started.elapsed();
    let started = Instant::now();
    let cv = solve_convex(&lp, &prices, DEFAULT_TOLERANCE);
    let t_cv = started.elapsed();
    check(&mut f, t_mm < Duration::from_millis(50), || format!("MaxMax took {t_mm:?}"));
    check(&mut f, t_cv < Duration::from_secs(10), || format!("Convex took {t_cv:?}"));
    match &cv {
        Ok(s) => check(&mut f, mm.monetized_profit <= s.monetized_profit + 1e-6 * (1.0 + s.monetized_profit), || {
            "Convex below MaxMax".into()
        }),
        Err(e) => f.push(e.to_string()),
    }
    verdict(f, format!("length 10: MaxMax {t_mm:?}, Convex {t_cv:?}"))
}

fn synthetic_pipeline() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (pools, prices) = synthetic_market(51, 208, 2023).map_err(|e| e.to_string())?;
    let (snap, price_path) = (dir.path().join("snapshot.csv"), dir.path().join("prices.csv"));
    write_snapshot(&snap, &pools).map_err(|e| e.to_string())?;
    write_prices(&price_path, &prices).map_err(|e| e.to_string())?;
    let mut f = Vec::new();
    let mut summary = Vec::new();
    for length in [3, 4] {
        let started = Instant::now();
        let pools = load_snapshot(&snap).map_err(|e| e.to_string())?;
        let prices = load_prices(&price_path).map_err(|e| e.to_string())?;
        let config = PipelineConfig { length, ..PipelineConfig::default() };
        let found = detect(&pools, &prices, &config).map_err(|e| e.to_string())?;
        let rows = compare(&pools, &prices, &config, StrategySet::ALL).map_err(|e| e.to_string())?;
        let csv = comparison_csv(&rows, length, StrategySet::ALL);
        let elapsed = started.elapsed();
        check(&mut f, pools.len() == 208 && prices.len() == 51, || "snapshot shape".into());
        check(&mut f, !found.is_empty() && rows.len() == found.len(), || format!("length {length}: {} loops", found.len()));
        check(&mut f, csv.lines().count() == rows.len() + 1, || "csv row count".into());
        let bad = rows.iter().filter(|r| !r.dominance_holds() || !r.converged()).count();
        check(&mut f, bad == 0, || format!("length {length}: {bad} rows break dominance or convergence"));
        check(&mut f, elapsed < Duration::from_secs(60), || format!("length {length} took {elapsed:?}"));
        summary.push(format!("length {length}: {} arbitrage loops in {:.2?}", rows.len(), elapsed));
    }
    verdict(f, format!("51 tokens / 208 pools; {}", summary.join(", ")))
}

fn main() -> ExitCode {
    let mut stats = DominanceStats { worst_kkt: 0.0, converged: 0, bisection_worst: 0.0 };
    let criteria: Vec<(&str, Outcome)> = vec![
        ("1 worked example", worked_example()),
        ("2 relative price product", price_product()),
        ("3 dominance chain", dominance(&mut stats)),
        ("4 no-arbitrage equivalence", no_arbitrage()),
        ("5 oracle equivalence", oracles()),
        ("6 numerical certification", certification(&stats)),
        ("7 runtime envelope", runtime()),
        ("8 synthetic snapshot pipeline", synthetic_pipeline()),
    ];
    let mut all = true;
    for (name, outcome) in &criteria {
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                all = false;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    if all { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
