use std::path::PathBuf;

use cpmm_arb_core::data::{load_prices, load_snapshot, synthetic_market};
use cpmm_arb_core::pipeline::{
    comparison_csv, compare, detect, oracle_report, sweep, sweep_values, PipelineConfig, StrategySet,
};
use cpmm_arb_core::TokenId;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn worked() -> (Vec<cpmm_arb_core::Pool>, cpmm_arb_core::PriceTable) {
    (load_snapshot(fixture("worked_pools.csv")).unwrap(), load_prices(fixture("worked_prices.csv")).unwrap())
}

fn unfiltered(length: usize) -> PipelineConfig {
    PipelineConfig { length, min_tvl: 0.0, min_reserve: 0.0, ..PipelineConfig::default() }
}

#[test]
fn detects_the_single_worked_loop() {
    let (pools, prices) = worked();
    let found = detect(&pools, &prices, &unfiltered(3)).unwrap();
    assert_eq!(found.len(), 1);
    assert_eq!(found[0].lp.to_string(), "X>Y>Z>X");
    assert!(found[0].log_price_sum > 0.0);
    assert!(detect(&pools, &prices, &unfiltered(2)).unwrap().is_empty());
    assert!(detect(&[], &prices, &unfiltered(3)).unwrap().is_empty());
}

#[test]
fn default_liquidity_filter_drops_the_small_worked_pools() {
    let (pools, prices) = worked();
    assert!(detect(&pools, &prices, &PipelineConfig::default()).unwrap().is_empty());
}

#[test]
fn worked_comparison_row() {
    let (pools, prices) = worked();
    let rows = compare(&pools, &prices, &unfiltered(3), StrategySet::ALL).unwrap();
    assert_eq!(rows.len(), 1);
    let row = &rows[0];
    let entries: Vec<f64> = row.single_entry.as_ref().unwrap().iter().map(|r| r.monetized_profit).collect();
    for (got, want) in entries.iter().zip([33.7, 201.1, 205.6]) {
        assert!((got - want).abs() <= 0.5, "{got} vs {want}");
    }
    assert!((row.maxprice.as_ref().unwrap().monetized_profit - 205.6).abs() <= 0.5);
    assert!((row.maxmax.as_ref().unwrap().monetized_profit - 205.6).abs() <= 0.5);
    assert!((row.convex.as_ref().unwrap().solution.monetized_profit - 206.1).abs() <= 0.5);
    assert!(row.dominance_holds() && row.converged());

    let csv = comparison_csv(&rows, 3, StrategySet::ALL);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("loop,log_price_sum,token_1,token_2,token_3,entry_1_input"));
    assert!(lines[1].starts_with("X>Y>Z>X,"));
    assert!(lines[1].ends_with(",ok"));
}

#[test]
fn no_arbitrage_gives_header_only_csv() {
    let (pools, prices) = worked();
    let rows = compare(&pools, &prices, &unfiltered(2), StrategySet::ALL).unwrap();
    assert!(rows.is_empty());
    let csv = comparison_csv(&rows, 2, StrategySet::ALL);
    assert_eq!(csv.lines().count(), 1);
    assert!(csv.starts_with("loop,"));
}

#[test]
fn price_sweep_has_101_rows() {
    let (pools, prices) = worked();
    let values = sweep_values(0.0, 20.0, 0.2).unwrap();
    let rows = sweep(&pools, &prices, &unfiltered(3), StrategySet::ALL, &TokenId::from("X"), &values).unwrap();
    assert_eq!(rows.len(), 101);
    assert!(rows.iter().all(|r| r.dominance_holds()));
    let csv = comparison_csv(&rows, 3, StrategySet::ALL);
    assert_eq!(csv.lines().count(), 102);
    assert!(csv.starts_with("price,loop,"));
    assert!(csv.lines().nth(101).unwrap().starts_with("20.0000,"));
}

#[test]
fn synthetic_market_comparison_is_deterministic_and_dominant() {
    let (pools, prices) = synthetic_market(30, 90, 3).unwrap();
    let config = PipelineConfig::default();
    let rows = compare(&pools, &prices, &config, StrategySet::ALL).unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.dominance_holds()));
    let again = compare(&pools, &prices, &config, StrategySet::ALL).unwrap();
    assert_eq!(comparison_csv(&rows, 3, StrategySet::ALL), comparison_csv(&again, 3, StrategySet::ALL));
    for pair in rows.windows(2) {
        assert!(pair[0].log_price_sum >= pair[1].log_price_sum);
    }
}

#[test]
fn oracle_report_on_worked_loop() {
    let (pools, prices) = worked();
    let tokens: Vec<TokenId> = ["X", "Y", "Z"].into_iter().map(TokenId::from).collect();
    let report = oracle_report(&pools, &prices, &tokens, None, 100_000, 50, 1e-8).unwrap();
    assert!(report.passes(), "{report}");
    assert_eq!(report.single_entry.len(), 3);
    assert!(report.to_string().ends_with("PASS"));

    let reversed: Vec<TokenId> = ["X", "Z", "Y"].into_iter().map(TokenId::from).collect();
    let report = oracle_report(&pools, &prices, &reversed, None, 1000, 20, 1e-8).unwrap();
    assert_eq!(report.joint.as_ref().unwrap().0.best_value, 0.0);
    assert!(report.single_entry.iter().all(|(g, _)| g.best_profit == 0.0));

    let unknown: Vec<TokenId> = ["X", "Q", "Z"].into_iter().map(TokenId::from).collect();
    assert!(oracle_report(&pools, &prices, &unknown, None, 1000, 20, 1e-8).is_err());
}
