//! Batch runs over a whole snapshot: arbitrage detection, strategy
//! comparison tables, price sweeps and oracle reports.
//!
//! Comparison CSV columns, for a loop of length `L` with tokens listed in
//! traversal order (`k = 1..L`):
//!
//! | column | meaning |
//! |---|---|
//! | `loop` | canonical loop, e.g. `X>Y>Z>X` |
//! | `log_price_sum` | sum of log relative prices |
//! | `token_k` | k-th token of the loop |
//! | `entry_k_input`, `entry_k_profit`, `entry_k_usd` | single-entry optimum at token k: input and profit in token units, profit in USD |
//! | `maxprice_entry`, `maxprice_usd` | MaxPrice entry token and profit |
//! | `maxmax_entry`, `maxmax_usd`, `maxmax_net_k` | MaxMax entry, profit, net token-k profit |
//! | `convex_usd`, `convex_net_k`, `convex_kkt`, `convex_status` | joint program profit, net token-k profit, KKT residual, `ok` or `not-converged` |
//!
//! Price sweeps prepend a `price` column. Numbers are fixed-point with six
//! significant digits.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use rayon::prelude::*;

use crate::amm::{Pool, TokenId};
use crate::convex::{solve_convex, ConvexSolution, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::graph::{build_graph, enumerate_loops, Loop};
use crate::oracle::{convex_grid, single_entry_grid, LoopGrid, SingleEntryGrid};
use crate::strategies::{maxmax, maxprice, optimize_single_entry, PriceTable, SingleEntryResult, StrategyReport};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub length: usize,
    pub min_tvl: f64,
    pub min_reserve: f64,
    /// Replaces every pool's fee when set.
    pub fee: Option<f64>,
    pub tolerance: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { length: 3, min_tvl: 30_000.0, min_reserve: 100.0, fee: None, tolerance: DEFAULT_TOLERANCE }
    }
}

/// Which strategies a comparison runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrategySet {
    pub single_entry_all: bool,
    pub maxprice: bool,
    pub maxmax: bool,
    pub convex: bool,
}

impl StrategySet {
    pub const ALL: StrategySet = StrategySet { single_entry_all: true, maxprice: true, maxmax: true, convex: true };

    /// Comma-separated subset of `single-entry-all`, `maxprice`, `maxmax`,
    /// `convex`.
    pub fn parse(spec: &str) -> std::result::Result<Self, String> {
        let mut set = StrategySet { single_entry_all: false, maxprice: false, maxmax: false, convex: false };
        for name in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match name {
                "single-entry-all" => set.single_entry_all = true,
                "maxprice" => set.maxprice = true,
                "maxmax" => set.maxmax = true,
                "convex" => set.convex = true,
                other => return Err(format!("unknown strategy {other:?}")),
            }
        }
        if set == (StrategySet { single_entry_all: false, maxprice: false, maxmax: false, convex: false }) {
            return Err("no strategies selected".into());
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectedLoop {
    pub lp: Loop,
    pub log_price_sum: f64,
}

/// Apply the fee override and the liquidity filters.
pub fn prepare_pools(pools: &[Pool], prices: &PriceTable, config: &PipelineConfig) -> Result<Vec<Pool>> {
    let pools = match config.fee {
        Some(fee) => pools.iter().map(|p| p.with_fee_rate(fee)).collect::<Result<Vec<_>>>()?,
        None => pools.to_vec(),
    };
    Ok(build_graph(&pools, config.min_tvl, config.min_reserve, prices).pools().to_vec())
}

/// Arbitrage loops of `config.length`, best log price sum first; ties keep
/// canonical enumeration order.
pub fn detect(pools: &[Pool], prices: &PriceTable, config: &PipelineConfig) -> Result<Vec<DetectedLoop>> {
    let kept = prepare_pools(pools, prices, config)?;
    let snapshot = crate::graph::MarketSnapshot::from_pools(kept);
    let mut found: Vec<DetectedLoop> = enumerate_loops(&snapshot, config.length)
        .into_iter()
        .filter_map(|lp| {
            let sum = lp.log_price_sum();
            (sum > 0.0).then_some(DetectedLoop { lp, log_price_sum: sum })
        })
        .collect();
    found.sort_by(|a, b| b.log_price_sum.total_cmp(&a.log_price_sum));
    Ok(found)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConvexStatus {
    Converged,
    NotConverged { iterations: usize },
}

impl fmt::Display for ConvexStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConvexStatus::Converged => f.write_str("ok"),
            ConvexStatus::NotConverged { .. } => f.write_str("not-converged"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexCell {
    pub solution: ConvexSolution,
    pub status: ConvexStatus,
}

/// One comparison table row. Per-token vectors follow the loop's traversal
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    /// Set in price sweeps.
    pub price: Option<f64>,
    pub lp: Loop,
    pub log_price_sum: f64,
    pub single_entry: Option<Vec<SingleEntryResult>>,
    pub maxprice: Option<StrategyReport>,
    pub maxmax: Option<StrategyReport>,
    pub convex: Option<ConvexCell>,
}

impl ComparisonRow {
    pub fn compute(lp: &Loop, prices: &PriceTable, strategies: StrategySet, tolerance: f64) -> Result<Self> {
        let single_entry = if strategies.single_entry_all {
            Some(lp.tokens().map(|t| optimize_single_entry(lp, t, prices)).collect::<Result<Vec<_>>>()?)
        } else {
            None
        };
        let convex = if strategies.convex {
            Some(match solve_convex(lp, prices, tolerance) {
                Ok(solution) => ConvexCell { solution, status: ConvexStatus::Converged },
                Err(Error::NotConverged { iterations, best }) => {
                    ConvexCell { solution: *best, status: ConvexStatus::NotConverged { iterations } }
                }
                Err(e) => return Err(e),
            })
        } else {
            None
        };
        Ok(Self {
            price: None,
            lp: lp.clone(),
            log_price_sum: lp.log_price_sum(),
            single_entry,
            maxprice: strategies.maxprice.then(|| maxprice(lp, prices)).transpose()?,
            maxmax: strategies.maxmax.then(|| maxmax(lp, prices)).transpose()?,
            convex,
        })
    }

    /// `entry ≤ MaxMax ≤ Convex + 1e−6·(1 + Convex)` and `MaxPrice ≤ MaxMax`
    /// over whichever strategies the row holds.
    pub fn dominance_holds(&self) -> bool {
        let Some(mm) = self.maxmax.as_ref().map(|r| r.monetized_profit) else { return true };
        let entries_ok = self.single_entry.iter().flatten().all(|r| r.monetized_profit <= mm);
        let maxprice_ok = self.maxprice.as_ref().is_none_or(|r| r.monetized_profit <= mm);
        let convex_ok = self.convex.as_ref().is_none_or(|c| {
            let cv = c.solution.monetized_profit;
            mm <= cv + 1e-6 * (1.0 + cv.abs())
        });
        entries_ok && maxprice_ok && convex_ok
    }

    pub fn converged(&self) -> bool {
        self.convex.as_ref().is_none_or(|c| c.status == ConvexStatus::Converged)
    }

    fn nets(lp: &Loop, by_token: &BTreeMap<TokenId, f64>) -> Vec<f64> {
        lp.tokens().map(|t| by_token.get(t).copied().unwrap_or(0.0)).collect()
    }
}

/// Rows for every arbitrage loop, in detection order.
pub fn compare(
    pools: &[Pool],
    prices: &PriceTable,
    config: &PipelineConfig,
    strategies: StrategySet,
) -> Result<Vec<ComparisonRow>> {
    let loops = detect(pools, prices, config)?;
    loops.par_iter().map(|d| ComparisonRow::compute(&d.lp, prices, strategies, config.tolerance)).collect()
}

/// Number of sweep values from `from` to `to` in steps of `step`,
/// endpoints included.
pub fn sweep_values(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(from.is_finite() && to.is_finite() && step.is_finite() && step > 0.0 && to >= from && from >= 0.0) {
        return Err(Error::InvalidAmount(step));
    }
    let count = ((to - from) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| from + step * k as f64).collect())
}

/// Comparison rows for each value of `token`'s price; loops are detected
/// once, with the liquidity filters applied at the given prices.
pub fn sweep(
    pools: &[Pool],
    prices: &PriceTable,
    config: &PipelineConfig,
    strategies: StrategySet,
    token: &TokenId,
    values: &[f64],
) -> Result<Vec<ComparisonRow>> {
    prices.require(token)?;
    let loops = detect(pools, prices, config)?;
    let jobs: Vec<(f64, &Loop)> = values.iter().flat_map(|&v| loops.iter().map(move |d| (v, &d.lp))).collect();
    jobs.par_iter()
        .map(|&(value, lp)| {
            let mut swept = prices.clone();
            swept.insert(token.clone(), value)?;
            let mut row = ComparisonRow::compute(lp, &swept, strategies, config.tolerance)?;
            row.price = Some(value);
            Ok(row)
        })
        .collect()
}

/// Fixed-point rendering with six significant digits.
pub fn format_number(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() { "0".into() } else { v.to_string() };
    }
    let exponent = v.abs().log10().floor() as i32;
    let decimals = (5 - exponent).max(0) as usize;
    let text = if exponent > 5 {
        let unit = 10f64.powi(exponent - 5);
        format!("{:.0}", (v / unit).round() * unit)
    } else {
        format!("{v:.decimals$}")
    };
    if text.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') { "0".into() } else { text }
}

/// CSV text for `rows`; `length` fixes the per-token columns, which also
/// makes a header-only table well defined.
pub fn comparison_csv(rows: &[ComparisonRow], length: usize, strategies: StrategySet) -> String {
    let sweep = rows.first().is_some_and(|r| r.price.is_some());
    let mut header: Vec<String> = Vec::new();
    if sweep {
        header.push("price".into());
    }
    header.extend(["loop".into(), "log_price_sum".into()]);
    header.extend((1..=length).map(|k| format!("token_{k}")));
    if strategies.single_entry_all {
        for k in 1..=length {
            header.extend([format!("entry_{k}_input"), format!("entry_{k}_profit"), format!("entry_{k}_usd")]);
        }
    }
    if strategies.maxprice {
        header.extend(["maxprice_entry".into(), "maxprice_usd".into()]);
    }
    if strategies.maxmax {
        header.extend(["maxmax_entry".into(), "maxmax_usd".into()]);
        header.extend((1..=length).map(|k| format!("maxmax_net_{k}")));
    }
    if strategies.convex {
        header.push("convex_usd".into());
        header.extend((1..=length).map(|k| format!("convex_net_{k}")));
        header.extend(["convex_kkt".into(), "convex_status".into()]);
    }

    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let mut cells: Vec<String> = Vec::new();
        if sweep {
            cells.push(format_number(row.price.unwrap_or(0.0)));
        }
        cells.push(row.lp.to_string());
        cells.push(format_number(row.log_price_sum));
        cells.extend(row.lp.tokens().map(ToString::to_string));
        if let Some(entries) = &row.single_entry {
            for r in entries {
                cells.extend([r.optimal_input, r.profit_tokens, r.monetized_profit].map(format_number));
            }
        }
        if let Some(r) = &row.maxprice {
            cells.push(r.entry.as_ref().map_or(String::new(), ToString::to_string));
            cells.push(format_number(r.monetized_profit));
        }
        if let Some(r) = &row.maxmax {
            cells.push(r.entry.as_ref().map_or(String::new(), ToString::to_string));
            cells.push(format_number(r.monetized_profit));
            cells.extend(ComparisonRow::nets(&row.lp, &r.profit_by_token).into_iter().map(format_number));
        }
        if let Some(c) = &row.convex {
            cells.push(format_number(c.solution.monetized_profit));
            cells.extend(ComparisonRow::nets(&row.lp, &c.solution.profit_by_token).into_iter().map(format_number));
            cells.push(format!("{:.3e}", c.solution.kkt_residual));
            cells.push(c.status.to_string());
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Listing printed by detection: one loop per line with its log price sum.
pub fn detection_listing(loops: &[DetectedLoop]) -> String {
    let mut out = String::new();
    for d in loops {
        writeln!(out, "{}\t{}", d.lp, format_number(d.log_price_sum)).unwrap();
    }
    out
}

/// Grid checks of one loop against the analytic and solver results.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub lp: Loop,
    /// `(grid, closed-form profit in entry tokens)` per loop token.
    pub single_entry: Vec<(SingleEntryGrid, f64)>,
    /// `(grid, solver monetized profit)` for length-3 loops.
    pub joint: Option<(LoopGrid, f64)>,
}

impl OracleReport {
    /// Every single-entry grid within its bound of the closed form, and the
    /// joint grid not above the solver by more than its bound.
    pub fn passes(&self) -> bool {
        let single = self.single_entry.iter().all(|(g, exact)| {
            let slack = 1e-9 * (1.0 + exact.abs());
            g.best_profit <= exact + slack && exact - g.best_profit <= g.bound + slack
        });
        let joint = self.joint.as_ref().is_none_or(|(g, solved)| g.best_value <= solved + g.bound);
        single && joint
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "loop {}", self.lp)?;
        for (g, exact) in &self.single_entry {
            writeln!(
                f,
                "single-entry {}: grid {} at input {} ({} points), closed form {}, delta {:.3e}, bound {:.3e}",
                g.entry,
                format_number(g.best_profit),
                format_number(g.best_input),
                g.points,
                format_number(*exact),
                exact - g.best_profit,
                g.bound
            )?;
        }
        if let Some((g, solved)) = &self.joint {
            writeln!(
                f,
                "joint: grid {} at input {} fractions ({}, {}) ({}^3 points), solver {}, grid - solver {:.3e}, bound {:.3e}",
                format_number(g.best_value),
                format_number(g.best_input),
                format_number(g.best_fractions[0]),
                format_number(g.best_fractions[1]),
                g.points_per_axis,
                format_number(*solved),
                g.best_value - solved,
                g.bound
            )?;
        }
        write!(f, "{}", if self.passes() { "PASS" } else { "FAIL" })
    }
}

/// Oracle report for the loop through `tokens`, built from the first pool
/// on each consecutive pair.
pub fn oracle_report(
    pools: &[Pool],
    prices: &PriceTable,
    tokens: &[TokenId],
    fee: Option<f64>,
    points_1d: usize,
    points_3d: usize,
    tolerance: f64,
) -> Result<OracleReport> {
    let pools = match fee {
        Some(fee) => pools.iter().map(|p| p.with_fee_rate(fee)).collect::<Result<Vec<_>>>()?,
        None => pools.to_vec(),
    };
    let lp = Loop::from_tokens(&pools, tokens)?;
    let single_entry = lp
        .tokens()
        .map(|t| {
            let grid = single_entry_grid(&lp, t, points_1d)?;
            let exact = optimize_single_entry(&lp, t, prices)?.profit_tokens;
            Ok((grid, exact))
        })
        .collect::<Result<Vec<_>>>()?;
    let joint = if lp.len() == 3 {
        let grid = convex_grid(&lp, prices, points_3d)?;
        let solved = match solve_convex(&lp, prices, tolerance) {
            Ok(s) => s,
            Err(Error::NotConverged { best, .. }) => *best,
            Err(e) => return Err(e),
        };
        Some((grid, solved.monetized_profit))
    } else {
        None
    };
    Ok(OracleReport { lp, single_entry, joint })
}
