//! Loop strategies that enter at a single token: the per-entry optimum,
//! MaxMax (best entry by monetized profit) and MaxPrice (entry at the most
//! expensive token).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::amm::{ComposedSwap, TokenId};
use crate::convex::FlowVector;
use crate::error::{Error, Result};
use crate::graph::Loop;

/// CEX prices in fiat units per token. Missing tokens are absent, never zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriceTable(BTreeMap<TokenId, f64>);

impl PriceTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert or replace a price. Prices must be finite and nonnegative.
    pub fn insert(&mut self, token: TokenId, price: f64) -> Result<()> {
        if !(price.is_finite() && price >= 0.0) {
            return Err(Error::InvalidAmount(price));
        }
        self.0.insert(token, price);
        Ok(())
    }

    pub fn get(&self, token: &TokenId) -> Option<f64> {
        self.0.get(token).copied()
    }

    pub fn require(&self, token: &TokenId) -> Result<f64> {
        self.get(token).ok_or_else(|| Error::MissingPrice(token.to_string()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TokenId, f64)> + '_ {
        self.0.iter().map(|(t, &p)| (t, p))
    }

    /// Every price multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|(t, &p)| (t.clone(), p * factor)).collect())
    }

    /// Prices of the loop's tokens in traversal order; fails on the first
    /// unpriced token.
    pub fn for_loop(&self, lp: &Loop) -> Result<Vec<f64>> {
        lp.tokens().map(|t| self.require(t)).collect()
    }
}

impl FromIterator<(TokenId, f64)> for PriceTable {
    /// Panics on a negative or non-finite price.
    fn from_iter<I: IntoIterator<Item = (TokenId, f64)>>(iter: I) -> Self {
        let mut table = Self::new();
        for (t, p) in iter {
            table.insert(t, p).expect("invalid price");
        }
        table
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    SingleEntry,
    MaxPrice,
    MaxMax,
    ConvexOptimization,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::SingleEntry => "SingleEntry",
            Strategy::MaxPrice => "MaxPrice",
            Strategy::MaxMax => "MaxMax",
            Strategy::ConvexOptimization => "ConvexOptimization",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleEntryResult {
    pub entry_token: TokenId,
    /// Entry-token units.
    pub optimal_input: f64,
    /// `output(optimal_input) − optimal_input`, entry-token units.
    pub profit_tokens: f64,
    pub monetized_profit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyReport {
    pub strategy: Strategy,
    pub lp: Loop,
    /// Entry token of the chosen single-entry trade, if the strategy has one.
    pub entry: Option<TokenId>,
    pub per_entry: Vec<SingleEntryResult>,
    /// Flows aligned with `lp.hops()`.
    pub flows: FlowVector,
    pub profit_by_token: BTreeMap<TokenId, f64>,
    pub monetized_profit: f64,
}

/// Root of `output'(Δ) = 1` by bisection on `[0, U]`, `U` found by doubling
/// from the composed input-side scale. Returns 0 when the marginal rate at
/// zero is at most one.
pub fn bisect_optimal_input(swap: &ComposedSwap) -> f64 {
    const RESIDUAL: f64 = 1e-12;
    if swap.derivative(0.0) <= 1.0 {
        return 0.0;
    }
    let mut hi = swap.coeff_b;
    while swap.derivative(hi) > 1.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let residual = swap.derivative(mid) - 1.0;
        if residual == 0.0 {
            return mid;
        }
        if residual > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if residual.abs() <= RESIDUAL && hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Best trade that starts and ends at `entry`, going around `lp` in its
/// direction.
pub fn optimize_single_entry(lp: &Loop, entry: &TokenId, prices: &PriceTable) -> Result<SingleEntryResult> {
    let rotated = lp.rotated_to(entry)?;
    let price = prices.require(entry)?;
    let swap = rotated.composed();
    let optimal_input = swap.optimal_input();
    let profit_tokens = swap.max_profit();
    Ok(SingleEntryResult {
        entry_token: entry.clone(),
        optimal_input,
        profit_tokens,
        monetized_profit: profit_tokens * price,
    })
}

/// Hop flows of a single-entry trade feeding `input` of `entry` around the
/// loop, aligned with `lp.hops()`.
pub fn single_entry_flows(lp: &Loop, entry: &TokenId, input: f64) -> Result<FlowVector> {
    let start = lp.position_of(entry).ok_or_else(|| Error::UnknownToken {
        token: entry.to_string(),
        context: format!("loop {lp}"),
    })?;
    let n = lp.len();
    let mut flows = FlowVector::zeros(n);
    let mut amount = input;
    for k in 0..n {
        let i = (start + k) % n;
        flows.inputs[i] = amount;
        amount = lp.hops()[i].swap(amount);
        flows.outputs[i] = amount;
    }
    Ok(flows)
}

fn single_entry_report(strategy: Strategy, lp: &Loop, best: &SingleEntryResult, per_entry: Vec<SingleEntryResult>) -> Result<StrategyReport> {
    let flows = single_entry_flows(lp, &best.entry_token, best.optimal_input)?;
    let mut profit_by_token: BTreeMap<TokenId, f64> = lp.tokens().map(|t| (t.clone(), 0.0)).collect();
    profit_by_token.insert(best.entry_token.clone(), best.profit_tokens);
    Ok(StrategyReport {
        strategy,
        lp: lp.clone(),
        entry: Some(best.entry_token.clone()),
        per_entry,
        flows,
        profit_by_token,
        monetized_profit: best.monetized_profit,
    })
}

/// Tokens of the loop in canonical (sorted) order.
fn canonical_tokens(lp: &Loop) -> Vec<&TokenId> {
    let mut tokens: Vec<&TokenId> = lp.tokens().collect();
    tokens.sort();
    tokens
}

/// Optimize every entry token and keep the largest monetized profit; ties
/// go to the canonically smallest token.
pub fn maxmax(lp: &Loop, prices: &PriceTable) -> Result<StrategyReport> {
    prices.for_loop(lp)?;
    let per_entry = canonical_tokens(lp)
        .into_iter()
        .map(|t| optimize_single_entry(lp, t, prices))
        .collect::<Result<Vec<_>>>()?;
    let mut best = &per_entry[0];
    for r in &per_entry[1..] {
        if r.monetized_profit > best.monetized_profit {
            best = r;
        }
    }
    let best = best.clone();
    single_entry_report(Strategy::MaxMax, lp, &best, per_entry)
}

/// Enter only at the token with the highest CEX price.
pub fn maxprice(lp: &Loop, prices: &PriceTable) -> Result<StrategyReport> {
    let tokens = canonical_tokens(lp);
    let mut entry = tokens[0];
    let mut top = prices.require(entry)?;
    for &t in &tokens[1..] {
        let p = prices.require(t)?;
        if p > top {
            entry = t;
            top = p;
        }
    }
    let best = optimize_single_entry(lp, entry, prices)?;
    single_entry_report(Strategy::MaxPrice, lp, &best, vec![best.clone()])
}
