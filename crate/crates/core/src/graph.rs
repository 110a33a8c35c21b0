//! Token graph: pools are edges, tokens are nodes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;

use crate::amm::{compose_path, ComposedSwap, Hop, Pool, TokenId};
use crate::error::{Error, Result};
use crate::strategies::PriceTable;

/// Filtered set of pools. Parallel pools for one token pair are kept as
/// distinct edges.
#[derive(Debug, Clone, Default)]
pub struct MarketSnapshot {
    pools: Vec<Pool>,
    tokens: BTreeSet<TokenId>,
    dropped: usize,
}

impl MarketSnapshot {
    /// Snapshot of all given pools, without filtering.
    pub fn from_pools(pools: Vec<Pool>) -> Self {
        let tokens = pools.iter().flat_map(|p| [p.token_a().clone(), p.token_b().clone()]).collect();
        Self { pools, tokens, dropped: 0 }
    }

    pub fn pools(&self) -> &[Pool] {
        &self.pools
    }

    pub fn tokens(&self) -> &BTreeSet<TokenId> {
        &self.tokens
    }

    /// Number of pools removed by the liquidity filters.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    /// Neighbour lists sorted by (neighbour, pool index).
    fn adjacency(&self) -> BTreeMap<&TokenId, Vec<(&TokenId, usize)>> {
        let mut adj: BTreeMap<&TokenId, Vec<(&TokenId, usize)>> = BTreeMap::new();
        for (i, p) in self.pools.iter().enumerate() {
            adj.entry(p.token_a()).or_default().push((p.token_b(), i));
            adj.entry(p.token_b()).or_default().push((p.token_a(), i));
        }
        for list in adj.values_mut() {
            list.sort();
        }
        adj
    }
}

/// Keep pools with `TVL ≥ min_tvl_usd` and both reserves `≥ min_reserve`.
///
/// TVL is `Σ reserve · CEX price` over the two tokens. With a positive TVL
/// threshold, pools touching an unpriced token are dropped.
pub fn build_graph(pools: &[Pool], min_tvl_usd: f64, min_reserve: f64, prices: &PriceTable) -> MarketSnapshot {
    let kept: Vec<Pool> = pools
        .iter()
        .filter(|p| p.reserve_a() >= min_reserve && p.reserve_b() >= min_reserve)
        .filter(|p| {
            if min_tvl_usd <= 0.0 {
                return true;
            }
            match (prices.get(p.token_a()), prices.get(p.token_b())) {
                (Some(pa), Some(pb)) => p.tvl(pa, pb) >= min_tvl_usd,
                _ => false,
            }
        })
        .cloned()
        .collect();
    let dropped = pools.len() - kept.len();
    MarketSnapshot { dropped, ..MarketSnapshot::from_pools(kept) }
}

/// An ordered cycle of hops that returns to its first input token.
#[derive(Debug, Clone, PartialEq)]
pub struct Loop {
    hops: Vec<Hop>,
}

impl Loop {
    pub fn new(hops: Vec<Hop>) -> Result<Self> {
        if hops.len() < 2 {
            return Err(Error::InvalidLoop(format!("a loop needs at least 2 hops, got {}", hops.len())));
        }
        for (i, hop) in hops.iter().enumerate() {
            let next = &hops[(i + 1) % hops.len()];
            if hop.output_token() != next.input_token() {
                return Err(Error::BrokenChain(format!(
                    "hop {i} outputs {} but hop {} takes {}",
                    hop.output_token(),
                    (i + 1) % hops.len(),
                    next.input_token()
                )));
            }
        }
        let distinct: BTreeSet<&TokenId> = hops.iter().map(Hop::input_token).collect();
        if distinct.len() != hops.len() {
            return Err(Error::InvalidLoop("tokens along the loop are not distinct".into()));
        }
        Ok(Self { hops })
    }

    /// Loop visiting `tokens` in order and closing back to the first one,
    /// using the first pool in `pools` for each consecutive pair.
    pub fn from_tokens(pools: &[Pool], tokens: &[TokenId]) -> Result<Self> {
        let hops = (0..tokens.len())
            .map(|i| {
                let (from, to) = (&tokens[i], &tokens[(i + 1) % tokens.len()]);
                let pool = pools
                    .iter()
                    .find(|p| p.contains(from) && p.contains(to) && from != to)
                    .ok_or_else(|| Error::UnknownToken {
                        token: format!("{from}/{to}"),
                        context: "the snapshot's pool pairs".into(),
                    })?;
                Hop::new(pool.clone(), from)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(hops)
    }

    pub fn hops(&self) -> &[Hop] {
        &self.hops
    }

    pub fn len(&self) -> usize {
        self.hops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hops.is_empty()
    }

    pub fn entry_token(&self) -> &TokenId {
        self.hops[0].input_token()
    }

    /// Tokens in traversal order, starting at the entry token.
    pub fn tokens(&self) -> impl Iterator<Item = &TokenId> + '_ {
        self.hops.iter().map(Hop::input_token)
    }

    pub fn position_of(&self, token: &TokenId) -> Option<usize> {
        self.hops.iter().position(|h| h.input_token() == token)
    }

    /// Same cycle and direction, entered at `entry`.
    pub fn rotated_to(&self, entry: &TokenId) -> Result<Self> {
        let k = self.position_of(entry).ok_or_else(|| Error::UnknownToken {
            token: entry.to_string(),
            context: format!("loop {self}"),
        })?;
        let mut hops = self.hops.clone();
        hops.rotate_left(k);
        Ok(Self { hops })
    }

    /// Opposite traversal direction through the same pools.
    pub fn reversed(&self) -> Self {
        let hops = self
            .hops
            .iter()
            .rev()
            .map(|h| Hop::new(h.pool().clone(), h.output_token()).expect("output token belongs to its pool"))
            .collect();
        Self { hops }
    }

    /// Closed form of one full turn starting from the entry token.
    pub fn composed(&self) -> ComposedSwap {
        compose_path(&self.hops).expect("loop hops chain by construction")
    }

    /// `Σ log p` over the hops.
    pub fn log_price_sum(&self) -> f64 {
        self.hops.iter().map(|h| h.relative_price().ln()).sum()
    }
}

impl fmt::Display for Loop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for hop in &self.hops {
            write!(f, "{}>", hop.input_token())?;
        }
        write!(f, "{}", self.entry_token())
    }
}

/// Whether the product of relative prices exceeds one, with its log-sum.
pub fn is_arbitrage_loop(lp: &Loop) -> (bool, f64) {
    let log_sum = lp.log_price_sum();
    (log_sum > 0.0, log_sum)
}

/// All simple directed cycles through exactly `length` distinct tokens.
///
/// Each cycle is reported once, entered at its smallest token; both
/// traversal directions are returned. Output is sorted by token sequence,
/// then by pool index.
pub fn enumerate_loops(snapshot: &MarketSnapshot, length: usize) -> Vec<Loop> {
    if length < 2 {
        return Vec::new();
    }
    let adj = snapshot.adjacency();
    let starts: Vec<&TokenId> = adj.keys().copied().collect();
    starts
        .par_iter()
        .map(|&start| {
            let mut found = Vec::new();
            let mut path: Vec<(&TokenId, usize)> = Vec::with_capacity(length);
            let mut visited: BTreeSet<&TokenId> = BTreeSet::new();
            visited.insert(start);
            extend(&adj, start, start, length, &mut path, &mut visited, &mut found);
            found
                .into_iter()
                .map(|hops: Vec<(&TokenId, usize)>| {
                    let hops = hops
                        .into_iter()
                        .map(|(input, pool)| Hop::new(snapshot.pools[pool].clone(), input).expect("adjacent pool"))
                        .collect();
                    Loop { hops }
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

fn extend<'a>(
    adj: &BTreeMap<&'a TokenId, Vec<(&'a TokenId, usize)>>,
    start: &'a TokenId,
    current: &'a TokenId,
    length: usize,
    path: &mut Vec<(&'a TokenId, usize)>,
    visited: &mut BTreeSet<&'a TokenId>,
    found: &mut Vec<Vec<(&'a TokenId, usize)>>,
) {
    let Some(neighbours) = adj.get(current) else { return };
    if path.len() + 1 == length {
        for &(next, pool) in neighbours {
            if next == start {
                let mut cycle = path.clone();
                cycle.push((current, pool));
                found.push(cycle);
            }
        }
        return;
    }
    for &(next, pool) in neighbours {
        // Only tokens greater than the start keep the start canonical.
        if next <= start || visited.contains(next) {
            continue;
        }
        visited.insert(next);
        path.push((current, pool));
        extend(adj, start, next, length, path, visited, found);
        path.pop();
        visited.remove(next);
    }
}
