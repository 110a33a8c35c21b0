//! Brute-force grid searches used to cross-check the analytic optimum and
//! the convex solver. They evaluate swaps hop by hop and never touch the
//! composed closed form except to size the search box.

use rayon::prelude::*;

use crate::amm::{Hop, TokenId};
use crate::error::{Error, Result};
use crate::graph::Loop;
use crate::strategies::PriceTable;

/// Best single-entry trade found on an even grid of inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleEntryGrid {
    pub entry: TokenId,
    pub points: usize,
    /// Upper end of the scanned interval `[0, 2·optimum + 1]`.
    pub upper: f64,
    pub best_input: f64,
    /// Profit in entry tokens.
    pub best_profit: f64,
    /// Largest possible shortfall of `best_profit` below the true optimum.
    pub bound: f64,
}

/// Best joint trade on a length-3 loop found on a grid over the entry input
/// and the fractions of the first two outputs forwarded to the next hop.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopGrid {
    pub points_per_axis: usize,
    pub best_input: f64,
    pub best_fractions: [f64; 2],
    /// Monetized value of the best grid point.
    pub best_value: f64,
    /// Largest possible shortfall of `best_value` below the best trade in
    /// the family, from the grid spacing.
    pub bound: f64,
}

fn nested(hops: &[&Hop], amount: f64) -> f64 {
    hops.iter().fold(amount, |a, h| h.swap(a))
}

/// `d out / d in` of one hop.
fn hop_slope(hop: &Hop, amount_in: f64) -> f64 {
    let (x, y, g) = (hop.input_reserve(), hop.output_reserve(), hop.gamma());
    let d = x + g * amount_in;
    g * x * y / (d * d)
}

/// Chain-rule slope of the nested swaps at `amount`.
fn nested_slope(hops: &[&Hop], amount: f64) -> f64 {
    let mut a = amount;
    let mut slope = 1.0;
    for h in hops {
        slope *= hop_slope(h, a);
        a = h.swap(a);
    }
    slope
}

fn grid(lo: f64, hi: f64, points: usize) -> impl Fn(usize) -> f64 {
    let step = if points > 1 { (hi - lo) / (points - 1) as f64 } else { 0.0 };
    move |k| if points > 1 && k == points - 1 { hi } else { lo + step * k as f64 }
}

/// Scan `points` evenly spaced entry inputs over `[0, 2·Δ* + 1]`, with `Δ*`
/// the closed-form optimum. Profit is concave, so the nearest grid point to
/// the optimum loses at most `h·max|F′ − 1|`, the slope extremes sitting at
/// the interval ends.
pub fn single_entry_grid(lp: &Loop, entry: &TokenId, points: usize) -> Result<SingleEntryGrid> {
    if points < 2 {
        return Err(Error::InvalidAmount(points as f64));
    }
    let rotated = lp.rotated_to(entry)?;
    let hops: Vec<&Hop> = rotated.hops().iter().collect();
    let upper = 2.0 * rotated.composed().optimal_input() + 1.0;
    let at = grid(0.0, upper, points);
    let (best_input, best_profit) = (0..points)
        .into_par_iter()
        .map(|k| {
            let d = at(k);
            (d, nested(&hops, d) - d)
        })
        .reduce(|| (0.0, f64::NEG_INFINITY), |p, q| if q.1 > p.1 || (q.1 == p.1 && q.0 < p.0) { q } else { p });
    let h = upper / (points - 1) as f64;
    let steepest = (nested_slope(&hops, 0.0) - 1.0).abs().max((nested_slope(&hops, upper) - 1.0).abs());
    Ok(SingleEntryGrid { entry: entry.clone(), points, upper, best_input, best_profit, bound: h * steepest })
}

/// Grid search over `(Δ, f1, f2)` for a length-3 loop entered at its first
/// token: hop 0 takes `Δ`, hop 1 takes `f1·out0`, hop 2 takes `f2·out1`, and
/// points whose final output falls short of `Δ` are skipped. Every such
/// point is a feasible joint trade, so `best_value` never exceeds the joint
/// optimum. `Δ` ranges up to the break-even input beyond which no forwarding
/// choice returns the stake.
pub fn convex_grid(lp: &Loop, prices: &PriceTable, points_per_axis: usize) -> Result<LoopGrid> {
    if lp.len() != 3 {
        return Err(Error::InvalidLoop(format!("the joint grid needs a length-3 loop, got {}", lp.len())));
    }
    if points_per_axis < 2 {
        return Err(Error::InvalidAmount(points_per_axis as f64));
    }
    let price = prices.for_loop(lp)?;
    let [h0, h1, h2] = [&lp.hops()[0], &lp.hops()[1], &lp.hops()[2]];
    let upper = lp.composed().break_even_input().max(0.0);
    let n = points_per_axis;
    let input_at = grid(0.0, upper, n);
    let fraction_at = grid(0.0, 1.0, n);

    let value = |d: f64, f1: f64, f2: f64| -> Option<f64> {
        let out0 = h0.swap(d);
        let out1 = h1.swap(f1 * out0);
        let out2 = h2.swap(f2 * out1);
        (out2 >= d).then(|| price[0] * (out2 - d) + price[1] * (1.0 - f1) * out0 + price[2] * (1.0 - f2) * out1)
    };
    let best = (0..n)
        .into_par_iter()
        .map(|i| {
            let d = input_at(i);
            let mut best = (0.0, [0.0, 0.0], f64::NEG_INFINITY);
            for j in 0..n {
                let f1 = fraction_at(j);
                for k in 0..n {
                    let f2 = fraction_at(k);
                    if let Some(v) = value(d, f1, f2) {
                        if v > best.2 {
                            best = (d, [f1, f2], v);
                        }
                    }
                }
            }
            best
        })
        .reduce(|| (0.0, [0.0, 0.0], f64::NEG_INFINITY), |p, q| if q.2 > p.2 { q } else { p });

    // Lipschitz constants over the box from the steepest marginal rates.
    let (m0, m1, m2) = (hop_slope(h0, 0.0), hop_slope(h1, 0.0), hop_slope(h2, 0.0));
    let out0_max = h0.swap(upper);
    let out1_max = h1.swap(out0_max);
    let lip_input = price[0] * (1.0 + m0 * m1 * m2) + price[1] * m0 + price[2] * m0 * m1;
    let lip_f1 = out0_max * (price[1] + price[2] * m1 + price[0] * m1 * m2);
    let lip_f2 = out1_max * (price[2] + price[0] * m2);
    let (h_input, h_fraction) = (upper / (n - 1) as f64, 1.0 / (n - 1) as f64);
    let bound = h_input * lip_input + h_fraction * (lip_f1 + lip_f2);

    Ok(LoopGrid { points_per_axis: n, best_input: best.0, best_fractions: best.1, best_value: best.2, bound })
}
