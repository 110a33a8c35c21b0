#![allow(dead_code)]

use cpmm_arb_core::{Hop, Loop, Pool, PriceTable, TokenId};
use rand::Rng;

pub fn worked_pools() -> Vec<Pool> {
    vec![
        Pool::new("X".into(), "Y".into(), 100.0, 200.0, 0.003).unwrap(),
        Pool::new("Y".into(), "Z".into(), 300.0, 200.0, 0.003).unwrap(),
        Pool::new("Z".into(), "X".into(), 200.0, 400.0, 0.003).unwrap(),
    ]
}

pub fn worked_loop() -> Loop {
    Loop::from_tokens(&worked_pools(), &["X".into(), "Y".into(), "Z".into()]).unwrap()
}

pub fn worked_prices(px: f64) -> PriceTable {
    [("X", px), ("Y", 10.2), ("Z", 20.0)].into_iter().map(|(t, p)| (TokenId::from(t), p)).collect()
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.gen_range(lo.log10()..hi.log10()))
}

/// Loop over tokens `T0..T{len}` with reserves log-uniform in [1e2, 1e7],
/// prices log-uniform in [1e-3, 1e3] and the default fee.
pub fn random_instance<R: Rng>(rng: &mut R, len: usize) -> (Loop, PriceTable) {
    let names: Vec<TokenId> = (0..len).map(|i| TokenId::new(format!("T{i}")).unwrap()).collect();
    let hops = (0..len)
        .map(|i| {
            let (a, b) = (&names[i], &names[(i + 1) % len]);
            let pool = Pool::new(a.clone(), b.clone(), log_uniform(rng, 1e2, 1e7), log_uniform(rng, 1e2, 1e7), 0.003).unwrap();
            Hop::new(pool, a).unwrap()
        })
        .collect();
    let prices = names.iter().map(|t| (t.clone(), log_uniform(rng, 1e-3, 1e3))).collect();
    (Loop::new(hops).unwrap(), prices)
}

/// Random instance of the requested kind, oriented so that its log price
/// sum has the requested sign.
pub fn random_oriented<R: Rng>(rng: &mut R, len: usize, arbitrage: bool) -> (Loop, PriceTable) {
    loop {
        let (lp, prices) = random_instance(rng, len);
        let sum = lp.log_price_sum();
        if sum.abs() < 1e-9 {
            continue;
        }
        let lp = if (sum > 0.0) == arbitrage { lp } else { lp.reversed() };
        // Reversal of a profitable loop need not be profitable, and vice versa.
        if (lp.log_price_sum() > 0.0) == arbitrage {
            return (lp, prices);
        }
    }
}
