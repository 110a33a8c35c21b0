mod common;

use cpmm_arb_core::{check_kkt, maxmax, maxprice, solve_convex, solve_equality_variant, Error, DEFAULT_TOLERANCE};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn relaxed_solution_dominates_maxmax_and_is_certified() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_kkt: f64 = 0.0;
    let mut max_steps = 0;
    for case in 0..300 {
        let (lp, prices) = common::random_oriented(&mut rng, 3 + case % 3, true);
        let mm = maxmax(&lp, &prices).unwrap();
        let mp = maxprice(&lp, &prices).unwrap();
        let sol = match solve_convex(&lp, &prices, DEFAULT_TOLERANCE) {
            Ok(s) => s,
            Err(Error::NotConverged { iterations, best }) => {
                panic!("case {case} {lp}: no convergence in {iterations} steps, best {:?}", best.monetized_profit)
            }
            Err(e) => panic!("{e}"),
        };
        assert!(mp.monetized_profit <= mm.monetized_profit);
        assert!(
            mm.monetized_profit <= sol.monetized_profit + 1e-6 * (1.0 + sol.monetized_profit),
            "case {case}: maxmax {} convex {}",
            mm.monetized_profit,
            sol.monetized_profit
        );
        for v in sol.profit_by_token.values() {
            assert!(*v >= -1e-9 * (1.0 + v.abs()));
        }
        assert_eq!(check_kkt(&lp, &prices, &sol.flows).unwrap(), sol.kkt_residual);
        worst_kkt = worst_kkt.max(sol.kkt_residual);
        max_steps = max_steps.max(sol.iterations);
    }
    assert!(worst_kkt <= 1e-8, "worst KKT residual {worst_kkt:e}");
    eprintln!("worst KKT residual {worst_kkt:e}, most Newton steps {max_steps}");
}

#[test]
fn equality_variant_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..100 {
        let (lp, prices) = common::random_oriented(&mut rng, 3 + case % 4, true);
        for entry in lp.tokens() {
            let single = cpmm_arb_core::optimize_single_entry(&lp, entry, &prices).unwrap();
            let sol = solve_equality_variant(&lp, entry, &prices, DEFAULT_TOLERANCE).unwrap();
            let tol = DEFAULT_TOLERANCE * (1.0 + single.monetized_profit);
            assert!(
                (sol.monetized_profit - single.monetized_profit).abs() <= tol,
                "case {case} entry {entry}: {} vs {}",
                sol.monetized_profit,
                single.monetized_profit
            );
            for (i, hop) in lp.hops().iter().enumerate() {
                let expect = hop.swap(sol.flows.inputs[i]);
                assert!((sol.flows.outputs[i] - expect).abs() <= 1e-9 * expect.max(f64::MIN_POSITIVE));
            }
        }
    }
}
