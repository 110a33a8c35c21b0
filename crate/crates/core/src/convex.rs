//! Joint flow optimization over one loop.
//!
//! Every hop `i` gets its own input `in_i` and output `out_i`. The relaxed
//! program maximizes `Σ_T price(T)·net(T)` subject to
//!
//! * the pool curve `(x_i + γ·in_i)(y_i − out_i) ≥ x_i·y_i`,
//! * the risk-free chain `out_i ≥ in_{i+1}` (cyclic), so no token is net-spent,
//! * `in_i ≥ 0`.
//!
//! Fixing the chain to equalities everywhere except at the entry token gives
//! back the single-entry problem ([`solve_equality_variant`]).
//!
//! Both programs are solved by a log-barrier interior-point method. The
//! relaxed program measures each flow relative to the MaxMax trade,
//! `z = flow / reference − 1`, so slacks near the optimum keep full
//! precision; in reserve units the curve reads `v − φ(u) ≤ 0` with
//! `φ(u) = γu / (1 + γu)`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::amm::{Hop, TokenId};
use crate::error::{Error, Result};
use crate::graph::{is_arbitrage_loop, Loop};
use crate::nnls::nnls;
use crate::strategies::{maxmax, optimize_single_entry, PriceTable};

pub const DEFAULT_TOLERANCE: f64 = 1e-8;

const MAX_NEWTON_STEPS: usize = 500;
const BARRIER_DECREASE: f64 = 10.0;
const CENTERING_TOLERANCE: f64 = 1e-10;
/// Outputs stay below `(1 − RESERVE_MARGIN)·reserve`.
const RESERVE_MARGIN: f64 = 1e-9;
/// Relative slack allowed on `(x + γ·in)(y − out) ≥ x·y` when certifying.
const POOL_SLACK: f64 = 1e-9;
/// Slack allowed on chain and sign constraints, relative to the reserve.
const CHAIN_SLACK: f64 = 1e-12;

/// Per-hop amounts aligned with [`Loop::hops`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowVector {
    /// `in_i`, in units of hop `i`'s input token.
    pub inputs: Vec<f64>,
    /// `out_i`, in units of hop `i`'s output token.
    pub outputs: Vec<f64>,
}

impl FlowVector {
    pub fn zeros(n: usize) -> Self {
        Self { inputs: vec![0.0; n], outputs: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// `Σ out` minus `Σ in` per token.
    pub fn net_by_token(&self, lp: &Loop) -> BTreeMap<TokenId, f64> {
        let mut net: BTreeMap<TokenId, f64> = lp.tokens().map(|t| (t.clone(), 0.0)).collect();
        for (i, hop) in lp.hops().iter().enumerate() {
            *net.get_mut(hop.output_token()).expect("loop token") += self.outputs[i];
            *net.get_mut(hop.input_token()).expect("loop token") -= self.inputs[i];
        }
        net
    }

    pub fn monetize(&self, lp: &Loop, prices: &PriceTable) -> Result<f64> {
        self.net_by_token(lp).iter().map(|(t, v)| Ok(prices.require(t)? * v)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexSolution {
    pub flows: FlowVector,
    pub profit_by_token: BTreeMap<TokenId, f64>,
    pub monetized_profit: f64,
    pub kkt_residual: f64,
    /// Newton steps taken.
    pub iterations: usize,
}

/// Solve the relaxed risk-free program for `lp`.
///
/// Loops without arbitrage (log price sum ≤ 0) and all-zero price tables
/// return the zero flow, which is optimal there. Otherwise the barrier
/// method starts from the best single-entry trade at half its optimal input.
pub fn solve_convex(lp: &Loop, prices: &PriceTable, tolerance: f64) -> Result<ConvexSolution> {
    check_tolerance(tolerance)?;
    let best = maxmax(lp, prices)?;
    let (arbitrage, _) = is_arbitrage_loop(lp);
    let scale = best.monetized_profit;
    if !arbitrage || scale <= 0.0 {
        return finish_relaxed(lp, prices, FlowVector::zeros(lp.len()), 0);
    }
    let reference = &best.flows;
    if reference.inputs.iter().chain(&reference.outputs).any(|&f| !(f > 0.0)) {
        return finish_relaxed(lp, prices, best.flows, 0);
    }
    let program = relaxed_program(lp, prices, scale, reference)?;
    let entry = lp.position_of(best.entry.as_ref().expect("maxmax picks an entry")).expect("entry on loop");
    let optimal = best.per_entry.iter().find(|r| Some(&r.entry_token) == best.entry.as_ref()).expect("entry result");
    let Some(start) = relaxed_start(lp, reference, entry, 0.5 * optimal.optimal_input) else {
        // Profit too thin for a strictly interior point; the single-entry
        // trade is feasible and as good as anything measurable.
        return finish_relaxed(lp, prices, best.flows, 0);
    };
    match barrier_solve(&program, start, tolerance) {
        Ok((z, steps)) => finish_relaxed(lp, prices, relaxed_flows(reference, &z), steps),
        Err((z, steps)) => Err(Error::NotConverged {
            iterations: steps,
            best: Box::new(finish_relaxed(lp, prices, relaxed_flows(reference, &z), steps)?),
        }),
    }
}

/// Solve the program with equality chain constraints everywhere except the
/// closure back into `entry`; equivalent to the single-entry problem.
pub fn solve_equality_variant(lp: &Loop, entry: &TokenId, prices: &PriceTable, tolerance: f64) -> Result<ConvexSolution> {
    check_tolerance(tolerance)?;
    prices.for_loop(lp)?;
    let single = optimize_single_entry(lp, entry, prices)?;
    let rotated = lp.rotated_to(entry)?;
    let offset = lp.position_of(entry).expect("entry on loop");
    let scale = single.monetized_profit;
    if scale <= 0.0 {
        let flows = FlowVector::zeros(lp.len());
        return solution(lp, prices, flows, 0.0, 0);
    }
    let program = equality_program(&rotated, prices.require(entry)?, scale);
    let Some(start) = equality_start(&rotated, 0.5 * single.optimal_input) else {
        let flows = crate::strategies::single_entry_flows(lp, entry, single.optimal_input)?;
        return solution(lp, prices, flows, 0.0, 0);
    };
    let finish = |z: &DVector<f64>, steps: usize| -> Result<ConvexSolution> {
        let flows = unrotate(equality_flows(&rotated, z), offset);
        let z_final = equality_point(&rotated, &rotate(&flows, offset));
        let residual = kkt_residual(&program, &z_final);
        solution(lp, prices, flows, residual, steps)
    };
    match barrier_solve(&program, start, tolerance) {
        Ok((z, steps)) => finish(&z, steps),
        Err((z, steps)) => Err(Error::NotConverged { iterations: steps, best: Box::new(finish(&z, steps)?) }),
    }
}

/// KKT residual of `flows` for the relaxed program: the larger of the
/// stationarity and complementary-slackness violations under the best
/// nonnegative multipliers. Flows are measured as fractions of the MaxMax
/// trade and the objective is divided by the MaxMax profit, then by its
/// largest coefficient when that exceeds one. Without a MaxMax trade, pool
/// reserves and the largest reserve value stand in.
pub fn check_kkt(lp: &Loop, prices: &PriceTable, flows: &FlowVector) -> Result<f64> {
    if flows.len() != lp.len() {
        return Err(Error::Infeasible(format!("{} flows for a loop of {} hops", flows.len(), lp.len())));
    }
    check_feasible(lp, flows)?;
    let (scale, reference) = normalization(lp, prices)?;
    let program = relaxed_program(lp, prices, scale, &reference)?;
    Ok(kkt_residual(&program, &relaxed_point(&reference, flows)))
}

fn check_tolerance(tolerance: f64) -> Result<()> {
    if tolerance.is_finite() && tolerance > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidAmount(tolerance))
    }
}

/// Objective and flow units for the relaxed program.
fn normalization(lp: &Loop, prices: &PriceTable) -> Result<(f64, FlowVector)> {
    let mm = maxmax(lp, prices)?;
    if mm.monetized_profit > 0.0 && mm.flows.inputs.iter().chain(&mm.flows.outputs).all(|&f| f > 0.0) {
        return Ok((mm.monetized_profit, mm.flows));
    }
    let reserves = FlowVector {
        inputs: lp.hops().iter().map(Hop::input_reserve).collect(),
        outputs: lp.hops().iter().map(Hop::output_reserve).collect(),
    };
    let price = prices.for_loop(lp)?;
    let n = lp.len();
    let largest = lp
        .hops()
        .iter()
        .enumerate()
        .map(|(i, h)| (price[i] * h.input_reserve()).max(price[(i + 1) % n] * h.output_reserve()))
        .fold(0.0, f64::max);
    Ok((if largest > 0.0 { largest } else { 1.0 }, reserves))
}

fn check_feasible(lp: &Loop, flows: &FlowVector) -> Result<()> {
    let n = lp.len();
    for (i, hop) in lp.hops().iter().enumerate() {
        let (x, y) = (hop.input_reserve(), hop.output_reserve());
        let (inp, out) = (flows.inputs[i], flows.outputs[i]);
        if !(inp.is_finite() && out.is_finite()) {
            return Err(Error::Infeasible(format!("hop {i}: non-finite flow")));
        }
        if inp < -CHAIN_SLACK * x || out < -CHAIN_SLACK * y {
            return Err(Error::Infeasible(format!("hop {i}: negative flow (in {inp}, out {out})")));
        }
        let slack = (1.0 + hop.gamma() * inp / x) * (1.0 - out / y) - 1.0;
        if slack < -POOL_SLACK {
            return Err(Error::Infeasible(format!(
                "hop {i} ({}): pool constraint violated by {:.3e} (relative)",
                hop.pool(),
                -slack
            )));
        }
        let next = (i + 1) % n;
        if out - flows.inputs[next] < -CHAIN_SLACK * y {
            return Err(Error::Infeasible(format!(
                "hop {i} outputs {out} {} but hop {next} spends {}",
                hop.output_token(),
                flows.inputs[next]
            )));
        }
    }
    Ok(())
}

fn solution(lp: &Loop, prices: &PriceTable, flows: FlowVector, kkt_residual: f64, iterations: usize) -> Result<ConvexSolution> {
    let profit_by_token = flows.net_by_token(lp);
    let monetized_profit = flows.monetize(lp, prices)?;
    Ok(ConvexSolution { flows, profit_by_token, monetized_profit, kkt_residual, iterations })
}

fn finish_relaxed(lp: &Loop, prices: &PriceTable, flows: FlowVector, steps: usize) -> Result<ConvexSolution> {
    let flows = implementable(lp, flows);
    let residual = check_kkt(lp, prices, &flows)?;
    solution(lp, prices, flows, residual, steps)
}

/// Largest output for `amount_in` that keeps the pool product exactly at
/// or above its old value and below the reserve margin.
fn safe_output(hop: &Hop, amount_in: f64) -> f64 {
    let (x, y, g) = (hop.input_reserve(), hop.output_reserve(), hop.gamma());
    let mut out = hop.swap(amount_in).min((1.0 - RESERVE_MARGIN) * y);
    while out > 0.0 && (x + g * amount_in) * (y - out) < x * y {
        out = f64::from_bits(out.to_bits() - 1);
    }
    out
}

/// Round flows onto an exactly feasible point: inputs never exceed the
/// preceding output, outputs sit on the pool curve. Raising an output to the
/// curve only loosens the chain and cannot lower the objective.
fn implementable(lp: &Loop, mut flows: FlowVector) -> FlowVector {
    let n = lp.len();
    for v in flows.inputs.iter_mut().chain(flows.outputs.iter_mut()) {
        *v = v.max(0.0);
    }
    for i in 0..n {
        flows.outputs[i] = safe_output(&lp.hops()[i], flows.inputs[i]);
    }
    for _ in 0..=n {
        let mut changed = false;
        for i in 0..n {
            let prev = (i + n - 1) % n;
            if flows.inputs[i] > flows.outputs[prev] {
                flows.inputs[i] = flows.outputs[prev];
                flows.outputs[i] = safe_output(&lp.hops()[i], flows.inputs[i]);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    flows
}

// ---------------------------------------------------------------------------
// Program construction

/// `g(z) ≤ 0`, with `z` an offset from a base point so that slacks near
/// the optimum are not lost to rounding in the base coordinates.
#[derive(Debug, Clone)]
enum Constraint {
    /// `constant + Σ coeff·z[idx] ≤ 0`.
    Linear { terms: Vec<(usize, f64)>, constant: f64 },
    /// `out_base + z[out] − φ(in_scale·(in_base + z[input])) / out_scale ≤ 0`
    /// with `φ(w) = γw/(1+γw)`; `offset` is the value at `z = 0`.
    Curve { out: usize, input: usize, in_scale: f64, out_scale: f64, gamma: f64, in_base: f64, offset: f64 },
}

impl Constraint {
    fn linear(terms: Vec<(usize, f64)>, constant: f64) -> Self {
        Constraint::Linear { terms, constant }
    }

    fn curve(out: usize, input: usize, in_scale: f64, out_scale: f64, gamma: f64, in_base: f64, out_base: f64) -> Self {
        let w0 = gamma * in_scale * in_base;
        let offset = out_base - w0 / (1.0 + w0) / out_scale;
        Constraint::Curve { out, input, in_scale, out_scale, gamma, in_base, offset }
    }

    /// `1 + γ·in_scale·(in_base + z[input])`.
    fn curve_denominator(input: usize, in_scale: f64, gamma: f64, in_base: f64, z: &DVector<f64>) -> f64 {
        1.0 + gamma * in_scale * in_base + gamma * in_scale * z[input]
    }

    /// `g(z)`, or `None` outside the domain of `φ`.
    fn value(&self, z: &DVector<f64>) -> Option<f64> {
        match self {
            Constraint::Linear { terms, constant } => Some(constant + terms.iter().map(|&(i, c)| c * z[i]).sum::<f64>()),
            &Constraint::Curve { out, input, in_scale, out_scale, gamma, in_base, offset } => {
                let d = Self::curve_denominator(input, in_scale, gamma, in_base, z);
                if d <= 0.0 {
                    return None;
                }
                let dw = gamma * in_scale * z[input];
                let rise = dw / ((1.0 + gamma * in_scale * in_base) * d);
                Some(offset + z[out] - rise / out_scale)
            }
        }
    }

    fn gradient(&self, z: &DVector<f64>) -> Vec<(usize, f64)> {
        match self {
            Constraint::Linear { terms, .. } => terms.clone(),
            &Constraint::Curve { out, input, in_scale, out_scale, gamma, in_base, .. } => {
                let d = Self::curve_denominator(input, in_scale, gamma, in_base, z);
                vec![(out, 1.0), (input, -gamma * in_scale / (d * d) / out_scale)]
            }
        }
    }

    /// The only nonzero Hessian entry, on the input diagonal.
    fn curvature(&self, z: &DVector<f64>) -> Option<(usize, f64)> {
        match self {
            Constraint::Linear { .. } => None,
            &Constraint::Curve { input, in_scale, out_scale, gamma, in_base, .. } => {
                let gs = gamma * in_scale;
                let d = Self::curve_denominator(input, in_scale, gamma, in_base, z);
                Some((input, 2.0 * gs * gs / (d * d * d) / out_scale))
            }
        }
    }
}

/// Maximize `objective·z` subject to `constraints`.
#[derive(Debug, Clone)]
struct Program {
    objective: DVector<f64>,
    constraints: Vec<Constraint>,
}

impl Program {
    fn dim(&self) -> usize {
        self.objective.len()
    }

    /// Slacks `−g_j(z)`, or `None` unless all are strictly positive.
    fn strict_slacks(&self, z: &DVector<f64>) -> Option<Vec<f64>> {
        self.constraints
            .iter()
            .map(|c| c.value(z).map(|g| -g).filter(|&s| s > 0.0))
            .collect()
    }
}

/// Relaxed program: `z = [u_0..u_n, v_0..v_n]`, flows divided by the
/// matching `reference` flows, minus one. Constraints are ordered curves,
/// chains, then input signs.
fn relaxed_program(lp: &Loop, prices: &PriceTable, scale: f64, reference: &FlowVector) -> Result<Program> {
    let n = lp.len();
    let price = prices.for_loop(lp)?;
    let hops = lp.hops();
    let mut objective = DVector::zeros(2 * n);
    let mut constraints = Vec::with_capacity(3 * n);
    for (i, hop) in hops.iter().enumerate() {
        let (ref_in, ref_out) = (reference.inputs[i], reference.outputs[i]);
        objective[i] = -price[i] * ref_in / scale;
        objective[n + i] = price[(i + 1) % n] * ref_out / scale;
        constraints.push(Constraint::curve(
            n + i,
            i,
            ref_in / hop.input_reserve(),
            ref_out / hop.output_reserve(),
            hop.gamma(),
            1.0,
            1.0,
        ));
    }
    for i in 0..n {
        let next = (i + 1) % n;
        let ratio = reference.inputs[next] / reference.outputs[i];
        constraints.push(Constraint::linear(vec![(next, ratio), (n + i, -1.0)], ratio - 1.0));
    }
    for i in 0..n {
        constraints.push(Constraint::linear(vec![(i, -1.0)], -1.0));
    }
    Ok(Program { objective, constraints })
}

fn relaxed_point(reference: &FlowVector, flows: &FlowVector) -> DVector<f64> {
    let n = reference.len();
    DVector::from_fn(2 * n, |k, _| {
        let (f, r) = if k < n { (flows.inputs[k], reference.inputs[k]) } else { (flows.outputs[k - n], reference.outputs[k - n]) };
        (f - r) / r
    })
}

fn relaxed_flows(reference: &FlowVector, z: &DVector<f64>) -> FlowVector {
    let n = reference.len();
    FlowVector {
        inputs: (0..n).map(|i| reference.inputs[i] + z[i] * reference.inputs[i]).collect(),
        outputs: (0..n).map(|i| reference.outputs[i] + z[n + i] * reference.outputs[i]).collect(),
    }
}

/// Shrink factors tried when pulling a single-entry trade into the interior.
fn shrink_factors() -> impl Iterator<Item = f64> {
    (3..=15).map(|k| 1.0 - 10f64.powi(-k))
}

/// Strictly interior point from a single-entry trade of `input` at hop
/// `entry`, every hand-off shaved by a factor `ρ < 1`.
fn relaxed_start(lp: &Loop, reference: &FlowVector, entry: usize, input: f64) -> Option<DVector<f64>> {
    let n = lp.len();
    if !(input > 0.0) {
        return None;
    }
    let unpriced: PriceTable = lp.tokens().map(|t| (t.clone(), 0.0)).collect();
    let probe = relaxed_program(lp, &unpriced, 1.0, reference).expect("all tokens priced");
    shrink_factors().find_map(|rho| {
        let mut flows = FlowVector::zeros(n);
        let mut amount = input;
        for k in 0..n {
            let i = (entry + k) % n;
            flows.inputs[i] = amount;
            flows.outputs[i] = rho * lp.hops()[i].swap(amount);
            amount = rho * flows.outputs[i];
        }
        let z = relaxed_point(reference, &flows);
        // Checked in normalized coordinates, where the barrier lives.
        probe.strict_slacks(&z).is_some().then_some(z)
    })
}

/// Equality program on a loop rotated to its entry: `z = [u_0, v_0..v_n]`
/// with `in_{k+1} = out_k` substituted.
fn equality_program(rotated: &Loop, entry_price: f64, scale: f64) -> Program {
    let n = rotated.len();
    let hops = rotated.hops();
    let mut objective = DVector::zeros(n + 1);
    objective[0] = -entry_price * hops[0].input_reserve() / scale;
    objective[n] = entry_price * hops[n - 1].output_reserve() / scale;
    let mut constraints = Vec::with_capacity(2 * n + 1);
    constraints.push(Constraint::curve(1, 0, 1.0, 1.0, hops[0].gamma(), 0.0, 0.0));
    for k in 1..n {
        let scale = hops[k - 1].output_reserve() / hops[k].input_reserve();
        constraints.push(Constraint::curve(k + 1, k, scale, 1.0, hops[k].gamma(), 0.0, 0.0));
    }
    let closure = hops[0].input_reserve() / hops[n - 1].output_reserve();
    constraints.push(Constraint::linear(vec![(0, closure), (n, -1.0)], 0.0));
    for k in 0..n {
        constraints.push(Constraint::linear(vec![(k, -1.0)], 0.0));
    }
    Program { objective, constraints }
}

fn equality_flows(rotated: &Loop, z: &DVector<f64>) -> FlowVector {
    let n = rotated.len();
    let hops = rotated.hops();
    let mut flows = FlowVector::zeros(n);
    flows.inputs[0] = z[0].max(0.0) * hops[0].input_reserve();
    for k in 0..n {
        if k > 0 {
            flows.inputs[k] = flows.outputs[k - 1];
        }
        flows.outputs[k] = safe_output(&hops[k], flows.inputs[k]);
    }
    flows
}

fn equality_point(rotated: &Loop, flows: &FlowVector) -> DVector<f64> {
    let n = rotated.len();
    let hops = rotated.hops();
    DVector::from_fn(n + 1, |k, _| {
        if k == 0 { flows.inputs[0] / hops[0].input_reserve() } else { flows.outputs[k - 1] / hops[k - 1].output_reserve() }
    })
}

fn equality_start(rotated: &Loop, input: f64) -> Option<DVector<f64>> {
    if !(input > 0.0) {
        return None;
    }
    let n = rotated.len();
    let hops = rotated.hops();
    shrink_factors().find_map(|rho| {
        let mut flows = FlowVector::zeros(n);
        flows.inputs[0] = input;
        for k in 0..n {
            if k > 0 {
                flows.inputs[k] = flows.outputs[k - 1];
            }
            flows.outputs[k] = rho * hops[k].swap(flows.inputs[k]);
        }
        let z = equality_point(rotated, &flows);
        let probe = equality_program(rotated, 0.0, 1.0);
        (flows.outputs[n - 1] > input && probe.strict_slacks(&z).is_some()).then_some(z)
    })
}

/// Flows of a loop rotated by `offset` mapped back onto the original order.
fn unrotate(flows: FlowVector, offset: usize) -> FlowVector {
    let mut f = flows;
    f.inputs.rotate_right(offset);
    f.outputs.rotate_right(offset);
    f
}

fn rotate(flows: &FlowVector, offset: usize) -> FlowVector {
    let mut f = flows.clone();
    f.inputs.rotate_left(offset);
    f.outputs.rotate_left(offset);
    f
}

// ---------------------------------------------------------------------------
// Barrier method

/// Gradient and Hessian of `−t·c·z − Σ ln s_j(z)`.
fn newton_system(program: &Program, z: &DVector<f64>, slacks: &[f64], t: f64) -> (DVector<f64>, DMatrix<f64>) {
    let dim = program.dim();
    let mut grad = -&program.objective * t;
    let mut hess = DMatrix::zeros(dim, dim);
    for (c, &s) in program.constraints.iter().zip(slacks) {
        let g = c.gradient(z);
        for &(i, gi) in &g {
            grad[i] += gi / s;
            for &(j, gj) in &g {
                hess[(i, j)] += gi * gj / (s * s);
            }
        }
        if let Some((i, h)) = c.curvature(z) {
            hess[(i, i)] += h / s;
        }
    }
    (grad, hess)
}

/// Solve `H·d = −g` after symmetric Jacobi scaling; iterates mix reserve
/// fractions of very different magnitudes.
fn newton_direction(grad: &DVector<f64>, hess: DMatrix<f64>) -> Option<DVector<f64>> {
    let dim = hess.nrows();
    let d = DVector::from_fn(dim, |i, _| {
        let h = hess[(i, i)];
        if h > 0.0 { 1.0 / h.sqrt() } else { 1.0 }
    });
    let scaled = DMatrix::from_fn(dim, dim, |i, j| d[i] * hess[(i, j)] * d[j]);
    let rhs = -grad.component_mul(&d);
    let solved = scaled.clone().cholesky().map(|c| c.solve(&rhs)).or_else(|| {
        (scaled + DMatrix::identity(dim, dim) * 1e-14).cholesky().map(|c| c.solve(&rhs))
    })?;
    Some(solved.component_mul(&d))
}

/// Change in the barrier objective from `z` (slacks `s0`) to `trial`,
/// accumulated term by term to avoid cancelling large totals.
fn barrier_change(program: &Program, t: f64, step: &DVector<f64>, s0: &[f64], trial: &DVector<f64>) -> Option<f64> {
    let s1 = program.strict_slacks(trial)?;
    let log_terms: f64 = s0.iter().zip(&s1).map(|(&a, &b)| ((b - a) / a).ln_1p()).sum();
    Some(-t * program.objective.dot(step) - log_terms)
}

/// Barrier iterations from a strictly feasible `start`. `Err` carries the
/// last iterate when the Newton budget runs out, or when centering stalls
/// at the floating-point floor before the KKT residual meets `tolerance`.
fn barrier_solve(
    program: &Program,
    start: DVector<f64>,
    tolerance: f64,
) -> std::result::Result<(DVector<f64>, usize), (DVector<f64>, usize)> {
    let m = program.constraints.len() as f64;
    let mut z = start;
    let mut t = m;
    let mut steps = 0;
    loop {
        let stalled = center(program, &mut z, t, &mut steps).ok_or_else(|| (z.clone(), steps))?;
        // The target leaves headroom for rounding the iterate onto the curves.
        if m / t <= tolerance || stalled {
            let residual = kkt_residual(program, &z);
            if residual <= 0.1 * tolerance || (stalled && residual <= tolerance) {
                return Ok((z, steps));
            }
            if stalled {
                return Err((z, steps));
            }
        }
        t *= BARRIER_DECREASE;
    }
}

/// Damped Newton on `−t·c·z − Σ ln s_j(z)`. Returns whether progress
/// stalled (the line search only finds negligible steps although the
/// decrement is not yet small), or `None` when the step budget is spent.
fn center(program: &Program, z: &mut DVector<f64>, t: f64, steps: &mut usize) -> Option<bool> {
    loop {
        if *steps >= MAX_NEWTON_STEPS {
            return None;
        }
        let slacks = program.strict_slacks(z).expect("iterates stay strictly feasible");
        let (grad, hess) = newton_system(program, z, &slacks, t);
        let Some(dir) = newton_direction(&grad, hess) else { return Some(true) };
        let decrement = -grad.dot(&dir);
        if !(decrement > 2.0 * CENTERING_TOLERANCE) {
            return Some(false);
        }
        *steps += 1;
        let mut size = 1.0;
        let mut accepted = false;
        while size > 1e-14 {
            let step = &dir * size;
            let trial = &*z + &step;
            if let Some(change) = barrier_change(program, t, &step, &slacks, &trial) {
                if change <= -0.01 * size * decrement {
                    *z = trial;
                    accepted = true;
                    break;
                }
            }
            size *= 0.5;
        }
        // Self-concordance guarantees near-full steps once the decrement is
        // small; anything else is rounding noise.
        if !accepted || (size < 1e-3 && decrement < 1e-3) {
            return Some(true);
        }
    }
}

/// `max(‖Σ λ_j ∇g_j − c‖∞, max_j λ_j·s_j)` under the nonnegative multipliers
/// minimizing the squared sum of both residual groups, with `c` divided by
/// `max(1, ‖c‖∞)`. Constraint gradients are normalized first; the products
/// `λ_j·s_j` do not depend on that.
fn kkt_residual(program: &Program, z: &DVector<f64>) -> f64 {
    let dim = program.dim();
    let m = program.constraints.len();
    let mut a = DMatrix::zeros(dim + m, m);
    for (j, c) in program.constraints.iter().enumerate() {
        let grad = c.gradient(z);
        let norm = grad.iter().map(|&(_, g)| g * g).sum::<f64>().sqrt();
        for &(i, g) in &grad {
            a[(i, j)] += g / norm;
        }
        let slack = c.value(z).map_or(0.0, |g| (-g).max(0.0));
        a[(dim + j, j)] = slack / norm;
    }
    let mut b = DVector::zeros(dim + m);
    let objective_norm = program.objective.amax().max(1.0);
    b.rows_mut(0, dim).copy_from(&(&program.objective / objective_norm));
    let lambda = nnls(&a, &b);
    let r = &a * &lambda - &b;
    let stationarity = r.rows(0, dim).amax();
    let slackness = (0..m).map(|j| (lambda[j] * a[(dim + j, j)]).abs()).fold(0.0, f64::max);
    stationarity.max(slackness)
}
