//! Python bindings. Prices cross the boundary as `dict[str, float]` and
//! strategy results come back as plain dicts.

use std::collections::BTreeMap;
use std::path::PathBuf;

use cpmm_arb_core as core;
use cpmm_arb_core::pipeline::{self, PipelineConfig};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(err: core::Error) -> PyErr {
    match err {
        core::Error::Io { .. } => PyOSError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn token(id: &str) -> PyResult<core::TokenId> {
    core::TokenId::new(id).map_err(to_py)
}

fn price_table(prices: BTreeMap<String, f64>) -> PyResult<core::PriceTable> {
    let mut table = core::PriceTable::new();
    for (k, v) in prices {
        table.insert(token(&k)?, v).map_err(to_py)?;
    }
    Ok(table)
}

fn by_token(map: &BTreeMap<core::TokenId, f64>) -> BTreeMap<String, f64> {
    map.iter().map(|(k, v)| (k.as_str().to_owned(), *v)).collect()
}

/// A constant-product pool.
#[pyclass(name = "Pool", module = "cpmm_arb", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPool(core::Pool);

#[pymethods]
impl PyPool {
    #[new]
    #[pyo3(signature = (token_a, token_b, reserve_a, reserve_b, fee_rate = core::DEFAULT_FEE_RATE))]
    fn new(token_a: &str, token_b: &str, reserve_a: f64, reserve_b: f64, fee_rate: f64) -> PyResult<Self> {
        core::Pool::new(token(token_a)?, token(token_b)?, reserve_a, reserve_b, fee_rate).map(Self).map_err(to_py)
    }

    #[getter]
    fn token_a(&self) -> &str {
        self.0.token_a().as_str()
    }

    #[getter]
    fn token_b(&self) -> &str {
        self.0.token_b().as_str()
    }

    #[getter]
    fn reserve_a(&self) -> f64 {
        self.0.reserve_a()
    }

    #[getter]
    fn reserve_b(&self) -> f64 {
        self.0.reserve_b()
    }

    #[getter]
    fn fee_rate(&self) -> f64 {
        self.0.fee_rate()
    }

    /// Output received for `amount_in` of `input_token`.
    fn swap_out(&self, input_token: &str, amount_in: f64) -> PyResult<f64> {
        core::swap_out(&self.0, &token(input_token)?, amount_in).map_err(to_py)
    }

    /// Price of `token` in units of the other token.
    fn relative_price(&self, of_token: &str) -> PyResult<f64> {
        core::relative_price(&self.0, &token(of_token)?).map_err(to_py)
    }

    fn tvl(&self, price_a: f64, price_b: f64) -> f64 {
        self.0.tvl(price_a, price_b)
    }

    fn __repr__(&self) -> String {
        format!(
            "Pool({:?}, {:?}, {}, {}, fee_rate={})",
            self.0.token_a().as_str(),
            self.0.token_b().as_str(),
            self.0.reserve_a(),
            self.0.reserve_b(),
            self.0.fee_rate()
        )
    }
}

/// A directed cycle of pools.
#[pyclass(name = "Loop", module = "cpmm_arb", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyLoop(core::Loop);

#[pymethods]
impl PyLoop {
    /// Build the loop visiting `tokens` in order and closing back on the first.
    #[new]
    fn new(pools: Vec<PyRef<'_, PyPool>>, tokens: Vec<String>) -> PyResult<Self> {
        let pools: Vec<core::Pool> = pools.iter().map(|p| p.0.clone()).collect();
        let tokens = tokens.iter().map(|t| token(t)).collect::<PyResult<Vec<_>>>()?;
        core::Loop::from_tokens(&pools, &tokens).map(Self).map_err(to_py)
    }

    #[getter]
    fn tokens(&self) -> Vec<String> {
        self.0.tokens().map(|t| t.as_str().to_owned()).collect()
    }

    #[getter]
    fn pools(&self) -> Vec<PyPool> {
        self.0.hops().iter().map(|h| PyPool(h.pool().clone())).collect()
    }

    fn log_price_sum(&self) -> f64 {
        self.0.log_price_sum()
    }

    fn is_arbitrage(&self) -> bool {
        core::is_arbitrage_loop(&self.0).0
    }

    fn reversed(&self) -> Self {
        Self(self.0.reversed())
    }

    /// Output of the whole loop for `amount_in` of the first token.
    fn output(&self, amount_in: f64) -> f64 {
        self.0.composed().output(amount_in)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Loop({})", self.0)
    }
}

fn single_entry_dict<'py>(py: Python<'py>, r: &core::SingleEntryResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("entry", r.entry_token.as_str())?;
    d.set_item("optimal_input", r.optimal_input)?;
    d.set_item("profit_tokens", r.profit_tokens)?;
    d.set_item("monetized_profit", r.monetized_profit)?;
    Ok(d)
}

fn flows_into(d: &Bound<'_, PyDict>, flows: &core::FlowVector) -> PyResult<()> {
    d.set_item("inputs", flows.inputs.clone())?;
    d.set_item("outputs", flows.outputs.clone())
}

fn report_dict<'py>(py: Python<'py>, r: &core::StrategyReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("strategy", r.strategy.to_string())?;
    d.set_item("entry", r.entry.as_ref().map(|t| t.as_str()))?;
    d.set_item("monetized_profit", r.monetized_profit)?;
    d.set_item("profit_by_token", by_token(&r.profit_by_token))?;
    flows_into(&d, &r.flows)?;
    let entries = r.per_entry.iter().map(|e| single_entry_dict(py, e)).collect::<PyResult<Vec<_>>>()?;
    d.set_item("per_entry", entries)?;
    Ok(d)
}

fn convex_dict<'py>(py: Python<'py>, s: &core::ConvexSolution, converged: bool) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("monetized_profit", s.monetized_profit)?;
    d.set_item("profit_by_token", by_token(&s.profit_by_token))?;
    d.set_item("kkt_residual", s.kkt_residual)?;
    d.set_item("iterations", s.iterations)?;
    d.set_item("converged", converged)?;
    flows_into(&d, &s.flows)?;
    Ok(d)
}

#[pyfunction]
fn swap_out(pool: &PyPool, input_token: &str, amount_in: f64) -> PyResult<f64> {
    pool.swap_out(input_token, amount_in)
}

#[pyfunction]
fn relative_price(pool: &PyPool, of_token: &str) -> PyResult<f64> {
    pool.relative_price(of_token)
}

/// All simple directed cycles of exactly `length` hops.
#[pyfunction]
fn enumerate_loops(pools: Vec<PyRef<'_, PyPool>>, length: usize) -> Vec<PyLoop> {
    let snapshot = core::MarketSnapshot::from_pools(pools.iter().map(|p| p.0.clone()).collect());
    core::enumerate_loops(&snapshot, length).into_iter().map(PyLoop).collect()
}

/// Arbitrage loops after the liquidity filter, best log price sum first.
#[pyfunction]
#[pyo3(signature = (pools, prices, length = 3, min_tvl = 30_000.0, min_reserve = 100.0, fee = None))]
fn detect(
    pools: Vec<PyRef<'_, PyPool>>,
    prices: BTreeMap<String, f64>,
    length: usize,
    min_tvl: f64,
    min_reserve: f64,
    fee: Option<f64>,
) -> PyResult<Vec<(PyLoop, f64)>> {
    let pools: Vec<core::Pool> = pools.iter().map(|p| p.0.clone()).collect();
    let config = PipelineConfig { length, min_tvl, min_reserve, fee, ..PipelineConfig::default() };
    let found = pipeline::detect(&pools, &price_table(prices)?, &config).map_err(to_py)?;
    Ok(found.into_iter().map(|d| (PyLoop(d.lp), d.log_price_sum)).collect())
}

#[pyfunction]
fn optimize_single_entry<'py>(
    py: Python<'py>,
    lp: &PyLoop,
    entry: &str,
    prices: BTreeMap<String, f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = core::optimize_single_entry(&lp.0, &token(entry)?, &price_table(prices)?).map_err(to_py)?;
    single_entry_dict(py, &r)
}

#[pyfunction]
fn maxmax<'py>(py: Python<'py>, lp: &PyLoop, prices: BTreeMap<String, f64>) -> PyResult<Bound<'py, PyDict>> {
    report_dict(py, &core::maxmax(&lp.0, &price_table(prices)?).map_err(to_py)?)
}

#[pyfunction]
fn maxprice<'py>(py: Python<'py>, lp: &PyLoop, prices: BTreeMap<String, f64>) -> PyResult<Bound<'py, PyDict>> {
    report_dict(py, &core::maxprice(&lp.0, &price_table(prices)?).map_err(to_py)?)
}

/// Relaxed convex optimum. With `strict`, non-convergence raises
/// `RuntimeError`; otherwise the best iterate comes back with
/// `converged = False`.
#[pyfunction]
#[pyo3(signature = (lp, prices, tolerance = core::DEFAULT_TOLERANCE, strict = false))]
fn solve_convex<'py>(
    py: Python<'py>,
    lp: &PyLoop,
    prices: BTreeMap<String, f64>,
    tolerance: f64,
    strict: bool,
) -> PyResult<Bound<'py, PyDict>> {
    match core::solve_convex(&lp.0, &price_table(prices)?, tolerance) {
        Ok(s) => convex_dict(py, &s, true),
        Err(core::Error::NotConverged { iterations, best }) => {
            if strict {
                Err(PyRuntimeError::new_err(format!("solver did not converge after {iterations} Newton steps")))
            } else {
                convex_dict(py, &best, false)
            }
        }
        Err(e) => Err(to_py(e)),
    }
}

/// KKT residual of the given flows for the relaxed program.
#[pyfunction]
fn check_kkt(lp: &PyLoop, prices: BTreeMap<String, f64>, inputs: Vec<f64>, outputs: Vec<f64>) -> PyResult<f64> {
    let flows = core::FlowVector { inputs, outputs };
    core::check_kkt(&lp.0, &price_table(prices)?, &flows).map_err(to_py)
}

#[pyfunction]
fn load_snapshot(path: PathBuf) -> PyResult<Vec<PyPool>> {
    Ok(core::data::load_snapshot(path).map_err(to_py)?.into_iter().map(PyPool).collect())
}

#[pyfunction]
fn load_prices(path: PathBuf) -> PyResult<BTreeMap<String, f64>> {
    let table = core::data::load_prices(path).map_err(to_py)?;
    Ok(table.iter().map(|(k, v)| (k.as_str().to_owned(), v)).collect())
}

#[pymodule]
fn cpmm_arb(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPool>()?;
    m.add_class::<PyLoop>()?;
    m.add("DEFAULT_FEE_RATE", core::DEFAULT_FEE_RATE)?;
    m.add("DEFAULT_TOLERANCE", core::DEFAULT_TOLERANCE)?;
    m.add_function(wrap_pyfunction!(swap_out, m)?)?;
    m.add_function(wrap_pyfunction!(relative_price, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_loops, m)?)?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_single_entry, m)?)?;
    m.add_function(wrap_pyfunction!(maxmax, m)?)?;
    m.add_function(wrap_pyfunction!(maxprice, m)?)?;
    m.add_function(wrap_pyfunction!(solve_convex, m)?)?;
    m.add_function(wrap_pyfunction!(check_kkt, m)?)?;
    m.add_function(wrap_pyfunction!(load_snapshot, m)?)?;
    m.add_function(wrap_pyfunction!(load_prices, m)?)?;
    Ok(())
}
