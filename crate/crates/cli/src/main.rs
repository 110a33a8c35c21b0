use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cpmm_arb_core::data::{load_prices, load_snapshot, synthetic_market, write_prices, write_snapshot};
use cpmm_arb_core::pipeline::{
    comparison_csv, compare, detect, detection_listing, oracle_report, sweep, sweep_values, ComparisonRow,
    PipelineConfig, StrategySet,
};
use cpmm_arb_core::{Error, Pool, PriceTable, TokenId, DEFAULT_TOLERANCE};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

/// Cyclic arbitrage across constant-product AMM pools.
#[derive(Parser, Debug)]
#[command(name = "cpmm-arb", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List arbitrage loops, best log price sum first.
    Detect(Market),
    /// Compare strategies on every arbitrage loop and write a CSV table.
    Compare {
        #[command(flatten)]
        market: Market,
        #[command(flatten)]
        run: Run,
    },
    /// Compare strategies while sweeping one token's price.
    Sweep {
        #[command(flatten)]
        market: Market,
        #[command(flatten)]
        run: Run,
        /// Token whose price is swept.
        #[arg(long)]
        token: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        step: f64,
    },
    /// Check one loop against brute-force grid searches.
    Oracle {
        #[command(flatten)]
        market: Market,
        /// Loop tokens in traversal order, e.g. X,Y,Z.
        #[arg(long = "loop", value_delimiter = ',', required = true)]
        tokens: Vec<String>,
        /// Grid points for each single-entry scan.
        #[arg(long, default_value_t = 1_000_000)]
        grid_1d: usize,
        /// Grid points per axis for the joint scan of length-3 loops.
        #[arg(long, default_value_t = 200)]
        grid_3d: usize,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
    },
    /// Write a random snapshot and price table.
    Synth {
        #[arg(long, default_value_t = 51)]
        tokens: usize,
        #[arg(long, default_value_t = 208)]
        pools: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Snapshot output path (.csv or .json).
        #[arg(long)]
        snapshot: PathBuf,
        /// Price table output path (.csv or .json).
        #[arg(long)]
        prices: PathBuf,
    },
}

#[derive(Args, Debug)]
struct Market {
    /// Pool snapshot (.csv or .json).
    #[arg(long)]
    snapshot: PathBuf,
    /// CEX price table (.csv or .json).
    #[arg(long)]
    prices: PathBuf,
    #[arg(long, default_value_t = 3)]
    length: usize,
    /// Minimum pool TVL in USD.
    #[arg(long, default_value_t = 30_000.0)]
    min_tvl: f64,
    /// Minimum reserve on each side of a pool.
    #[arg(long, default_value_t = 100.0)]
    min_reserve: f64,
    /// Fee rate applied to every pool instead of the snapshot's.
    #[arg(long)]
    fee: Option<f64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Run {
    /// Comma-separated subset of single-entry-all, maxprice, maxmax, convex.
    #[arg(long, default_value = "single-entry-all,maxprice,maxmax,convex")]
    strategies: String,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
    /// Exit with status 3 when the convex solver fails to converge on any loop.
    #[arg(long)]
    strict: bool,
}

enum Failure {
    Usage(String),
    Data(String),
    NotConverged(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_DATA)
        }
        Err(Failure::NotConverged(n)) => {
            eprintln!("error: convex solver did not converge on {n} loop(s)");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Detect(market) => {
            let (pools, prices, config) = load(&market, DEFAULT_TOLERANCE)?;
            let loops = detect(&pools, &prices, &config)?;
            let mut text = detection_listing(&loops);
            text.push_str(&format!("{} arbitrage loop(s)\n", loops.len()));
            emit(market.out.as_deref(), &text)
        }
        Command::Compare { market, run } => {
            let strategies = StrategySet::parse(&run.strategies).map_err(Failure::Usage)?;
            let (pools, prices, config) = load(&market, run.tolerance)?;
            let rows = compare(&pools, &prices, &config, strategies)?;
            finish_table(&market, &run, &rows, strategies)
        }
        Command::Sweep { market, run, token, from, to, step } => {
            let strategies = StrategySet::parse(&run.strategies).map_err(Failure::Usage)?;
            let values = sweep_values(from, to, step)
                .map_err(|_| Failure::Usage(format!("invalid sweep range {from}..{to} step {step}")))?;
            let token = TokenId::new(token).map_err(|e| Failure::Usage(e.to_string()))?;
            let (pools, prices, config) = load(&market, run.tolerance)?;
            let rows = sweep(&pools, &prices, &config, strategies, &token, &values)?;
            finish_table(&market, &run, &rows, strategies)
        }
        Command::Oracle { market, tokens, grid_1d, grid_3d, tolerance } => {
            check_tolerance(tolerance)?;
            if grid_1d < 2 || grid_3d < 2 {
                return Err(Failure::Usage("grid sizes must be at least 2".into()));
            }
            let tokens = tokens
                .into_iter()
                .map(|t| TokenId::new(t).map_err(|e| Failure::Usage(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            let pools = load_snapshot(&market.snapshot)?;
            let prices = load_prices(&market.prices)?;
            let report = oracle_report(&pools, &prices, &tokens, market.fee, grid_1d, grid_3d, tolerance)?;
            emit(market.out.as_deref(), &format!("{report}\n"))
        }
        Command::Synth { tokens, pools, seed, snapshot, prices } => {
            let (p, table) = synthetic_market(tokens, pools, seed).map_err(|e| Failure::Usage(e.to_string()))?;
            write_snapshot(&snapshot, &p)?;
            write_prices(&prices, &table)?;
            Ok(())
        }
    }
}

fn check_tolerance(tolerance: f64) -> Result<(), Failure> {
    if tolerance.is_finite() && tolerance > 0.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!("tolerance must be positive, got {tolerance}")))
    }
}

fn load(market: &Market, tolerance: f64) -> Result<(Vec<Pool>, PriceTable, PipelineConfig), Failure> {
    check_tolerance(tolerance)?;
    if market.length < 2 {
        return Err(Failure::Usage(format!("loop length must be at least 2, got {}", market.length)));
    }
    if let Some(fee) = market.fee {
        if !(0.0..1.0).contains(&fee) {
            return Err(Failure::Usage(format!("fee must lie in [0, 1), got {fee}")));
        }
    }
    if !(market.min_tvl >= 0.0 && market.min_reserve >= 0.0) {
        return Err(Failure::Usage("liquidity thresholds must be nonnegative".into()));
    }
    let pools = load_snapshot(&market.snapshot)?;
    let prices = load_prices(&market.prices)?;
    let config = PipelineConfig {
        length: market.length,
        min_tvl: market.min_tvl,
        min_reserve: market.min_reserve,
        fee: market.fee,
        tolerance,
    };
    Ok((pools, prices, config))
}

fn finish_table(market: &Market, run: &Run, rows: &[ComparisonRow], strategies: StrategySet) -> Result<(), Failure> {
    emit(market.out.as_deref(), &comparison_csv(rows, market.length, strategies))?;
    let failed = rows.iter().filter(|r| !r.converged()).count();
    if failed > 0 {
        eprintln!("warning: convex solver did not converge on {failed} loop(s)");
        if run.strict {
            return Err(Failure::NotConverged(failed));
        }
    }
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Failure::Data(e.to_string()))
        }
    }
}
