//! Constant-product swap algebra.
//!
//! A pool holding reserves `(x, y)` with fee rate `λ` pays
//! `Δy = y − x·y / (x + γ·Δx)` for an input `Δx`, where `γ = 1 − λ`.
//! Rewritten as `Δy = a·Δx / (b + Δx)` with `a = y`, `b = x / γ`, the same
//! two-parameter form is closed under composition, so any chain of hops
//! collapses into one [`ComposedSwap`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniswap V2 swap fee.
pub const DEFAULT_FEE_RATE: f64 = 0.003;

/// Opaque token identifier (usually a ticker symbol).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(String);

impl TokenId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.trim().is_empty() {
            return Err(Error::InvalidPool("token identifier is empty".into()));
        }
        Ok(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TokenId {
    /// Panics on an empty string; use [`TokenId::new`] for untrusted input.
    fn from(s: &str) -> Self {
        Self::new(s).expect("empty token identifier")
    }
}

/// A two-token constant-product liquidity pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pool {
    token_a: TokenId,
    token_b: TokenId,
    reserve_a: f64,
    reserve_b: f64,
    fee_rate: f64,
}

impl Pool {
    pub fn new(
        token_a: TokenId,
        token_b: TokenId,
        reserve_a: f64,
        reserve_b: f64,
        fee_rate: f64,
    ) -> Result<Self> {
        if token_a == token_b {
            return Err(Error::InvalidPool(format!("both sides are {token_a}")));
        }
        for (token, reserve) in [(&token_a, reserve_a), (&token_b, reserve_b)] {
            if !(reserve.is_finite() && reserve > 0.0) {
                return Err(Error::InvalidPool(format!(
                    "reserve of {token} must be positive and finite, got {reserve}"
                )));
            }
        }
        if !(fee_rate.is_finite() && (0.0..1.0).contains(&fee_rate)) {
            return Err(Error::InvalidPool(format!("fee rate must lie in [0, 1), got {fee_rate}")));
        }
        Ok(Self { token_a, token_b, reserve_a, reserve_b, fee_rate })
    }

    /// Pool with the default 0.3% fee.
    pub fn with_default_fee(
        token_a: impl Into<String>,
        token_b: impl Into<String>,
        reserve_a: f64,
        reserve_b: f64,
    ) -> Result<Self> {
        Self::new(TokenId::new(token_a)?, TokenId::new(token_b)?, reserve_a, reserve_b, DEFAULT_FEE_RATE)
    }

    pub fn token_a(&self) -> &TokenId {
        &self.token_a
    }

    pub fn token_b(&self) -> &TokenId {
        &self.token_b
    }

    pub fn reserve_a(&self) -> f64 {
        self.reserve_a
    }

    pub fn reserve_b(&self) -> f64 {
        self.reserve_b
    }

    pub fn fee_rate(&self) -> f64 {
        self.fee_rate
    }

    /// Fraction of the input that reaches the curve, `1 − λ`.
    pub fn gamma(&self) -> f64 {
        1.0 - self.fee_rate
    }

    pub fn with_fee_rate(&self, fee_rate: f64) -> Result<Self> {
        Self::new(self.token_a.clone(), self.token_b.clone(), self.reserve_a, self.reserve_b, fee_rate)
    }

    pub fn contains(&self, token: &TokenId) -> bool {
        &self.token_a == token || &self.token_b == token
    }

    /// The token on the other side of `token`.
    pub fn counterpart(&self, token: &TokenId) -> Result<&TokenId> {
        Ok(if self.is_side_a(token)? { &self.token_b } else { &self.token_a })
    }

    /// `(own reserve, other reserve)` as seen from `token`.
    pub fn reserves_from(&self, token: &TokenId) -> Result<(f64, f64)> {
        Ok(if self.is_side_a(token)? {
            (self.reserve_a, self.reserve_b)
        } else {
            (self.reserve_b, self.reserve_a)
        })
    }

    fn is_side_a(&self, token: &TokenId) -> Result<bool> {
        if &self.token_a == token {
            Ok(true)
        } else if &self.token_b == token {
            Ok(false)
        } else {
            Err(Error::UnknownToken { token: token.to_string(), context: self.to_string() })
        }
    }

    /// Reserve-weighted value of the pool at the given prices, if both are known.
    pub fn tvl(&self, price_a: f64, price_b: f64) -> f64 {
        self.reserve_a * price_a + self.reserve_b * price_b
    }
}

impl fmt::Display for Pool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pool({}={}, {}={}, fee={})", self.token_a, self.reserve_a, self.token_b, self.reserve_b, self.fee_rate)
    }
}

/// Output of one swap with reserves `(input_reserve, output_reserve)`.
pub(crate) fn curve_out(input_reserve: f64, output_reserve: f64, gamma: f64, amount_in: f64) -> f64 {
    let effective = gamma * amount_in;
    // y·γΔ/(x + γΔ) avoids the cancellation in y − xy/(x + γΔ) for small inputs.
    output_reserve * effective / (input_reserve + effective)
}

/// Amount of the counterpart token received for `amount_in` of `input_token`.
pub fn swap_out(pool: &Pool, input_token: &TokenId, amount_in: f64) -> Result<f64> {
    if !(amount_in.is_finite() && amount_in >= 0.0) {
        return Err(Error::InvalidAmount(amount_in));
    }
    let (x, y) = pool.reserves_from(input_token)?;
    Ok(curve_out(x, y, pool.gamma(), amount_in))
}

/// Fee-adjusted price of `of_token` in units of the counterpart token.
pub fn relative_price(pool: &Pool, of_token: &TokenId) -> Result<f64> {
    let (own, other) = pool.reserves_from(of_token)?;
    Ok(pool.gamma() * other / own)
}

/// A pool traversed in one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Hop {
    pool: Pool,
    from_a: bool,
}

impl Hop {
    pub fn new(pool: Pool, input_token: &TokenId) -> Result<Self> {
        let from_a = pool.is_side_a(input_token)?;
        Ok(Self { pool, from_a })
    }

    pub fn pool(&self) -> &Pool {
        &self.pool
    }

    pub fn input_token(&self) -> &TokenId {
        if self.from_a { &self.pool.token_a } else { &self.pool.token_b }
    }

    pub fn output_token(&self) -> &TokenId {
        if self.from_a { &self.pool.token_b } else { &self.pool.token_a }
    }

    pub fn input_reserve(&self) -> f64 {
        if self.from_a { self.pool.reserve_a } else { self.pool.reserve_b }
    }

    pub fn output_reserve(&self) -> f64 {
        if self.from_a { self.pool.reserve_b } else { self.pool.reserve_a }
    }

    pub fn gamma(&self) -> f64 {
        self.pool.gamma()
    }

    /// Swap output; `amount_in` must already be validated as nonnegative.
    pub fn swap(&self, amount_in: f64) -> f64 {
        curve_out(self.input_reserve(), self.output_reserve(), self.gamma(), amount_in)
    }

    /// `p_ij = γ·r_j / r_i` for input token `i`, output token `j`.
    pub fn relative_price(&self) -> f64 {
        self.gamma() * self.output_reserve() / self.input_reserve()
    }

    pub fn as_swap(&self) -> ComposedSwap {
        ComposedSwap { coeff_a: self.output_reserve(), coeff_b: self.input_reserve() / self.gamma() }
    }
}

/// `output(Δ) = a·Δ / (b + Δ)`: the closed form of any hop chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComposedSwap {
    pub coeff_a: f64,
    pub coeff_b: f64,
}

impl ComposedSwap {
    /// Feed this swap's output into `next`.
    pub fn then(self, next: ComposedSwap) -> ComposedSwap {
        let denom = self.coeff_a + next.coeff_b;
        ComposedSwap {
            coeff_a: self.coeff_a * next.coeff_a / denom,
            coeff_b: self.coeff_b * next.coeff_b / denom,
        }
    }

    pub fn output(&self, amount_in: f64) -> f64 {
        self.coeff_a * amount_in / (self.coeff_b + amount_in)
    }

    /// `d output / dΔ = a·b / (b + Δ)²`.
    pub fn derivative(&self, amount_in: f64) -> f64 {
        let s = self.coeff_b + amount_in;
        self.coeff_a * self.coeff_b / (s * s)
    }

    /// Marginal rate at zero input, equal to the product of relative prices.
    pub fn marginal_rate(&self) -> f64 {
        self.coeff_a / self.coeff_b
    }

    /// Input maximizing `output(Δ) − Δ`: `max(0, √(ab) − b)`.
    pub fn optimal_input(&self) -> f64 {
        if self.coeff_a <= self.coeff_b {
            return 0.0;
        }
        self.coeff_b * ((self.coeff_a / self.coeff_b).sqrt() - 1.0)
    }

    /// `(√a − √b)²` when `a > b`, else zero.
    pub fn max_profit(&self) -> f64 {
        if self.coeff_a <= self.coeff_b {
            return 0.0;
        }
        let d = self.coeff_a.sqrt() - self.coeff_b.sqrt();
        d * d
    }

    /// Largest input that does not lose tokens, `a − b` (zero if none).
    pub fn break_even_input(&self) -> f64 {
        (self.coeff_a - self.coeff_b).max(0.0)
    }
}

/// Collapse a chained path of hops into its closed form.
pub fn compose_path(hops: &[Hop]) -> Result<ComposedSwap> {
    let (first, rest) = hops.split_first().ok_or_else(|| Error::BrokenChain("empty path".into()))?;
    let mut acc = first.as_swap();
    let mut prev = first;
    for hop in rest {
        if prev.output_token() != hop.input_token() {
            return Err(Error::BrokenChain(format!(
                "{} is followed by a hop starting at {}",
                prev.output_token(),
                hop.input_token()
            )));
        }
        acc = acc.then(hop.as_swap());
        prev = hop;
    }
    Ok(acc)
}
