//! Two-component price dynamics.
//!
//! A slow component holds the constant strategy `λᵃ = (a, 1 − a)`; a fast
//! component holds `λᵇₜ = (½ + ½·b·xₜ, ½ − ½·b·xₜ)` with `xₜ` uniform on
//! `[-1, 1)`. With relative wealths `rᵃ + rᵇ = 1` the market-clearing
//! relative price is the wealth-weighted mean of the strategies,
//!
//! ```text
//! Sₜ = λᵃ + (λᵇₜ − λᵃ)·rᵇₜ
//! ```
//!
//! and the fast component's wealth grows by `βₜ₊₁ = Σₖ dₖ,ₜ₊₁ · λᵇₖ,ₜ / Sₖ,ₜ`
//! where `dₜ` is drawn from a stationary value process on the simplex.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::{Stream, StreamKey, StreamRole};
use crate::stats;

/// A point in the 1-simplex, `(asset 1, asset 2)`.
pub type Vec2 = [f64; 2];

/// Tolerance on the weight sum accepted by [`market_price`].
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Default floor below which a price component is treated as singular.
pub const DEFAULT_EPSILON_FLOOR: f64 = 1e-9;
/// Slack allowed above one for the fast component's relative wealth.
const WEALTH_TOL: f64 = 1e-12;

/// Strategy parameters `[a]` (constant) and `(b)` (fluctuation amplitude).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct StrategyPair {
    a: f64,
    b: f64,
}

impl StrategyPair {
    /// Production range: `0 < a < 1/2`, `0 < b ≤ 1`.
    ///
    /// `a > 1/2` mirrors `a < 1/2` under the exchange of the two assets, and
    /// `x ↔ −x` makes negative `b` redundant. `a = 1/2` or `b = 0` gives a
    /// market whose prices converge to `(1/2, 1/2)`, so returns collapse.
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a < 0.5) {
            return Err(Error::Config(format!(
                "a = {a} outside (0, 1/2): values above 1/2 mirror the range by asset symmetry, \
                 and a = 1/2 coincides with the mean value process so prices converge"
            )));
        }
        if !(b > 0.0 && b <= 1.0) {
            return Err(Error::Config(format!(
                "b = {b} outside (0, 1]: negative b is redundant by the x -> -x symmetry, \
                 and b = 0 removes the fluctuating component so prices converge"
            )));
        }
        Ok(Self { a, b })
    }

    /// Extended range `0 < a < 1`, `0 ≤ b ≤ 1`, for convergence studies and
    /// controls.
    pub fn unrestricted(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::Config(format!("a = {a} outside (0, 1)")));
        }
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::Config(format!("b = {b} outside [0, 1]")));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// `λᵃ`
    pub fn slow(&self) -> Vec2 {
        [self.a, 1.0 - self.a]
    }

    /// `λᵇ` for the fluctuation draw `x`.
    #[inline]
    pub fn fast(&self, x: f64) -> Vec2 {
        let h = 0.5 * self.b * x;
        [0.5 + h, 0.5 - h]
    }

    /// Markets in which the fast component is driven out (prices converge).
    pub fn is_convergent(&self) -> bool {
        self.a == 0.5 || self.b == 0.0
    }

    /// Closed interval containing every attainable `S¹`.
    pub fn price_bounds(&self) -> (f64, f64) {
        let lo = 0.5 * (1.0 - self.b);
        let hi = 0.5 * (1.0 + self.b);
        (self.a.min(lo), self.a.max(hi))
    }
}

/// Stationary distribution of the value process `dₜ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ValueProcess {
    /// `δ ~ U[0,1)`, `d = (δ, 1 − δ)`.
    #[default]
    UniformSimplex,
}

impl ValueProcess {
    #[inline]
    pub fn draw(&self, stream: &mut Stream) -> Vec2 {
        match self {
            ValueProcess::UniformSimplex => {
                let delta = stream.uniform01();
                [delta, 1.0 - delta]
            }
        }
    }

    pub fn mean(&self) -> Vec2 {
        match self {
            ValueProcess::UniformSimplex => [0.5, 0.5],
        }
    }
}

/// State of the market at step `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MarketState {
    pub t: usize,
    /// Relative wealth of the fast component.
    pub rb: f64,
    /// Relative wealth of the slow component, `1 − rb`.
    pub ra: f64,
    pub x: f64,
    pub price: Vec2,
}

/// Wealth-weighted mean of strategies.
///
/// Weights must be positive and sum to one; each strategy must lie on the
/// closed simplex.
pub fn market_price(agents: &[(f64, Vec2)]) -> Result<Vec2> {
    if agents.is_empty() {
        return Err(Error::Domain {
            index: 0,
            reason: "no agents".into(),
        });
    }
    let mut total = 0.0;
    let mut price = [0.0; 2];
    for (i, &(w, s)) in agents.iter().enumerate() {
        if !(w > 0.0) {
            return Err(Error::Domain {
                index: i,
                reason: format!("weight {w} is not positive"),
            });
        }
        check_simplex(s, i)?;
        total += w;
        price[0] += w * s[0];
        price[1] += w * s[1];
    }
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::Domain {
            index: agents.len() - 1,
            reason: format!("weights sum to {total}, not 1"),
        });
    }
    Ok(price)
}

fn check_simplex(s: Vec2, index: usize) -> Result<()> {
    if s[0] < 0.0 || s[1] < 0.0 {
        return Err(Error::Domain {
            index,
            reason: format!("strategy ({}, {}) has a negative component", s[0], s[1]),
        });
    }
    if (s[0] + s[1] - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::Domain {
            index,
            reason: format!("strategy ({}, {}) does not sum to 1", s[0], s[1]),
        });
    }
    Ok(())
}

/// Two-agent price `λᵃ + (λᵇ − λᵃ)·rb`, each component formed separately.
#[inline]
pub fn price_from_wealth(slow: Vec2, fast: Vec2, rb: f64) -> Vec2 {
    [
        slow[0] + (fast[0] - slow[0]) * rb,
        slow[1] + (fast[1] - slow[1]) * rb,
    ]
}

/// Units bought with `wealth` under `strategy` at `price`.
pub fn portfolio_units(wealth: f64, strategy: Vec2, price: Vec2) -> Result<Vec2> {
    for (k, &p) in price.iter().enumerate() {
        if !(p > 0.0) {
            return Err(Error::Singularity {
                step: 0,
                component: k,
                value: p,
                floor: 0.0,
            });
        }
    }
    Ok([
        wealth * strategy[0] / price[0],
        wealth * strategy[1] / price[1],
    ])
}

/// Growth factor `Σₖ dₖ λₖ / Sₖ` of a component holding `strategy`.
#[inline]
pub fn growth_rate(d_next: Vec2, price: Vec2, strategy: Vec2, floor: f64) -> Result<f64> {
    for (k, &p) in price.iter().enumerate() {
        if !(p >= floor) || p <= 0.0 {
            return Err(Error::Singularity {
                step: 0,
                component: k,
                value: p,
                floor,
            });
        }
    }
    Ok(d_next[0] / price[0] * strategy[0] + d_next[1] / price[1] * strategy[1])
}

/// `share · beta`, applied to whichever wealth share the market carries.
///
/// A result of exactly zero is accepted: it is the floating-point image of a
/// fast component whose wealth has decayed below the smallest double, after
/// which the price sits at `λᵃ`.
#[inline]
pub fn wealth_step(rb: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Invariant {
            step: 0,
            reason: format!("growth factor {beta} is not positive and finite"),
        });
    }
    let next = rb * beta;
    if !(0.0..1.0 + WEALTH_TOL).contains(&next) {
        return Err(Error::Invariant {
            step: 0,
            reason: format!("relative wealth {rb} * {beta} = {next} left [0, 1)"),
        });
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SimulationConfig {
    pub strategies: StrategyPair,
    pub value_process: ValueProcess,
    /// Initial relative wealth of the fast component.
    pub rb0: f64,
    /// Number of recorded prices.
    pub trail_length: usize,
    /// Steps simulated and discarded before recording.
    pub burn_in: usize,
    pub seed: u64,
    pub epsilon_floor: f64,
}

impl SimulationConfig {
    pub const DEFAULT_RB0: f64 = 0.5;
    pub const DEFAULT_LENGTH: usize = 5000;
    pub const DEFAULT_BURN_IN: usize = 0;

    pub fn new(strategies: StrategyPair, seed: u64) -> Self {
        Self {
            strategies,
            value_process: ValueProcess::UniformSimplex,
            rb0: Self::DEFAULT_RB0,
            trail_length: Self::DEFAULT_LENGTH,
            burn_in: Self::DEFAULT_BURN_IN,
            seed,
            epsilon_floor: DEFAULT_EPSILON_FLOOR,
        }
    }

    pub fn with_length(mut self, n: usize) -> Self {
        self.trail_length = n;
        self
    }

    pub fn with_burn_in(mut self, n: usize) -> Self {
        self.burn_in = n;
        self
    }

    pub fn with_rb0(mut self, rb0: f64) -> Self {
        self.rb0 = rb0;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rb0 > 0.0 && self.rb0 < 1.0) {
            return Err(Error::Config(format!("rb0 = {} outside (0, 1)", self.rb0)));
        }
        if self.trail_length < 2 {
            return Err(Error::Config(format!(
                "trail length {} < 2",
                self.trail_length
            )));
        }
        if self.burn_in >= self.trail_length {
            return Err(Error::Config(format!(
                "burn-in {} must be shorter than the trail length {}",
                self.burn_in, self.trail_length
            )));
        }
        if !(self.epsilon_floor > 0.0 && self.epsilon_floor < 0.5) {
            return Err(Error::Config(format!(
                "epsilon floor {} outside (0, 1/2)",
                self.epsilon_floor
            )));
        }
        Ok(())
    }

    /// Canonical text of every field except the seed.
    pub fn canonical(&self) -> String {
        let vp = match self.value_process {
            ValueProcess::UniformSimplex => "uniform_simplex",
        };
        format!(
            "a={:?};b={:?};rb0={:?};length={};burn_in={};epsilon_floor={:?};value_process={}",
            self.strategies.a,
            self.strategies.b,
            self.rb0,
            self.trail_length,
            self.burn_in,
            self.epsilon_floor,
            vp
        )
    }

    /// First 16 hex digits of SHA-256 over [`Self::canonical`].
    pub fn config_hash(&self) -> String {
        short_hash(self.canonical().as_bytes())
    }
}

pub fn short_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(16);
    for byte in &digest[..8] {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TrailSource {
    Simulated,
    Ingested,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TrailMeta {
    pub source: TrailSource,
    pub seed: Option<u64>,
    pub run_index: Option<u64>,
    /// Config hash for simulated trails, file name or label for ingested ones.
    pub origin: String,
    pub length: usize,
    pub burn_in: usize,
    pub strategies: Option<StrategyPair>,
}

/// Numerical health of a simulated trail.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TrailDiagnostics {
    /// `max |S¹ + S² − 1|` over every simulated step.
    pub max_simplex_error: f64,
    /// `max |rᵃ + rᵇ − 1|` with both wealths advanced by their own growth factors.
    pub max_closure_error: f64,
    /// First step at which the fast component's wealth underflowed to zero.
    pub extinct_at: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum Prices {
    Simplex(Vec<Vec2>),
    Scalar(Vec<f64>),
}

impl Prices {
    pub fn len(&self) -> usize {
        match self {
            Prices::Simplex(p) => p.len(),
            Prices::Scalar(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn first_component(&self) -> Vec<f64> {
        match self {
            Prices::Simplex(p) => p.iter().map(|s| s[0]).collect(),
            Prices::Scalar(p) => p.clone(),
        }
    }
}

/// A simulated or ingested price series with its log returns.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Trail {
    pub prices: Prices,
    /// `ln(S¹ₜ₊₁ / S¹ₜ)`, one shorter than `prices`.
    pub returns: Vec<f64>,
    /// Fast component's relative wealth at each recorded step (simulated only).
    pub fast_wealth: Vec<f64>,
    pub meta: TrailMeta,
    pub diagnostics: TrailDiagnostics,
}

impl Trail {
    /// Wraps an ingested `S¹` series.
    pub fn from_scalar_prices(prices: Vec<f64>, origin: String) -> Result<Self> {
        let returns = stats::log_returns(&prices)?;
        let length = prices.len();
        Ok(Self {
            prices: Prices::Scalar(prices),
            returns,
            fast_wealth: Vec::new(),
            meta: TrailMeta {
                source: TrailSource::Ingested,
                seed: None,
                run_index: None,
                origin,
                length,
                burn_in: 0,
                strategies: None,
            },
            diagnostics: TrailDiagnostics::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    /// Split `Sₜ = S̄ + σₜ` with `S̄ = λᵃ`. Only simulated trails carry `λᵃ`.
    pub fn decomposition(&self) -> Option<PriceDecomposition> {
        let pair = self.meta.strategies?;
        let level = pair.slow();
        let fluctuation = match &self.prices {
            Prices::Simplex(p) => p
                .iter()
                .map(|s| [s[0] - level[0], s[1] - level[1]])
                .collect(),
            Prices::Scalar(_) => return None,
        };
        Some(PriceDecomposition { level, fluctuation })
    }
}

/// Constant level plus fluctuation around it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PriceDecomposition {
    pub level: Vec2,
    pub fluctuation: Vec<Vec2>,
}

/// One step of the two-component market.
///
/// The smaller of the two wealth shares is advanced by its own growth factor
/// and the larger one is its complement. Both forms are the same recursion
/// (`rᵃβᵃ + rᵇβᵇ = 1` identically), but only the minority share keeps full
/// relative precision when one component nearly owns the market.
#[derive(Debug, Clone)]
pub struct Market {
    pair: StrategyPair,
    value_process: ValueProcess,
    floor: f64,
    state: MarketState,
    /// Shares advanced independently, each by its own growth factor.
    tracked: Vec2,
    values: Stream,
    fluctuations: Stream,
}

impl Market {
    pub fn new(cfg: &SimulationConfig, run_index: u64) -> Self {
        let values = StreamKey::new(cfg.seed, run_index, StreamRole::ValueDraws).stream();
        let mut fluctuations =
            StreamKey::new(cfg.seed, run_index, StreamRole::FluctuationDraws).stream();
        let pair = cfg.strategies;
        let x = fluctuations.uniform_sym();
        let (rb, ra) = (cfg.rb0, 1.0 - cfg.rb0);
        Self {
            pair,
            value_process: cfg.value_process,
            floor: cfg.epsilon_floor,
            state: MarketState {
                t: 0,
                rb,
                ra,
                x,
                price: two_agent_price(pair.slow(), pair.fast(x), rb, ra),
            },
            tracked: [ra, rb],
            values,
            fluctuations,
        }
    }

    pub fn state(&self) -> &MarketState {
        &self.state
    }

    /// `(rᵃ, rᵇ)` each advanced only by its own growth factor.
    pub fn tracked_shares(&self) -> Vec2 {
        self.tracked
    }

    /// Draws `dₜ₊₁`, moves wealth, then draws `xₜ₊₁` and reprices.
    pub fn advance(&mut self) -> Result<()> {
        let MarketState {
            t,
            rb,
            ra,
            x,
            price,
        } = self.state;
        let slow = self.pair.slow();
        let fast = self.pair.fast(x);
        let d = self.value_process.draw(&mut self.values);
        let beta_b = growth_rate(d, price, fast, self.floor).map_err(|e| e.at_step(t))?;
        let beta_a = growth_rate(d, price, slow, self.floor).map_err(|e| e.at_step(t))?;
        debug_assert!(
            (rb * beta_b + ra * beta_a - 1.0).abs() < 1e-12,
            "wealth shares do not close at step {t}"
        );
        let (rb, ra) = if rb <= ra {
            let rb = wealth_step(rb, beta_b).map_err(|e| e.at_step(t))?;
            (rb, 1.0 - rb)
        } else {
            let ra = wealth_step(ra, beta_a).map_err(|e| e.at_step(t))?;
            (1.0 - ra, ra)
        };
        self.tracked[0] *= beta_a;
        self.tracked[1] *= beta_b;

        let x = self.fluctuations.uniform_sym();
        self.state = MarketState {
            t: t + 1,
            rb,
            ra,
            x,
            price: two_agent_price(slow, self.pair.fast(x), rb, ra),
        };
        Ok(())
    }
}

/// [`price_from_wealth`] evaluated from whichever share is smaller.
#[inline]
fn two_agent_price(slow: Vec2, fast: Vec2, rb: f64, ra: f64) -> Vec2 {
    if rb <= ra {
        price_from_wealth(slow, fast, rb)
    } else {
        price_from_wealth(fast, slow, ra)
    }
}

/// Simulates run 0 of `cfg.seed`.
pub fn simulate_trail(cfg: &SimulationConfig) -> Result<Trail> {
    simulate_run(cfg, 0)
}

/// Simulates the trail of `run_index` under master seed `cfg.seed`.
///
/// Per step: draw `xₜ` and form `λᵇₜ`; price `Sₜ`; draw `dₜ₊₁`; growth factor;
/// wealth update. The first `burn_in` prices are dropped.
pub fn simulate_run(cfg: &SimulationConfig, run_index: u64) -> Result<Trail> {
    cfg.validate()?;
    let total = cfg.burn_in + cfg.trail_length;
    let mut market = Market::new(cfg, run_index);
    let mut prices = Vec::with_capacity(cfg.trail_length);
    let mut wealth = Vec::with_capacity(cfg.trail_length);
    let mut diag = TrailDiagnostics::default();
    for t in 0..total {
        let st = market.state();
        let simplex = (st.price[0] + st.price[1] - 1.0).abs();
        let [ta, tb] = market.tracked_shares();
        let closure = (ta + tb - 1.0).abs();
        diag.max_simplex_error = diag.max_simplex_error.max(simplex);
        diag.max_closure_error = diag.max_closure_error.max(closure);
        if st.rb == 0.0 && diag.extinct_at.is_none() {
            diag.extinct_at = Some(t);
        }
        if t >= cfg.burn_in {
            prices.push(st.price);
            wealth.push(st.rb);
        }
        if t + 1 < total {
            market.advance()?;
        }
    }
    let s1: Vec<f64> = prices.iter().map(|s| s[0]).collect();
    let returns = stats::log_returns(&s1)?;
    Ok(Trail {
        prices: Prices::Simplex(prices),
        returns,
        fast_wealth: wealth,
        meta: TrailMeta {
            source: TrailSource::Simulated,
            seed: Some(cfg.seed),
            run_index: Some(run_index),
            origin: cfg.config_hash(),
            length: cfg.trail_length,
            burn_in: cfg.burn_in,
            strategies: Some(cfg.strategies),
        },
        diagnostics: diag,
    })
}

/// Monte Carlo estimate of an entropy growth rate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EntropyEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

/// `E ln[(d / λᵃ) · λᵇ]` over fresh draws of `d` and `x`.
///
/// This is the exponential rate of the fast component's relative wealth once
/// the slow one dominates the market (`S ≈ λᵃ`). It is negative whenever
/// `λᵃ = E[d]` and `b > 0`.
pub fn entropy_growth_rate(
    strategy_a: Vec2,
    b: f64,
    vp: ValueProcess,
    n_samples: usize,
    seed: u64,
) -> Result<EntropyEstimate> {
    if n_samples < 1000 {
        return Err(Error::InsufficientData {
            what: "entropy samples",
            required: 1000,
            got: n_samples,
        });
    }
    check_simplex(strategy_a, 0)?;
    if strategy_a[0] <= 0.0 || strategy_a[1] <= 0.0 {
        return Err(Error::Domain {
            index: 0,
            reason: "slow strategy must be interior".into(),
        });
    }
    if !(0.0..=1.0).contains(&b) {
        return Err(Error::Config(format!("b = {b} outside [0, 1]")));
    }
    let pair = StrategyPair { a: 0.5, b };
    let mut values = StreamKey::new(seed, 0, StreamRole::ValueDraws).stream();
    let mut fluct = StreamKey::new(seed, 0, StreamRole::FluctuationDraws).stream();
    let mut acc = stats::Moments::new();
    for _ in 0..n_samples {
        let d = vp.draw(&mut values);
        let fast = pair.fast(fluct.uniform_sym());
        let beta = d[0] / strategy_a[0] * fast[0] + d[1] / strategy_a[1] * fast[1];
        acc.push(libm::log(beta));
    }
    Ok(EntropyEstimate {
        mean: acc.mean(),
        stderr: acc.stderr(),
        n_samples,
    })
}

/// `E ln[(d / dominant) · dominated]` for two constant strategies.
///
/// The exponential rate of a constant-strategy component's relative wealth
/// while another constant strategy sets the price. With `dominant = E[d]`
/// this is never positive.
pub fn constant_growth_rate(
    dominant: Vec2,
    dominated: Vec2,
    vp: ValueProcess,
    n_samples: usize,
    seed: u64,
) -> Result<EntropyEstimate> {
    if n_samples < 1000 {
        return Err(Error::InsufficientData {
            what: "entropy samples",
            required: 1000,
            got: n_samples,
        });
    }
    check_simplex(dominant, 0)?;
    check_simplex(dominated, 1)?;
    if dominant[0] <= 0.0 || dominant[1] <= 0.0 {
        return Err(Error::Domain {
            index: 0,
            reason: "price-setting strategy must be interior".into(),
        });
    }
    let mut values = StreamKey::new(seed, 0, StreamRole::ValueDraws).stream();
    let mut acc = stats::Moments::new();
    for _ in 0..n_samples {
        let d = vp.draw(&mut values);
        acc.push(libm::log(
            d[0] / dominant[0] * dominated[0] + d[1] / dominant[1] * dominated[1],
        ));
    }
    Ok(EntropyEstimate {
        mean: acc.mean(),
        stderr: acc.stderr(),
        n_samples,
    })
}
