//! Moment-scaling spectrum of aggregated returns.
//!
//! For each aggregation scale `Δ` the overlapping sums
//! `R_Δ(t) = Σ_{i<Δ} r[t+i]` give moments `M_q(Δ) = mean |R_Δ|^q`, and
//! `ζ(q)` is the slope of `ln M_q` against `ln Δ`. A monofractal series has
//! `ζ(q)` linear in `q`, i.e. a flat `h_q = ζ(q)/q`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{StreamKey, StreamRole};
use crate::stats::{self, linear_fit};

pub const MAX_Q: f64 = 5.0;
pub const MAX_DYADIC_LAG: usize = 512;

/// `0.5, 1.0, …, 5.0`.
pub fn default_qs() -> Vec<f64> {
    (1..=10).map(|k| 0.5 * k as f64).collect()
}

/// `1, 2, 4, …` up to 512, keeping only lags with `4·Δ ≤ n`.
pub fn dyadic_lags(n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut lag = 1;
    while lag <= MAX_DYADIC_LAG && 4 * lag <= n {
        out.push(lag);
        lag *= 2;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ScalingReport {
    pub qs: Vec<f64>,
    pub zeta: Vec<f64>,
    /// `zeta[i] / qs[i]`.
    pub hq: Vec<f64>,
    pub lag_grid: Vec<usize>,
    pub fit_r2: Vec<f64>,
    /// `max(hq) − min(hq)`.
    pub spread: f64,
    /// `ln M_q(Δ)` indexed `[q][lag]`.
    pub log_moments: Vec<Vec<f64>>,
}

/// Estimates `ζ(q)` by regression over `lag_grid`.
pub fn zeta_spectrum(returns: &[f64], qs: &[f64], lag_grid: &[usize]) -> Result<ScalingReport> {
    if qs.is_empty() {
        return Err(Error::Config("empty q grid".into()));
    }
    if let Some(q) = qs.iter().find(|&&q| !(q > 0.0 && q <= MAX_Q)) {
        return Err(Error::Config(format!(
            "moment order {q} outside (0, {MAX_Q}]"
        )));
    }
    if lag_grid.len() < 2 || lag_grid[0] == 0 || lag_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(
            "lag grid needs at least two strictly increasing positive lags".into(),
        ));
    }
    let max_lag = *lag_grid.last().unwrap();
    if returns.len() < 4 * max_lag {
        return Err(Error::InsufficientData {
            what: "returns for the largest aggregation lag (4 x max lag)",
            required: 4 * max_lag,
            got: returns.len(),
        });
    }
    if returns.iter().all(|&r| r == 0.0) {
        return Err(Error::Degenerate("all returns are zero".into()));
    }

    let mut prefix = Vec::with_capacity(returns.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &r in returns {
        acc += r;
        prefix.push(acc);
    }

    let half_integer = qs.iter().all(|&q| libm::trunc(2.0 * q) == 2.0 * q);
    let mut log_moments = vec![Vec::with_capacity(lag_grid.len()); qs.len()];
    let mut sums = vec![0.0; qs.len()];
    for &lag in lag_grid {
        sums.iter_mut().for_each(|s| *s = 0.0);
        let count = returns.len() - lag + 1;
        for t in 0..count {
            let r = (prefix[t + lag] - prefix[t]).abs();
            if half_integer {
                accumulate_half_integer_powers(r, qs, &mut sums);
            } else {
                for (s, &q) in sums.iter_mut().zip(qs) {
                    *s += libm::pow(r, q);
                }
            }
        }
        for (i, &s) in sums.iter().enumerate() {
            let m = s / count as f64;
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::Degenerate(format!(
                    "moment of order {} vanishes at lag {lag}",
                    qs[i]
                )));
            }
            log_moments[i].push(libm::log(m));
        }
    }

    let log_lags: Vec<f64> = lag_grid.iter().map(|&l| libm::log(l as f64)).collect();
    let mut zeta = Vec::with_capacity(qs.len());
    let mut fit_r2 = Vec::with_capacity(qs.len());
    for lm in &log_moments {
        let fit = linear_fit(&log_lags, lm).expect("lags are distinct");
        zeta.push(fit.slope);
        fit_r2.push(fit.r2);
    }
    let hq: Vec<f64> = zeta.iter().zip(qs).map(|(z, q)| z / q).collect();
    let spread = spread_of(&hq);
    Ok(ScalingReport {
        qs: qs.to_vec(),
        zeta,
        hq,
        lag_grid: lag_grid.to_vec(),
        fit_r2,
        spread,
        log_moments,
    })
}

/// Adds `r^q` for `q ∈ {0.5, 1, 1.5, …}` using powers of `√r`.
#[inline]
fn accumulate_half_integer_powers(r: f64, qs: &[f64], sums: &mut [f64]) {
    let root = libm::sqrt(r);
    let mut power = 1.0;
    let mut k = 0usize;
    for (s, &q) in sums.iter_mut().zip(qs) {
        let target = (2.0 * q) as usize;
        if target < k {
            *s += libm::pow(root, target as f64);
            continue;
        }
        while k < target {
            power *= root;
            k += 1;
        }
        *s += power;
    }
}

pub(crate) fn spread_of(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// `D(α)` sampled at the slopes of `ζ`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SingularitySpectrum {
    pub alphas: Vec<f64>,
    pub d_of_alpha: Vec<f64>,
    /// Moment order at which each `α` was taken.
    pub q_support: Vec<f64>,
    /// Input points that fell below the concave hull of `ζ`.
    pub dropped: usize,
}

impl SingularitySpectrum {
    /// `inf_α (α q − D(α)) + 1`, the transform back to `ζ`.
    pub fn zeta_at(&self, q: f64) -> f64 {
        self.alphas
            .iter()
            .zip(&self.d_of_alpha)
            .map(|(a, d)| a * q - d)
            .fold(f64::INFINITY, f64::min)
            + 1.0
    }
}

/// Numerical Legendre transform `D(α) = α q − ζ(q) + 1` at `α = dζ/dq`.
///
/// `ζ` is first replaced by its concave hull. Slopes come from three-point
/// Lagrange derivatives on the hull vertices (exact for quadratics); a hull
/// that is a single segment yields a single point.
pub fn legendre_transform(qs: &[f64], zeta: &[f64]) -> Result<SingularitySpectrum> {
    if qs.len() != zeta.len() {
        return Err(Error::Config("q grid and zeta differ in length".into()));
    }
    if qs.len() < 5 {
        return Err(Error::InsufficientData {
            what: "zeta points",
            required: 5,
            got: qs.len(),
        });
    }
    if qs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("q grid must be strictly increasing".into()));
    }

    let hull = upper_hull(qs, zeta);
    let hq: Vec<f64> = hull.iter().map(|&i| qs[i]).collect();
    let hz: Vec<f64> = hull.iter().map(|&i| zeta[i]).collect();
    let slopes = lagrange_slopes(&hq, &hz);

    let mut alphas = Vec::new();
    let mut d_of_alpha = Vec::new();
    let mut q_support = Vec::new();
    for ((&q, &z), &a) in hq.iter().zip(&hz).zip(&slopes) {
        let d = a * q - z + 1.0;
        let duplicate = alphas
            .last()
            .is_some_and(|&prev: &f64| (prev - a).abs() <= 1e-12 * (1.0 + a.abs()));
        if duplicate {
            continue;
        }
        alphas.push(a);
        d_of_alpha.push(d);
        q_support.push(q);
    }
    Ok(SingularitySpectrum {
        alphas,
        d_of_alpha,
        q_support,
        dropped: qs.len() - hull.len(),
    })
}

/// Indices of the upper (concave) hull, left to right; collinear interior
/// points are dropped.
fn upper_hull(x: &[f64], y: &[f64]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        while hull.len() >= 2 {
            let o = hull[hull.len() - 2];
            let a = hull[hull.len() - 1];
            let cross = (x[a] - x[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (x[i] - x[o]);
            // Non-negative cross: `a` lies on or below the chord from `o` to `i`.
            let scale = 1e-14 * (1.0 + y[i].abs() + y[o].abs()) * (x[i] - x[o]);
            if cross >= -scale {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

fn lagrange_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 2 {
        let s = (y[1] - y[0]) / (x[1] - x[0]);
        return vec![s, s];
    }
    (0..n)
        .map(|i| {
            let c = i.clamp(1, n - 2);
            let (x0, x1, x2) = (x[c - 1], x[c], x[c + 1]);
            let (y0, y1, y2) = (y[c - 1], y[c], y[c + 1]);
            let t = x[i];
            y0 * (2.0 * t - x1 - x2) / ((x0 - x1) * (x0 - x2))
                + y1 * (2.0 * t - x0 - x2) / ((x1 - x0) * (x1 - x2))
                + y2 * (2.0 * t - x0 - x1) / ((x2 - x0) * (x2 - x1))
        })
        .collect()
}

/// Known-monofractal generators used to calibrate what "multifractal" means
/// at a given sample size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ControlGenerator {
    /// i.i.d. standard normal increments.
    GaussianWalk,
    /// Increments `xₜ₊₁ − xₜ` of `xₜ₊₁ = xₜ·exp(σ·εₜ)` with
    /// σ = [`MULTIPLICATIVE_SIGMA`].
    MultiplicativeWalk,
}

pub const MULTIPLICATIVE_SIGMA: f64 = 0.02;
pub const MIN_CONTROL_LENGTH: usize = 1000;

pub fn control_series(generator: ControlGenerator, length: usize, seed: u64, run: u64) -> Vec<f64> {
    let mut s = StreamKey::new(seed, run, StreamRole::ValueDraws).stream();
    match generator {
        ControlGenerator::GaussianWalk => {
            (0..length).map(|_| StandardNormal.sample(&mut s)).collect()
        }
        ControlGenerator::MultiplicativeWalk => {
            let mut level = 1.0f64;
            (0..length)
                .map(|_| {
                    let eps: f64 = StandardNormal.sample(&mut s);
                    let next = level * libm::exp(MULTIPLICATIVE_SIGMA * eps);
                    let step = next - level;
                    level = next;
                    step
                })
                .collect()
        }
    }
}

/// Scaling report of one control series with the default grids.
pub fn apparent_multifractality_control(
    generator: ControlGenerator,
    length: usize,
    seed: u64,
) -> Result<ScalingReport> {
    control_run(generator, length, seed, 0)
}

fn control_run(
    generator: ControlGenerator,
    length: usize,
    seed: u64,
    run: u64,
) -> Result<ScalingReport> {
    if length < MIN_CONTROL_LENGTH {
        return Err(Error::InsufficientData {
            what: "control length",
            required: MIN_CONTROL_LENGTH,
            got: length,
        });
    }
    let series = control_series(generator, length, seed, run);
    zeta_spectrum(&series, &default_qs(), &dyadic_lags(length))
}

/// Distribution of control spreads and per-q `h_q` quantiles over many seeds.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ControlCalibration {
    pub generator: ControlGenerator,
    pub length: usize,
    pub master_seed: u64,
    pub spreads: Vec<f64>,
    pub spread_median: f64,
    pub spread_p95: f64,
    pub qs: Vec<f64>,
    /// 2.5 %, 50 % and 97.5 % quantiles of `h_q` at each q.
    pub hq_low: Vec<f64>,
    pub hq_median: Vec<f64>,
    pub hq_high: Vec<f64>,
}

/// Summarises control reports (one per seed, in run order).
pub fn calibrate(
    generator: ControlGenerator,
    length: usize,
    master_seed: u64,
    reports: &[ScalingReport],
) -> Result<ControlCalibration> {
    if reports.is_empty() {
        return Err(Error::InsufficientData {
            what: "control runs",
            required: 1,
            got: 0,
        });
    }
    let spreads: Vec<f64> = reports.iter().map(|r| r.spread).collect();
    let qs = reports[0].qs.clone();
    let column = |i: usize, p: f64| {
        let v: Vec<f64> = reports.iter().map(|r| r.hq[i]).collect();
        stats::quantile(&v, p).unwrap()
    };
    Ok(ControlCalibration {
        generator,
        length,
        master_seed,
        spread_median: stats::quantile(&spreads, 0.5).unwrap(),
        spread_p95: stats::quantile(&spreads, 0.95).unwrap(),
        spreads,
        hq_low: (0..qs.len()).map(|i| column(i, 0.025)).collect(),
        hq_median: (0..qs.len()).map(|i| column(i, 0.5)).collect(),
        hq_high: (0..qs.len()).map(|i| column(i, 0.975)).collect(),
        qs,
    })
}

/// Serial calibration over `n_seeds` runs of `master_seed`.
pub fn control_calibration(
    generator: ControlGenerator,
    length: usize,
    n_seeds: usize,
    master_seed: u64,
) -> Result<ControlCalibration> {
    let reports = (0..n_seeds as u64)
        .map(|run| control_run(generator, length, master_seed, run))
        .collect::<Result<Vec<_>>>()?;
    calibrate(generator, length, master_seed, &reports)
}

/// One control run, for callers that parallelise over seeds.
pub fn control_report(
    generator: ControlGenerator,
    length: usize,
    master_seed: u64,
    run: u64,
) -> Result<ScalingReport> {
    control_run(generator, length, master_seed, run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn gaussian_increments_are_monofractal() {
        let rep =
            apparent_multifractality_control(ControlGenerator::GaussianWalk, 20_000, 4).unwrap();
        for h in &rep.hq {
            assert_abs_diff_eq!(*h, 0.5, epsilon = 0.05);
        }
        assert!(rep.spread < 0.05, "spread {}", rep.spread);
        for (h, (z, q)) in rep.hq.iter().zip(rep.zeta.iter().zip(&rep.qs)) {
            assert_eq!(*h, z / q);
        }
    }

    #[test]
    fn zeta_two_matches_variance_scaling() {
        let x = control_series(ControlGenerator::GaussianWalk, 20_000, 6, 0);
        let lags = dyadic_lags(x.len());
        let rep = zeta_spectrum(&x, &default_qs(), &lags).unwrap();
        let mut lv = Vec::new();
        for &lag in &lags {
            let sums: Vec<f64> = x.windows(lag).map(|w| w.iter().sum()).collect();
            lv.push(libm::log(stats::Moments::from_slice(&sums).variance()));
        }
        let ll: Vec<f64> = lags.iter().map(|&l| libm::log(l as f64)).collect();
        let direct = linear_fit(&ll, &lv).unwrap().slope;
        let i2 = rep.qs.iter().position(|&q| q == 2.0).unwrap();
        assert_abs_diff_eq!(rep.zeta[i2], direct, epsilon = 0.01);
    }

    #[test]
    fn scale_invariance() {
        let x = control_series(ControlGenerator::MultiplicativeWalk, 5000, 2, 0);
        let lags = dyadic_lags(x.len());
        let base = zeta_spectrum(&x, &default_qs(), &lags).unwrap();
        for c in [1e-3, 0.5, 7.0, 1e4] {
            let y: Vec<f64> = x.iter().map(|v| c * v).collect();
            let scaled = zeta_spectrum(&y, &default_qs(), &lags).unwrap();
            for (a, b) in base.zeta.iter().zip(&scaled.zeta) {
                assert!((a - b).abs() < 1e-9, "c = {c}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn general_q_path_matches_half_integer_path() {
        let x = control_series(ControlGenerator::GaussianWalk, 4000, 3, 0);
        let lags = dyadic_lags(x.len());
        let fast = zeta_spectrum(&x, &[0.5, 1.0, 2.5], &lags).unwrap();
        let slow = zeta_spectrum(&x, &[0.5, 1.0, 2.5000000000000004], &lags).unwrap();
        for (a, b) in fast.zeta.iter().zip(&slow.zeta) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-9);
        }
    }

    #[test]
    fn zeta_errors() {
        let x = control_series(ControlGenerator::GaussianWalk, 1000, 1, 0);
        assert!(matches!(
            zeta_spectrum(&x, &default_qs(), &[1, 2, 512]),
            Err(Error::InsufficientData { required: 2048, .. })
        ));
        assert!(matches!(
            zeta_spectrum(&[0.0; 100], &default_qs(), &[1, 2]),
            Err(Error::Degenerate(_))
        ));
        assert!(zeta_spectrum(&x, &[6.0], &[1, 2]).is_err());
        assert!(zeta_spectrum(&x, &[1.0], &[2, 1]).is_err());
        assert!(apparent_multifractality_control(ControlGenerator::GaussianWalk, 999, 0).is_err());
    }

    #[test]
    fn short_series_look_more_multifractal() {
        let mean_spread = |len| {
            let c = control_calibration(ControlGenerator::GaussianWalk, len, 60, 77).unwrap();
            c.spreads.iter().sum::<f64>() / c.spreads.len() as f64
        };
        // Minimum control length is 1000; that stands in for "short".
        assert!(mean_spread(1000) > mean_spread(20_000));
    }

    #[test]
    fn multiplicative_walk_exceeds_gaussian() {
        let g = control_calibration(ControlGenerator::GaussianWalk, 20_000, 40, 5).unwrap();
        let m = control_calibration(ControlGenerator::MultiplicativeWalk, 20_000, 40, 5).unwrap();
        assert!(
            m.spread_median > g.spread_median,
            "{} vs {}",
            m.spread_median,
            g.spread_median
        );
    }

    #[test]
    fn legendre_of_linear_collapses() {
        let qs = default_qs();
        let zeta: Vec<f64> = qs.iter().map(|q| q / 2.0).collect();
        let spec = legendre_transform(&qs, &zeta).unwrap();
        assert_eq!(spec.alphas.len(), 1);
        assert_abs_diff_eq!(spec.alphas[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(spec.d_of_alpha[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn legendre_of_quadratic_is_parabola() {
        let c = 0.03;
        let qs = default_qs();
        let zeta: Vec<f64> = qs.iter().map(|q| q / 2.0 - c * q * q).collect();
        let spec = legendre_transform(&qs, &zeta).unwrap();
        assert_eq!(spec.alphas.len(), qs.len());
        for (a, d) in spec.alphas.iter().zip(&spec.d_of_alpha) {
            // Closed form: D(α) = 1 − (α − ½)² / (4c), vertex (½, 1).
            let expect = 1.0 - (a - 0.5) * (a - 0.5) / (4.0 * c);
            assert_abs_diff_eq!(*d, expect, epsilon = 1e-12);
        }
        for (&q, &z) in qs.iter().zip(&zeta) {
            assert_abs_diff_eq!(spec.zeta_at(q), z, epsilon = 1e-12);
        }
    }

    #[test]
    fn legendre_drops_points_below_hull() {
        let qs = default_qs();
        let mut zeta: Vec<f64> = qs.iter().map(|q| q / 2.0 - 0.02 * q * q).collect();
        zeta[4] -= 0.2;
        let spec = legendre_transform(&qs, &zeta).unwrap();
        assert_eq!(spec.dropped, 1);
        assert!(spec.alphas.len() < qs.len());
        assert!(legendre_transform(&qs[..4], &zeta[..4]).is_err());
    }

    proptest! {
        #[test]
        fn biconjugation_recovers_concave_zeta(c in 0.001f64..0.2, k in 0.05f64..1.0, h in 0.2f64..0.9) {
            // ζ(q) = h q − c q² + k ln(1 + q) is strictly concave.
            let qs = default_qs();
            let zeta: Vec<f64> = qs.iter().map(|&q| h * q - c * q * q + k * libm::log(1.0 + q)).collect();
            let spec = legendre_transform(&qs, &zeta).unwrap();
            prop_assert_eq!(spec.dropped, 0);
            for (&q, &z) in qs.iter().zip(&zeta) {
                // Grid tolerance: the three-point slope error is O(|ζ'''| Δq²).
                prop_assert!((spec.zeta_at(q) - z).abs() < 0.02 * k + 1e-12);
            }
        }

        #[test]
        fn hq_identity(seed in 0u64..50) {
            let x = control_series(ControlGenerator::GaussianWalk, 2048, seed, 0);
            let rep = zeta_spectrum(&x, &default_qs(), &dyadic_lags(x.len())).unwrap();
            for i in 0..rep.qs.len() {
                prop_assert_eq!(rep.hq[i], rep.zeta[i] / rep.qs[i]);
            }
        }
    }
}
