//! Return-series statistics.
//!
//! Conventions used throughout:
//! - standardisation divides by the sample standard deviation (`n − 1`);
//! - excess kurtosis uses population (biased) moments, `m₄ / m₂² − 3`;
//! - autocorrelations are Pearson correlations over the overlapping window of
//!   each lag, each side centred on its own mean.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Returns smaller than this in absolute value everywhere mark a trail whose
/// prices have converged; such series carry only rounding noise.
pub const DEGENERATE_RETURN_SCALE: f64 = 1e-12;

/// Streaming mean and variance with an associative merge.
///
/// Updates use Welford's recurrence; [`Moments::merge`] uses the pairwise
/// combination of Chan, Golub and LeVeque, so partial accumulators built in
/// any grouping agree up to rounding.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    /// Sum of squared deviations from the mean.
    pub m2: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut m = Self::new();
        xs.iter().for_each(|&x| m.push(x));
        m
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n_a = self.count as f64;
        let n_b = other.count as f64;
        let n = n_a + n_b;
        let delta = other.mean - self.mean;
        self.mean += delta * n_b / n;
        self.m2 += other.m2 + delta * delta * n_a * n_b / n;
        self.count += other.count;
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample variance (`n − 1`); zero for fewer than two values.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_dev(&self) -> f64 {
        libm::sqrt(self.variance())
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.std_dev() / libm::sqrt(self.count as f64)
        }
    }
}

/// Ordinary least squares `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Classical OLS standard error of the slope (independent residuals).
    pub slope_stderr: f64,
    pub n: usize,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mx;
        let dy = yi - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = (syy - slope * sxy).max(0.0);
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_stderr = if n > 2 {
        libm::sqrt(sse / (nf - 2.0) / sxx)
    } else {
        0.0
    };
    Some(LinearFit {
        slope,
        intercept,
        r2,
        slope_stderr,
        n,
    })
}

/// `ln(p[t+1] / p[t])`.
pub fn log_returns(prices: &[f64]) -> Result<Vec<f64>> {
    if prices.len() < 2 {
        return Err(Error::InsufficientData {
            what: "prices",
            required: 2,
            got: prices.len(),
        });
    }
    if let Some(i) = prices.iter().position(|&p| !(p > 0.0) || !p.is_finite()) {
        return Err(Error::Domain {
            index: i,
            reason: format!("price {} is not positive", prices[i]),
        });
    }
    Ok(prices.windows(2).map(|w| libm::log(w[1] / w[0])).collect())
}

fn sample_mean_sd(series: &[f64]) -> Result<(f64, f64)> {
    if series.len() < 2 {
        return Err(Error::InsufficientData {
            what: "series",
            required: 2,
            got: series.len(),
        });
    }
    let m = Moments::from_slice(series);
    let sd = m.std_dev();
    if !(sd > 0.0) {
        return Err(Error::Degenerate("zero variance".into()));
    }
    Ok((m.mean, sd))
}

/// `(z − mean) / sd` with the sample (`n − 1`) standard deviation.
pub fn standardize(series: &[f64]) -> Result<Vec<f64>> {
    let (mean, sd) = sample_mean_sd(series)?;
    Ok(series.iter().map(|&z| (z - mean) / sd).collect())
}

/// Rejects return series that only carry rounding noise.
pub fn check_returns(returns: &[f64]) -> Result<()> {
    let peak = returns.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if !(peak >= DEGENERATE_RETURN_SCALE) {
        return Err(Error::Degenerate(format!(
            "largest |return| {peak:e} below {DEGENERATE_RETURN_SCALE:e}: prices have converged"
        )));
    }
    Ok(())
}

/// Excess kurtosis `m₄ / m₂² − 3` from population central moments.
pub fn excess_kurtosis(series: &[f64]) -> Result<f64> {
    if series.len() < 4 {
        return Err(Error::InsufficientData {
            what: "series",
            required: 4,
            got: series.len(),
        });
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for &z in series {
        let d = z - mean;
        let d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    if !(m2 > 0.0) {
        return Err(Error::Degenerate("zero variance".into()));
    }
    Ok(m4 / (m2 * m2) - 3.0)
}

/// Pearson correlation of `y[τ..]` against `y[..n−τ]`; `None` when either
/// window is constant.
fn lagged_correlation(y: &[f64], tau: usize) -> Option<f64> {
    let n = y.len() - tau;
    if n < 2 {
        return None;
    }
    let lead = &y[tau..];
    let lag = &y[..n];
    let nf = n as f64;
    let mu = lead.iter().sum::<f64>() / nf;
    let mv = lag.iter().sum::<f64>() / nf;
    let (mut suv, mut suu, mut svv) = (0.0, 0.0, 0.0);
    for (&u, &v) in lead.iter().zip(lag) {
        let du = u - mu;
        let dv = v - mv;
        suv += du * dv;
        suu += du * du;
        svv += dv * dv;
    }
    if !(suu > 0.0 && svv > 0.0) {
        return None;
    }
    Some((suv / libm::sqrt(suu * svv)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FitStatus {
    Ok,
    /// More than half the points in range were non-positive and excluded.
    Unreliable,
    /// Fewer than [`MIN_FIT_POINTS`] usable points.
    Failed,
}

pub const MIN_FIT_POINTS: usize = 8;

/// Power-law fit `C(τ) ∝ τ^(−γ)` on a log-log scale.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PowerLawFit {
    pub gamma: Option<f64>,
    pub r2: Option<f64>,
    pub intercept: Option<f64>,
    pub used: usize,
    pub excluded: usize,
    pub status: FitStatus,
}

impl PowerLawFit {
    fn failed(used: usize, excluded: usize) -> Self {
        Self {
            gamma: None,
            r2: None,
            intercept: None,
            used,
            excluded,
            status: FitStatus::Failed,
        }
    }
}

/// Least-squares slope of `ln C` against `ln τ` over `fit_range`, negated.
///
/// Missing or non-positive values inside the range are excluded and counted.
pub fn fit_power_law(taus: &[f64], values: &[Option<f64>], fit_range: (f64, f64)) -> PowerLawFit {
    let (lo, hi) = fit_range;
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    let mut excluded = 0;
    for (&t, &v) in taus.iter().zip(values) {
        if t < lo || t > hi || !(t > 0.0) {
            continue;
        }
        match v {
            Some(c) if c > 0.0 => {
                lx.push(libm::log(t));
                ly.push(libm::log(c));
            }
            _ => excluded += 1,
        }
    }
    let used = lx.len();
    if used < MIN_FIT_POINTS {
        return PowerLawFit::failed(used, excluded);
    }
    let Some(fit) = linear_fit(&lx, &ly) else {
        return PowerLawFit::failed(used, excluded);
    };
    let status = if excluded * 2 > used + excluded {
        FitStatus::Unreliable
    } else {
        FitStatus::Ok
    };
    PowerLawFit {
        gamma: Some(-fit.slope),
        r2: Some(fit.r2),
        intercept: Some(fit.intercept),
        used,
        excluded,
        status,
    }
}

/// Autocorrelations of `|Z|^α` with fitted decay exponents.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct AcfReport {
    pub alphas: Vec<u32>,
    /// `0, 1, …, max_tau`.
    pub taus: Vec<usize>,
    /// `values[i][τ]` is `C_{alphas[i]}(τ)`; `None` where undefined.
    pub values: Vec<Vec<Option<f64>>>,
    pub fits: Vec<PowerLawFit>,
    pub fit_range: (usize, usize),
}

impl AcfReport {
    pub fn gamma(&self, alpha: u32) -> Option<f64> {
        let i = self.alphas.iter().position(|&a| a == alpha)?;
        self.fits[i].gamma
    }

    pub fn curve(&self, alpha: u32) -> Option<&[Option<f64>]> {
        let i = self.alphas.iter().position(|&a| a == alpha)?;
        Some(&self.values[i])
    }

    /// Mean of `C_α(τ)` over `τ ∈ [lo, hi]`, skipping undefined lags.
    pub fn mean_over(&self, alpha: u32, lo: usize, hi: usize) -> Option<f64> {
        mean_defined(self.curve(alpha)?, lo, hi)
    }
}

pub(crate) fn mean_defined(curve: &[Option<f64>], lo: usize, hi: usize) -> Option<f64> {
    let hi = hi.min(curve.len().saturating_sub(1));
    let vals: Vec<f64> = curve.get(lo..=hi)?.iter().flatten().copied().collect();
    if vals.is_empty() {
        None
    } else {
        Some(vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

pub const DEFAULT_ALPHAS: [u32; 3] = [1, 2, 3];
pub const DEFAULT_FIT_RANGE: (usize, usize) = (5, 200);

/// `C_α(τ) = corr(|Z_{t+τ}|^α, |Z_t|^α)` for `τ = 0..=max_tau`.
///
/// `max_tau` may not exceed a tenth of the series length.
pub fn acf_powers(
    series: &[f64],
    alphas: &[u32],
    max_tau: usize,
    fit_range: (usize, usize),
) -> Result<AcfReport> {
    let n = series.len();
    if max_tau == 0 || max_tau > n.div_ceil(10) {
        return Err(Error::InsufficientData {
            what: "series length for max_tau (needs max_tau <= ceil(n / 10))",
            required: 10 * max_tau.max(1) - 9,
            got: n,
        });
    }
    let taus: Vec<usize> = (0..=max_tau).collect();
    let tau_f: Vec<f64> = taus.iter().map(|&t| t as f64).collect();
    let mut values = Vec::with_capacity(alphas.len());
    let mut fits = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let powered: Vec<f64> = series
            .iter()
            .map(|z| libm::pow(z.abs(), alpha as f64))
            .collect();
        let constant = powered.iter().all(|&v| v == powered[0]);
        let curve: Vec<Option<f64>> = taus
            .iter()
            .map(|&tau| {
                if constant {
                    None
                } else if tau == 0 {
                    Some(1.0)
                } else {
                    lagged_correlation(&powered, tau)
                }
            })
            .collect();
        fits.push(fit_power_law(
            &tau_f,
            &curve,
            (fit_range.0 as f64, fit_range.1 as f64),
        ));
        values.push(curve);
    }
    Ok(AcfReport {
        alphas: alphas.to_vec(),
        taus,
        values,
        fits,
        fit_range,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ShapeClass {
    Concave,
    Laplacian,
    Convex,
}

/// Shape of a log-density with the statistic that decided it.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ShapeClassification {
    pub class: ShapeClass,
    /// Mean second difference of the log-density per bin².
    pub statistic: f64,
}

/// Classifies the curvature of a symmetric log-density.
///
/// Both halves are folded onto `|z|`. Over bins whose centres satisfy
/// `inner ≤ |z| ≤ outer`, a quadratic in the bin index is fitted to the
/// log-density, weighted by bin counts. Twice its leading coefficient is the
/// mean second difference per bin². Anything within `±dead_band` is
/// Laplacian (piecewise linear).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ShapeClassifier {
    pub inner: f64,
    pub outer: f64,
    pub dead_band: f64,
}

impl Default for ShapeClassifier {
    fn default() -> Self {
        Self {
            inner: 0.5,
            outer: 4.0,
            dead_band: 0.005,
        }
    }
}

impl ShapeClassifier {
    pub fn classify(
        &self,
        edges: &[f64],
        log_density: &[Option<f64>],
        weights: &[f64],
    ) -> Option<ShapeClassification> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut ws = Vec::new();
        for i in 0..log_density.len() {
            let (Some(ld), w) = (log_density[i], weights[i]) else {
                continue;
            };
            let width = edges[i + 1] - edges[i];
            let centre = 0.5 * (edges[i] + edges[i + 1]);
            let r = centre.abs();
            if r < self.inner || r > self.outer || !(w > 0.0) {
                continue;
            }
            xs.push(r / width);
            ys.push(ld);
            ws.push(w);
        }
        let c2 = weighted_quadratic(&xs, &ys, &ws)?;
        let statistic = 2.0 * c2;
        let class = if statistic.abs() < self.dead_band {
            ShapeClass::Laplacian
        } else if statistic < 0.0 {
            ShapeClass::Concave
        } else {
            ShapeClass::Convex
        };
        Some(ShapeClassification { class, statistic })
    }
}

/// Leading coefficient of the weighted least-squares quadratic.
fn weighted_quadratic(x: &[f64], y: &[f64], w: &[f64]) -> Option<f64> {
    let mut distinct = x.to_vec();
    distinct.sort_by(|a, b| a.total_cmp(b));
    distinct.dedup();
    if distinct.len() < 3 {
        return None;
    }
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    // Normal equations in the centred variable u = x − xm.
    let mut s = [0.0f64; 5];
    let mut t = [0.0f64; 3];
    for ((&xi, &yi), &wi) in x.iter().zip(y).zip(w) {
        let u = xi - xm;
        let mut p = wi;
        for (k, sk) in s.iter_mut().enumerate() {
            *sk += p;
            if k < 3 {
                t[k] += p * yi;
            }
            p *= u;
        }
    }
    let mut m = [
        [s[0], s[1], s[2], t[0]],
        [s[1], s[2], s[3], t[1]],
        [s[2], s[3], s[4], t[2]],
    ];
    let sol = solve3(&mut m)?;
    Some(sol[2])
}

fn solve3(m: &mut [[f64; 4]; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut out = [0.0; 3];
    for row in (0..3).rev() {
        let mut acc = m[row][3];
        for k in row + 1..3 {
            acc -= m[row][k] * out[k];
        }
        out[row] = acc / m[row][row];
    }
    Some(out)
}

/// Binned density of standardised returns.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DistributionReport {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// `count / (n_in_support · width)`; integrates to one over the support.
    pub density: Vec<f64>,
    /// `ln density`, absent for empty bins.
    pub log_density: Vec<Option<f64>>,
    /// Samples below / above the support.
    pub below: u64,
    pub above: u64,
    pub n_samples: u64,
    pub excess_kurtosis: f64,
    pub shape: Option<ShapeClassification>,
}

pub const DEFAULT_BINS: usize = 50;
pub const DEFAULT_HALF_WIDTH: f64 = 5.0;

/// Histogram on `[−half_width, half_width]` of the standardised series.
pub fn return_histogram(
    series: &[f64],
    n_bins: usize,
    half_width: f64,
) -> Result<DistributionReport> {
    return_histogram_with(series, n_bins, half_width, &ShapeClassifier::default())
}

pub fn return_histogram_with(
    series: &[f64],
    n_bins: usize,
    half_width: f64,
    classifier: &ShapeClassifier,
) -> Result<DistributionReport> {
    if n_bins < 20 {
        return Err(Error::Config(format!(
            "{n_bins} bins; at least 20 required"
        )));
    }
    if !(half_width > 0.0) {
        return Err(Error::Config(format!(
            "support half-width {half_width} must be positive"
        )));
    }
    let z = standardize(series)?;
    let excess_kurtosis = excess_kurtosis(&z)?;
    let width = 2.0 * half_width / n_bins as f64;
    let bin_edges: Vec<f64> = (0..=n_bins)
        .map(|i| -half_width + i as f64 * width)
        .collect();
    let mut counts = vec![0u64; n_bins];
    let (mut below, mut above) = (0u64, 0u64);
    for &v in &z {
        if v < -half_width {
            below += 1;
        } else if v > half_width {
            above += 1;
        } else {
            let i = (((v + half_width) / width) as usize).min(n_bins - 1);
            counts[i] += 1;
        }
    }
    DistributionReport::from_counts(
        bin_edges,
        counts,
        (below, above),
        excess_kurtosis,
        classifier,
    )
}

impl DistributionReport {
    /// Builds densities and the shape class from raw bin counts; used both
    /// for single series and for counts pooled over an ensemble.
    pub fn from_counts(
        bin_edges: Vec<f64>,
        counts: Vec<u64>,
        (below, above): (u64, u64),
        excess_kurtosis: f64,
        classifier: &ShapeClassifier,
    ) -> Result<Self> {
        if bin_edges.len() != counts.len() + 1 {
            return Err(Error::Config(
                "bin edges must number one more than counts".into(),
            ));
        }
        let inside: u64 = counts.iter().sum();
        if inside == 0 {
            return Err(Error::Degenerate(
                "no samples inside the histogram support".into(),
            ));
        }
        let density: Vec<f64> = counts
            .iter()
            .zip(bin_edges.windows(2))
            .map(|(&c, w)| c as f64 / (inside as f64 * (w[1] - w[0])))
            .collect();
        let log_density = log_of_density(&density);
        let weights: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let shape = classifier.classify(&bin_edges, &log_density, &weights);
        Ok(Self {
            bin_edges,
            counts,
            density,
            log_density,
            below,
            above,
            n_samples: inside + below + above,
            excess_kurtosis,
            shape,
        })
    }
}

pub(crate) fn log_of_density(density: &[f64]) -> Vec<Option<f64>> {
    density
        .iter()
        .map(|&d| if d > 0.0 { Some(libm::log(d)) } else { None })
        .collect()
}

/// Average ranks (ties share the mean rank), 1-based.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let fit = linear_fit(x, y)?;
    let r = libm::sqrt(fit.r2);
    Some(if fit.slope < 0.0 { -r } else { r })
}

/// Spearman rank correlation.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    pearson(&ranks(x), &ranks(y))
}

/// Linear-interpolation quantile of a sample, `p ∈ [0, 1]`.
pub fn quantile(xs: &[f64], p: f64) -> Option<f64> {
    if xs.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let h = (v.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{StreamKey, StreamRole};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal, StudentT};

    fn gaussian(n: usize, seed: u64) -> Vec<f64> {
        let mut s = StreamKey::new(seed, 0, StreamRole::ValueDraws).stream();
        (0..n).map(|_| StandardNormal.sample(&mut s)).collect()
    }

    /// Laplace by inversion: `−sgn(u)·ln(1 − 2|u|)` with `u ~ U(−½, ½)`.
    fn laplace(n: usize, seed: u64) -> Vec<f64> {
        let mut s = StreamKey::new(seed, 1, StreamRole::ValueDraws).stream();
        (0..n)
            .map(|_| {
                let u = s.uniform01() - 0.5;
                -u.signum() * libm::log(1.0 - 2.0 * u.abs())
            })
            .collect()
    }

    #[test]
    fn moments_merge_matches_sequential() {
        let xs = gaussian(10_001, 3);
        let full = Moments::from_slice(&xs);
        let mut left = Moments::from_slice(&xs[..4000]);
        left.merge(&Moments::from_slice(&xs[4000..]));
        assert_eq!(left.count, full.count);
        assert_abs_diff_eq!(left.mean, full.mean, epsilon = 1e-15);
        assert!((left.variance() - full.variance()).abs() < 1e-12);
    }

    #[test]
    fn log_returns_examples() {
        assert_eq!(log_returns(&[2.0, 2.0, 2.0]).unwrap(), vec![0.0, 0.0]);
        let r = log_returns(&[0.5, 0.55]).unwrap();
        assert_abs_diff_eq!(r[0], libm::log(1.1), epsilon = 1e-15);
        assert_abs_diff_eq!(r[0], 0.09531, epsilon = 1e-5);
        assert!(matches!(
            log_returns(&[1.0, 0.0, 1.0]),
            Err(Error::Domain { index: 1, .. })
        ));
        assert!(log_returns(&[1.0]).is_err());
    }

    #[test]
    fn standardize_examples() {
        assert_eq!(standardize(&[1.0, 2.0, 3.0]).unwrap(), vec![-1.0, 0.0, 1.0]);
        assert!(matches!(
            standardize(&[4.0, 4.0, 4.0]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn degenerate_returns_detected() {
        assert!(check_returns(&[0.0, 1e-17, -3e-16]).is_err());
        assert!(check_returns(&[0.0, 1e-3]).is_ok());
    }

    #[test]
    fn kurtosis_gaussian_and_laplace() {
        let g = excess_kurtosis(&gaussian(1_000_000, 1)).unwrap();
        assert!(g.abs() < 0.02, "gaussian {g}");
        let l = excess_kurtosis(&laplace(1_000_000, 2)).unwrap();
        assert!((l - 3.0).abs() < 0.05, "laplace {l}");
        assert!(excess_kurtosis(&[1.0, 1.0, 1.0, 1.0]).is_err());
        assert!(excess_kurtosis(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn acf_of_white_noise_inside_band() {
        let n = 5000;
        let z = gaussian(n, 5);
        let rep = acf_powers(&z, &[2], 50, (5, 50)).unwrap();
        let band = 2.0 / libm::sqrt(n as f64);
        let inside = rep.values[0][1..]
            .iter()
            .filter(|c| c.unwrap().abs() < band)
            .count();
        assert!(inside as f64 >= 0.9 * 50.0, "{inside}/50 inside band");
    }

    #[test]
    fn acf_periodic_series_returns_to_one() {
        let p = 7;
        let z: Vec<f64> = (0..700).map(|i| ((i % p) as f64 + 1.0) * 0.3).collect();
        let rep = acf_powers(&z, &[1, 2, 3], 70, (5, 70)).unwrap();
        for curve in &rep.values {
            assert_eq!(curve[0], Some(1.0));
            assert_abs_diff_eq!(curve[p].unwrap(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(curve[2 * p].unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn acf_constant_series_is_absent() {
        let z = vec![1.5; 200];
        let rep = acf_powers(&z, &[1], 20, (5, 20)).unwrap();
        assert!(rep.values[0].iter().all(Option::is_none));
        assert_eq!(rep.fits[0].status, FitStatus::Failed);
    }

    #[test]
    fn acf_max_tau_guard() {
        assert!(acf_powers(&gaussian(100, 1), &[1], 11, (5, 11)).is_err());
        assert!(acf_powers(&gaussian(100, 1), &[1], 10, (5, 10)).is_ok());
    }

    #[test]
    fn power_law_exact() {
        let taus: Vec<f64> = (1..=300).map(|t| t as f64).collect();
        let vals: Vec<Option<f64>> = taus.iter().map(|&t| Some(libm::pow(t, -0.3))).collect();
        let fit = fit_power_law(&taus, &vals, (5.0, 200.0));
        assert_abs_diff_eq!(fit.gamma.unwrap(), 0.3, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.r2.unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(fit.status, FitStatus::Ok);
    }

    #[test]
    fn power_law_rejects_exponential_decay() {
        let taus: Vec<f64> = (1..=300).map(|t| t as f64).collect();
        let vals: Vec<Option<f64>> = taus.iter().map(|&t| Some(libm::exp(-t))).collect();
        let fit = fit_power_law(&taus, &vals, (5.0, 200.0));
        // ln C = −τ against ln τ: r² of the straight-line fit is about 0.854.
        assert!(fit.r2.unwrap() < 0.9, "r2 {}", fit.r2.unwrap());
    }

    #[test]
    fn power_law_failure_and_exclusion() {
        let taus: Vec<f64> = (1..=20).map(|t| t as f64).collect();
        let mut vals: Vec<Option<f64>> = taus.iter().map(|&t| Some(1.0 / t)).collect();
        let fit = fit_power_law(&taus, &vals, (5.0, 11.0));
        assert_eq!(fit.status, FitStatus::Failed);
        for v in vals.iter_mut().skip(4).step_by(2) {
            *v = Some(-0.1);
        }
        let fit = fit_power_law(&taus, &vals, (1.0, 20.0));
        assert_eq!(fit.excluded, 8);
        assert_eq!(fit.status, FitStatus::Ok);
        for v in vals.iter_mut().skip(3).step_by(2) {
            *v = None;
        }
        let fit = fit_power_law(&taus, &vals, (1.0, 20.0));
        assert_eq!(fit.status, FitStatus::Failed);
    }

    #[test]
    fn histogram_mass_and_shapes() {
        let g = return_histogram(&gaussian(20_000, 8), DEFAULT_BINS, DEFAULT_HALF_WIDTH).unwrap();
        let total: u64 = g.counts.iter().sum::<u64>() + g.below + g.above;
        assert_eq!(total, g.n_samples);
        let width = g.bin_edges[1] - g.bin_edges[0];
        let integral: f64 = g.density.iter().map(|d| d * width).sum();
        assert_abs_diff_eq!(integral, 1.0, epsilon = 1e-6);
        assert_eq!(g.shape.unwrap().class, ShapeClass::Concave);

        let l = return_histogram(&laplace(20_000, 8), DEFAULT_BINS, DEFAULT_HALF_WIDTH).unwrap();
        assert_eq!(l.shape.unwrap().class, ShapeClass::Laplacian);
        assert!(return_histogram(&gaussian(100, 1), 10, 5.0).is_err());
    }

    #[test]
    fn classifier_calibration_over_seeds() {
        let t3 = StudentT::new(3.0).unwrap();
        let mut ok = [0usize; 3];
        let seeds = 100;
        for seed in 0..seeds {
            let classify = |z: &[f64]| {
                return_histogram(z, DEFAULT_BINS, DEFAULT_HALF_WIDTH)
                    .unwrap()
                    .shape
                    .unwrap()
                    .class
            };
            ok[0] += (classify(&gaussian(20_000, 100 + seed)) == ShapeClass::Concave) as usize;
            ok[1] += (classify(&laplace(20_000, 200 + seed)) == ShapeClass::Laplacian) as usize;
            let mut s = StreamKey::new(300 + seed, 0, StreamRole::FluctuationDraws).stream();
            let t: Vec<f64> = (0..20_000).map(|_| t3.sample(&mut s)).collect();
            ok[2] += (classify(&t) == ShapeClass::Convex) as usize;
        }
        for (name, k) in ["gaussian", "laplace", "student-t(3)"].iter().zip(ok) {
            assert!(k as f64 >= 0.95 * seeds as f64, "{name}: {k}/{seeds}");
        }
    }

    #[test]
    fn quadratic_fit_is_exact() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 - 0.5 * v + 0.125 * v * v).collect();
        let c = weighted_quadratic(&x, &y, &[1.0; 10]).unwrap();
        assert_abs_diff_eq!(c, 0.125, epsilon = 1e-12);
    }

    #[test]
    fn spearman_and_quantile() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 90.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(quantile(&[3.0, 1.0, 2.0, 4.0], 0.5), Some(2.5));
        assert_eq!(quantile(&[3.0, 1.0, 2.0], 1.0), Some(3.0));
    }

    proptest! {
        #[test]
        fn standardize_is_idempotent(xs in proptest::collection::vec(-1e3f64..1e3, 3..200)) {
            if let Ok(z) = standardize(&xs) {
                let m = Moments::from_slice(&z);
                prop_assert!(m.mean.abs() < 1e-12);
                prop_assert!((m.std_dev() - 1.0).abs() < 1e-12);
                let zz = standardize(&z).unwrap();
                for (a, b) in z.iter().zip(&zz) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn kurtosis_is_affine_invariant(
            xs in proptest::collection::vec(-10f64..10.0, 8..200),
            c in prop_oneof![-50f64..-0.1, 0.1f64..50.0],
            d in -100f64..100.0,
        ) {
            if let Ok(k) = excess_kurtosis(&xs) {
                let ys: Vec<f64> = xs.iter().map(|x| c * x + d).collect();
                let k2 = excess_kurtosis(&ys).unwrap();
                prop_assert!((k - k2).abs() < 1e-10 * (1.0 + k.abs()));
            }
        }

        #[test]
        fn acf_lag_zero_is_one(xs in proptest::collection::vec(-5f64..5.0, 50..300)) {
            let rep = acf_powers(&xs, &[1, 2, 3], 5, (1, 5)).unwrap();
            for curve in &rep.values {
                if let Some(c0) = curve[0] {
                    prop_assert_eq!(c0, 1.0);
                }
                for c in curve.iter().flatten() {
                    prop_assert!(c.abs() <= 1.0);
                }
            }
        }

        #[test]
        fn planted_exponent_with_noise(gamma in 0.1f64..1.5, seed in 0u64..500) {
            let mut s = StreamKey::new(seed, 0, StreamRole::ValueDraws).stream();
            let taus: Vec<f64> = (1..=200).map(|t| t as f64).collect();
            let vals: Vec<Option<f64>> = taus
                .iter()
                .map(|&t| Some(libm::pow(t, -gamma) * (1.0 + 0.1 * s.uniform_sym())))
                .collect();
            let fit = fit_power_law(&taus, &vals, (5.0, 200.0));
            prop_assert!((fit.gamma.unwrap() - gamma).abs() < 0.05);
        }
    }
}
