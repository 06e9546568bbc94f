//! Additive piecewise-linear trend plus Fourier seasonality, fitted by ridge
//! least squares, and a growing/diminishing/stable verdict on the forecast.

use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ForecastError {
    #[error("series has {0} points, at least 3 are needed to fit")]
    TooShort(usize),
    #[error("series has {found} points, classification needs {needed}")]
    TooShortToClassify { found: usize, needed: usize },
    #[error("invalid forecast parameter: {0}")]
    BadParams(String),
    #[error("series contains a non-finite value")]
    NonFinite,
    #[error("normal equations are not positive definite")]
    Singular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastParams {
    pub n_changepoints: usize,
    /// Leading fraction of history where changepoints may sit.
    pub changepoint_range: f64,
    pub fourier_order: usize,
    /// Seasonal period in months.
    pub seasonal_period: f64,
    pub ridge_delta: f64,
    pub ridge_seasonal: f64,
    pub horizon: usize,
}

impl Default for ForecastParams {
    fn default() -> Self {
        Self {
            n_changepoints: 5,
            changepoint_range: 0.8,
            fourier_order: 3,
            seasonal_period: 12.0,
            ridge_delta: 1.0,
            ridge_seasonal: 0.1,
            horizon: 12,
        }
    }
}

impl ForecastParams {
    pub fn validate(&self) -> Result<(), ForecastError> {
        let bad = |m: &str| Err(ForecastError::BadParams(m.to_string()));
        if !(self.changepoint_range > 0.0 && self.changepoint_range <= 1.0) {
            return bad("changepoint_range must be in (0, 1]");
        }
        if !(self.seasonal_period.is_finite() && self.seasonal_period > 0.0) {
            return bad("seasonal_period must be positive");
        }
        if !(self.ridge_delta >= 0.0 && self.ridge_seasonal >= 0.0) {
            return bad("ridge penalties must be non-negative");
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1");
        }
        Ok(())
    }
}

/// Fitted model. Time is `t = i / (n - 1)` for month index `i` counted from
/// the first observation, so history spans `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastModel {
    pub k: f64,
    pub m: f64,
    pub changepoints: Vec<f64>,
    pub deltas: Vec<f64>,
    /// `-s_j * delta_j`, which keeps the trend continuous.
    pub gammas: Vec<f64>,
    /// `(a_r, b_r)` for the sine and cosine of harmonic `r = 1..`.
    pub seasonal: Vec<(f64, f64)>,
    pub seasonal_period: f64,
    n_obs: usize,
}

/// Month indices of the changepoints: evenly spaced over the first
/// `range` of history, excluding index 0.
pub fn changepoint_indices(n: usize, n_changepoints: usize, range: f64) -> Vec<usize> {
    let hist = (n as f64 * range).floor() as usize;
    if hist < 2 {
        return Vec::new();
    }
    let count = n_changepoints.min(hist - 1);
    if count == 0 {
        return Vec::new();
    }
    let last = (hist - 1) as f64;
    let mut idx: Vec<usize> = (1..=count)
        .map(|j| (last * j as f64 / count as f64).round_ties_even() as usize)
        .collect();
    idx.dedup();
    idx
}

fn fourier_terms(i: f64, order: usize, period: f64) -> impl Iterator<Item = (f64, f64)> {
    (1..=order).map(move |r| {
        let x = 2.0 * PI * r as f64 * i / period;
        (x.sin(), x.cos())
    })
}

/// Columns: t, hinges, sin/cos pairs, intercept.
fn design_row(i: f64, t_scale: f64, changepoints: &[f64], order: usize, period: f64) -> Vec<f64> {
    let t = i / t_scale;
    let mut row = Vec::with_capacity(2 + changepoints.len() + 2 * order);
    row.push(t);
    row.extend(changepoints.iter().map(|s| (t - s).max(0.0)));
    for (s, c) in fourier_terms(i, order, period) {
        row.push(s);
        row.push(c);
    }
    row.push(1.0);
    row
}

/// In-place Cholesky solve of `a x = b` for symmetric positive definite `a`
/// stored row-major with size `p`.
fn cholesky_solve(mut a: Vec<f64>, mut b: Vec<f64>, p: usize) -> Result<Vec<f64>, ForecastError> {
    for j in 0..p {
        let mut d = a[j * p + j];
        for k in 0..j {
            d -= a[j * p + k] * a[j * p + k];
        }
        if d.is_nan() || d <= 0.0 || d.is_infinite() {
            return Err(ForecastError::Singular);
        }
        let d = d.sqrt();
        a[j * p + j] = d;
        for i in j + 1..p {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= a[i * p + k] * a[j * p + k];
            }
            a[i * p + j] = s / d;
        }
    }
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * p + k] * b[k];
        }
        b[i] = s / a[i * p + i];
    }
    for i in (0..p).rev() {
        let mut s = b[i];
        for k in i + 1..p {
            s -= a[k * p + i] * b[k];
        }
        b[i] = s / a[i * p + i];
    }
    Ok(b)
}

pub fn fit(y: &[f64], params: &ForecastParams) -> Result<ForecastModel, ForecastError> {
    params.validate()?;
    let n = y.len();
    if n < 3 {
        return Err(ForecastError::TooShort(n));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(ForecastError::NonFinite);
    }
    let t_scale = (n - 1) as f64;
    let changepoints: Vec<f64> = changepoint_indices(n, params.n_changepoints, params.changepoint_range)
        .into_iter()
        .map(|i| i as f64 / t_scale)
        .collect();
    let order = if (n as f64) < 2.0 * params.seasonal_period {
        0
    } else {
        params.fourier_order
    };
    let n_cp = changepoints.len();
    let p = 2 + n_cp + 2 * order;

    let mut xtx = vec![0.0; p * p];
    let mut xty = vec![0.0; p];
    for (i, yi) in y.iter().enumerate() {
        let row = design_row(i as f64, t_scale, &changepoints, order, params.seasonal_period);
        for a in 0..p {
            xty[a] += row[a] * yi;
            for b in 0..p {
                xtx[a * p + b] += row[a] * row[b];
            }
        }
    }
    for j in 0..n_cp {
        xtx[(1 + j) * p + 1 + j] += params.ridge_delta;
    }
    for j in 0..2 * order {
        let c = 1 + n_cp + j;
        xtx[c * p + c] += params.ridge_seasonal;
    }
    let beta = cholesky_solve(xtx, xty, p)?;

    let deltas = beta[1..1 + n_cp].to_vec();
    let gammas = changepoints.iter().zip(&deltas).map(|(s, d)| -s * d).collect();
    let seasonal = (0..order)
        .map(|r| (beta[1 + n_cp + 2 * r], beta[2 + n_cp + 2 * r]))
        .collect();
    Ok(ForecastModel {
        k: beta[0],
        m: beta[p - 1],
        changepoints,
        deltas,
        gammas,
        seasonal,
        seasonal_period: params.seasonal_period,
        n_obs: n,
    })
}

impl ForecastModel {
    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    /// Normalized time of month index `i`.
    pub fn time_of(&self, i: f64) -> f64 {
        i / (self.n_obs - 1) as f64
    }

    /// Trend using only the first `active` changepoints:
    /// `(k + Σδ) t + (m + Σγ)`.
    pub fn segment_trend(&self, t: f64, active: usize) -> f64 {
        let active = active.min(self.changepoints.len());
        let slope = self.k + self.deltas[..active].iter().sum::<f64>();
        let offset = self.m + self.gammas[..active].iter().sum::<f64>();
        slope * t + offset
    }

    pub fn trend(&self, t: f64) -> f64 {
        let active = self.changepoints.iter().take_while(|s| **s <= t).count();
        self.segment_trend(t, active)
    }

    /// Seasonal component at month index `i`.
    pub fn seasonal_at(&self, i: f64) -> f64 {
        fourier_terms(i, self.seasonal.len(), self.seasonal_period)
            .zip(&self.seasonal)
            .map(|((s, c), (a, b))| a * s + b * c)
            .sum()
    }

    pub fn value_at(&self, i: f64) -> f64 {
        self.trend(self.time_of(i)) + self.seasonal_at(i)
    }

    /// In-sample fitted values.
    pub fn fitted(&self) -> Vec<f64> {
        (0..self.n_obs).map(|i| self.value_at(i as f64)).collect()
    }

    /// The next `horizon` months after the last observation.
    pub fn predict(&self, horizon: usize) -> Vec<f64> {
        (self.n_obs..self.n_obs + horizon)
            .map(|i| self.value_at(i as f64))
            .collect()
    }

    /// L2 norm of all seasonal coefficients.
    pub fn seasonal_norm(&self) -> f64 {
        self.seasonal
            .iter()
            .map(|(a, b)| a * a + b * b)
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    Growing,
    Diminishing,
    Stable,
}

impl Trend {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Growing => "growing",
            Self::Diminishing => "diminishing",
            Self::Stable => "stable",
        }
    }
}

impl fmt::Display for Trend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerdictParams {
    /// Trailing observed points averaged into the base.
    pub window: usize,
    pub band: f64,
    pub eps: f64,
}

impl Default for VerdictParams {
    fn default() -> Self {
        Self {
            window: 6,
            band: 0.10,
            eps: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendVerdict {
    pub trend: Trend,
    /// `fut / base`; `None` when the base is within `eps` of zero.
    pub ratio: Option<f64>,
    pub base: f64,
    pub fut: f64,
}

/// Compares the forecast mean against the mean of the last `window`
/// observations. The ratio reads magnitudes: a negative series shrinking
/// toward zero has a ratio below one and is diminishing.
pub fn classify_trend(
    observed: &[f64],
    forecast: &[f64],
    vp: &VerdictParams,
) -> Result<TrendVerdict, ForecastError> {
    if observed.len() < vp.window || vp.window == 0 {
        return Err(ForecastError::TooShortToClassify {
            found: observed.len(),
            needed: vp.window.max(1),
        });
    }
    if forecast.is_empty() {
        return Err(ForecastError::BadParams("empty forecast".into()));
    }
    let tail = &observed[observed.len() - vp.window..];
    let base = tail.iter().sum::<f64>() / vp.window as f64;
    let fut = forecast.iter().sum::<f64>() / forecast.len() as f64;
    if base.abs() < vp.eps {
        let trend = if fut > vp.eps {
            Trend::Growing
        } else if fut < -vp.eps {
            Trend::Diminishing
        } else {
            Trend::Stable
        };
        return Ok(TrendVerdict {
            trend,
            ratio: None,
            base,
            fut,
        });
    }
    let ratio = fut / base;
    let trend = if ratio >= 1.0 + vp.band {
        Trend::Growing
    } else if ratio <= 1.0 - vp.band {
        Trend::Diminishing
    } else {
        Trend::Stable
    };
    Ok(TrendVerdict {
        trend,
        ratio: Some(ratio),
        base,
        fut,
    })
}
