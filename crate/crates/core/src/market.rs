//! Closing prices, log returns, and the synthetic price generator.
//!
//! Price files are delimited text with a header `date,<asset>,<asset>,…` and
//! one row per trading day. A row with any missing field (empty, `NA`, `NaN`)
//! is dropped whole, so every retained day has a price for every asset. Dates
//! are opaque labels compared lexicographically; ISO-8601 (`YYYY-MM-DD`) sorts
//! correctly.
//!
//! Rebalancing time `t` sits at daily index `t·dt`, so the interval return
//! `μ_{t,a}` is exactly the sum of the `dt` daily log returns in that interval.

use std::io::{Read, Write};

use chrono::{Datelike, Days, NaiveDate, Weekday};
use ndarray::{s, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub asset_id: String,
    pub dates: Vec<String>,
    pub prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(asset_id: impl Into<String>, dates: Vec<String>, prices: Vec<f64>) -> Result<Self> {
        let asset_id = asset_id.into();
        if dates.len() != prices.len() {
            return Err(Error::InvalidData(format!(
                "{asset_id}: {} dates but {} prices",
                dates.len(),
                prices.len()
            )));
        }
        if let Some((i, p)) = prices.iter().enumerate().find(|(_, p)| !(**p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidData(format!(
                "{asset_id}: non-positive price {p} on {}",
                dates[i]
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidData(format!(
                "{asset_id}: dates not strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self {
            asset_id,
            dates,
            prices,
        })
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    /// Divides by the first price. Log returns are unchanged.
    pub fn normalized(&self) -> Result<PriceSeries> {
        let first = *self
            .prices
            .first()
            .ok_or_else(|| Error::InvalidData(format!("{}: empty series", self.asset_id)))?;
        Ok(PriceSeries {
            asset_id: self.asset_id.clone(),
            dates: self.dates.clone(),
            prices: self.prices.iter().map(|p| p / first).collect(),
        })
    }

    pub fn daily_log_returns(&self) -> Vec<f64> {
        self.prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect()
    }
}

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f.eq_ignore_ascii_case("na") || f.eq_ignore_ascii_case("nan") || f.eq_ignore_ascii_case("null")
}

/// Parses the tabular price format; see the module docs.
pub fn load_prices<R: Read>(reader: R) -> Result<Vec<PriceSeries>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 {
        return Err(Error::InvalidData("header needs a date column and at least one asset".into()));
    }
    let assets: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut dates = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); assets.len()];
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let line = row + 2;
        if record.len() != headers.len() {
            return Err(Error::InvalidData(format!(
                "line {line}: expected {} fields, found {}",
                headers.len(),
                record.len()
            )));
        }
        if record.iter().skip(1).any(is_missing) || is_missing(&record[0]) {
            continue;
        }
        let mut values = Vec::with_capacity(assets.len());
        for (field, asset) in record.iter().skip(1).zip(&assets) {
            let v: f64 = field.parse().map_err(|_| {
                Error::InvalidData(format!("line {line}: cannot parse '{field}' for {asset}"))
            })?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidData(format!("line {line}: non-positive price {v} for {asset}")));
            }
            values.push(v);
        }
        dates.push(record[0].to_string());
        for (col, v) in columns.iter_mut().zip(values) {
            col.push(v);
        }
    }
    assets
        .into_iter()
        .zip(columns)
        .map(|(a, p)| PriceSeries::new(a, dates.clone(), p))
        .collect()
}

/// Writes series sharing one date axis in the same format `load_prices` reads.
pub fn write_prices<W: Write>(writer: W, series: &[PriceSeries]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["date".to_string()];
    header.extend(series.iter().map(|s| s.asset_id.clone()));
    w.write_record(&header)?;
    let Some(first) = series.first() else {
        w.flush()?;
        return Ok(());
    };
    for s in series {
        if s.dates != first.dates {
            return Err(Error::InvalidData(format!("{} has a different date axis", s.asset_id)));
        }
    }
    for (i, date) in first.dates.iter().enumerate() {
        let mut row = vec![date.clone()];
        row.extend(series.iter().map(|s| s.prices[i].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Which surplus days to discard when a series is longer than `n_t·dt + 1`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrimRule {
    /// Keep the earliest window.
    #[default]
    DropTrailing,
    /// Keep the most recent window.
    DropLeading,
}

/// Interval and daily log returns for a set of assets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnPanel {
    pub asset_ids: Vec<String>,
    /// `N_t × N_a`.
    pub interval_returns: Array2<f64>,
    /// `(N_t·dt) × N_a`.
    pub daily_returns: Array2<f64>,
    pub dt: usize,
}

impl ReturnPanel {
    /// Builds a panel from daily returns; interval returns are the per-interval sums.
    pub fn from_daily(asset_ids: Vec<String>, daily_returns: Array2<f64>, dt: usize) -> Result<Self> {
        if dt == 0 {
            return Err(Error::InvalidConfig("dt must be at least 1".into()));
        }
        let (days, n_a) = daily_returns.dim();
        if days % dt != 0 {
            return Err(Error::InvalidData(format!(
                "{days} daily returns do not tile into intervals of {dt}"
            )));
        }
        if asset_ids.len() != n_a {
            return Err(Error::DimensionMismatch {
                expected: n_a,
                actual: asset_ids.len(),
            });
        }
        if daily_returns.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite daily return".into()));
        }
        let n_t = days / dt;
        let mut interval_returns = Array2::zeros((n_t, n_a));
        for t in 0..n_t {
            let sums = daily_returns.slice(s![t * dt..(t + 1) * dt, ..]).sum_axis(Axis(0));
            interval_returns.row_mut(t).assign(&sums);
        }
        Ok(Self {
            asset_ids,
            interval_returns,
            daily_returns,
            dt,
        })
    }

    pub fn n_t(&self) -> usize {
        self.interval_returns.nrows()
    }

    pub fn n_a(&self) -> usize {
        self.interval_returns.ncols()
    }

    /// Daily indices `t·dt .. (t+1)·dt` of interval `t`.
    pub fn interval_days(&self, t: usize) -> std::ops::Range<usize> {
        t * self.dt..(t + 1) * self.dt
    }

    /// Appends a constant-price asset whose returns are all zero.
    pub fn with_cash_asset(&self, asset_id: &str) -> ReturnPanel {
        let mut ids = self.asset_ids.clone();
        ids.push(asset_id.to_string());
        let extend = |m: &Array2<f64>| {
            let mut out = Array2::zeros((m.nrows(), m.ncols() + 1));
            out.slice_mut(s![.., ..m.ncols()]).assign(m);
            out
        };
        ReturnPanel {
            asset_ids: ids,
            interval_returns: extend(&self.interval_returns),
            daily_returns: extend(&self.daily_returns),
            dt: self.dt,
        }
    }
}

/// A constant price-1 series on the given dates.
pub fn cash_series(asset_id: &str, dates: &[String]) -> PriceSeries {
    PriceSeries {
        asset_id: asset_id.to_string(),
        dates: dates.to_vec(),
        prices: vec![1.0; dates.len()],
    }
}

/// Log returns over `n_t` intervals of `dt` days each, using the first or last
/// `n_t·dt + 1` prices of every series according to `trim`.
pub fn compute_returns(series: &[PriceSeries], n_t: usize, dt: usize, trim: TrimRule) -> Result<ReturnPanel> {
    if dt == 0 || n_t == 0 {
        return Err(Error::InvalidConfig("n_t and dt must be at least 1".into()));
    }
    let needed = n_t * dt + 1;
    let n_a = series.len();
    let mut daily = Array2::zeros((n_t * dt, n_a));
    for (a, s) in series.iter().enumerate() {
        if s.len() < needed {
            return Err(Error::InsufficientHistory {
                needed,
                available: s.len(),
            });
        }
        let start = match trim {
            TrimRule::DropTrailing => 0,
            TrimRule::DropLeading => s.len() - needed,
        };
        let window = &s.prices[start..start + needed];
        for (d, w) in window.windows(2).enumerate() {
            daily[[d, a]] = (w[1] / w[0]).ln();
        }
    }
    let ids = series.iter().map(|s| s.asset_id.clone()).collect();
    let mut panel = ReturnPanel::from_daily(ids, daily, dt)?;
    // Boundary prices give the interval return directly.
    for (a, s) in series.iter().enumerate() {
        let start = match trim {
            TrimRule::DropTrailing => 0,
            TrimRule::DropLeading => s.len() - needed,
        };
        for t in 0..n_t {
            let p0 = s.prices[start + t * dt];
            let p1 = s.prices[start + (t + 1) * dt];
            panel.interval_returns[[t, a]] = (p1 / p0).ln();
        }
    }
    Ok(panel)
}

/// Geometric random walk parameters, per asset. Shocks are equicorrelated:
/// `ε_a = √c·f + √(1−c)·e_a` with common factor `f` and `c ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub seed: u64,
    pub days: usize,
    /// Daily log-drift per asset.
    pub drift: Vec<f64>,
    /// Daily log-volatility per asset.
    pub volatility: Vec<f64>,
    pub correlation: f64,
    pub start_date: NaiveDate,
}

impl SyntheticParams {
    /// The bundled fixture: five risky assets, 529 trading days.
    pub fn fixture() -> Self {
        Self {
            seed: 20230101,
            days: 529,
            drift: vec![0.0006, 0.0002, 0.0009, -0.0003, 0.0004],
            volatility: vec![0.012, 0.016, 0.022, 0.010, 0.018],
            correlation: 0.3,
            start_date: NaiveDate::from_ymd_opt(2023, 1, 3).expect("valid date"),
        }
    }
}

/// Weekday dates starting at `start`.
fn business_days(start: NaiveDate, count: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(count);
    let mut d = start;
    while out.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d.format("%Y-%m-%d").to_string());
        }
        d = d.checked_add_days(Days::new(1)).expect("date in range");
    }
    out
}

/// Deterministic given `params.seed`. Every series starts at price 1.
pub fn generate_synthetic(params: &SyntheticParams) -> Result<Vec<PriceSeries>> {
    let n_a = params.drift.len();
    if params.volatility.len() != n_a {
        return Err(Error::DimensionMismatch {
            expected: n_a,
            actual: params.volatility.len(),
        });
    }
    if let Some(v) = params.volatility.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidConfig(format!("volatility must be non-negative, got {v}")));
    }
    if !(0.0..=1.0).contains(&params.correlation) {
        return Err(Error::InvalidConfig(format!(
            "correlation must lie in [0, 1], got {}",
            params.correlation
        )));
    }
    if params.days == 0 {
        return Err(Error::InvalidConfig("days must be positive".into()));
    }
    let dates = business_days(params.start_date, params.days);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let common = params.correlation.sqrt();
    let own = (1.0 - params.correlation).sqrt();
    let mut prices = vec![vec![1.0f64; params.days]; n_a];
    let mut log_p = vec![0.0f64; n_a];
    for d in 1..params.days {
        let f: f64 = StandardNormal.sample(&mut rng);
        for a in 0..n_a {
            let e: f64 = StandardNormal.sample(&mut rng);
            let shock = common * f + own * e;
            log_p[a] += params.drift[a] + params.volatility[a] * shock;
            prices[a][d] = log_p[a].exp();
        }
    }
    prices
        .into_iter()
        .enumerate()
        .map(|(a, p)| PriceSeries::new(format!("asset{}", a + 1), dates.clone(), p))
        .collect()
}

/// The synthetic fixture plus a constant cash column, six assets in total.
pub fn fixture_series() -> Vec<PriceSeries> {
    let mut series = generate_synthetic(&SyntheticParams::fixture()).expect("fixture parameters are valid");
    let dates = series[0].dates.clone();
    series.push(cash_series("cash", &dates));
    series
}

/// Bundled copy of [`fixture_series`] in the price-file format.
pub const FIXTURE_CSV: &str = include_str!("../fixtures/synthetic_prices.csv");
