//! Derived series: trailing-window moments, bank Z-scores, ROA and the
//! positive/negative oil-price shock split.
//!
//! Worked example for the two Z-score variants (window n = 4, sample
//! standard deviation):
//!
//! ```text
//! CAR = [.10, .10, .10, .12]      ROA = [.01, .02, .01, .02]
//! mean ROA = 0.015                sd ROA = sqrt(4 * 0.005^2 / 3) = 0.0057735
//! z1[4] = (mean CAR + mean ROA) / sd = (0.105 + 0.015) / 0.0057735
//! z2[4] = (CAR[4]   + mean ROA) / sd = (0.12  + 0.015) / 0.0057735 = 23.383
//! ```
//!
//! With CAR constant at 0.10 the Boyd form gives (0.10 + 0.015) / 0.0057735
//! = 19.919.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel_data::Series;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StdDivisor {
    /// n_obs − 1
    #[default]
    Sample,
    /// n_obs
    Population,
}

/// Trailing window of `n` periods ending at and including `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollingWindowConfig {
    pub n: usize,
    pub min_obs: usize,
    pub divisor: StdDivisor,
}

impl RollingWindowConfig {
    pub fn new(n: usize, min_obs: usize) -> Result<Self> {
        if n < 2 || min_obs < 2 || min_obs > n {
            return Err(Error::InvalidConfig(format!(
                "rolling window needs n >= 2 and 2 <= min_obs <= n (got n={n}, min_obs={min_obs})"
            )));
        }
        Ok(Self {
            n,
            min_obs,
            divisor: StdDivisor::Sample,
        })
    }

    /// Window that requires every period to be observed.
    pub fn full(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn with_divisor(mut self, divisor: StdDivisor) -> Self {
        self.divisor = divisor;
        self
    }
}

impl Default for RollingWindowConfig {
    fn default() -> Self {
        Self {
            n: 4,
            min_obs: 4,
            divisor: StdDivisor::Sample,
        }
    }
}

fn window(series: &[Option<f64>], t: usize, n: usize) -> impl Iterator<Item = f64> + '_ {
    let start = (t + 1).saturating_sub(n);
    series[start..=t].iter().flatten().copied()
}

pub fn rolling_mean(series: &[Option<f64>], config: &RollingWindowConfig) -> Series {
    (0..series.len())
        .map(|t| {
            let vals: Vec<f64> = window(series, t, config.n).collect();
            (vals.len() >= config.min_obs).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect()
}

fn dispersion(vals: &[f64], divisor: StdDivisor) -> f64 {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let ss: f64 = vals.iter().map(|v| (v - mean).powi(2)).sum();
    let d = match divisor {
        StdDivisor::Sample => n - 1.0,
        StdDivisor::Population => n,
    };
    (ss / d).sqrt()
}

pub fn rolling_std(series: &[Option<f64>], config: &RollingWindowConfig) -> Series {
    let need = config.min_obs.max(2);
    (0..series.len())
        .map(|t| {
            let vals: Vec<f64> = window(series, t, config.n).collect();
            (vals.len() >= need).then(|| dispersion(&vals, config.divisor))
        })
        .collect()
}

/// Net income over total assets.
pub fn compute_roa(net_income: &[Option<f64>], total_assets: &[Option<f64>]) -> Result<Series> {
    if net_income.len() != total_assets.len() {
        return Err(Error::Shape(
            "net income and total assets differ in length".into(),
        ));
    }
    net_income
        .iter()
        .zip(total_assets)
        .enumerate()
        .map(|(index, (ni, ta))| match (ni, ta) {
            (_, Some(a)) if *a <= 0.0 => Err(Error::NonPositive { index, value: *a }),
            (Some(n), Some(a)) => Ok(Some(n / a)),
            _ => Ok(None),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZScoreVariant {
    /// Moving mean of CAR in the numerator.
    Boyd,
    /// Current-period CAR in the numerator.
    Yeyati,
}

impl ZScoreVariant {
    /// Registered column name of the series.
    pub fn column(self) -> &'static str {
        match self {
            ZScoreVariant::Boyd => "z1",
            ZScoreVariant::Yeyati => "z2",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "boyd" | "z1" => Ok(ZScoreVariant::Boyd),
            "yeyati" | "z2" => Ok(ZScoreVariant::Yeyati),
            other => Err(Error::InvalidConfig(format!(
                "unknown z-score variant `{other}` (expected boyd or yeyati)"
            ))),
        }
    }
}

/// Z-score values plus a flag for periods left missing because the ROA
/// window had zero dispersion.
#[derive(Debug, Clone, PartialEq)]
pub struct ZScoreSeries {
    pub values: Series,
    pub degenerate: Vec<bool>,
}

fn zscore(
    car: &[Option<f64>],
    roa: &[Option<f64>],
    config: &RollingWindowConfig,
    variant: ZScoreVariant,
) -> Result<ZScoreSeries> {
    if car.len() != roa.len() {
        return Err(Error::Shape("CAR and ROA differ in length".into()));
    }
    let mu_roa = rolling_mean(roa, config);
    let sd_roa = rolling_std(roa, config);
    let mu_car = rolling_mean(car, config);
    let mut values = vec![None; car.len()];
    let mut degenerate = vec![false; car.len()];
    for t in 0..car.len() {
        let capital = match variant {
            ZScoreVariant::Boyd => mu_car[t],
            ZScoreVariant::Yeyati => car[t],
        };
        let (Some(c), Some(m), Some(s)) = (capital, mu_roa[t], sd_roa[t]) else {
            continue;
        };
        let scale = window(roa, t, config.n).fold(0.0_f64, |acc, v| acc.max(v.abs()));
        // sd of a constant window is rounding noise, not dispersion
        if s <= 1e-12 * scale.max(f64::MIN_POSITIVE) || s == 0.0 {
            degenerate[t] = true;
            continue;
        }
        values[t] = Some((c + m) / s);
    }
    Ok(ZScoreSeries { values, degenerate })
}

/// `(mean CAR + mean ROA) / sd ROA` over trailing windows.
pub fn zscore_boyd(
    car: &[Option<f64>],
    roa: &[Option<f64>],
    config: &RollingWindowConfig,
) -> Result<ZScoreSeries> {
    zscore(car, roa, config, ZScoreVariant::Boyd)
}

/// `(CAR_t + mean ROA) / sd ROA` over trailing windows.
pub fn zscore_yeyati(
    car: &[Option<f64>],
    roa: &[Option<f64>],
    config: &RollingWindowConfig,
) -> Result<ZScoreSeries> {
    zscore(car, roa, config, ZScoreVariant::Yeyati)
}

pub fn zscore_variant(
    variant: ZScoreVariant,
    car: &[Option<f64>],
    roa: &[Option<f64>],
    config: &RollingWindowConfig,
) -> Result<ZScoreSeries> {
    zscore(car, roa, config, variant)
}

/// Which oil-price series enters the long run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShockVariant {
    /// Log returns of the price level.
    Returns,
    Positive,
    Negative,
}

impl ShockVariant {
    pub const ALL: [ShockVariant; 3] = [
        ShockVariant::Returns,
        ShockVariant::Positive,
        ShockVariant::Negative,
    ];

    /// Dataset column holding the series.
    pub fn column(self) -> &'static str {
        match self {
            ShockVariant::Returns => "wti",
            ShockVariant::Positive => "wti_pos",
            ShockVariant::Negative => "wti_neg",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ShockVariant::Returns => "returns",
            ShockVariant::Positive => "positive",
            ShockVariant::Negative => "negative",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "returns" | "wti" => Ok(ShockVariant::Returns),
            "positive" | "wti_pos" => Ok(ShockVariant::Positive),
            "negative" | "wti_neg" => Ok(ShockVariant::Negative),
            other => Err(Error::InvalidConfig(format!(
                "unknown shock variant `{other}` (expected returns, positive or negative)"
            ))),
        }
    }
}

/// Positive and negative deviations of the price level from its trailing
/// average over the previous `lookback` periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockSeries {
    pub positive: Series,
    pub negative: Series,
    pub base: Series,
}

fn trailing(price: &[Option<f64>], t: usize, lookback: usize) -> Option<Vec<f64>> {
    price[t - lookback..t].iter().copied().collect()
}

fn check_lookback(lookback: usize) -> Result<()> {
    if lookback == 0 {
        return Err(Error::InvalidConfig(
            "shock lookback must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Averaging shock split: `base[t]` is the mean of the `lookback` previous
/// levels; a strictly higher price is a positive shock, a strictly lower
/// one a negative shock, equality yields zero in both.
pub fn shock_decompose(price: &[Option<f64>], lookback: usize) -> Result<ShockSeries> {
    check_lookback(lookback)?;
    let len = price.len();
    let mut out = ShockSeries {
        positive: vec![None; len],
        negative: vec![None; len],
        base: vec![None; len],
    };
    for t in lookback..len {
        let (Some(p), Some(prev)) = (price[t], trailing(price, t, lookback)) else {
            continue;
        };
        let base = prev.iter().sum::<f64>() / lookback as f64;
        let dev = p - base;
        out.base[t] = Some(base);
        out.positive[t] = Some(if p > base { dev } else { 0.0 });
        out.negative[t] = Some(if p < base { dev } else { 0.0 });
    }
    Ok(out)
}

/// Shock split against trailing extrema instead of the trailing mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremaShockSeries {
    pub positive: Series,
    pub negative: Series,
    pub trailing_max: Series,
    pub trailing_min: Series,
}

/// Comparison method: positive shocks are increases over the trailing
/// maximum of the previous `lookback` levels, negative shocks falls below
/// the trailing minimum.
pub fn shock_decompose_hamilton(
    price: &[Option<f64>],
    lookback: usize,
) -> Result<ExtremaShockSeries> {
    check_lookback(lookback)?;
    let len = price.len();
    let mut out = ExtremaShockSeries {
        positive: vec![None; len],
        negative: vec![None; len],
        trailing_max: vec![None; len],
        trailing_min: vec![None; len],
    };
    for t in lookback..len {
        let (Some(p), Some(prev)) = (price[t], trailing(price, t, lookback)) else {
            continue;
        };
        let hi = prev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = prev.iter().copied().fold(f64::INFINITY, f64::min);
        out.trailing_max[t] = Some(hi);
        out.trailing_min[t] = Some(lo);
        out.positive[t] = Some((p - hi).max(0.0));
        out.negative[t] = Some((p - lo).min(0.0));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[f64]) -> Series {
        v.iter().copied().map(Some).collect()
    }

    #[test]
    fn rolling_mean_examples() {
        let full4 = RollingWindowConfig::full(4).unwrap();
        assert_eq!(
            rolling_mean(&s(&[1., 1., 1., 1.]), &full4),
            vec![None, None, None, Some(1.0)]
        );
        assert_eq!(rolling_mean(&s(&[1., 2., 3., 4.]), &full4)[3], Some(2.5));
        let full2 = RollingWindowConfig::full(2).unwrap();
        assert_eq!(
            rolling_mean(&s(&[1., 2., 3., 4.]), &full2),
            vec![None, Some(1.5), Some(2.5), Some(3.5)]
        );
    }

    #[test]
    fn rolling_mean_skips_missing_inside_window() {
        let cfg = RollingWindowConfig::new(3, 2).unwrap();
        let out = rolling_mean(&[Some(1.0), None, Some(3.0), None, None], &cfg);
        assert_eq!(out, vec![None, None, Some(2.0), None, None]);
    }

    #[test]
    fn rolling_std_examples() {
        let full4 = RollingWindowConfig::full(4).unwrap();
        assert_eq!(rolling_std(&s(&[2., 2., 2., 2.]), &full4)[3], Some(0.0));
        let sd = rolling_std(&s(&[0.01, 0.02, 0.01, 0.02]), &full4)[3].unwrap();
        assert!((sd - 0.0057735).abs() < 1e-7);
        let sd = rolling_std(&s(&[1., 3.]), &RollingWindowConfig::full(2).unwrap())[1].unwrap();
        assert!((sd - 2f64.sqrt()).abs() < 1e-12);
        let pop = RollingWindowConfig::full(2)
            .unwrap()
            .with_divisor(StdDivisor::Population);
        assert!((rolling_std(&s(&[1., 3.]), &pop)[1].unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn window_config_bounds() {
        assert!(RollingWindowConfig::new(1, 1).is_err());
        assert!(RollingWindowConfig::new(4, 5).is_err());
        assert!(RollingWindowConfig::new(4, 1).is_err());
        assert!(RollingWindowConfig::new(4, 2).is_ok());
    }

    #[test]
    fn roa_examples() {
        let r = compute_roa(&s(&[0.0, 5.0, -2.0]), &s(&[10.0, 100.0, 50.0])).unwrap();
        assert_eq!(r[0], Some(0.0));
        assert!((r[1].unwrap() - 0.05).abs() < 1e-15);
        assert!((r[2].unwrap() + 0.04).abs() < 1e-15);
        assert_eq!(compute_roa(&[None], &[Some(1.0)]).unwrap(), vec![None]);
        assert!(matches!(
            compute_roa(&[Some(1.0), Some(1.0)], &[Some(1.0), Some(0.0)]),
            Err(Error::NonPositive { index: 1, .. })
        ));
    }

    #[test]
    fn zscore_hand_values() {
        let cfg = RollingWindowConfig::full(4).unwrap();
        let roa = s(&[0.01, 0.02, 0.01, 0.02]);
        let z1 = zscore_boyd(&s(&[0.10; 4]), &roa, &cfg).unwrap();
        assert!((z1.values[3].unwrap() - 19.919).abs() < 1e-3);
        assert_eq!(&z1.values[..3], &[None, None, None]);
        let z2 = zscore_yeyati(&s(&[0.10, 0.10, 0.10, 0.12]), &roa, &cfg).unwrap();
        assert!((z2.values[3].unwrap() - 23.383).abs() < 1e-3);
    }

    #[test]
    fn zscore_degenerate_window() {
        let cfg = RollingWindowConfig::full(4).unwrap();
        let z = zscore_boyd(&s(&[0.1; 4]), &s(&[0.01; 4]), &cfg).unwrap();
        assert_eq!(z.values[3], None);
        assert!(z.degenerate[3]);
        assert!(!z.degenerate[2]);
        let z = zscore_yeyati(&s(&[0.1; 4]), &s(&[0.01; 4]), &cfg).unwrap();
        assert!(z.degenerate[3]);
    }

    #[test]
    fn zscore_variants_agree_for_constant_car() {
        let cfg = RollingWindowConfig::full(3).unwrap();
        let car = s(&[0.08; 6]);
        let roa = s(&[0.01, 0.03, -0.01, 0.02, 0.015, 0.0]);
        let a = zscore_boyd(&car, &roa, &cfg).unwrap();
        let b = zscore_yeyati(&car, &roa, &cfg).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            match (x, y) {
                (Some(x), Some(y)) => assert!((x - y).abs() <= 1e-12 * x.abs()),
                (None, None) => {}
                _ => panic!("definedness differs"),
            }
        }
    }

    #[test]
    fn shock_examples() {
        let sh = shock_decompose(&s(&[100., 80., 90., 110.]), 3).unwrap();
        assert_eq!(sh.base[3], Some(90.0));
        assert_eq!((sh.positive[3], sh.negative[3]), (Some(20.0), Some(0.0)));
        assert_eq!(&sh.positive[..3], &[None, None, None]);

        let sh = shock_decompose(&s(&[100.; 4]), 3).unwrap();
        assert_eq!((sh.positive[3], sh.negative[3]), (Some(0.0), Some(0.0)));

        let sh = shock_decompose(&s(&[100., 120., 110., 80.]), 3).unwrap();
        assert_eq!(sh.base[3], Some(110.0));
        assert_eq!((sh.positive[3], sh.negative[3]), (Some(0.0), Some(-30.0)));

        assert!(shock_decompose(&s(&[1.0]), 0).is_err());
    }

    #[test]
    fn hamilton_examples() {
        let h = shock_decompose_hamilton(&s(&[100., 80., 90., 110.]), 3).unwrap();
        assert_eq!(h.positive[3], Some(10.0));
        let h = shock_decompose_hamilton(&s(&[100., 120., 110., 80.]), 3).unwrap();
        assert_eq!(h.negative[3], Some(-20.0));
        let h = shock_decompose_hamilton(&s(&[1., 2., 3., 4., 5., 6.]), 2).unwrap();
        assert!(h.negative.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn shock_missing_in_lookback() {
        let sh = shock_decompose(&[Some(1.0), None, Some(2.0), Some(3.0), Some(4.0)], 2).unwrap();
        assert_eq!(sh.positive[2], None);
        assert_eq!(sh.positive[3], None);
        assert_eq!(sh.positive[4], Some(1.5));
    }
}
