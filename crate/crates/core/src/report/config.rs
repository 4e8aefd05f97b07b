//! Run configuration in a flat `key = value` text format.
//!
//! ```text
//! # comment
//! input = banks.csv
//! entity_column = bank
//! period_column = year
//! zscore = boyd
//! shocks = returns, positive, negative
//! models = 1-9
//! drop_entity = Sberbank
//! out = results
//! formats = text, json
//! ```
//!
//! One assignment per line; blank lines and lines starting with `#` are
//! ignored; list values are comma-separated. Keys are listed in
//! [`RunConfig::KEYS`]. `drop_entity` accumulates across lines; any other
//! repeated key keeps the last value.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::derive::DeriveOptions;
use super::tables::Format;
use crate::ardl_pmg::{CovarianceKind, EcTiming, EstimateOptions};
use crate::diagnostics::{Deterministic, LagSelection, UnitRootSpec};
use crate::error::{Error, Result};
use crate::indicators::{RollingWindowConfig, ShockVariant, ZScoreVariant};
use crate::simulate::BankPanelParams;

/// Which failed cells should turn into a failing exit status.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FatalCells {
    #[default]
    None,
    All,
    Cells(Vec<(ShockVariant, usize)>),
}

impl FatalCells {
    pub fn is_fatal(&self, shock: ShockVariant, model: usize) -> bool {
        match self {
            FatalCells::None => false,
            FatalCells::All => true,
            FatalCells::Cells(cells) => cells.contains(&(shock, model)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub entity_column: String,
    pub period_column: String,
    pub simulate: bool,
    pub sim: BankPanelParams,
    pub zscore: ZScoreVariant,
    pub shocks: Vec<ShockVariant>,
    pub models: Vec<usize>,
    pub p: usize,
    pub q: usize,
    pub ec_timing: EcTiming,
    pub estimator: EstimateOptions,
    pub unit_root: UnitRootSpec,
    pub derive: DeriveOptions,
    pub drop_entity: Vec<String>,
    pub out: Option<PathBuf>,
    pub formats: Vec<Format>,
    pub fatal: FatalCells,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            entity_column: "bank".into(),
            period_column: "year".into(),
            simulate: false,
            sim: BankPanelParams::default(),
            zscore: ZScoreVariant::Boyd,
            shocks: ShockVariant::ALL.to_vec(),
            models: (1..=9).collect(),
            p: 1,
            q: 1,
            ec_timing: EcTiming::Contemporaneous,
            estimator: EstimateOptions::default(),
            unit_root: UnitRootSpec::default(),
            derive: DeriveOptions::default(),
            drop_entity: Vec::new(),
            out: None,
            formats: vec![Format::Text, Format::Json],
            fatal: FatalCells::None,
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| invalid(format!("`{key}`: cannot parse `{value}`")))
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(invalid(format!(
            "`{key}`: expected true or false, got `{value}`"
        ))),
    }
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn range(key: &str, value: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = list(value).collect();
    match parts.as_slice() {
        [lo, hi] => Ok((num(key, lo)?, num(key, hi)?)),
        _ => Err(invalid(format!(
            "`{key}`: expected `low, high`, got `{value}`"
        ))),
    }
}

fn parse_models(value: &str) -> Result<Vec<usize>> {
    let mut models = Vec::new();
    for item in list(value) {
        let (lo, hi) = match item.split_once('-') {
            Some((a, b)) => (
                num::<usize>("models", a.trim())?,
                num::<usize>("models", b.trim())?,
            ),
            None => {
                let m = num::<usize>("models", item)?;
                (m, m)
            }
        };
        if lo < 1 || hi > 9 || lo > hi {
            return Err(invalid(format!("`models`: `{item}` is outside 1-9")));
        }
        for m in lo..=hi {
            if !models.contains(&m) {
                models.push(m);
            }
        }
    }
    if models.is_empty() {
        return Err(invalid("`models`: empty list"));
    }
    models.sort_unstable();
    Ok(models)
}

/// `returns`, `positive`, `negative` or `all`, comma-separated.
pub fn parse_shocks(value: &str) -> Result<Vec<ShockVariant>> {
    let mut out = Vec::new();
    for item in list(value) {
        let add: Vec<ShockVariant> = if item.eq_ignore_ascii_case("all") {
            ShockVariant::ALL.to_vec()
        } else {
            vec![ShockVariant::parse(item)?]
        };
        for s in add {
            if !out.contains(&s) {
                out.push(s);
            }
        }
    }
    if out.is_empty() {
        return Err(invalid("`shocks`: empty list"));
    }
    out.sort_by_key(|s| ShockVariant::ALL.iter().position(|a| a == s));
    Ok(out)
}

fn parse_fatal(value: &str) -> Result<FatalCells> {
    match value.to_ascii_lowercase().as_str() {
        "" | "none" => return Ok(FatalCells::None),
        "all" => return Ok(FatalCells::All),
        _ => {}
    }
    let mut cells = Vec::new();
    for item in list(value) {
        let (s, m) = item
            .split_once(':')
            .ok_or_else(|| invalid(format!("`fatal`: expected `shock:model`, got `{item}`")))?;
        cells.push((ShockVariant::parse(s)?, num("fatal", m.trim())?));
    }
    Ok(FatalCells::Cells(cells))
}

fn shock_text(s: &[ShockVariant]) -> String {
    s.iter().map(|v| v.label()).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    pub const KEYS: [&'static str; 39] = [
        "input",
        "entity_column",
        "period_column",
        "simulate",
        "seed",
        "sim.banks",
        "sim.periods",
        "sim.first_period",
        "sim.shock",
        "sim.shock_loading",
        "sim.pbvr_loading",
        "sim.rho_range",
        "sim.noise_sd",
        "sim.burn_in",
        "zscore",
        "shocks",
        "models",
        "p",
        "q",
        "ec_timing",
        "max_iter",
        "tol_theta",
        "tol_grad",
        "max_halvings",
        "covariance",
        "unit_root.deterministic",
        "unit_root.lags",
        "unit_root.lag_selection",
        "unit_root.max_lags",
        "unit_root.finite_sample",
        "window",
        "window_min_obs",
        "lookback",
        "drop_entity",
        "out",
        "formats",
        "fatal",
        "sim.lookback",
        "std_divisor",
    ];

    /// Parse a configuration file; unknown keys and bad values report
    /// their line number.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| invalid(format!("line {}: expected `key = value`", i + 1)))?;
            cfg.set(key.trim(), value.trim()).map_err(|e| match e {
                Error::InvalidConfig(msg) => invalid(format!("line {}: {msg}", i + 1)),
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Assign one key. Used by the file parser and by command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "input" => self.input = Some(PathBuf::from(value)),
            "entity_column" => self.entity_column = value.into(),
            "period_column" => self.period_column = value.into(),
            "simulate" => self.simulate = boolean(key, value)?,
            "seed" => self.sim.seed = num(key, value)?,
            "sim.banks" => self.sim.n_banks = num(key, value)?,
            "sim.periods" => self.sim.n_periods = num(key, value)?,
            "sim.first_period" => self.sim.first_period = num(key, value)?,
            "sim.shock" => self.sim.shock = ShockVariant::parse(value)?,
            "sim.shock_loading" => self.sim.shock_loading = num(key, value)?,
            "sim.pbvr_loading" => self.sim.pbvr_loading = num(key, value)?,
            "sim.rho_range" => self.sim.rho_range = range(key, value)?,
            "sim.noise_sd" => self.sim.noise_sd = num(key, value)?,
            "sim.burn_in" => self.sim.burn_in = num(key, value)?,
            "sim.lookback" => self.sim.lookback = num(key, value)?,
            "zscore" => self.zscore = ZScoreVariant::parse(value)?,
            "shocks" => self.shocks = parse_shocks(value)?,
            "models" => self.models = parse_models(value)?,
            "p" => self.p = num(key, value)?,
            "q" => self.q = num(key, value)?,
            "ec_timing" => {
                self.ec_timing = match value.to_ascii_lowercase().as_str() {
                    "contemporaneous" | "current" => EcTiming::Contemporaneous,
                    "lagged" => EcTiming::Lagged,
                    _ => return Err(invalid(format!("`ec_timing`: unknown value `{value}`"))),
                }
            }
            "max_iter" => self.estimator.max_iter = num(key, value)?,
            "tol_theta" => self.estimator.tol_theta = num(key, value)?,
            "tol_grad" => self.estimator.tol_grad = num(key, value)?,
            "max_halvings" => self.estimator.max_halvings = num(key, value)?,
            "covariance" => {
                self.estimator.covariance = match value.to_ascii_lowercase().as_str() {
                    "information" | "hessian" => CovarianceKind::Information,
                    "robust" | "sandwich" => CovarianceKind::Robust,
                    _ => return Err(invalid(format!("`covariance`: unknown value `{value}`"))),
                }
            }
            "unit_root.deterministic" => {
                self.unit_root.deterministic = match value.to_ascii_lowercase().as_str() {
                    "constant" | "c" => Deterministic::Constant,
                    "trend" | "ct" | "constant_and_trend" => Deterministic::ConstantAndTrend,
                    _ => {
                        return Err(invalid(format!(
                            "`unit_root.deterministic`: unknown value `{value}`"
                        )))
                    }
                }
            }
            "unit_root.lags" => {
                let k = num(key, value)?;
                self.unit_root.lag_selection = LagSelection::Fixed(k);
                self.unit_root.max_lags = self.unit_root.max_lags.max(k);
            }
            "unit_root.lag_selection" => {
                self.unit_root.lag_selection = match value.to_ascii_lowercase().as_str() {
                    "sic" | "bic" | "ic" => LagSelection::InformationCriterion,
                    other => LagSelection::Fixed(num(key, other)?),
                }
            }
            "unit_root.max_lags" => self.unit_root.max_lags = num(key, value)?,
            "unit_root.finite_sample" => {
                self.unit_root.finite_sample_pvalues = boolean(key, value)?
            }
            "window" => {
                let n = num(key, value)?;
                self.derive.window =
                    RollingWindowConfig::new(n, n)?.with_divisor(self.derive.window.divisor);
            }
            "window_min_obs" => {
                let w = self.derive.window;
                self.derive.window =
                    RollingWindowConfig::new(w.n, num(key, value)?)?.with_divisor(w.divisor);
            }
            "std_divisor" => {
                self.derive.window.divisor = match value.to_ascii_lowercase().as_str() {
                    "sample" => crate::indicators::StdDivisor::Sample,
                    "population" => crate::indicators::StdDivisor::Population,
                    _ => return Err(invalid(format!("`std_divisor`: unknown value `{value}`"))),
                }
            }
            "lookback" => self.derive.lookback = num(key, value)?,
            "drop_entity" => {
                for e in list(value) {
                    if !self.drop_entity.iter().any(|d| d == e) {
                        self.drop_entity.push(e.into());
                    }
                }
            }
            "out" => self.out = Some(PathBuf::from(value)),
            "formats" => {
                let f = list(value).map(Format::parse).collect::<Result<Vec<_>>>()?;
                if f.is_empty() {
                    return Err(invalid("`formats`: empty list"));
                }
                self.formats = f;
            }
            "fatal" => self.fatal = parse_fatal(value)?,
            "workers" => {
                return Err(invalid(format!(
                    "`workers` is read from the {} environment variable only",
                    crate::simulate::WORKERS_ENV
                )))
            }
            _ => return Err(invalid(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Exactly one input source and a usable model request.
    pub fn validate(&self) -> Result<()> {
        match (&self.input, self.simulate) {
            (Some(_), true) => {
                return Err(invalid(
                    "both `input` and `simulate` are set; choose one input source",
                ))
            }
            (None, false) => {
                return Err(invalid("no input source: set `input` or `simulate = true`"))
            }
            _ => {}
        }
        if self.p < 1 || self.q < 1 {
            return Err(invalid("`p` and `q` must be at least 1"));
        }
        if self.derive.lookback == 0 {
            return Err(invalid("`lookback` must be at least 1"));
        }
        Ok(())
    }

    /// Canonical text form; [`RunConfig::parse`] reads it back unchanged.
    pub fn to_config_string(&self) -> String {
        let mut lines = Vec::new();
        let mut kv = |k: &str, v: String| lines.push(format!("{k} = {v}"));
        if let Some(p) = &self.input {
            kv("input", p.display().to_string());
        }
        kv("entity_column", self.entity_column.clone());
        kv("period_column", self.period_column.clone());
        kv("simulate", self.simulate.to_string());
        kv("seed", self.sim.seed.to_string());
        kv("sim.banks", self.sim.n_banks.to_string());
        kv("sim.periods", self.sim.n_periods.to_string());
        kv("sim.first_period", self.sim.first_period.to_string());
        kv("sim.shock", self.sim.shock.label().into());
        kv("sim.shock_loading", format!("{:?}", self.sim.shock_loading));
        kv("sim.pbvr_loading", format!("{:?}", self.sim.pbvr_loading));
        kv(
            "sim.rho_range",
            format!("{:?}, {:?}", self.sim.rho_range.0, self.sim.rho_range.1),
        );
        kv("sim.noise_sd", format!("{:?}", self.sim.noise_sd));
        kv("sim.burn_in", self.sim.burn_in.to_string());
        kv("sim.lookback", self.sim.lookback.to_string());
        kv("zscore", self.zscore.column().into());
        kv("shocks", shock_text(&self.shocks));
        kv(
            "models",
            self.models
                .iter()
                .map(|m| m.to_string())
                .collect::<Vec<_>>()
                .join(", "),
        );
        kv("p", self.p.to_string());
        kv("q", self.q.to_string());
        kv(
            "ec_timing",
            match self.ec_timing {
                EcTiming::Contemporaneous => "contemporaneous",
                EcTiming::Lagged => "lagged",
            }
            .into(),
        );
        kv("max_iter", self.estimator.max_iter.to_string());
        kv("tol_theta", format!("{:?}", self.estimator.tol_theta));
        kv("tol_grad", format!("{:?}", self.estimator.tol_grad));
        kv("max_halvings", self.estimator.max_halvings.to_string());
        kv(
            "covariance",
            match self.estimator.covariance {
                CovarianceKind::Information => "information",
                CovarianceKind::Robust => "robust",
            }
            .into(),
        );
        kv(
            "unit_root.deterministic",
            match self.unit_root.deterministic {
                Deterministic::Constant => "constant",
                Deterministic::ConstantAndTrend => "trend",
            }
            .into(),
        );
        kv("unit_root.max_lags", self.unit_root.max_lags.to_string());
        kv(
            "unit_root.lag_selection",
            match self.unit_root.lag_selection {
                LagSelection::Fixed(k) => k.to_string(),
                LagSelection::InformationCriterion => "sic".into(),
            },
        );
        kv(
            "unit_root.finite_sample",
            self.unit_root.finite_sample_pvalues.to_string(),
        );
        kv("window", self.derive.window.n.to_string());
        kv("window_min_obs", self.derive.window.min_obs.to_string());
        kv(
            "std_divisor",
            match self.derive.window.divisor {
                crate::indicators::StdDivisor::Sample => "sample",
                crate::indicators::StdDivisor::Population => "population",
            }
            .into(),
        );
        kv("lookback", self.derive.lookback.to_string());
        for d in &self.drop_entity {
            kv("drop_entity", d.clone());
        }
        if let Some(o) = &self.out {
            kv("out", o.display().to_string());
        }
        kv(
            "formats",
            self.formats
                .iter()
                .map(|f| f.extension().replace("txt", "text"))
                .collect::<Vec<_>>()
                .join(", "),
        );
        kv(
            "fatal",
            match &self.fatal {
                FatalCells::None => "none".into(),
                FatalCells::All => "all".into(),
                FatalCells::Cells(c) => c
                    .iter()
                    .map(|(s, m)| format!("{}:{m}", s.label()))
                    .collect::<Vec<_>>()
                    .join(", "),
            },
        );
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }

    /// SHA-256 of the configuration with output settings cleared, so the
    /// same analysis written elsewhere hashes the same.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        c.formats = Vec::new();
        c.fatal = FatalCells::None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_file_with_comments() {
        let cfg = RunConfig::parse(
            "# run\ninput = data.csv\nzscore = yeyati\nshocks = positive\nmodels = 1, 3-4\n\
             drop_entity = Sberbank\ndrop_entity = VTB\nformats = csv\ncovariance = robust\n",
        )
        .unwrap();
        assert_eq!(cfg.input, Some(PathBuf::from("data.csv")));
        assert_eq!(cfg.zscore, ZScoreVariant::Yeyati);
        assert_eq!(cfg.shocks, vec![ShockVariant::Positive]);
        assert_eq!(cfg.models, vec![1, 3, 4]);
        assert_eq!(cfg.drop_entity, vec!["Sberbank", "VTB"]);
        assert_eq!(cfg.formats, vec![Format::Csv]);
        assert_eq!(cfg.estimator.covariance, CovarianceKind::Robust);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = RunConfig::parse("simulate = true\n\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn exactly_one_source() {
        let both = RunConfig::parse("input = a.csv\nsimulate = true\n").unwrap();
        assert!(both.validate().is_err());
        assert!(RunConfig::default().validate().is_err());
    }

    #[test]
    fn shocks_all_and_order() {
        assert_eq!(parse_shocks("all").unwrap(), ShockVariant::ALL.to_vec());
        assert_eq!(
            parse_shocks("negative, returns").unwrap(),
            vec![ShockVariant::Returns, ShockVariant::Negative]
        );
        assert!(parse_models("0-3").is_err());
    }

    #[test]
    fn canonical_text_round_trips() {
        let mut cfg = RunConfig::parse(
            "simulate = true\nseed = 42\nsim.rho_range = -0.8, -0.2\nfatal = returns:4\n",
        )
        .unwrap();
        cfg.set("tol_theta", "1e-9").unwrap();
        let back = RunConfig::parse(&cfg.to_config_string()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.config_hash(), cfg.config_hash());
    }

    #[test]
    fn hash_ignores_output_settings() {
        let a = RunConfig::parse("simulate = true\nout = x\n").unwrap();
        let b = RunConfig::parse("simulate = true\nout = y\nformats = csv\n").unwrap();
        let c = RunConfig::parse("simulate = true\nseed = 1\n").unwrap();
        assert_eq!(a.config_hash(), b.config_hash());
        assert_ne!(a.config_hash(), c.config_hash());
    }
}
