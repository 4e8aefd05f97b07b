//! Panel ARDL models in error-correction form and their estimators.
//!
//! For group `i` and period `t` the model is
//!
//! ```text
//! Δz_it = ρ_i (z_i,t−1 − θ'X_it) + Σ_{j=1}^{p−1} λ*_ij Δz_i,t−j
//!         + Σ_{j=0}^{q−1} δ*_ij' ΔX_i,t−j + Σ_{j=0}^{q−1} γ*_ij' ΔY_i,t−j + μ_i + ε_it
//! ```
//!
//! with θ common to all groups (pooled mean group). Controls `Y` enter the
//! short run only.

mod design;
mod mg;
mod pmg;

pub use design::{build_ecm_design, usable_rows, EcmDesign, GroupBlock};
pub use mg::{estimate_mg, group_ardl_ols, GroupOls, MgResult};
pub use pmg::{
    concentrated_hessian, concentrated_loglik, concentrated_score, estimate_pmg, ConvergenceInfo,
    ConvergenceStatus, CovarianceKind, EstimateOptions, GroupEstimate, PmgResult,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Timing of the long-run regressors inside the error-correction term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EcTiming {
    /// `z_{t−1} − θ'X_t`
    #[default]
    Contemporaneous,
    /// `z_{t−1} − θ'X_{t−1}`
    Lagged,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub dependent: String,
    pub long_run: Vec<String>,
    pub short_run_controls: Vec<String>,
    /// Autoregressive order (≥ 1).
    pub p: usize,
    /// Distributed-lag order; `q` Δ-terms per regressor enter the short run.
    pub q: usize,
    pub intercept: bool,
    pub ec_timing: EcTiming,
}

impl ModelSpec {
    /// ARDL(1,1) with group intercepts and no controls.
    pub fn new(dependent: impl Into<String>, long_run: &[&str]) -> Self {
        Self {
            dependent: dependent.into(),
            long_run: long_run.iter().map(|s| s.to_string()).collect(),
            short_run_controls: Vec::new(),
            p: 1,
            q: 1,
            intercept: true,
            ec_timing: EcTiming::Contemporaneous,
        }
    }

    pub fn with_controls(mut self, controls: &[&str]) -> Self {
        self.short_run_controls = controls.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn with_lags(mut self, p: usize, q: usize) -> Self {
        self.p = p;
        self.q = q;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 1 {
            return Err(Error::InvalidConfig(
                "autoregressive order p must be at least 1".into(),
            ));
        }
        if self.long_run.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one long-run regressor is required".into(),
            ));
        }
        let regressors: Vec<&String> = self
            .long_run
            .iter()
            .chain(&self.short_run_controls)
            .collect();
        if regressors.contains(&&self.dependent) {
            return Err(Error::InvalidConfig(format!(
                "dependent variable `{}` also appears as a regressor",
                self.dependent
            )));
        }
        for (k, name) in regressors.iter().enumerate() {
            if regressors[..k].contains(name) {
                return Err(Error::InvalidConfig(format!(
                    "variable `{name}` listed twice"
                )));
            }
        }
        Ok(())
    }

    /// Every variable the model reads.
    pub fn all_variables(&self) -> Vec<&str> {
        std::iter::once(self.dependent.as_str())
            .chain(self.long_run.iter().map(String::as_str))
            .chain(self.short_run_controls.iter().map(String::as_str))
            .collect()
    }

    /// Names of the short-run columns, in design order.
    pub fn short_run_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for j in 1..self.p {
            names.push(lag_name(&format!("d_{}", self.dependent), j));
        }
        for var in self.long_run.iter().chain(&self.short_run_controls) {
            for j in 0..self.q {
                names.push(lag_name(&format!("d_{var}"), j));
            }
        }
        if self.intercept {
            names.push("const".to_string());
        }
        names
    }

    /// ρ_i plus the short-run coefficients of one group.
    pub fn per_group_parameters(&self) -> usize {
        1 + self.short_run_names().len()
    }

    /// Periods consumed at the start of each group's sample.
    pub fn max_lag(&self) -> usize {
        let ec = usize::from(self.ec_timing == EcTiming::Lagged);
        self.p.max(self.q).max(ec).max(1)
    }
}

fn lag_name(base: &str, j: usize) -> String {
    if j == 0 {
        base.to_string()
    } else {
        format!("{base}_l{j}")
    }
}

/// Two-sided normal critical values for 1%, 5%, 10%.
pub const STAR_CRITICAL_VALUES: [f64; 3] = [2.576, 1.960, 1.645];

/// `***`, `**`, `*` or nothing from |estimate / std error|.
pub fn significance_stars(t_ratio: f64) -> &'static str {
    let t = t_ratio.abs();
    if !t.is_finite() {
        return if t.is_infinite() { "***" } else { "" };
    }
    if t >= STAR_CRITICAL_VALUES[0] {
        "***"
    } else if t >= STAR_CRITICAL_VALUES[1] {
        "**"
    } else if t >= STAR_CRITICAL_VALUES[2] {
        "*"
    } else {
        ""
    }
}

/// A reported estimate with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
}

impl Coefficient {
    pub fn new(name: impl Into<String>, estimate: f64, std_error: Option<f64>) -> Self {
        Self {
            name: name.into(),
            estimate,
            std_error,
        }
    }

    pub fn t_ratio(&self) -> Option<f64> {
        self.std_error.map(|se| self.estimate / se)
    }

    /// Two-sided normal p-value.
    pub fn p_value(&self) -> Option<f64> {
        self.t_ratio()
            .map(|t| 2.0 * (1.0 - crate::diagnostics::std_normal_cdf(t.abs())))
    }

    pub fn stars(&self) -> &'static str {
        self.t_ratio().map_or("", significance_stars)
    }
}
