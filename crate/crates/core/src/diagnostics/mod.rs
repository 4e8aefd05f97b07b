//! Pre-estimation test battery: cross-sectional dependence (Pesaran CD,
//! Friedman, Frees) and first-generation panel unit-root tests (LLC, IPS,
//! Fisher-ADF, Fisher-PP).
//!
//! Every test takes an N×T grid (`grid[i][t]`, missing cells as `None`).

mod adf;
mod cross_section;
mod unit_root;

pub use adf::{
    adf_pvalue, adf_regression, df_critical_value, mackinnon_pvalue, newey_west_bandwidth,
    phillips_perron, AdfFit, PpFit,
};
pub use cross_section::{frees_cd, frees_q_cdf, friedman_cd, pesaran_cd, spearman};
pub use unit_root::{
    fisher_combine, ips_moments, ips_test, llc_adjustment, llc_test, FisherMode, FISHER_P_FLOOR,
};

use serde::{Deserialize, Serialize};

use crate::panel_data::{is_cross_section_invariant, Series};

/// Significance levels at which every test records a decision.
pub const LEVELS: [f64; 3] = [0.01, 0.05, 0.10];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelDecision {
    pub level: f64,
    pub reject: bool,
}

/// Per-entity building block of a panel statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityStatistic {
    pub entity: usize,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub lags: Option<usize>,
    pub nobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test_name: String,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub null_hypothesis: String,
    pub decision: Vec<LevelDecision>,
    pub detail: Vec<EntityStatistic>,
    /// Named intermediate quantities (pooled t, adjustment terms, ...).
    pub components: Vec<(String, f64)>,
    pub warnings: Vec<String>,
}

impl TestResult {
    pub(crate) fn new(
        test_name: &str,
        null_hypothesis: &str,
        statistic: f64,
        p_value: f64,
    ) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        Self {
            test_name: test_name.to_string(),
            statistic,
            p_value: Some(p_value),
            null_hypothesis: null_hypothesis.to_string(),
            decision: LEVELS
                .iter()
                .map(|&level| LevelDecision {
                    level,
                    reject: p_value < level,
                })
                .collect(),
            detail: Vec::new(),
            components: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn rejects_at(&self, level: f64) -> bool {
        self.decision
            .iter()
            .find(|d| (d.level - level).abs() < 1e-12)
            .map(|d| d.reject)
            .unwrap_or_else(|| self.p_value.is_some_and(|p| p < level))
    }

    /// `***`, `**`, `*` for rejection at 1%, 5%, 10%.
    pub fn stars(&self) -> &'static str {
        if self.rejects_at(0.01) {
            "***"
        } else if self.rejects_at(0.05) {
            "**"
        } else if self.rejects_at(0.10) {
            "*"
        } else {
            ""
        }
    }

    pub fn component(&self, name: &str) -> Option<f64> {
        self.components
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }
}

/// Deterministic terms of the unit-root regressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Deterministic {
    #[default]
    Constant,
    ConstantAndTrend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagSelection {
    Fixed(usize),
    /// Schwarz criterion over 0..=max_lags on a common sample.
    InformationCriterion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitRootSpec {
    pub deterministic: Deterministic,
    pub lag_selection: LagSelection,
    pub max_lags: usize,
    /// Map ADF/PP statistics through the finite-sample critical-value
    /// surfaces before the asymptotic p-value lookup.
    pub finite_sample_pvalues: bool,
}

impl Default for UnitRootSpec {
    fn default() -> Self {
        Self {
            deterministic: Deterministic::Constant,
            lag_selection: LagSelection::Fixed(1),
            max_lags: 1,
            finite_sample_pvalues: true,
        }
    }
}

impl UnitRootSpec {
    pub fn fixed(lags: usize) -> Self {
        Self {
            lag_selection: LagSelection::Fixed(lags),
            max_lags: lags,
            ..Self::default()
        }
    }
}

pub(crate) fn invariance_warning(grid: &[Series]) -> Option<String> {
    is_cross_section_invariant(grid).then(|| {
        "series is identical across entities: effective N = 1, panel statistics are degenerate"
            .to_string()
    })
}

pub(crate) fn std_normal_cdf(x: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::new(0.0, 1.0).expect("valid").cdf(x)
}

pub(crate) fn chi2_sf(x: f64, df: f64) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df).expect("positive df").sf(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stars_follow_decisions() {
        assert_eq!(TestResult::new("t", "h0", 1.0, 0.001).stars(), "***");
        assert_eq!(TestResult::new("t", "h0", 1.0, 0.03).stars(), "**");
        assert_eq!(TestResult::new("t", "h0", 1.0, 0.07).stars(), "*");
        assert_eq!(TestResult::new("t", "h0", 1.0, 0.5).stars(), "");
    }

    #[test]
    fn decisions_are_monotone() {
        for p in [0.0, 0.005, 0.01, 0.02, 0.05, 0.07, 0.1, 0.2, 1.0] {
            let r = TestResult::new("t", "h0", 0.0, p);
            if r.rejects_at(0.01) {
                assert!(r.rejects_at(0.05));
            }
            if r.rejects_at(0.05) {
                assert!(r.rejects_at(0.10));
            }
        }
    }
}
