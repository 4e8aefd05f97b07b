//! Single-series Dickey–Fuller machinery: the augmented regression, the
//! Phillips–Perron Z_t statistic and p-values.
//!
//! P-values use MacKinnon's (1994) asymptotic response surface for one
//! integrated variable:
//!
//! ```text
//! p = Φ(c0 + c1 τ + c2 τ²)             τ ≤ τ*
//! p = Φ(c0 + c1 τ + c2 τ² + c3 τ³)     τ > τ*
//! p = 0 below τ_min, 1 above τ_max
//! ```
//!
//! | terms    | τ*    | τ_min  | τ_max | small-τ c0..c2          | large-τ c0..c3                       |
//! |----------|-------|--------|-------|-------------------------|--------------------------------------|
//! | constant | −1.61 | −18.83 | 2.74  | 2.1659, 1.4412, 0.038269 | 1.7339, 0.93202, −0.12745, −0.010368 |
//! | trend    | −2.89 | −16.18 | 0.70  | 3.2512, 1.6047, 0.049588 | 2.5261, 0.61654, −0.37956, −0.060285 |
//!
//! The asymptotic surface over-rejects at short T. When the finite-sample
//! option is on, τ is first mapped onto the asymptotic scale by piecewise
//! linear quantile matching at the 1%, 5% and 10% critical values of
//! MacKinnon's (2010) response surfaces `c(T) = β∞ + β1/T + β2/T² + β3/T³`
//! (T = regression observations): scaled below the 1% point, interpolated
//! between points, shifted above the 10% point.

use nalgebra::{DMatrix, DVector};

use super::{std_normal_cdf, Deterministic, LagSelection, UnitRootSpec};
use crate::error::{Error, Result};
use crate::linalg::{ols, OlsFit};

struct Surface {
    star: f64,
    min: f64,
    max: f64,
    small: [f64; 3],
    large: [f64; 4],
}

const SURFACE_CONSTANT: Surface = Surface {
    star: -1.61,
    min: -18.83,
    max: 2.74,
    small: [2.1659, 1.4412, 3.8269e-2],
    large: [1.7339, 9.3202e-1, -1.2745e-1, -1.0368e-2],
};

const SURFACE_TREND: Surface = Surface {
    star: -2.89,
    min: -16.18,
    max: 0.70,
    small: [3.2512, 1.6047, 4.9588e-2],
    large: [2.5261, 6.1654e-1, -3.7956e-1, -6.0285e-2],
};

/// (β∞, β1, β2, β3) at 1%, 5%, 10%.
const CRIT_CONSTANT: [[f64; 4]; 3] = [
    [-3.43035, -6.5393, -16.786, -79.433],
    [-2.86154, -2.8903, -4.234, -40.040],
    [-2.56677, -1.5384, -2.809, 0.0],
];

const CRIT_TREND: [[f64; 4]; 3] = [
    [-3.95877, -9.0531, -28.428, -134.155],
    [-3.41049, -4.3904, -9.036, -45.374],
    [-3.12705, -2.5856, -3.925, -22.380],
];

fn polyval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, ci| acc * x + ci)
}

/// Asymptotic MacKinnon p-value of a Dickey–Fuller τ.
pub fn mackinnon_pvalue(tau: f64, det: Deterministic) -> f64 {
    let s = match det {
        Deterministic::Constant => &SURFACE_CONSTANT,
        Deterministic::ConstantAndTrend => &SURFACE_TREND,
    };
    if tau > s.max {
        return 1.0;
    }
    if tau < s.min {
        return 0.0;
    }
    let z = if tau <= s.star {
        polyval(&s.small, tau)
    } else {
        polyval(&s.large, tau)
    };
    std_normal_cdf(z)
}

/// Dickey–Fuller critical value at level index 0/1/2 (1%/5%/10%);
/// `nobs = None` gives the asymptotic value.
pub fn df_critical_value(level: usize, det: Deterministic, nobs: Option<usize>) -> f64 {
    let b = match det {
        Deterministic::Constant => CRIT_CONSTANT[level],
        Deterministic::ConstantAndTrend => CRIT_TREND[level],
    };
    match nobs {
        None => b[0],
        Some(t) => {
            let t = t as f64;
            b[0] + b[1] / t + b[2] / (t * t) + b[3] / (t * t * t)
        }
    }
}

fn to_asymptotic_scale(tau: f64, det: Deterministic, nobs: usize) -> f64 {
    let fin: Vec<f64> = (0..3)
        .map(|l| df_critical_value(l, det, Some(nobs)))
        .collect();
    let asy: Vec<f64> = (0..3).map(|l| df_critical_value(l, det, None)).collect();
    if tau <= fin[0] {
        tau * asy[0] / fin[0]
    } else if tau >= fin[2] {
        tau + (asy[2] - fin[2])
    } else {
        let k = if tau <= fin[1] { 0 } else { 1 };
        let w = (tau - fin[k]) / (fin[k + 1] - fin[k]);
        asy[k] + w * (asy[k + 1] - asy[k])
    }
}

/// P-value of a DF-type statistic, optionally corrected for a regression
/// with `nobs` observations.
pub fn adf_pvalue(tau: f64, det: Deterministic, nobs: Option<usize>) -> f64 {
    match nobs {
        Some(n) => mackinnon_pvalue(to_asymptotic_scale(tau, det, n), det),
        None => mackinnon_pvalue(tau, det),
    }
}

/// Rows of the augmented DF regression: response Δy_t, lagged level
/// y_{t−1}, and the nuisance block (Δy_{t−1..t−lags}, constant, trend).
pub(crate) struct AdfDesign {
    pub dy: DVector<f64>,
    pub ylag: DVector<f64>,
    pub nuisance: DMatrix<f64>,
    pub nuisance_names: Vec<String>,
}

impl AdfDesign {
    pub fn nobs(&self) -> usize {
        self.dy.len()
    }

    pub fn build(y: &[Option<f64>], lags: usize, det: Deterministic, start: usize) -> Self {
        let first = start.max(lags + 1);
        let mut rows: Vec<usize> = Vec::new();
        for t in first..y.len() {
            if (t - lags - 1..=t).all(|s| y[s].is_some()) {
                rows.push(t);
            }
        }
        let v = |s: usize| y[s].expect("checked");
        let trend = matches!(det, Deterministic::ConstantAndTrend);
        let k = lags + 1 + usize::from(trend);
        let n = rows.len();
        let dy = DVector::from_iterator(n, rows.iter().map(|&t| v(t) - v(t - 1)));
        let ylag = DVector::from_iterator(n, rows.iter().map(|&t| v(t - 1)));
        let mut nuisance = DMatrix::zeros(n, k);
        for (r, &t) in rows.iter().enumerate() {
            for j in 1..=lags {
                nuisance[(r, j - 1)] = v(t - j) - v(t - j - 1);
            }
            nuisance[(r, lags)] = 1.0;
            if trend {
                nuisance[(r, lags + 1)] = t as f64;
            }
        }
        let mut nuisance_names: Vec<String> = (1..=lags).map(|j| format!("dy_lag{j}")).collect();
        nuisance_names.push("const".into());
        if trend {
            nuisance_names.push("trend".into());
        }
        Self {
            dy,
            ylag,
            nuisance,
            nuisance_names,
        }
    }

    fn full_design(&self) -> (DMatrix<f64>, Vec<String>) {
        let n = self.nobs();
        let k = self.nuisance.ncols();
        let mut x = DMatrix::zeros(n, k + 1);
        x.set_column(0, &self.ylag);
        x.view_mut((0, 1), (n, k)).copy_from(&self.nuisance);
        let mut names = vec!["y_lag".to_string()];
        names.extend(self.nuisance_names.iter().cloned());
        (x, names)
    }

    fn fit(&self) -> Result<OlsFit> {
        let (x, names) = self.full_design();
        if self.nobs() < 3 || self.nobs() <= x.ncols() {
            return Err(Error::InsufficientData(format!(
                "{} usable observations for {} ADF regressors",
                self.nobs(),
                x.ncols()
            )));
        }
        ols(&self.dy, &x, &names)
    }
}

#[derive(Debug, Clone)]
pub struct AdfFit {
    /// t-ratio of the lagged level.
    pub tau: f64,
    /// Coefficient on the lagged level (ρ − 1).
    pub gamma: f64,
    pub se: f64,
    pub nobs: usize,
    pub lags: usize,
    pub ssr: f64,
}

pub(crate) fn fit_with_lags(y: &[Option<f64>], lags: usize, det: Deterministic) -> Result<AdfFit> {
    let design = AdfDesign::build(y, lags, det, 0);
    let fit = design.fit()?;
    let se = fit.std_errors()[0];
    Ok(AdfFit {
        tau: fit.coef[0] / se,
        gamma: fit.coef[0],
        se,
        nobs: design.nobs(),
        lags,
        ssr: fit.ssr,
    })
}

/// Lag order for one series under the spec's selection rule.
pub(crate) fn select_lags(y: &[Option<f64>], spec: &UnitRootSpec) -> Result<usize> {
    match spec.lag_selection {
        LagSelection::Fixed(k) => {
            if k > spec.max_lags {
                return Err(Error::InvalidConfig(format!(
                    "fixed lag {k} exceeds max_lags {}",
                    spec.max_lags
                )));
            }
            Ok(k)
        }
        LagSelection::InformationCriterion => {
            let mut best: Option<(f64, usize)> = None;
            for k in 0..=spec.max_lags {
                let design = AdfDesign::build(y, k, spec.deterministic, spec.max_lags + 1);
                let Ok(fit) = design.fit() else { continue };
                let n = design.nobs() as f64;
                let bic = (fit.ssr / n).ln() + fit.ncoef() as f64 * n.ln() / n;
                if best.is_none_or(|(b, _)| bic < b) {
                    best = Some((bic, k));
                }
            }
            best.map(|(_, k)| k)
                .ok_or_else(|| Error::InsufficientData("no lag order is estimable".into()))
        }
    }
}

/// Augmented Dickey–Fuller regression of `y` with the spec's deterministic
/// terms and lag rule.
pub fn adf_regression(y: &[Option<f64>], spec: &UnitRootSpec) -> Result<AdfFit> {
    let lags = select_lags(y, spec)?;
    fit_with_lags(y, lags, spec.deterministic)
}

#[derive(Debug, Clone)]
pub struct PpFit {
    pub z_tau: f64,
    pub bandwidth: usize,
    pub nobs: usize,
    pub long_run_variance: f64,
}

fn autocov(u: &[f64], j: usize) -> f64 {
    let n = u.len() as f64;
    u[j..].iter().zip(u).map(|(a, b)| a * b).sum::<f64>() / n
}

/// Newey–West (1994) automatic bandwidth for the Bartlett kernel.
pub fn newey_west_bandwidth(u: &[f64]) -> usize {
    let n = u.len();
    if n < 3 {
        return 0;
    }
    let pilot = ((4.0 * (n as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize).clamp(1, n - 1);
    let g0 = autocov(u, 0);
    let mut s0 = g0;
    let mut s1 = 0.0;
    for j in 1..=pilot {
        let gj = autocov(u, j);
        s0 += 2.0 * gj;
        s1 += 2.0 * j as f64 * gj;
    }
    if s0 <= 0.0 {
        return pilot;
    }
    let gamma = 1.1447 * ((s1 / s0).powi(2)).powf(1.0 / 3.0);
    ((gamma * (n as f64).powf(1.0 / 3.0)).floor() as usize).min(n - 1)
}

/// Bartlett-weighted long-run variance with bandwidth `m`.
pub(crate) fn bartlett_lrv(u: &[f64], m: usize) -> f64 {
    let mut lrv = autocov(u, 0);
    for j in 1..=m.min(u.len().saturating_sub(1)) {
        lrv += 2.0 * (1.0 - j as f64 / (m as f64 + 1.0)) * autocov(u, j);
    }
    lrv
}

/// Phillips–Perron Z_t: the DF regression without augmentation, with the
/// t-ratio corrected by a Bartlett/Newey–West long-run variance.
pub fn phillips_perron(y: &[Option<f64>], det: Deterministic) -> Result<PpFit> {
    let design = AdfDesign::build(y, 0, det, 0);
    let fit = design.fit()?;
    let n = design.nobs() as f64;
    let se = fit.std_errors()[0];
    let t_stat = fit.coef[0] / se;
    let u: Vec<f64> = fit.residuals.iter().copied().collect();
    let g0 = fit.ssr / n;
    let s = fit.sigma2().sqrt();
    let bandwidth = newey_west_bandwidth(&u);
    let lrv = bartlett_lrv(&u, bandwidth).max(g0 * 1e-8);
    let lam = lrv.sqrt();
    let z_tau = (g0 / lrv).sqrt() * t_stat - (lrv - g0) / (2.0 * lam) * (n * se / s);
    Ok(PpFit {
        z_tau,
        bandwidth,
        nobs: design.nobs(),
        long_run_variance: lrv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mackinnon_hits_five_percent_at_critical_values() {
        assert!((mackinnon_pvalue(-2.8615, Deterministic::Constant) - 0.05).abs() < 1e-3);
        assert!((mackinnon_pvalue(-3.4105, Deterministic::ConstantAndTrend) - 0.05).abs() < 1e-3);
        assert!((mackinnon_pvalue(-3.4304, Deterministic::Constant) - 0.01).abs() < 1e-3);
        assert_eq!(mackinnon_pvalue(5.0, Deterministic::Constant), 1.0);
        assert_eq!(mackinnon_pvalue(-30.0, Deterministic::Constant), 0.0);
    }

    #[test]
    fn mackinnon_is_continuous_at_switch_point() {
        for det in [Deterministic::Constant, Deterministic::ConstantAndTrend] {
            let star = match det {
                Deterministic::Constant => -1.61,
                Deterministic::ConstantAndTrend => -2.89,
            };
            let lo = mackinnon_pvalue(star - 1e-9, det);
            let hi = mackinnon_pvalue(star + 1e-9, det);
            assert!((lo - hi).abs() < 2e-3, "{det:?}: {lo} vs {hi}");
        }
    }

    #[test]
    fn finite_sample_correction_matches_critical_points() {
        let det = Deterministic::Constant;
        for (level, p) in [(0usize, 0.01), (1, 0.05), (2, 0.10)] {
            let c = df_critical_value(level, det, Some(28));
            assert!((adf_pvalue(c, det, Some(28)) - p).abs() < 2e-3);
        }
        // finite-sample values are further in the tail
        assert!(df_critical_value(1, det, Some(25)) < -2.98);
        assert!(adf_pvalue(-2.9, det, Some(28)) > adf_pvalue(-2.9, det, None));
    }

    #[test]
    fn adf_design_row_count() {
        let y: Vec<Option<f64>> = (0..10)
            .map(|t| Some(t as f64 * 0.3 + (t % 3) as f64))
            .collect();
        let d = AdfDesign::build(&y, 1, Deterministic::Constant, 0);
        assert_eq!(d.nobs(), 8);
        let d = AdfDesign::build(&y, 2, Deterministic::ConstantAndTrend, 0);
        assert_eq!(d.nobs(), 7);
        assert_eq!(d.nuisance.ncols(), 4);
    }

    #[test]
    fn ic_selection_stays_in_range() {
        let y: Vec<Option<f64>> = (0..40)
            .map(|t| Some(((t * 7919) % 13) as f64 + 0.1 * t as f64))
            .collect();
        let spec = UnitRootSpec {
            lag_selection: LagSelection::InformationCriterion,
            max_lags: 4,
            ..UnitRootSpec::default()
        };
        let k = select_lags(&y, &spec).unwrap();
        assert!(k <= 4);
    }

    #[test]
    fn bandwidth_is_bounded() {
        let u: Vec<f64> = (0..50).map(|t| ((t * 37) % 11) as f64 - 5.0).collect();
        let m = newey_west_bandwidth(&u);
        assert!(m < 50);
        assert!(bartlett_lrv(&u, m) > 0.0);
    }
}
