//! Panel unit-root tests built from per-entity ADF/PP regressions.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::adf::{
    adf_pvalue, bartlett_lrv, fit_with_lags, phillips_perron, select_lags, AdfDesign,
};
use super::{
    chi2_sf, invariance_warning, std_normal_cdf, Deterministic, EntityStatistic, TestResult,
    UnitRootSpec,
};
use crate::error::{Error, Result};
use crate::linalg::Projector;
use crate::panel_data::Series;

const UNIT_ROOT_NULL: &str = "unit root in every entity";

/// Mean and standard-deviation adjustments of the LLC t* statistic by
/// average regression length T̃: (T̃, μ* const, σ* const, μ* trend, σ* trend).
/// The last row is the asymptotic limit.
const LLC_ADJUSTMENTS: [(f64, f64, f64, f64, f64); 13] = [
    (25.0, -0.554, 0.919, -0.703, 1.003),
    (30.0, -0.546, 0.889, -0.674, 0.949),
    (35.0, -0.541, 0.867, -0.653, 0.906),
    (40.0, -0.537, 0.850, -0.637, 0.871),
    (45.0, -0.533, 0.837, -0.624, 0.842),
    (50.0, -0.531, 0.826, -0.614, 0.818),
    (60.0, -0.527, 0.810, -0.598, 0.780),
    (70.0, -0.524, 0.798, -0.587, 0.751),
    (80.0, -0.521, 0.789, -0.578, 0.728),
    (90.0, -0.520, 0.782, -0.571, 0.710),
    (100.0, -0.518, 0.776, -0.566, 0.695),
    (250.0, -0.509, 0.742, -0.533, 0.603),
    (500.0, -0.500, 0.707, -0.500, 0.500),
];

/// (μ*, σ*) for average regression length `t_tilde`, linearly interpolated;
/// below 25 the first row is used.
pub fn llc_adjustment(t_tilde: f64, det: Deterministic) -> (f64, f64) {
    let pick = |row: &(f64, f64, f64, f64, f64)| match det {
        Deterministic::Constant => (row.1, row.2),
        Deterministic::ConstantAndTrend => (row.3, row.4),
    };
    let first = &LLC_ADJUSTMENTS[0];
    if t_tilde <= first.0 {
        return pick(first);
    }
    for w in LLC_ADJUSTMENTS.windows(2) {
        if t_tilde <= w[1].0 {
            let a = pick(&w[0]);
            let b = pick(&w[1]);
            let f = (t_tilde - w[0].0) / (w[1].0 - w[0].0);
            return (a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1));
        }
    }
    pick(&LLC_ADJUSTMENTS[LLC_ADJUSTMENTS.len() - 1])
}

fn first_differences(y: &[Option<f64>]) -> Vec<f64> {
    y.windows(2).filter_map(|w| Some(w[1]? - w[0]?)).collect()
}

fn check_grid(grid: &[Series]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InsufficientData("panel has no entities".into()));
    }
    Ok(())
}

/// Levin–Lin–Chu pooled t* (common unit root).
pub fn llc_test(grid: &[Series], spec: &UnitRootSpec) -> Result<TestResult> {
    check_grid(grid)?;
    let mut warnings: Vec<String> = invariance_warning(grid).into_iter().collect();
    let mut detail = Vec::new();
    let mut e_all: Vec<f64> = Vec::new();
    let mut v_all: Vec<f64> = Vec::new();
    let mut s_ratios = Vec::new();
    for (i, y) in grid.iter().enumerate() {
        let entity = (|| -> Result<_> {
            let lags = select_lags(y, spec)?;
            let design = AdfDesign::build(y, lags, spec.deterministic, 0);
            let rows = design.nobs();
            let k = design.nuisance.ncols() + 1;
            if rows < 3 || rows <= k {
                return Err(Error::InsufficientData(format!(
                    "{rows} usable observations"
                )));
            }
            let proj = Projector::new(&design.nuisance);
            let e = proj.residualize(&design.dy);
            let v = proj.residualize(&design.ylag);
            let vv = v.norm_squared();
            if vv <= 0.0 {
                return Err(Error::InsufficientData(
                    "lagged level has no variation".into(),
                ));
            }
            let delta = v.dot(&e) / vv;
            let sigma2_e = (&e - &v * delta).norm_squared() / rows as f64;
            if sigma2_e <= 0.0 {
                return Err(Error::InsufficientData("perfect ADF fit".into()));
            }
            let mut dy = first_differences(y);
            if spec.deterministic == Deterministic::ConstantAndTrend {
                let mean = dy.iter().sum::<f64>() / dy.len() as f64;
                dy.iter_mut().for_each(|d| *d -= mean);
            }
            let kbar = ((3.21 * (rows as f64).powf(1.0 / 3.0)).round() as usize).min(dy.len() - 1);
            let sigma2_y = bartlett_lrv(&dy, kbar);
            Ok((lags, rows, e, v, delta, sigma2_e, sigma2_y))
        })();
        match entity {
            Ok((lags, rows, e, v, delta, sigma2_e, sigma2_y)) => {
                let sigma_e = sigma2_e.sqrt();
                e_all.extend(e.iter().map(|x| x / sigma_e));
                v_all.extend(v.iter().map(|x| x / sigma_e));
                s_ratios.push(sigma2_y.max(0.0).sqrt() / sigma_e);
                detail.push(EntityStatistic {
                    entity: i,
                    statistic: delta * v.norm() / sigma_e,
                    p_value: None,
                    lags: Some(lags),
                    nobs: rows,
                });
            }
            Err(e) => warnings.push(format!("entity {i} dropped: {e}")),
        }
    }
    if detail.is_empty() {
        return Err(Error::InsufficientData(
            "every entity was dropped from the LLC test".into(),
        ));
    }
    let n = detail.len() as f64;
    let total = e_all.len() as f64;
    let vv: f64 = v_all.iter().map(|v| v * v).sum();
    let delta = v_all.iter().zip(&e_all).map(|(v, e)| v * e).sum::<f64>() / vv;
    let sigma2 = v_all
        .iter()
        .zip(&e_all)
        .map(|(v, e)| (e - delta * v).powi(2))
        .sum::<f64>()
        / total;
    let std_delta = sigma2.sqrt() / vv.sqrt();
    let t_delta = delta / std_delta;
    let t_tilde = total / n;
    let s_n = s_ratios.iter().sum::<f64>() / n;
    let (mu, sd) = llc_adjustment(t_tilde, spec.deterministic);
    let t_star = (t_delta - n * t_tilde * s_n / sigma2 * std_delta * mu) / sd;
    let mut r = TestResult::new("llc", UNIT_ROOT_NULL, t_star, std_normal_cdf(t_star));
    r.detail = detail;
    r.components = vec![
        ("delta".into(), delta),
        ("t_delta".into(), t_delta),
        ("sigma2".into(), sigma2),
        ("s_n".into(), s_n),
        ("t_tilde".into(), t_tilde),
        ("mu_star".into(), mu),
        ("sigma_star".into(), sd),
    ];
    r.warnings = warnings;
    Ok(r)
}

/// Replications used to tabulate the null moments of the ADF t-ratio.
pub const IPS_MOMENT_REPS: usize = 25_000;

type MomentKey = (usize, usize, Deterministic);

fn moment_cache() -> &'static Mutex<HashMap<MomentKey, (f64, f64)>> {
    static CACHE: OnceLock<Mutex<HashMap<MomentKey, (f64, f64)>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Mean and variance of the ADF t-ratio under a Gaussian random-walk null
/// for a regression with `nobs` observations and `lags` augmentation lags.
/// Tabulated by seeded simulation ([`IPS_MOMENT_REPS`] draws, seed fixed per
/// key) and cached, so results are reproducible for any T.
pub fn ips_moments(nobs: usize, lags: usize, det: Deterministic) -> (f64, f64) {
    let key = (nobs, lags, det);
    let mut cache = moment_cache().lock().expect("moment cache poisoned");
    if let Some(m) = cache.get(&key) {
        return *m;
    }
    let seed = 0x1B5_u64
        ^ ((nobs as u64) << 20)
        ^ ((lags as u64) << 8)
        ^ matches!(det, Deterministic::ConstantAndTrend) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = nobs + lags + 1;
    let mut y = vec![Some(0.0); len];
    let (mut sum, mut sum2, mut count) = (0.0, 0.0, 0usize);
    for _ in 0..IPS_MOMENT_REPS {
        let mut level = 0.0;
        for cell in y.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut rng);
            level += e;
            *cell = Some(level);
        }
        if let Ok(fit) = fit_with_lags(&y, lags, det) {
            sum += fit.tau;
            sum2 += fit.tau * fit.tau;
            count += 1;
        }
    }
    let c = count as f64;
    let mean = sum / c;
    let var = (sum2 - c * mean * mean) / (c - 1.0);
    cache.insert(key, (mean, var));
    (mean, var)
}

/// Im–Pesaran–Shin W-t-bar: standardized average of entity ADF t-ratios.
pub fn ips_test(grid: &[Series], spec: &UnitRootSpec) -> Result<TestResult> {
    check_grid(grid)?;
    let mut warnings: Vec<String> = invariance_warning(grid).into_iter().collect();
    let mut detail = Vec::new();
    let mut moments = Vec::new();
    for (i, y) in grid.iter().enumerate() {
        match super::adf::adf_regression(y, spec) {
            Ok(fit) => {
                moments.push(ips_moments(fit.nobs, fit.lags, spec.deterministic));
                detail.push(EntityStatistic {
                    entity: i,
                    statistic: fit.tau,
                    p_value: None,
                    lags: Some(fit.lags),
                    nobs: fit.nobs,
                });
            }
            Err(e) => warnings.push(format!("entity {i} dropped: {e}")),
        }
    }
    if detail.is_empty() {
        return Err(Error::InsufficientData(
            "every entity was dropped from the IPS test".into(),
        ));
    }
    let n = detail.len() as f64;
    let t_bar = detail.iter().map(|d| d.statistic).sum::<f64>() / n;
    let e_bar = moments.iter().map(|m| m.0).sum::<f64>() / n;
    let v_bar = moments.iter().map(|m| m.1).sum::<f64>() / n;
    let w = n.sqrt() * (t_bar - e_bar) / v_bar.sqrt();
    let mut r = TestResult::new("ips", UNIT_ROOT_NULL, w, std_normal_cdf(w));
    r.detail = detail;
    r.components = vec![
        ("t_bar".into(), t_bar),
        ("mean_e".into(), e_bar),
        ("mean_var".into(), v_bar),
    ];
    r.warnings = warnings;
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FisherMode {
    Adf,
    Pp,
}

/// Entity p-values of exactly zero are replaced by this floor.
pub const FISHER_P_FLOOR: f64 = 1e-10;

/// `−2 Σ ln p_i` and its χ²(2N) p-value, with floor warnings.
pub(crate) fn fisher_from_pvalues(pvalues: &[f64]) -> (f64, f64, Vec<String>) {
    let mut warnings = Vec::new();
    let mut stat = 0.0;
    for (i, p) in pvalues.iter().enumerate() {
        let p = if *p <= 0.0 {
            warnings.push(format!(
                "entity {i}: p-value 0 clamped to {FISHER_P_FLOOR:e}"
            ));
            FISHER_P_FLOOR
        } else {
            p.min(1.0)
        };
        stat -= 2.0 * p.ln();
    }
    let p = chi2_sf(stat, 2.0 * pvalues.len() as f64);
    (stat, p, warnings)
}

/// Maddala–Wu Fisher combination of entity ADF or PP p-values.
pub fn fisher_combine(
    grid: &[Series],
    spec: &UnitRootSpec,
    mode: FisherMode,
) -> Result<TestResult> {
    check_grid(grid)?;
    let mut warnings: Vec<String> = invariance_warning(grid).into_iter().collect();
    let mut detail = Vec::new();
    for (i, y) in grid.iter().enumerate() {
        let fitted = match mode {
            FisherMode::Adf => {
                super::adf::adf_regression(y, spec).map(|f| (f.tau, f.nobs, Some(f.lags)))
            }
            FisherMode::Pp => {
                phillips_perron(y, spec.deterministic).map(|f| (f.z_tau, f.nobs, Some(f.bandwidth)))
            }
        };
        match fitted {
            Ok((stat, nobs, lags)) => {
                let p = adf_pvalue(
                    stat,
                    spec.deterministic,
                    spec.finite_sample_pvalues.then_some(nobs),
                );
                detail.push(EntityStatistic {
                    entity: i,
                    statistic: stat,
                    p_value: Some(p),
                    lags,
                    nobs,
                });
            }
            Err(e) => warnings.push(format!("entity {i} dropped: {e}")),
        }
    }
    if detail.is_empty() {
        return Err(Error::InsufficientData(
            "no entity p-value is computable".into(),
        ));
    }
    let pvalues: Vec<f64> = detail
        .iter()
        .map(|d| d.p_value.expect("set above"))
        .collect();
    let (stat, p, floor_warnings) = fisher_from_pvalues(&pvalues);
    warnings.extend(floor_warnings);
    let name = match mode {
        FisherMode::Adf => "fisher_adf",
        FisherMode::Pp => "fisher_pp",
    };
    let mut r = TestResult::new(name, UNIT_ROOT_NULL, stat, p);
    r.detail = detail;
    r.components = vec![("df".into(), 2.0 * pvalues.len() as f64)];
    r.warnings = warnings;
    Ok(r)
}
