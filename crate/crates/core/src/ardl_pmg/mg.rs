//! Unrestricted per-group error-correction regressions and their
//! mean-group average.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::pmg::pooled_mean;
use super::{Coefficient, EcmDesign, GroupBlock, ModelSpec};
use crate::error::{Error, Result};
use crate::linalg::ols;

/// Least-squares fit of Δz on `[z_lag, X, W]` for one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupOls {
    pub entity: String,
    pub nobs: usize,
    /// Coefficients with standard errors, in regressor order.
    pub coefficients: Vec<Coefficient>,
    pub t_stats: Vec<f64>,
    /// SSR / (n − k)
    pub sigma2: f64,
    pub ssr: f64,
    /// `−coef(X_k) / coef(z_lag)`, standard errors by the delta method.
    pub long_run: Vec<Coefficient>,
}

impl GroupOls {
    pub fn rho(&self) -> &Coefficient {
        &self.coefficients[0]
    }
}

pub fn group_ardl_ols(block: &GroupBlock, spec: &ModelSpec) -> Result<GroupOls> {
    let n = block.nobs();
    let k_x = block.x.ncols();
    let cols = 1 + k_x + block.w.ncols();
    if n < cols + 1 {
        return Err(Error::InsufficientData(format!(
            "group `{}`: {n} rows for {cols} regressors",
            block.entity
        )));
    }
    let mut x = DMatrix::zeros(n, cols);
    x.set_column(0, &block.z_lag);
    x.view_mut((0, 1), (n, k_x)).copy_from(&block.x);
    x.view_mut((0, 1 + k_x), (n, block.w.ncols()))
        .copy_from(&block.w);
    let mut names = vec![format!("{}_l1", spec.dependent)];
    names.extend(spec.long_run.iter().cloned());
    names.extend(spec.short_run_names());
    let fit = ols(&block.dz, &x, &names)?;
    let s2 = fit.sigma2();
    let se = fit.std_errors();
    let t_stats = fit.t_stats().iter().copied().collect();
    let c = fit.coef[0];
    let long_run = (0..k_x)
        .map(|j| {
            let b = fit.coef[1 + j];
            // gradient of −b/c in (c, b)
            let (gc, gb) = (b / (c * c), -1.0 / c);
            let v = &fit.xtx_inv;
            let var = s2
                * (gc * gc * v[(0, 0)]
                    + 2.0 * gc * gb * v[(0, 1 + j)]
                    + gb * gb * v[(1 + j, 1 + j)]);
            Coefficient::new(&names[1 + j], -b / c, Some(var.max(0.0).sqrt()))
        })
        .collect();
    Ok(GroupOls {
        entity: block.entity.clone(),
        nobs: n,
        coefficients: names
            .iter()
            .enumerate()
            .map(|(j, nm)| Coefficient::new(nm, fit.coef[j], Some(se[j])))
            .collect(),
        t_stats,
        sigma2: s2,
        ssr: fit.ssr,
        long_run,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgResult {
    pub long_run: Vec<Coefficient>,
    pub rho: Coefficient,
    pub short_run: Vec<Coefficient>,
    pub groups: Vec<GroupOls>,
    pub warnings: Vec<String>,
}

impl MgResult {
    pub fn theta(&self) -> Vec<f64> {
        self.long_run.iter().map(|c| c.estimate).collect()
    }
}

/// Unweighted averages of the per-group fits with standard errors from
/// their cross-group dispersion.
pub fn estimate_mg(design: &EcmDesign) -> Result<MgResult> {
    let mut warnings = design.warnings.clone();
    let mut groups = Vec::new();
    for block in &design.groups {
        match group_ardl_ols(block, &design.spec) {
            Ok(g) => groups.push(g),
            Err(e @ (Error::RankDeficient { .. } | Error::InsufficientData(_))) => {
                warnings.push(format!("group `{}` dropped: {e}", block.entity));
            }
            Err(e) => return Err(e),
        }
    }
    if groups.is_empty() {
        return Err(Error::InsufficientData("no group could be fitted".into()));
    }
    let k_x = design.k();
    let long_run = design
        .long_run_names
        .iter()
        .enumerate()
        .map(|(j, nm)| pooled_mean(nm, groups.iter().map(|g| &g.long_run[j])))
        .collect();
    let rho = pooled_mean("ec", groups.iter().map(|g| g.rho()));
    let short_run = design
        .short_run_names
        .iter()
        .enumerate()
        .map(|(j, nm)| pooled_mean(nm, groups.iter().map(|g| &g.coefficients[1 + k_x + j])))
        .collect();
    Ok(MgResult {
        long_run,
        rho,
        short_run,
        groups,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn block(n: usize, seed: u64) -> GroupBlock {
        let mut s = seed;
        let mut r = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let z_lag = DVector::from_fn(n, |_, _| r());
        let x = DMatrix::from_fn(n, 2, |_, _| r());
        let w = DMatrix::from_fn(n, 3, |_, j| if j == 2 { 1.0 } else { r() });
        let dz = DVector::from_fn(n, |_, _| r());
        GroupBlock {
            entity: format!("g{seed}"),
            periods: (0..n as i64).collect(),
            dz,
            z_lag,
            x,
            w,
        }
    }

    fn spec() -> ModelSpec {
        ModelSpec::new("z", &["x1", "x2"])
    }

    #[test]
    fn matches_normal_equations_by_inversion() {
        let b = block(14, 3);
        let g = group_ardl_ols(&b, &spec()).unwrap();
        let n = b.nobs();
        let mut x = DMatrix::zeros(n, 6);
        for i in 0..n {
            x[(i, 0)] = b.z_lag[i];
            x[(i, 1)] = b.x[(i, 0)];
            x[(i, 2)] = b.x[(i, 1)];
            for j in 0..3 {
                x[(i, 3 + j)] = b.w[(i, j)];
            }
        }
        let xtx = x.transpose() * &x;
        let beta = xtx.try_inverse().unwrap() * x.transpose() * &b.dz;
        for j in 0..6 {
            assert!((beta[j] - g.coefficients[j].estimate).abs() < 1e-10);
        }
        assert!((g.long_run[0].estimate + beta[1] / beta[0]).abs() < 1e-10);
    }

    #[test]
    fn exact_data_reports_zero_variance() {
        let mut b = block(10, 5);
        let coef = [-0.5, 0.25, -0.15, 0.3, 0.1, 0.7];
        for i in 0..b.nobs() {
            let row = [
                b.z_lag[i],
                b.x[(i, 0)],
                b.x[(i, 1)],
                b.w[(i, 0)],
                b.w[(i, 1)],
                1.0,
            ];
            b.dz[i] = row.iter().zip(coef).map(|(a, c)| a * c).sum();
        }
        let g = group_ardl_ols(&b, &spec()).unwrap();
        assert!(g.sigma2 < 1e-25);
        assert!((g.long_run[0].estimate - 0.5).abs() < 1e-10);
        assert!((g.long_run[1].estimate + 0.3).abs() < 1e-10);
    }

    #[test]
    fn duplicated_column_is_rank_deficient() {
        let mut b = block(10, 7);
        let col = b.x.column(0).into_owned();
        b.w.set_column(1, &col);
        match group_ardl_ols(&b, &spec()) {
            Err(Error::RankDeficient { columns }) => {
                assert_eq!(columns, vec!["x1".to_string(), "d_x2".to_string()]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn too_few_rows() {
        assert!(matches!(
            group_ardl_ols(&block(6, 1), &spec()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn mg_averages_and_drops_singular() {
        let mut bad = block(12, 9);
        bad.w.set_column(0, &DVector::zeros(12));
        let design = EcmDesign {
            spec: spec(),
            long_run_names: vec!["x1".into(), "x2".into()],
            short_run_names: spec().short_run_names(),
            groups: vec![block(12, 1), bad, block(12, 2)],
            warnings: vec![],
        };
        let mg = estimate_mg(&design).unwrap();
        assert_eq!(mg.groups.len(), 2);
        assert!(mg.warnings[0].contains("g9"));
        let mean = (mg.groups[0].long_run[0].estimate + mg.groups[1].long_run[0].estimate) / 2.0;
        assert!((mg.long_run[0].estimate - mean).abs() < 1e-14);
    }
}
