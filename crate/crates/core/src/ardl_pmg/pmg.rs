//! Pooled mean group estimation by maximizing the likelihood concentrated
//! in the common long-run vector θ.
//!
//! For fixed θ each group's remaining parameters have closed forms. With
//! `M` the residual maker of the group's short-run block `W`:
//!
//! ```text
//! y = M Δz,  u = M (z_lag − Xθ),  B = M X
//! ρ = y'u / u'u,  e = y − ρu,  SSR = e'e
//! ℓ(θ) = Σ_i −(n_i/2) (ln(2π SSR_i/n_i) + 1)
//! ∇ℓ_i = −(n_i/SSR_i) ρ_i B'e
//! ```

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Coefficient, EcmDesign};
use crate::error::{Error, Result};
use crate::linalg::{dependent_columns, ols, Projector};

/// Residual sums of squares at or below this fraction of ‖Δz‖² count as an
/// exact fit.
const EXACT_FIT_TOL: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceKind {
    /// Inverse negative Hessian of the concentrated likelihood.
    #[default]
    Information,
    /// Sandwich clustered by group.
    Robust,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub max_iter: usize,
    /// Relative change in θ.
    pub tol_theta: f64,
    /// Euclidean norm of the score.
    pub tol_grad: f64,
    pub max_halvings: usize,
    pub covariance: CovarianceKind,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol_theta: 1e-8,
            tol_grad: 1e-6,
            max_halvings: 20,
            covariance: CovarianceKind::Information,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceStatus {
    Converged,
    /// Every group is fitted without error at θ̂; the likelihood is
    /// unbounded there and standard errors are zero.
    ExactFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceInfo {
    pub iterations: usize,
    pub gradient_norm: f64,
    pub status: ConvergenceStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEstimate {
    pub entity: String,
    pub nobs: usize,
    /// Adjustment speed ρ_i.
    pub rho: Coefficient,
    /// Short-run coefficients in design order, intercept last.
    pub short_run: Vec<Coefficient>,
    /// SSR_i / n_i
    pub sigma2: f64,
    pub ssr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmgResult {
    pub long_run: Vec<Coefficient>,
    /// Covariance of θ̂, row-major.
    pub theta_cov: Vec<Vec<f64>>,
    pub covariance_kind: CovarianceKind,
    pub groups: Vec<GroupEstimate>,
    pub rho_mean: Coefficient,
    pub short_run_mean: Vec<Coefficient>,
    pub log_likelihood: f64,
    pub convergence: ConvergenceInfo,
    pub warnings: Vec<String>,
}

impl PmgResult {
    pub fn theta(&self) -> Vec<f64> {
        self.long_run.iter().map(|c| c.estimate).collect()
    }

    pub fn theta_se(&self) -> Vec<Option<f64>> {
        self.long_run.iter().map(|c| c.std_error).collect()
    }

    pub fn rho(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.rho.estimate).collect()
    }
}

/// θ-independent pieces of one group.
struct Prepared {
    entity: String,
    n: f64,
    y: DVector<f64>,
    a: DVector<f64>,
    b: DMatrix<f64>,
    btb: DMatrix<f64>,
    scale: f64,
}

struct GroupEval {
    rho: f64,
    ssr: f64,
    m: f64,
    bte: DVector<f64>,
    btu: DVector<f64>,
    exact: bool,
}

fn prepare(design: &EcmDesign) -> Result<Vec<Prepared>> {
    design
        .groups
        .iter()
        .map(|g| {
            let dependent = dependent_columns(&g.w);
            if !dependent.is_empty() {
                let mut columns = Vec::new();
                for (j, with) in dependent {
                    for k in with.into_iter().chain([j]) {
                        let name = format!("{}:{}", g.entity, design.short_run_names[k]);
                        if !columns.contains(&name) {
                            columns.push(name);
                        }
                    }
                }
                return Err(Error::RankDeficient { columns });
            }
            let proj = Projector::new(&g.w);
            let b = proj.residualize_matrix(&g.x);
            Ok(Prepared {
                entity: g.entity.clone(),
                n: g.nobs() as f64,
                y: proj.residualize(&g.dz),
                a: proj.residualize(&g.z_lag),
                btb: b.transpose() * &b,
                b,
                scale: g.dz.norm_squared(),
            })
        })
        .collect()
}

fn eval_group(p: &Prepared, theta: &DVector<f64>) -> GroupEval {
    let u = &p.a - &p.b * theta;
    let m = u.norm_squared();
    let rho = if m > 0.0 { p.y.dot(&u) / m } else { 0.0 };
    let e = &p.y - &u * rho;
    let ssr = e.norm_squared();
    GroupEval {
        rho,
        ssr,
        m,
        bte: p.b.transpose() * &e,
        btu: p.b.transpose() * &u,
        exact: ssr <= EXACT_FIT_TOL * p.scale,
    }
}

fn eval_all(prep: &[Prepared], theta: &DVector<f64>) -> Vec<GroupEval> {
    prep.par_iter().map(|p| eval_group(p, theta)).collect()
}

fn floored_ssr(p: &Prepared, ev: &GroupEval) -> f64 {
    ev.ssr.max(EXACT_FIT_TOL * p.scale).max(f64::MIN_POSITIVE)
}

fn group_loglik(p: &Prepared, ev: &GroupEval) -> f64 {
    let ssr = floored_ssr(p, ev);
    -0.5 * p.n * ((2.0 * std::f64::consts::PI * ssr / p.n).ln() + 1.0)
}

enum Fit {
    Value(f64),
    /// Every group fits exactly.
    Exact,
}

/// Log-likelihood with each SSR floored at the exact-fit threshold, so a
/// search can pass through points where only some groups fit exactly.
fn loglik_of(prep: &[Prepared], evals: &[GroupEval]) -> Fit {
    if evals.iter().all(|e| e.exact) {
        return Fit::Exact;
    }
    Fit::Value(
        prep.iter()
            .zip(evals)
            .map(|(p, e)| group_loglik(p, e))
            .sum(),
    )
}

fn first_exact(prep: &[Prepared], evals: &[GroupEval]) -> Option<Error> {
    evals
        .iter()
        .position(|e| e.exact)
        .map(|i| Error::PerfectFit {
            group: prep[i].entity.clone(),
        })
}

fn group_score(p: &Prepared, ev: &GroupEval) -> DVector<f64> {
    &ev.bte * (-(p.n / floored_ssr(p, ev)) * ev.rho)
}

fn group_hessian(p: &Prepared, ev: &GroupEval) -> DMatrix<f64> {
    let r = (&ev.btu * ev.rho - &ev.bte) / ev.m;
    let h_ssr = &r * r.transpose() * (-2.0 * ev.m) + &p.btb * (2.0 * ev.rho * ev.rho);
    let d_ssr = &ev.bte * (2.0 * ev.rho);
    let ssr = floored_ssr(p, ev);
    (h_ssr / ssr - &d_ssr * d_ssr.transpose() / (ssr * ssr)) * (-0.5 * p.n)
}

fn check_theta(design: &EcmDesign, theta: &[f64]) -> Result<DVector<f64>> {
    if theta.len() != design.k() {
        return Err(Error::Shape(format!(
            "θ has {} entries, design has {} long-run regressors",
            theta.len(),
            design.k()
        )));
    }
    Ok(DVector::from_column_slice(theta))
}

fn require_value(prep: &[Prepared], evals: &[GroupEval]) -> Result<f64> {
    if let Some(e) = first_exact(prep, evals) {
        return Err(e);
    }
    match loglik_of(prep, evals) {
        Fit::Value(v) => Ok(v),
        Fit::Exact => unreachable!("no group fits exactly"),
    }
}

/// Concentrated log-likelihood at θ.
pub fn concentrated_loglik(theta: &[f64], design: &EcmDesign) -> Result<f64> {
    let t = check_theta(design, theta)?;
    let prep = prepare(design)?;
    require_value(&prep, &eval_all(&prep, &t))
}

/// Analytic gradient of [`concentrated_loglik`].
pub fn concentrated_score(theta: &[f64], design: &EcmDesign) -> Result<Vec<f64>> {
    let t = check_theta(design, theta)?;
    let prep = prepare(design)?;
    let evals = eval_all(&prep, &t);
    require_value(&prep, &evals)?;
    let g = prep
        .iter()
        .zip(&evals)
        .fold(DVector::zeros(t.len()), |acc, (p, e)| {
            acc + group_score(p, e)
        });
    Ok(g.iter().copied().collect())
}

/// Analytic Hessian of [`concentrated_loglik`], row-major.
pub fn concentrated_hessian(theta: &[f64], design: &EcmDesign) -> Result<Vec<Vec<f64>>> {
    let t = check_theta(design, theta)?;
    let prep = prepare(design)?;
    let evals = eval_all(&prep, &t);
    require_value(&prep, &evals)?;
    let h = total_hessian(&prep, &evals, t.len());
    Ok(rows(&h))
}

fn total_hessian(prep: &[Prepared], evals: &[GroupEval], k: usize) -> DMatrix<f64> {
    prep.iter()
        .zip(evals)
        .fold(DMatrix::zeros(k, k), |acc, (p, e)| {
            acc + group_hessian(p, e)
        })
}

fn total_score(prep: &[Prepared], evals: &[GroupEval], k: usize) -> DVector<f64> {
    prep.iter()
        .zip(evals)
        .fold(DVector::zeros(k), |acc, (p, e)| acc + group_score(p, e))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Pooled static least squares of z on a constant and X.
fn initial_theta(design: &EcmDesign) -> DVector<f64> {
    let k = design.k();
    let n = design.total_obs();
    let mut z = DVector::zeros(n);
    let mut x = DMatrix::zeros(n, k + 1);
    let mut r = 0;
    for g in &design.groups {
        for t in 0..g.nobs() {
            z[r] = g.z_lag[t] + g.dz[t];
            x[(r, 0)] = 1.0;
            for j in 0..k {
                x[(r, j + 1)] = g.x[(t, j)];
            }
            r += 1;
        }
    }
    match ols(&z, &x, &[]) {
        Ok(fit) => fit.coef.rows(1, k).into_owned(),
        Err(_) => DVector::zeros(k),
    }
}

/// Ascent direction: Newton when −H is positive definite, otherwise
/// Fisher scoring.
fn direction(
    prep: &[Prepared],
    evals: &[GroupEval],
    g: &DVector<f64>,
    h: &DMatrix<f64>,
    names: &[String],
) -> Result<DVector<f64>> {
    if let Some(ch) = (-h).cholesky() {
        return Ok(ch.solve(g));
    }
    let k = g.len();
    let info = prep
        .iter()
        .zip(evals)
        .fold(DMatrix::zeros(k, k), |acc, (p, e)| {
            acc + &p.btb * (p.n / floored_ssr(p, e) * e.rho * e.rho)
        });
    info.cholesky()
        .map(|ch| ch.solve(g))
        .ok_or_else(|| Error::RankDeficient {
            columns: names.to_vec(),
        })
}

/// Pooled mean group estimates of a design.
pub fn estimate_pmg(design: &EcmDesign, options: &EstimateOptions) -> Result<PmgResult> {
    let k = design.k();
    let prep = prepare(design)?;
    let mut theta = initial_theta(design);
    let mut evals = eval_all(&prep, &theta);
    let mut trajectory = vec![theta.iter().copied().collect::<Vec<_>>()];

    let mut ll = match loglik_of(&prep, &evals) {
        Fit::Value(v) => Some(v),
        Fit::Exact => None,
    };
    let mut iterations = 0;
    let mut status = ConvergenceStatus::ExactFit;
    let mut grad_norm = 0.0;

    if let Some(mut current) = ll {
        loop {
            let g = total_score(&prep, &evals, k);
            grad_norm = g.norm();
            if iterations >= options.max_iter {
                if let Some(e) = first_exact(&prep, &evals) {
                    return Err(e);
                }
                return Err(Error::NonConvergence {
                    iterations,
                    gradient_norm: grad_norm,
                    trajectory,
                });
            }
            iterations += 1;
            let h = total_hessian(&prep, &evals, k);
            let d = direction(&prep, &evals, &g, &h, &design.long_run_names)?;
            let decrement = g.dot(&d);

            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..=options.max_halvings {
                let cand = &theta + &d * step;
                let cand_evals = eval_all(&prep, &cand);
                match loglik_of(&prep, &cand_evals) {
                    Fit::Exact => {
                        accepted = Some((cand, cand_evals, None));
                        break;
                    }
                    Fit::Value(v) if v.is_finite() && v >= current => {
                        accepted = Some((cand, cand_evals, Some(v)));
                        break;
                    }
                    Fit::Value(_) => step *= 0.5,
                }
            }
            let tiny_decrement = decrement.abs() <= 1e-12 * current.abs().max(1.0);
            let Some((cand, cand_evals, value)) = accepted else {
                if tiny_decrement {
                    status = ConvergenceStatus::Converged;
                    break;
                }
                if let Some(e) = first_exact(&prep, &evals) {
                    return Err(e);
                }
                return Err(Error::LineSearch {
                    iteration: iterations,
                    halvings: options.max_halvings,
                });
            };
            let change = (&cand - &theta).norm() / theta.norm().max(1.0);
            theta = cand;
            evals = cand_evals;
            trajectory.push(theta.iter().copied().collect());
            match value {
                None => {
                    ll = None;
                    break;
                }
                Some(v) => {
                    current = v;
                    ll = Some(v);
                }
            }
            if change <= options.tol_theta {
                let g_new = total_score(&prep, &evals, k);
                grad_norm = g_new.norm();
                if grad_norm <= options.tol_grad || tiny_decrement {
                    status = ConvergenceStatus::Converged;
                    break;
                }
            }
        }
    }

    if ll.is_some() {
        if let Some(e) = first_exact(&prep, &evals) {
            return Err(e);
        }
    }
    let mut warnings = design.warnings.clone();
    let (theta_cov, log_likelihood) = match ll {
        None => {
            grad_norm = 0.0;
            status = ConvergenceStatus::ExactFit;
            warnings.push("every group is fitted exactly; standard errors are zero".into());
            (DMatrix::zeros(k, k), f64::INFINITY)
        }
        Some(v) => {
            let h = total_hessian(&prep, &evals, k);
            let h_inv =
                (-&h)
                    .cholesky()
                    .map(|c| c.inverse())
                    .ok_or_else(|| Error::RankDeficient {
                        columns: design.long_run_names.clone(),
                    })?;
            let cov = match options.covariance {
                CovarianceKind::Information => h_inv,
                CovarianceKind::Robust => {
                    let meat = prep
                        .iter()
                        .zip(&evals)
                        .fold(DMatrix::zeros(k, k), |acc, (p, e)| {
                            let s = group_score(p, e);
                            acc + &s * s.transpose()
                        });
                    &h_inv * meat * &h_inv
                }
            };
            (cov, v)
        }
    };

    let long_run = design
        .long_run_names
        .iter()
        .enumerate()
        .map(|(j, name)| Coefficient::new(name, theta[j], Some(theta_cov[(j, j)].max(0.0).sqrt())))
        .collect();

    let groups = design
        .groups
        .iter()
        .zip(&evals)
        .map(|(g, ev)| {
            let ec = &g.z_lag - &g.x * &theta;
            let mut x = DMatrix::zeros(g.nobs(), 1 + g.w.ncols());
            x.set_column(0, &ec);
            x.view_mut((0, 1), (g.nobs(), g.w.ncols())).copy_from(&g.w);
            let mut names = vec!["ec".to_string()];
            names.extend(design.short_run_names.iter().cloned());
            let fit = ols(&g.dz, &x, &names)?;
            let se: Vec<Option<f64>> = if fit.nobs > fit.ncoef() {
                fit.std_errors().iter().map(|&s| Some(s)).collect()
            } else {
                vec![None; fit.ncoef()]
            };
            Ok(GroupEstimate {
                entity: g.entity.clone(),
                nobs: g.nobs(),
                rho: Coefficient::new("ec", fit.coef[0], se[0]),
                short_run: design
                    .short_run_names
                    .iter()
                    .enumerate()
                    .map(|(j, n)| Coefficient::new(n, fit.coef[j + 1], se[j + 1]))
                    .collect(),
                sigma2: ev.ssr / g.nobs() as f64,
                ssr: ev.ssr,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let rho_mean = pooled_mean("ec", groups.iter().map(|g| &g.rho));
    let short_run_mean = design
        .short_run_names
        .iter()
        .enumerate()
        .map(|(j, n)| pooled_mean(n, groups.iter().map(|g| &g.short_run[j])))
        .collect();

    Ok(PmgResult {
        long_run,
        theta_cov: rows(&theta_cov),
        covariance_kind: options.covariance,
        groups,
        rho_mean,
        short_run_mean,
        log_likelihood,
        convergence: ConvergenceInfo {
            iterations,
            gradient_norm: grad_norm,
            status,
        },
        warnings,
    })
}

/// Unweighted mean with standard error sd/√N; a single group keeps its own
/// standard error.
pub(crate) fn pooled_mean<'a>(
    name: &str,
    coefs: impl Iterator<Item = &'a Coefficient>,
) -> Coefficient {
    let coefs: Vec<&Coefficient> = coefs.collect();
    let n = coefs.len();
    if n == 1 {
        return Coefficient::new(name, coefs[0].estimate, coefs[0].std_error);
    }
    let mean = coefs.iter().map(|c| c.estimate).sum::<f64>() / n as f64;
    let var = coefs
        .iter()
        .map(|c| (c.estimate - mean).powi(2))
        .sum::<f64>()
        / (n - 1) as f64;
    Coefficient::new(name, mean, Some((var / n as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ardl_pmg::GroupBlock;
    use crate::ardl_pmg::ModelSpec;

    fn lcg(state: &mut u64) -> f64 {
        *state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((*state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    }

    fn design(n_groups: usize, t: usize, noise: f64, seed: u64) -> EcmDesign {
        let theta = [0.5, -0.3];
        let mut s = seed;
        let groups = (0..n_groups)
            .map(|i| {
                let rho = -0.3 - 0.6 * (i as f64 / n_groups.max(2) as f64);
                let mut x = vec![[0.0, 0.0]; t + 1];
                for r in 1..=t {
                    x[r] = [x[r - 1][0] + lcg(&mut s), x[r - 1][1] + lcg(&mut s)];
                }
                let mut z = vec![0.0; t + 1];
                z[0] = lcg(&mut s);
                let (d1, d2, mu) = (
                    0.2 + 0.1 * lcg(&mut s),
                    -0.1 + 0.1 * lcg(&mut s),
                    lcg(&mut s),
                );
                for r in 1..=t {
                    let ec = z[r - 1] - theta[0] * x[r][0] - theta[1] * x[r][1];
                    let dx = [x[r][0] - x[r - 1][0], x[r][1] - x[r - 1][1]];
                    z[r] = z[r - 1] + rho * ec + d1 * dx[0] + d2 * dx[1] + mu + noise * lcg(&mut s);
                }
                GroupBlock {
                    entity: format!("g{i}"),
                    periods: (1..=t as i64).collect(),
                    dz: DVector::from_fn(t, |r, _| z[r + 1] - z[r]),
                    z_lag: DVector::from_fn(t, |r, _| z[r]),
                    x: DMatrix::from_fn(t, 2, |r, j| x[r + 1][j]),
                    w: DMatrix::from_fn(t, 3, |r, j| match j {
                        2 => 1.0,
                        _ => x[r + 1][j] - x[r][j],
                    }),
                }
            })
            .collect();
        EcmDesign {
            spec: ModelSpec::new("z", &["x1", "x2"]),
            long_run_names: vec!["x1".into(), "x2".into()],
            short_run_names: vec!["d_x1".into(), "d_x2".into(), "const".into()],
            groups,
            warnings: vec![],
        }
    }

    #[test]
    fn score_matches_finite_differences() {
        let d = design(5, 20, 0.3, 7);
        let theta = [0.4, -0.2];
        let g = concentrated_score(&theta, &d).unwrap();
        let h = 1e-5;
        for j in 0..2 {
            let mut up = theta;
            let mut dn = theta;
            up[j] += h;
            dn[j] -= h;
            let fd = (concentrated_loglik(&up, &d).unwrap()
                - concentrated_loglik(&dn, &d).unwrap())
                / (2.0 * h);
            assert!(
                (fd - g[j]).abs() <= 1e-6 * fd.abs().max(1.0),
                "{fd} vs {}",
                g[j]
            );
        }
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let d = design(4, 15, 0.3, 3);
        let theta = [0.45, -0.25];
        let h = concentrated_hessian(&theta, &d).unwrap();
        let step = 1e-5;
        for j in 0..2 {
            let mut up = theta;
            let mut dn = theta;
            up[j] += step;
            dn[j] -= step;
            let gu = concentrated_score(&up, &d).unwrap();
            let gd = concentrated_score(&dn, &d).unwrap();
            for i in 0..2 {
                let fd = (gu[i] - gd[i]) / (2.0 * step);
                assert!(
                    (fd - h[i][j]).abs() <= 1e-5 * fd.abs().max(1.0),
                    "{fd} vs {}",
                    h[i][j]
                );
            }
        }
    }

    #[test]
    fn noise_free_recovers_theta() {
        let d = design(17, 12, 0.0, 11);
        let r = estimate_pmg(&d, &EstimateOptions::default()).unwrap();
        assert_eq!(r.convergence.status, ConvergenceStatus::ExactFit);
        assert!((r.theta()[0] - 0.5).abs() < 1e-6);
        assert!((r.theta()[1] + 0.3).abs() < 1e-6);
    }

    #[test]
    fn optimum_beats_perturbations() {
        let d = design(6, 25, 0.2, 5);
        let r = estimate_pmg(&d, &EstimateOptions::default()).unwrap();
        assert_eq!(r.convergence.status, ConvergenceStatus::Converged);
        let best = concentrated_loglik(&r.theta(), &d).unwrap();
        assert!((best - r.log_likelihood).abs() < 1e-9);
        let mut s = 99;
        for _ in 0..20 {
            let t = r.theta();
            let p = [t[0] + 0.01 * lcg(&mut s), t[1] + 0.01 * lcg(&mut s)];
            assert!(concentrated_loglik(&p, &d).unwrap() <= best + 1e-10);
        }
        assert!(r.rho().iter().all(|&x| x < 0.0));
    }

    #[test]
    fn partially_exact_fit_names_group() {
        let mut d = design(3, 15, 0.2, 9);
        let exact = design(1, 15, 0.0, 9).groups.remove(0);
        d.groups[1] = GroupBlock {
            entity: "flat".into(),
            ..exact
        };
        match estimate_pmg(&d, &EstimateOptions::default()) {
            Err(Error::PerfectFit { group }) => assert_eq!(group, "flat"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn robust_covariance_is_positive() {
        let d = design(8, 20, 0.3, 21);
        let opts = EstimateOptions {
            covariance: CovarianceKind::Robust,
            ..Default::default()
        };
        let r = estimate_pmg(&d, &opts).unwrap();
        assert!(r.theta_se().iter().all(|s| s.unwrap() > 0.0));
    }

    #[test]
    fn iteration_cap_reports_trajectory() {
        let d = design(6, 25, 0.2, 5);
        let opts = EstimateOptions {
            max_iter: 0,
            ..Default::default()
        };
        match estimate_pmg(&d, &opts) {
            Err(Error::NonConvergence { trajectory, .. }) => assert_eq!(trajectory.len(), 1),
            other => panic!("unexpected {other:?}"),
        }
    }
}
