//! Least-squares building blocks shared by the unit-root tests and the
//! panel estimators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative residual norm below which a column counts as a linear
/// combination of the columns before it.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coef: DVector<f64>,
    pub residuals: DVector<f64>,
    pub ssr: f64,
    pub nobs: usize,
    /// `(X'X)^{-1}`
    pub xtx_inv: DMatrix<f64>,
}

impl OlsFit {
    pub fn ncoef(&self) -> usize {
        self.coef.len()
    }

    /// SSR / (n − k)
    pub fn sigma2(&self) -> f64 {
        self.ssr / (self.nobs - self.ncoef()) as f64
    }

    /// SSR / n
    pub fn sigma2_ml(&self) -> f64 {
        self.ssr / self.nobs as f64
    }

    pub fn std_errors(&self) -> DVector<f64> {
        let s2 = self.sigma2();
        DVector::from_iterator(
            self.ncoef(),
            (0..self.ncoef()).map(|j| (s2 * self.xtx_inv[(j, j)]).sqrt()),
        )
    }

    pub fn t_stats(&self) -> DVector<f64> {
        self.coef.component_div(&self.std_errors())
    }
}

/// Indices of columns that are (numerically) linear combinations of the
/// columns preceding them, each with the earlier columns it depends on.
pub fn dependent_columns(x: &DMatrix<f64>) -> Vec<(usize, Vec<usize>)> {
    let n = x.nrows();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut basis_cols: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j).into_owned();
        let norm = col.norm();
        let mut r = col.clone();
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&r);
                r.axpy(-c, q, 1.0);
            }
        }
        let rn = r.norm();
        if norm == 0.0 || rn <= RANK_TOL * norm || n == 0 {
            let mut with = Vec::new();
            if norm > 0.0 && !basis_cols.is_empty() {
                let sub = DMatrix::from_fn(n, basis_cols.len(), |i, k| x[(i, basis_cols[k])]);
                if let Ok(c) = sub.clone().svd(true, true).solve(&col, 1e-14) {
                    let scale = c.amax().max(f64::MIN_POSITIVE);
                    for (k, v) in c.iter().enumerate() {
                        if v.abs() > 1e-8 * scale {
                            with.push(basis_cols[k]);
                        }
                    }
                }
            }
            out.push((j, with));
        } else {
            basis.push(r / rn);
            basis_cols.push(j);
        }
    }
    out
}

/// Ordinary least squares via QR. Rank deficiency is an error that names
/// the offending columns using `names`.
pub fn ols(y: &DVector<f64>, x: &DMatrix<f64>, names: &[String]) -> Result<OlsFit> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::Shape(format!(
            "response has {} rows, design {n}",
            y.len()
        )));
    }
    if n < k {
        return Err(Error::InsufficientData(format!(
            "{n} rows for {k} regressors"
        )));
    }
    let dependent = dependent_columns(x);
    if !dependent.is_empty() {
        let name = |j: usize| {
            names
                .get(j)
                .cloned()
                .unwrap_or_else(|| format!("column {j}"))
        };
        let mut columns = Vec::new();
        for (j, with) in dependent {
            for w in with {
                let nm = name(w);
                if !columns.contains(&nm) {
                    columns.push(nm);
                }
            }
            let nm = name(j);
            if !columns.contains(&nm) {
                columns.push(nm);
            }
        }
        return Err(Error::RankDeficient { columns });
    }
    if k == 0 {
        return Ok(OlsFit {
            coef: DVector::zeros(0),
            residuals: y.clone(),
            ssr: y.norm_squared(),
            nobs: n,
            xtx_inv: DMatrix::zeros(0, 0),
        });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let qty = qr.q().transpose() * y;
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient {
            columns: names.to_vec(),
        })?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::RankDeficient {
            columns: names.to_vec(),
        })?;
    let xtx_inv = &r_inv * r_inv.transpose();
    let residuals = y - x * &coef;
    let ssr = residuals.norm_squared();
    Ok(OlsFit {
        coef,
        residuals,
        ssr,
        nobs: n,
        xtx_inv,
    })
}

/// Residual-maker `M = I − W(W'W)^{-1}W'` applied through a thin QR of `W`.
#[derive(Debug, Clone)]
pub struct Projector {
    q: Option<DMatrix<f64>>,
}

impl Projector {
    pub fn new(w: &DMatrix<f64>) -> Self {
        if w.ncols() == 0 {
            return Self { q: None };
        }
        Self {
            q: Some(w.clone().qr().q()),
        }
    }

    pub fn residualize(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.q {
            None => v.clone(),
            Some(q) => v - q * (q.transpose() * v),
        }
    }

    pub fn residualize_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.q {
            None => m.clone(),
            Some(q) => m - q * (q.transpose() * m),
        }
    }
}
