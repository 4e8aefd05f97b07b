use statrs::distribution::{ChiSquared, Continuous, ContinuousCDF};

use super::{chi2_sf, invariance_warning, std_normal_cdf, TestResult};
use crate::error::{Error, Result};
use crate::panel_data::Series;

const MIN_OVERLAP: usize = 3;

struct Pair {
    overlap: usize,
    corr: f64,
}

fn overlap(a: &[Option<f64>], b: &[Option<f64>]) -> (Vec<f64>, Vec<f64>) {
    a.iter()
        .zip(b)
        .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
        .unzip()
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Ranks starting at 1, ties get the average rank.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            out[idx[k]] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation of two equally long samples.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&ranks(x), &ranks(y))
}

fn pairs(
    grid: &[Series],
    corr: impl Fn(&[f64], &[f64]) -> Option<f64>,
    warnings: &mut Vec<String>,
) -> Result<Vec<Pair>> {
    let n = grid.len();
    if n < 2 {
        return Err(Error::InsufficientData(
            "cross-sectional dependence tests need N >= 2".into(),
        ));
    }
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let (x, y) = overlap(&grid[i], &grid[j]);
            if x.len() < MIN_OVERLAP {
                warnings.push(format!(
                    "pair ({i}, {j}) excluded: {} overlapping periods",
                    x.len()
                ));
                continue;
            }
            match corr(&x, &y) {
                Some(c) => out.push(Pair {
                    overlap: x.len(),
                    corr: c,
                }),
                None => warnings.push(format!(
                    "pair ({i}, {j}) excluded: zero variance on overlap"
                )),
            }
        }
    }
    if out.is_empty() {
        return Err(Error::InsufficientData(
            "every entity pair was excluded".into(),
        ));
    }
    Ok(out)
}

fn base_warnings(grid: &[Series]) -> Vec<String> {
    invariance_warning(grid).into_iter().collect()
}

/// Pesaran's CD: `sqrt(1/M) Σ sqrt(T_ij) ρ_ij` over the M usable pairs
/// (M = N(N−1)/2 when none is excluded), two-sided normal p-value.
pub fn pesaran_cd(grid: &[Series]) -> Result<TestResult> {
    let mut warnings = base_warnings(grid);
    let pairs = pairs(grid, pearson, &mut warnings)?;
    let m = pairs.len() as f64;
    let sum: f64 = pairs
        .iter()
        .map(|p| (p.overlap as f64).sqrt() * p.corr)
        .sum();
    let cd = sum / m.sqrt();
    let p = 2.0 * (1.0 - std_normal_cdf(cd.abs()));
    let mut r = TestResult::new("pesaran_cd", "cross-sectional independence", cd, p);
    r.components = vec![
        ("pairs".into(), m),
        (
            "mean_abs_rho".into(),
            pairs.iter().map(|p| p.corr.abs()).sum::<f64>() / m,
        ),
    ];
    r.warnings = warnings;
    Ok(r)
}

/// Friedman's rank statistic `(T−1)((N−1) R_ave + 1)` with `R_ave` the mean
/// pairwise Spearman correlation, against χ²(T−1). For unbalanced panels
/// T is the mean pairwise overlap, rounded.
pub fn friedman_cd(grid: &[Series]) -> Result<TestResult> {
    let mut warnings = base_warnings(grid);
    let pairs = pairs(grid, spearman, &mut warnings)?;
    let n = grid.len() as f64;
    let m = pairs.len() as f64;
    let r_ave = pairs.iter().map(|p| p.corr).sum::<f64>() / m;
    let t_mean = pairs.iter().map(|p| p.overlap as f64).sum::<f64>() / m;
    if pairs.iter().any(|p| p.overlap != pairs[0].overlap) {
        warnings.push(format!(
            "unbalanced overlaps: degrees of freedom use mean overlap {t_mean:.2}"
        ));
    }
    let t = t_mean.round();
    let stat = (t - 1.0) * ((n - 1.0) * r_ave + 1.0);
    let p = chi2_sf(stat, t - 1.0);
    let mut r = TestResult::new("friedman", "cross-sectional independence", stat, p);
    r.components = vec![
        ("r_ave".into(), r_ave),
        ("t".into(), t),
        ("pairs".into(), m),
    ];
    r.warnings = warnings;
    Ok(r)
}

fn frees_coefficients(t: f64) -> (f64, f64, f64, f64) {
    let a = 4.0 * (t + 2.0) / (5.0 * (t - 1.0).powi(2) * (t + 1.0));
    let b = 2.0 * (5.0 * t + 6.0) / (5.0 * t * (t - 1.0) * (t + 1.0));
    (a, b, t - 1.0, t * (t - 3.0) / 2.0)
}

/// CDF of Frees' limiting distribution
/// `Q = a(T)(χ²_{T−1} − (T−1)) + b(T)(χ²_{T(T−3)/2} − T(T−3)/2)`,
/// integrated numerically over the first chi-square (composite Simpson).
pub fn frees_q_cdf(q: f64, t: usize) -> f64 {
    assert!(t >= 4, "Frees' distribution needs T >= 4");
    let (a, b, d1, d2) = frees_coefficients(t as f64);
    let chi1 = ChiSquared::new(d1).expect("df > 0");
    let chi2 = ChiSquared::new(d2).expect("df > 0");
    let inner = |x: f64| {
        let arg = (q - a * (x - d1)) / b + d2;
        if arg <= 0.0 {
            0.0
        } else {
            chi1.pdf(x) * chi2.cdf(arg)
        }
    };
    let x_hi = d1 + 12.0 * (2.0 * d1).sqrt() + 30.0;
    let x_cut = d1 + (q + b * d2) / a;
    let upper = x_hi.min(x_cut);
    if upper <= 0.0 {
        return 0.0;
    }
    let intervals = 4000;
    let h = upper / intervals as f64;
    let mut acc = inner(0.0) + inner(upper);
    for k in 1..intervals {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * inner(k as f64 * h);
    }
    (acc * h / 3.0).clamp(0.0, 1.0)
}

/// Frees' statistic `N (R²_ave − 1/(T−1))` from squared pairwise Spearman
/// correlations; p-value from Frees' Q distribution. Requires every entity
/// to be observed in the same periods.
pub fn frees_cd(grid: &[Series]) -> Result<TestResult> {
    if grid.len() < 2 {
        return Err(Error::InsufficientData(
            "cross-sectional dependence tests need N >= 2".into(),
        ));
    }
    let observed = |row: &Series| -> Vec<bool> { row.iter().map(Option::is_some).collect() };
    let pattern = observed(&grid[0]);
    if grid.iter().any(|row| observed(row) != pattern) {
        return Err(Error::InsufficientData(
            "Frees' test needs a balanced panel; restrict to periods observed for every entity"
                .into(),
        ));
    }
    let t = pattern.iter().filter(|b| **b).count();
    if t < 4 {
        return Err(Error::InsufficientData(format!(
            "Frees' test needs T >= 4, got {t}"
        )));
    }
    let mut warnings = base_warnings(grid);
    let pairs = pairs(grid, spearman, &mut warnings)?;
    let n = grid.len() as f64;
    let m = pairs.len() as f64;
    let r2 = pairs.iter().map(|p| p.corr * p.corr).sum::<f64>() / m;
    let stat = n * (r2 - 1.0 / (t as f64 - 1.0));
    let p = 1.0 - frees_q_cdf(stat, t);
    let mut r = TestResult::new("frees", "cross-sectional independence", stat, p);
    r.components = vec![
        ("r2_ave".into(), r2),
        ("t".into(), t as f64),
        ("pairs".into(), m),
    ];
    r.warnings = warnings;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[f64]) -> Series {
        v.iter().copied().map(Some).collect()
    }

    const X9: [f64; 9] = [0.3, -1.2, 0.8, 2.1, -0.4, 0.0, 1.5, -2.2, 0.9];

    #[test]
    fn cd_identical_series() {
        let r = pesaran_cd(&[s(&X9), s(&X9)]).unwrap();
        assert!((r.statistic - 3.0).abs() < 1e-12);
        assert!(r.rejects_at(0.01));
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn cd_negated_series() {
        let neg: Vec<f64> = X9.iter().map(|v| -v).collect();
        let r = pesaran_cd(&[s(&X9), s(&neg)]).unwrap();
        assert!((r.statistic + 3.0).abs() < 1e-12);
    }

    #[test]
    fn cd_excludes_short_overlap() {
        let a = vec![Some(1.0), Some(2.0), None, None, Some(3.0)];
        let b = vec![None, None, Some(1.0), Some(2.0), Some(5.0)];
        let c = s(&[1.0, 3.0, 2.0, 5.0, 4.0]);
        let r = pesaran_cd(&[a.clone(), b.clone(), c]).unwrap();
        assert_eq!(r.component("pairs"), Some(2.0));
        assert!(r.warnings.iter().any(|w| w.contains("excluded")));
        assert!(pesaran_cd(&[a, b]).is_err());
    }

    #[test]
    fn friedman_identical_is_maximal() {
        let grid = vec![s(&X9); 5];
        let r = friedman_cd(&grid).unwrap();
        assert!((r.statistic - 8.0 * 5.0).abs() < 1e-12);
        assert!(r.rejects_at(0.01));
    }

    #[test]
    fn spearman_matches_brute_force() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let perm = [3.0, 1.0, 2.0, 7.0, 5.0, 4.0, 6.0];
        let d2: f64 = a.iter().zip(&perm).map(|(x, y)| (x - y) * (x - y)).sum();
        let t = a.len() as f64;
        let brute = 1.0 - 6.0 * d2 / (t * (t * t - 1.0));
        let r = friedman_cd(&[s(&a), s(&perm)]).unwrap();
        assert!((r.component("r_ave").unwrap() - brute).abs() < 1e-14);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(ranks(&[2.0, 1.0, 2.0, 3.0]), vec![2.5, 1.0, 2.5, 4.0]);
    }

    #[test]
    fn frees_identical_and_antithetic_reject() {
        let neg: Vec<f64> = X9.iter().map(|v| -v).collect();
        let same = frees_cd(&vec![s(&X9); 4]).unwrap();
        assert!(same.rejects_at(0.01));
        let anti = frees_cd(&[s(&X9), s(&neg), s(&X9), s(&neg)]).unwrap();
        assert!((anti.statistic - same.statistic).abs() < 1e-12);
        assert!(anti.rejects_at(0.01));
    }

    #[test]
    fn frees_rejects_unbalanced() {
        let mut b = s(&X9);
        b[0] = None;
        assert!(matches!(
            frees_cd(&[s(&X9), b]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn frees_cdf_is_a_distribution() {
        let t = 9;
        assert!(frees_q_cdf(-5.0, t) < 1e-12);
        assert!(
            (frees_q_cdf(50.0, t) - 1.0).abs() < 1e-9,
            "{}",
            frees_q_cdf(50.0, t)
        );
        let mut prev = 0.0;
        for k in -20..=40 {
            let c = frees_q_cdf(k as f64 * 0.05, t);
            assert!(c >= prev - 1e-12);
            prev = c;
        }
    }

    #[test]
    fn frees_cdf_mean_is_zero() {
        // E[Q] = 0: integrate the survival function minus the CDF on (−∞, 0)
        let t = 10;
        let h = 1e-3;
        let mut mean = 0.0;
        let mut q = -3.0;
        while q < 6.0 {
            let mid = q + h / 2.0;
            mean += if mid >= 0.0 {
                1.0 - frees_q_cdf(mid, t)
            } else {
                -frees_q_cdf(mid, t)
            } * h;
            q += h;
        }
        assert!(mean.abs() < 2e-3, "mean {mean}");
    }
}
