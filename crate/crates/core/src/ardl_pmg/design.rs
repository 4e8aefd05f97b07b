use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{EcTiming, ModelSpec};
use crate::error::{Error, Result};
use crate::panel_data::PanelDataset;

/// Regression block of one group: rows are complete periods in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupBlock {
    pub entity: String,
    pub periods: Vec<i64>,
    /// Δz_t (response)
    pub dz: DVector<f64>,
    /// z_{t−1}
    pub z_lag: DVector<f64>,
    /// Long-run regressors entering the error-correction term (rows × k).
    pub x: DMatrix<f64>,
    /// Short-run block, columns as in [`ModelSpec::short_run_names`].
    pub w: DMatrix<f64>,
}

impl GroupBlock {
    pub fn nobs(&self) -> usize {
        self.dz.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcmDesign {
    pub spec: ModelSpec,
    pub long_run_names: Vec<String>,
    pub short_run_names: Vec<String>,
    pub groups: Vec<GroupBlock>,
    pub warnings: Vec<String>,
}

impl EcmDesign {
    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn k(&self) -> usize {
        self.long_run_names.len()
    }

    pub fn total_obs(&self) -> usize {
        self.groups.iter().map(GroupBlock::nobs).sum()
    }
}

/// Period indices of entity `entity` at which every term of the model is
/// observed (listwise deletion).
pub fn usable_rows(data: &PanelDataset, spec: &ModelSpec, entity: usize) -> Result<Vec<usize>> {
    spec.validate()?;
    let z = &data.grid(&spec.dependent)?[entity];
    let xs: Vec<&[Option<f64>]> = spec
        .long_run
        .iter()
        .map(|n| data.grid(n).map(|g| g[entity].as_slice()))
        .collect::<Result<_>>()?;
    let ys: Vec<&[Option<f64>]> = spec
        .short_run_controls
        .iter()
        .map(|n| data.grid(n).map(|g| g[entity].as_slice()))
        .collect::<Result<_>>()?;
    let ec_shift = usize::from(spec.ec_timing == EcTiming::Lagged);
    let present = |s: &[Option<f64>], from: usize, to: usize| (from..=to).all(|k| s[k].is_some());
    let rows = (spec.max_lag()..data.n_periods())
        .filter(|&t| {
            // z_t .. z_{t−p}
            present(z, t - spec.p, t)
                && xs.iter().all(|x| {
                    x[t - ec_shift].is_some() && (spec.q == 0 || present(x, t - spec.q, t))
                })
                && ys.iter().all(|y| spec.q == 0 || present(y, t - spec.q, t))
        })
        .collect();
    Ok(rows)
}

fn zero_variance(col: impl Iterator<Item = f64> + Clone) -> bool {
    let mut it = col.clone();
    match it.next() {
        None => true,
        Some(first) => col.into_iter().all(|v| v == first),
    }
}

/// Assemble per-group regression blocks. Groups with fewer usable rows
/// than per-group parameters + 1 are excluded with a warning.
pub fn build_ecm_design(data: &PanelDataset, spec: &ModelSpec) -> Result<EcmDesign> {
    spec.validate()?;
    let short_run_names = spec.short_run_names();
    let required = spec.per_group_parameters() + 1;
    let ec_shift = usize::from(spec.ec_timing == EcTiming::Lagged);
    let z_grid = data.grid(&spec.dependent)?;
    let x_grids: Vec<_> = spec
        .long_run
        .iter()
        .map(|n| data.grid(n))
        .collect::<Result<_>>()?;
    let y_grids: Vec<_> = spec
        .short_run_controls
        .iter()
        .map(|n| data.grid(n))
        .collect::<Result<_>>()?;

    let mut groups = Vec::new();
    let mut warnings = Vec::new();
    for (i, entity) in data.entities().iter().enumerate() {
        let rows = usable_rows(data, spec, i)?;
        if rows.len() < required {
            warnings.push(format!(
                "group `{entity}` excluded: {} usable rows, {required} required",
                rows.len()
            ));
            continue;
        }
        let n = rows.len();
        let at = |s: &[Option<f64>], t: usize| s[t].expect("usable row");
        let z = &z_grid[i];
        let dz = DVector::from_iterator(n, rows.iter().map(|&t| at(z, t) - at(z, t - 1)));
        let z_lag = DVector::from_iterator(n, rows.iter().map(|&t| at(z, t - 1)));
        let x = DMatrix::from_fn(n, spec.long_run.len(), |r, k| {
            at(&x_grids[k][i], rows[r] - ec_shift)
        });
        let mut w = DMatrix::zeros(n, short_run_names.len());
        for (r, &t) in rows.iter().enumerate() {
            let mut c = 0;
            for j in 1..spec.p {
                w[(r, c)] = at(z, t - j) - at(z, t - j - 1);
                c += 1;
            }
            for grid in x_grids.iter().chain(&y_grids) {
                let s = &grid[i];
                for j in 0..spec.q {
                    w[(r, c)] = at(s, t - j) - at(s, t - j - 1);
                    c += 1;
                }
            }
            if spec.intercept {
                w[(r, c)] = 1.0;
            }
        }
        if spec.intercept {
            let constant_cols = short_run_names.len() - 1;
            for c in 0..constant_cols {
                if zero_variance(w.column(c).iter().copied()) {
                    return Err(Error::ZeroVariance {
                        group: entity.clone(),
                        column: short_run_names[c].clone(),
                    });
                }
            }
            for (k, name) in spec.long_run.iter().enumerate() {
                if zero_variance(x.column(k).iter().copied()) {
                    return Err(Error::ZeroVariance {
                        group: entity.clone(),
                        column: name.clone(),
                    });
                }
            }
            if zero_variance(z_lag.iter().copied()) {
                return Err(Error::ZeroVariance {
                    group: entity.clone(),
                    column: format!("{}_lag", spec.dependent),
                });
            }
        }
        groups.push(GroupBlock {
            entity: entity.clone(),
            periods: rows.iter().map(|&t| data.periods()[t]).collect(),
            dz,
            z_lag,
            x,
            w,
        });
    }
    if groups.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no group has the {required} usable rows the model needs"
        )));
    }
    Ok(EcmDesign {
        spec: spec.clone(),
        long_run_names: spec.long_run.clone(),
        short_run_names,
        groups,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel_data::{validate_panel, Series, VariableRole};

    fn panel(n: usize, t: usize) -> PanelDataset {
        let entities: Vec<String> = (0..n).map(|i| format!("b{i:02}")).collect();
        let mut p = PanelDataset::new(entities, (2008..2008 + t as i64).collect()).unwrap();
        let mk = |seed: usize| -> Vec<Series> {
            (0..n)
                .map(|i| {
                    (0..t)
                        .map(|s| {
                            Some((((i + 3) * (s + 7) * (seed + 11)) % 23) as f64 + 0.1 * s as f64)
                        })
                        .collect()
                })
                .collect()
        };
        p.insert("z", VariableRole::Dependent, "", mk(1)).unwrap();
        p.insert("wti", VariableRole::LongRunRegressor, "", mk(2))
            .unwrap();
        p.insert("pbvr", VariableRole::LongRunRegressor, "", mk(3))
            .unwrap();
        p.insert("lr", VariableRole::ShortRunControl, "", mk(4))
            .unwrap();
        p
    }

    #[test]
    fn ardl11_rows_per_block() {
        let d = build_ecm_design(&panel(17, 9), &ModelSpec::new("z", &["wti", "pbvr"])).unwrap();
        assert_eq!(d.n_groups(), 17);
        assert!(d.groups.iter().all(|g| g.nobs() == 8));
        assert_eq!(d.groups[0].periods[0], 2009);
        assert_eq!(d.groups[0].w.ncols(), 3);
    }

    #[test]
    fn control_adds_one_column() {
        let spec = ModelSpec::new("z", &["wti", "pbvr"]).with_controls(&["lr"]);
        let d = build_ecm_design(&panel(3, 9), &spec).unwrap();
        assert_eq!(d.groups[0].w.ncols(), 4);
        assert_eq!(d.short_run_names[2], "d_lr");
    }

    #[test]
    fn p2_adds_column_and_drops_row() {
        let spec = ModelSpec::new("z", &["wti", "pbvr"]).with_lags(2, 1);
        let d = build_ecm_design(&panel(3, 9), &spec).unwrap();
        assert!(d.groups.iter().all(|g| g.nobs() == 7 && g.w.ncols() == 4));
    }

    #[test]
    fn leading_missing_regressor_costs_a_row() {
        let mut p = panel(2, 9);
        let mut g = p.grid("wti").unwrap().to_vec();
        for row in &mut g {
            row[0] = None;
        }
        p.insert("wti", VariableRole::LongRunRegressor, "", g)
            .unwrap();
        let spec = ModelSpec::new("z", &["wti", "pbvr"]);
        let d = build_ecm_design(&p, &spec).unwrap();
        assert!(d.groups.iter().all(|g| g.nobs() == 7));
        let report = validate_panel(&p, &spec);
        assert!(report.entities.iter().all(|e| e.usable == 7 && !e.unusable));
    }

    #[test]
    fn short_group_is_excluded_with_warning() {
        let mut p = panel(3, 9);
        let mut g = p.grid("z").unwrap().to_vec();
        for cell in g[1].iter_mut().skip(2) {
            *cell = None;
        }
        p.insert("z", VariableRole::Dependent, "", g).unwrap();
        let spec = ModelSpec::new("z", &["wti", "pbvr"]);
        let d = build_ecm_design(&p, &spec).unwrap();
        assert_eq!(d.n_groups(), 2);
        assert!(d.warnings[0].contains("b01"));
        let report = validate_panel(&p, &spec);
        assert!(report.entities[1].unusable);
        assert_eq!(report.entities[1].usable, 1);
    }

    #[test]
    fn constant_control_names_group_and_column() {
        let mut p = panel(2, 9);
        p.insert(
            "flat",
            VariableRole::ShortRunControl,
            "",
            vec![vec![Some(1.0); 9]; 2],
        )
        .unwrap();
        let spec = ModelSpec::new("z", &["wti"]).with_controls(&["flat"]);
        match build_ecm_design(&p, &spec) {
            Err(Error::ZeroVariance { group, column }) => {
                assert_eq!(group, "b00");
                assert_eq!(column, "d_flat");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invariant_variable_warns_in_report() {
        let mut p = panel(3, 9);
        let row: Series = (0..9)
            .map(|t| Some(t as f64 * 1.5 + (t % 2) as f64))
            .collect();
        p.insert("gdp", VariableRole::ShortRunControl, "", vec![row; 3])
            .unwrap();
        let spec = ModelSpec::new("z", &["wti"]).with_controls(&["gdp"]);
        let report = validate_panel(&p, &spec);
        assert!(report.warnings.iter().any(|w| w.contains("gdp")));
    }

    #[test]
    fn lagged_timing_uses_previous_x() {
        let p = panel(1, 6);
        let mut spec = ModelSpec::new("z", &["wti"]);
        spec.ec_timing = EcTiming::Lagged;
        let d = build_ecm_design(&p, &spec).unwrap();
        let wti = &p.grid("wti").unwrap()[0];
        assert_eq!(d.groups[0].x[(0, 0)], wti[0].unwrap());
    }
}
