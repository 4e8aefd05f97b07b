//! Analysis variables derived from raw bank and oil-price columns.
//!
//! Raw column names: `car` (capital to assets), `roa` or `net_income` with
//! `total_assets`, and `oil` (price level).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indicators::{
    compute_roa, shock_decompose, zscore_variant, RollingWindowConfig, ZScoreVariant,
};
use crate::panel_data::{log_return, map_grid, natural_log, PanelDataset, Series, VariableRole};

/// Display order of the analysis variables.
pub const CANONICAL_ORDER: [&str; 14] = [
    "z1", "z2", "wti", "wti_pos", "wti_neg", "pbvr", "nim", "nocf", "lr", "ta", "gdp", "bc", "rq",
    "cpi",
];

/// Short-run controls of Models 2 to 9, in model order.
pub const MODEL_CONTROLS: [&str; 8] = ["nim", "nocf", "lr", "ta", "gdp", "bc", "rq", "cpi"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeriveOptions {
    pub window: RollingWindowConfig,
    pub lookback: usize,
}

impl Default for DeriveOptions {
    fn default() -> Self {
        Self {
            window: RollingWindowConfig::default(),
            lookback: 3,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeriveReport {
    pub derived: Vec<String>,
    pub warnings: Vec<String>,
}

fn roa_grid(data: &PanelDataset) -> Result<Vec<Series>> {
    if data.contains("roa") {
        return Ok(data.grid("roa")?.to_vec());
    }
    let ni = data.grid("net_income")?;
    let ta = data.grid("total_assets")?;
    ni.iter()
        .zip(ta)
        .enumerate()
        .map(|(i, (n, a))| {
            compute_roa(n, a).map_err(|e| match e {
                Error::NonPositive { index, value } => Error::NonPositiveAt {
                    variable: "total_assets".into(),
                    entity: data.entities()[i].clone(),
                    period: data.periods()[index],
                    value,
                },
                other => other,
            })
        })
        .collect()
}

/// Add every analysis variable that is absent but derivable; columns
/// already present are kept and only have their roles assigned.
pub fn derive_variables(data: &mut PanelDataset, options: &DeriveOptions) -> Result<DeriveReport> {
    let mut report = DeriveReport::default();
    let needs_z = ["z1", "z2"].iter().any(|z| !data.contains(z));
    if needs_z && data.contains("car") && (data.contains("roa") || data.contains("net_income")) {
        let roa = roa_grid(data)?;
        let car = data.grid("car")?.to_vec();
        for variant in [ZScoreVariant::Boyd, ZScoreVariant::Yeyati] {
            let name = variant.column();
            if data.contains(name) {
                continue;
            }
            let mut grid = Vec::with_capacity(data.n_entities());
            let mut degenerate = 0;
            for (c, r) in car.iter().zip(&roa) {
                let z = zscore_variant(variant, c, r, &options.window)?;
                degenerate += z.degenerate.iter().filter(|&&d| d).count();
                grid.push(z.values);
            }
            if degenerate > 0 {
                report.warnings.push(format!(
                    "{name}: {degenerate} window(s) with zero ROA dispersion left missing"
                ));
            }
            data.insert(name, VariableRole::Dependent, "Z-score", grid)?;
            report.derived.push(name.into());
        }
    }
    if data.contains("oil") {
        if !data.contains("wti") {
            let grid = map_grid(data, "oil", log_return)?;
            data.insert(
                "wti",
                VariableRole::LongRunRegressor,
                "oil price log return",
                grid,
            )?;
            report.derived.push("wti".into());
        }
        if !data.contains("wti_pos") || !data.contains("wti_neg") {
            let lookback = options.lookback;
            let split = data
                .grid("oil")?
                .iter()
                .map(|row| shock_decompose(row, lookback))
                .collect::<Result<Vec<_>>>()?;
            for (name, desc) in [
                ("wti_pos", "positive oil shock"),
                ("wti_neg", "negative oil shock"),
            ] {
                if data.contains(name) {
                    continue;
                }
                let grid = split
                    .iter()
                    .map(|s| {
                        if name == "wti_pos" {
                            s.positive.clone()
                        } else {
                            s.negative.clone()
                        }
                    })
                    .collect();
                data.insert(name, VariableRole::LongRunRegressor, desc, grid)?;
                report.derived.push(name.into());
            }
        }
    }
    if !data.contains("ta") && data.contains("total_assets") {
        let grid = map_grid(data, "total_assets", natural_log)?;
        data.insert(
            "ta",
            VariableRole::ShortRunControl,
            "log total assets",
            grid,
        )?;
        report.derived.push("ta".into());
    }
    for name in CANONICAL_ORDER {
        if !data.contains(name) {
            continue;
        }
        let role = match name {
            "z1" | "z2" => VariableRole::Dependent,
            "wti" | "wti_pos" | "wti_neg" | "pbvr" => VariableRole::LongRunRegressor,
            _ => VariableRole::ShortRunControl,
        };
        data.set_role(name, role)?;
    }
    Ok(report)
}

/// Analysis variables present in `data`, in display order.
pub fn present_canonical(data: &PanelDataset) -> Vec<&'static str> {
    CANONICAL_ORDER
        .into_iter()
        .filter(|n| data.contains(n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel_data::{load_panel, CsvSchema};

    const RAW: &str = "bank,year,car,net_income,total_assets,oil\n\
        A,2008,0.10,1,100,50\nA,2009,0.10,2,100,60\nA,2010,0.10,1,100,40\nA,2011,0.10,2,100,45\nA,2012,0.12,2,100,70\n\
        B,2008,0.20,3,100,50\nB,2009,0.20,1,100,60\nB,2010,0.20,2,100,40\nB,2011,0.20,1,100,45\nB,2012,0.20,3,100,70\n";

    #[test]
    fn derives_all_columns() {
        let mut d = load_panel(RAW.as_bytes(), &CsvSchema::new("bank", "year")).unwrap();
        let r = derive_variables(&mut d, &DeriveOptions::default()).unwrap();
        assert_eq!(
            r.derived,
            vec!["z1", "z2", "wti", "wti_pos", "wti_neg", "ta"]
        );
        let z1 = &d.grid("z1").unwrap()[0];
        assert!((z1[3].unwrap() - 19.919).abs() < 1e-3);
        let z2 = &d.grid("z2").unwrap()[0];
        assert!(z2[3].unwrap() > 0.0);
        let pos = &d.grid("wti_pos").unwrap()[0];
        assert_eq!(pos[3], Some(0.0));
        assert_eq!(pos[4], Some(70.0 - 145.0 / 3.0));
        assert_eq!(d.grid("wti").unwrap()[1][1], Some((60f64 / 50.0).ln()));
        assert_eq!(
            d.variable("ta").unwrap().meta.role,
            VariableRole::ShortRunControl
        );
        assert_eq!(
            present_canonical(&d),
            vec!["z1", "z2", "wti", "wti_pos", "wti_neg", "ta"]
        );
    }

    #[test]
    fn non_positive_assets_are_located() {
        let bad = RAW.replace("B,2010,0.20,2,100", "B,2010,0.20,2,0");
        let mut d = load_panel(bad.as_bytes(), &CsvSchema::new("bank", "year")).unwrap();
        match derive_variables(&mut d, &DeriveOptions::default()) {
            Err(Error::NonPositiveAt { entity, period, .. }) => {
                assert_eq!(entity, "B");
                assert_eq!(period, 2010);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
