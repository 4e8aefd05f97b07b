//! Replication runner: loads or simulates a bank panel, derives the
//! analysis variables, runs the diagnostics and the (shock variant, model)
//! estimation grid, and writes the tables.

mod config;
mod derive;
mod tables;

pub use config::{parse_shocks, FatalCells, RunConfig};
pub use derive::{
    derive_variables, present_canonical, DeriveOptions, DeriveReport, CANONICAL_ORDER,
    MODEL_CONTROLS,
};
pub use tables::{
    correlation_matrix, cross_section_table, format_number, short_run_label, summary_stats,
    unit_root_table, CellOutcome, CorrelationTable, EstimationTable, Format, GridCell, GridTable,
    SummaryRow, SummaryTable, Table, TestCell, TestTable, TestTableRow, RHO_LABEL,
    SIGNIFICANCE_NOTE,
};

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ardl_pmg::{build_ecm_design, estimate_pmg, ModelSpec};
use crate::diagnostics::UnitRootSpec;
use crate::error::{Error, Result};
use crate::indicators::ShockVariant;
use crate::panel_data::{is_cross_section_invariant, load_panel, CsvSchema, PanelDataset};
use crate::simulate::simulate_bank_panel;

pub const TOOL_NAME: &str = "pmgkit";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    /// SHA-256 of the input file bytes, or of the simulation parameters.
    pub input_hash: String,
    pub seed: Option<u64>,
    pub dependent: String,
    pub entities: Vec<String>,
    pub periods: Vec<i64>,
    pub dropped_entities: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub metadata: RunMetadata,
    pub summary: SummaryTable,
    pub correlation: CorrelationTable,
    pub cross_section: TestTable,
    pub unit_root: TestTable,
    pub cells: Vec<GridCell>,
    pub warnings: Vec<String>,
}

impl ReportBundle {
    pub fn cell(&self, shock: ShockVariant, model: usize) -> Option<&GridCell> {
        self.cells
            .iter()
            .find(|c| c.shock == shock && c.model == model)
    }

    pub fn grids(&self) -> Vec<GridTable> {
        let mut shocks: Vec<ShockVariant> = Vec::new();
        for c in &self.cells {
            if !shocks.contains(&c.shock) {
                shocks.push(c.shock);
            }
        }
        shocks
            .into_iter()
            .map(|s| GridTable {
                dependent: self.metadata.dependent.clone(),
                shock: s,
                cells: self
                    .cells
                    .iter()
                    .filter(|c| c.shock == s)
                    .cloned()
                    .collect(),
            })
            .collect()
    }

    /// Failed cells that the configuration marks as fatal.
    pub fn fatal_failures(&self, fatal: &FatalCells) -> Vec<&GridCell> {
        self.cells
            .iter()
            .filter(|c| {
                matches!(c.outcome, CellOutcome::Failed { .. }) && fatal.is_fatal(c.shock, c.model)
            })
            .collect()
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A loaded panel with everything needed to reproduce it.
#[derive(Debug, Clone)]
pub struct LoadedPanel {
    pub data: PanelDataset,
    pub input_hash: String,
    pub seed: Option<u64>,
}

/// Read the configured CSV or simulate the configured bank panel.
pub fn load_input(config: &RunConfig) -> Result<LoadedPanel> {
    config.validate()?;
    match &config.input {
        Some(path) => {
            let bytes = fs::read(path)?;
            let schema = CsvSchema::new(config.entity_column.clone(), config.period_column.clone());
            Ok(LoadedPanel {
                data: load_panel(bytes.as_slice(), &schema)?,
                input_hash: sha256_hex(&bytes),
                seed: None,
            })
        }
        None => Ok(LoadedPanel {
            data: simulate_bank_panel(&config.sim)?,
            input_hash: sha256_hex(&serde_json::to_vec(&config.sim)?),
            seed: Some(config.sim.seed),
        }),
    }
}

/// Drop the configured entities and derive the analysis variables.
pub fn prepare_panel(
    mut data: PanelDataset,
    config: &RunConfig,
) -> Result<(PanelDataset, DeriveReport)> {
    for e in &config.drop_entity {
        data = data.drop_entity(e)?;
    }
    let report = derive_variables(&mut data, &config.derive)?;
    Ok((data, report))
}

/// ARDL specification of one grid cell: long run on the shock series and
/// pbvr; Models 2 to 9 add one short-run control each.
pub fn cell_spec(config: &RunConfig, shock: ShockVariant, model: usize) -> Result<ModelSpec> {
    if !(1..=9).contains(&model) {
        return Err(Error::InvalidConfig(format!(
            "model {model} is outside 1-9"
        )));
    }
    let controls: Vec<&str> = if model == 1 {
        vec![]
    } else {
        vec![MODEL_CONTROLS[model - 2]]
    };
    let mut spec = ModelSpec::new(config.zscore.column(), &[shock.column(), "pbvr"])
        .with_controls(&controls)
        .with_lags(config.p, config.q);
    spec.ec_timing = config.ec_timing;
    Ok(spec)
}

pub fn estimate_cell(
    data: &PanelDataset,
    config: &RunConfig,
    shock: ShockVariant,
    model: usize,
) -> Result<EstimationTable> {
    let spec = cell_spec(config, shock, model)?;
    let design = build_ecm_design(data, &spec)?;
    let result = estimate_pmg(&design, &config.estimator)?;
    let control = spec.short_run_controls.first().map(String::as_str);
    Ok(EstimationTable::from_pmg(
        &result,
        &spec.dependent,
        shock,
        model,
        control,
    ))
}

/// Dependence tests on the analysis variables that differ across entities
/// and unit-root tests on all of them.
pub fn diagnostic_tables(
    data: &PanelDataset,
    unit_root: &UnitRootSpec,
) -> Result<(TestTable, TestTable)> {
    let all = present_canonical(data);
    let varying: Vec<&str> = all
        .iter()
        .copied()
        .filter(|v| {
            data.grid(v)
                .map(|g| !is_cross_section_invariant(g))
                .unwrap_or(false)
        })
        .collect();
    Ok((
        cross_section_table(data, &varying)?,
        unit_root_table(data, &all, unit_root)?,
    ))
}

/// Summary, correlations, diagnostics and every requested estimation cell.
pub fn run_replication(config: &RunConfig) -> Result<ReportBundle> {
    let loaded = load_input(config)?;
    let (full, derived) = prepare_panel(loaded.data, config)?;
    let dependent = config.zscore.column();
    if !full.contains(dependent) {
        return Err(Error::MissingColumn(format!(
            "{dependent} (provide it or the car and roa / net_income + total_assets columns)"
        )));
    }
    let data = full.select(&present_canonical(&full))?;
    let (cross_section, unit_root) = diagnostic_tables(&data, &config.unit_root)?;
    let cells: Vec<(ShockVariant, usize)> = config
        .shocks
        .iter()
        .flat_map(|&s| config.models.iter().map(move |&m| (s, m)))
        .collect();
    let cells = cells
        .par_iter()
        .map(|&(shock, model)| GridCell {
            shock,
            model,
            control: (model > 1).then(|| MODEL_CONTROLS[model - 2].to_string()),
            outcome: match estimate_cell(&data, config, shock, model) {
                Ok(table) => CellOutcome::Estimated { table },
                Err(e) => CellOutcome::Failed {
                    estimation_failure: e.is_estimation_failure(),
                    error: e.to_string(),
                },
            },
        })
        .collect();
    Ok(ReportBundle {
        metadata: RunMetadata {
            tool: TOOL_NAME.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config.config_hash(),
            input_hash: loaded.input_hash,
            seed: loaded.seed,
            dependent: dependent.into(),
            entities: data.entities().to_vec(),
            periods: data.periods().to_vec(),
            dropped_entities: config.drop_entity.clone(),
        },
        summary: summary_stats(&data),
        correlation: correlation_matrix(&data),
        cross_section,
        unit_root,
        cells,
        warnings: derived.warnings,
    })
}

pub fn cell_file_stem(shock: ShockVariant, model: usize) -> String {
    format!("estimation_{}_model{model}", shock.label())
}

/// Write every table of the bundle in each format plus `bundle.json`;
/// returns the written paths in a fixed order.
pub fn write_bundle(bundle: &ReportBundle, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |stem: &str, format: Format, bytes: Vec<u8>| -> Result<()> {
        let path = dir.join(format!("{stem}.{}", format.extension()));
        fs::write(&path, bytes)?;
        written.push(path);
        Ok(())
    };
    for &f in formats {
        put("summary", f, bundle.summary.emit(f))?;
        put("correlation", f, bundle.correlation.emit(f))?;
        put("cross_section", f, bundle.cross_section.emit(f))?;
        put("unit_root", f, bundle.unit_root.emit(f))?;
        for grid in bundle.grids() {
            put(&format!("grid_{}", grid.shock.label()), f, grid.emit(f))?;
        }
        for cell in &bundle.cells {
            let stem = cell_file_stem(cell.shock, cell.model);
            let bytes = match &cell.outcome {
                CellOutcome::Estimated { table } => table.emit(f),
                CellOutcome::Failed { error, .. } => match f {
                    Format::Json => {
                        let mut v = serde_json::to_vec_pretty(cell)?;
                        v.push(b'\n');
                        v
                    }
                    _ => format!("failed: {error}\n").into_bytes(),
                },
            };
            put(&stem, f, bytes)?;
        }
    }
    let mut json = serde_json::to_vec_pretty(bundle)?;
    json.push(b'\n');
    put("bundle", Format::Json, json)?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim_config() -> RunConfig {
        RunConfig::parse("simulate = true\nseed = 7\nsim.periods = 12\n").unwrap()
    }

    #[test]
    fn grid_has_requested_cells_in_order() {
        let mut cfg = sim_config();
        cfg.set("shocks", "negative, returns").unwrap();
        cfg.set("models", "1, 4").unwrap();
        let b = run_replication(&cfg).unwrap();
        let keys: Vec<_> = b.cells.iter().map(|c| (c.shock, c.model)).collect();
        assert_eq!(
            keys,
            vec![
                (ShockVariant::Returns, 1),
                (ShockVariant::Returns, 4),
                (ShockVariant::Negative, 1),
                (ShockVariant::Negative, 4)
            ]
        );
        let t = b
            .cell(ShockVariant::Returns, 4)
            .unwrap()
            .table()
            .expect("estimated");
        let controls: Vec<_> = t.short_run.iter().filter(|c| c.name == "lr").collect();
        assert_eq!(controls.len(), 1);
        assert_eq!(t.short_run[0].name, RHO_LABEL);
        assert_eq!(
            t.long_run
                .iter()
                .map(|c| c.name.as_str())
                .collect::<Vec<_>>(),
            vec!["wti", "pbvr"]
        );
    }

    #[test]
    fn dropping_an_entity() {
        let mut cfg = sim_config();
        cfg.set("models", "1").unwrap();
        cfg.set("shocks", "returns").unwrap();
        cfg.set("drop_entity", "bank03").unwrap();
        let b = run_replication(&cfg).unwrap();
        assert_eq!(b.metadata.entities.len(), 16);
        assert!(!b.metadata.entities.contains(&"bank03".to_string()));
        cfg.set("drop_entity", "nobody").unwrap();
        assert!(matches!(
            run_replication(&cfg),
            Err(Error::UnknownEntity(_))
        ));
    }

    #[test]
    fn cell_specs_follow_model_numbering() {
        let cfg = sim_config();
        assert!(cell_spec(&cfg, ShockVariant::Positive, 1)
            .unwrap()
            .short_run_controls
            .is_empty());
        assert_eq!(
            cell_spec(&cfg, ShockVariant::Positive, 2)
                .unwrap()
                .short_run_controls,
            vec!["nim"]
        );
        assert_eq!(
            cell_spec(&cfg, ShockVariant::Positive, 9)
                .unwrap()
                .short_run_controls,
            vec!["cpi"]
        );
        assert_eq!(
            cell_spec(&cfg, ShockVariant::Positive, 3).unwrap().long_run,
            vec!["wti_pos", "pbvr"]
        );
        assert!(cell_spec(&cfg, ShockVariant::Positive, 10).is_err());
    }
}
