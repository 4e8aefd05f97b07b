//! Long-format panel ingestion and the canonical entity × period store.
//!
//! A [`PanelDataset`] holds one N×T grid per variable. Cells are
//! `Option<f64>`; `None` is the only missing marker. Periods are consecutive
//! integer years: gaps in the input become all-missing columns.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::ardl_pmg::{usable_rows, ModelSpec};
use crate::error::{Error, Result};

/// Per-period values with explicit missing cells.
pub type Series = Vec<Option<f64>>;

/// Token written for missing cells. Empty cells are accepted on input too.
pub const MISSING_TOKEN: &str = "NA";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableRole {
    Dependent,
    LongRunRegressor,
    ShortRunControl,
    RawInput,
    Derived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableMeta {
    pub name: String,
    pub role: VariableRole,
    pub description: String,
    /// Every period's non-missing values coincide across entities
    /// (macro series such as gdp or cpi stacked into the panel).
    pub cross_section_invariant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub meta: VariableMeta,
    /// `grid[i][t]` for entity `i`, period `t`.
    pub grid: Vec<Series>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    entities: Vec<String>,
    periods: Vec<i64>,
    variables: IndexMap<String, Variable>,
}

/// Column mapping for [`load_panel`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub entity_column: String,
    pub period_column: String,
    /// `(csv column, variable name)` pairs. Empty means every remaining
    /// column is loaded under its own header name.
    pub variables: Vec<(String, String)>,
}

impl CsvSchema {
    pub fn new(entity_column: impl Into<String>, period_column: impl Into<String>) -> Self {
        Self {
            entity_column: entity_column.into(),
            period_column: period_column.into(),
            variables: Vec::new(),
        }
    }

    pub fn with_variable(mut self, column: impl Into<String>, name: impl Into<String>) -> Self {
        self.variables.push((column.into(), name.into()));
        self
    }
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self::new("entity", "period")
    }
}

/// Cross-section invariance as stored in [`VariableMeta`]. Vacuous cases
/// (fewer than two entities, or no period with two observed values) count
/// as varying so that single-entity panels are not flagged wholesale.
pub fn is_cross_section_invariant(grid: &[Series]) -> bool {
    if grid.len() < 2 {
        return false;
    }
    let periods = grid[0].len();
    let mut compared = false;
    for t in 0..periods {
        let mut first: Option<f64> = None;
        for row in grid {
            if let Some(v) = row[t] {
                match first {
                    None => first = Some(v),
                    Some(f) => {
                        compared = true;
                        if f != v {
                            return false;
                        }
                    }
                }
            }
        }
    }
    compared
}

impl PanelDataset {
    /// Empty panel over the given axes. Entities must be unique and sorted,
    /// periods unique, sorted and consecutive.
    pub fn new(entities: Vec<String>, periods: Vec<i64>) -> Result<Self> {
        if entities.is_empty() || periods.is_empty() {
            return Err(Error::EmptyInput(
                "panel needs at least one entity and one period".into(),
            ));
        }
        if entities.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Shape(
                "entity identifiers must be unique and sorted".into(),
            ));
        }
        if periods.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(Error::Shape(
                "period labels must be consecutive and increasing".into(),
            ));
        }
        Ok(Self {
            entities,
            periods,
            variables: IndexMap::new(),
        })
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn periods(&self) -> &[i64] {
        &self.periods
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_periods(&self) -> usize {
        self.periods.len()
    }

    pub fn variable_names(&self) -> impl Iterator<Item = &str> {
        self.variables.keys().map(String::as_str)
    }

    pub fn variables(&self) -> impl Iterator<Item = &Variable> {
        self.variables.values()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.variables.contains_key(name)
    }

    pub fn variable(&self, name: &str) -> Result<&Variable> {
        self.variables
            .get(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn grid(&self, name: &str) -> Result<&[Series]> {
        Ok(&self.variable(name)?.grid)
    }

    pub fn entity_index(&self, entity: &str) -> Result<usize> {
        self.entities
            .binary_search_by(|e| e.as_str().cmp(entity))
            .map_err(|_| Error::UnknownEntity(entity.to_string()))
    }

    /// Insert or replace a variable. The grid must be N×T.
    pub fn insert(
        &mut self,
        name: impl Into<String>,
        role: VariableRole,
        description: impl Into<String>,
        grid: Vec<Series>,
    ) -> Result<()> {
        let name = name.into();
        if grid.len() != self.n_entities() || grid.iter().any(|r| r.len() != self.n_periods()) {
            return Err(Error::Shape(format!(
                "variable `{name}` is not {}x{}",
                self.n_entities(),
                self.n_periods()
            )));
        }
        if grid.iter().flatten().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Shape(format!(
                "variable `{name}` has non-finite values"
            )));
        }
        let meta = VariableMeta {
            name: name.clone(),
            role,
            description: description.into(),
            cross_section_invariant: is_cross_section_invariant(&grid),
        };
        self.variables.insert(name, Variable { meta, grid });
        Ok(())
    }

    pub fn set_role(&mut self, name: &str, role: VariableRole) -> Result<()> {
        let var = self
            .variables
            .get_mut(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))?;
        var.meta.role = role;
        Ok(())
    }

    /// Copy of the panel without the named entity.
    pub fn drop_entity(&self, entity: &str) -> Result<Self> {
        let idx = self.entity_index(entity)?;
        if self.n_entities() == 1 {
            return Err(Error::InsufficientData(
                "cannot drop the only entity".into(),
            ));
        }
        let mut entities = self.entities.clone();
        entities.remove(idx);
        let mut out = Self::new(entities, self.periods.clone())?;
        for var in self.variables.values() {
            let mut grid = var.grid.clone();
            grid.remove(idx);
            out.insert(&var.meta.name, var.meta.role, &var.meta.description, grid)?;
        }
        Ok(out)
    }

    /// Copy of the panel restricted to the named variables, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let mut out = Self::new(self.entities.clone(), self.periods.clone())?;
        for name in names {
            let var = self.variable(name)?;
            out.variables.insert(name.to_string(), var.clone());
        }
        Ok(out)
    }

    /// Write the panel in long format, one row per (entity, period) in
    /// sorted order, missing cells as `NA`.
    pub fn write_csv<W: Write>(
        &self,
        out: W,
        entity_column: &str,
        period_column: &str,
    ) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut header = vec![entity_column.to_string(), period_column.to_string()];
        header.extend(self.variables.keys().cloned());
        wtr.write_record(&header)?;
        for (i, entity) in self.entities.iter().enumerate() {
            for (t, period) in self.periods.iter().enumerate() {
                let mut record = vec![entity.clone(), period.to_string()];
                for var in self.variables.values() {
                    record.push(match var.grid[i][t] {
                        Some(v) => format_value(v),
                        None => MISSING_TOKEN.to_string(),
                    });
                }
                wtr.write_record(&record)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self, entity_column: &str, period_column: &str) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, entity_column, period_column)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }
}

/// Shortest decimal form that parses back to the same bits.
pub fn format_value(v: f64) -> String {
    format!("{v}")
}

fn parse_cell(token: &str) -> std::result::Result<Option<f64>, ()> {
    let token = token.trim();
    if token.is_empty() || token == MISSING_TOKEN {
        return Ok(None);
    }
    match token.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(()),
    }
}

/// Parse long-format CSV into a [`PanelDataset`]. Row order does not
/// matter; the grid spans every observed entity and the full consecutive
/// period range.
pub fn load_panel<R: Read>(source: R, schema: &CsvSchema) -> Result<PanelDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(Error::EmptyInput("no header row".into()));
    }
    let position = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let entity_col = position(&schema.entity_column)?;
    let period_col = position(&schema.period_column)?;
    let value_cols: Vec<(usize, String)> = if schema.variables.is_empty() {
        headers
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != entity_col && *j != period_col)
            .map(|(j, h)| (j, h.to_string()))
            .collect()
    } else {
        schema
            .variables
            .iter()
            .map(|(col, name)| Ok((position(col)?, name.clone())))
            .collect::<Result<_>>()?
    };

    let mut cells: BTreeMap<(String, i64), Vec<Option<f64>>> = BTreeMap::new();
    for (row_idx, record) in rdr.records().enumerate() {
        let record = record?;
        // header is line 1
        let row = row_idx + 2;
        let field = |j: usize| record.get(j).unwrap_or("");
        let entity = field(entity_col).to_string();
        if entity.is_empty() {
            return Err(Error::NonNumeric {
                row,
                column: schema.entity_column.clone(),
                token: String::new(),
            });
        }
        let period_token = field(period_col);
        let period: i64 = period_token.parse().map_err(|_| Error::NonNumeric {
            row,
            column: schema.period_column.clone(),
            token: period_token.to_string(),
        })?;
        let mut values = Vec::with_capacity(value_cols.len());
        for (j, _) in &value_cols {
            let token = field(*j);
            let v = parse_cell(token).map_err(|_| Error::NonNumeric {
                row,
                column: headers.get(*j).unwrap_or_default().to_string(),
                token: token.to_string(),
            })?;
            values.push(v);
        }
        if cells.insert((entity.clone(), period), values).is_some() {
            return Err(Error::DuplicateObservation { entity, period });
        }
    }
    if cells.is_empty() {
        return Err(Error::EmptyInput("no data rows".into()));
    }

    let entities: Vec<String> = cells
        .keys()
        .map(|(e, _)| e.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let lo = cells.keys().map(|(_, p)| *p).min().expect("non-empty");
    let hi = cells.keys().map(|(_, p)| *p).max().expect("non-empty");
    let periods: Vec<i64> = (lo..=hi).collect();

    let mut panel = PanelDataset::new(entities, periods)?;
    for (k, (_, name)) in value_cols.iter().enumerate() {
        let grid: Vec<Series> = panel
            .entities
            .iter()
            .map(|e| {
                panel
                    .periods
                    .iter()
                    .map(|p| cells.get(&(e.clone(), *p)).and_then(|v| v[k]))
                    .collect()
            })
            .collect();
        panel.insert(name, VariableRole::RawInput, "", grid)?;
    }
    Ok(panel)
}

fn check_positive(series: &[Option<f64>]) -> Result<()> {
    for (index, v) in series.iter().enumerate() {
        if let Some(v) = *v {
            if v <= 0.0 {
                return Err(Error::NonPositive { index, value: v });
            }
        }
    }
    Ok(())
}

/// `ln(x[t] / x[t-1])`; the first period and any period next to a missing
/// value are missing.
pub fn log_return(series: &[Option<f64>]) -> Result<Series> {
    check_positive(series)?;
    let mut out = vec![None; series.len()];
    for t in 1..series.len() {
        if let (Some(prev), Some(cur)) = (series[t - 1], series[t]) {
            out[t] = Some((cur / prev).ln());
        }
    }
    Ok(out)
}

pub fn natural_log(series: &[Option<f64>]) -> Result<Series> {
    check_positive(series)?;
    Ok(series.iter().map(|v| v.map(f64::ln)).collect())
}

/// Apply a per-entity series transform to a whole grid, reporting
/// non-positive inputs with entity and period labels.
pub fn map_grid(
    data: &PanelDataset,
    variable: &str,
    f: impl Fn(&[Option<f64>]) -> Result<Series>,
) -> Result<Vec<Series>> {
    let grid = data.grid(variable)?;
    grid.iter()
        .enumerate()
        .map(|(i, row)| {
            f(row).map_err(|e| match e {
                Error::NonPositive { index, value } => Error::NonPositiveAt {
                    variable: variable.to_string(),
                    entity: data.entities()[i].clone(),
                    period: data.periods()[index],
                    value,
                },
                other => other,
            })
        })
        .collect()
}

/// Usable-row count for one entity under a model specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityUsability {
    pub entity: String,
    pub usable: usize,
    pub required: usize,
    pub unusable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub entities: Vec<EntityUsability>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn usable_entities(&self) -> impl Iterator<Item = &EntityUsability> {
        self.entities.iter().filter(|e| !e.unusable)
    }
}

/// Report-only check of a panel against a model: usable rows after
/// lagging/differencing per entity, the minimum needed, and warnings for
/// cross-section-invariant model variables.
pub fn validate_panel(data: &PanelDataset, spec: &ModelSpec) -> ValidationReport {
    let mut warnings = Vec::new();
    let required = spec.per_group_parameters() + 1;
    let mut entities = Vec::with_capacity(data.n_entities());
    for (i, name) in data.entities().iter().enumerate() {
        let usable = match usable_rows(data, spec, i) {
            Ok(rows) => rows.len(),
            Err(e) => {
                warnings.push(format!("entity `{name}`: {e}"));
                0
            }
        };
        entities.push(EntityUsability {
            entity: name.clone(),
            usable,
            required,
            unusable: usable < required,
        });
    }
    for name in spec.all_variables() {
        match data.variable(name) {
            Ok(var) if var.meta.cross_section_invariant => warnings.push(format!(
                "variable `{name}` is identical across entities; it carries no cross-sectional variation"
            )),
            Ok(_) => {}
            Err(_) => warnings.push(format!("variable `{name}` is not in the panel")),
        }
    }
    ValidationReport { entities, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<PanelDataset> {
        load_panel(text.as_bytes(), &CsvSchema::new("bank", "year"))
    }

    #[test]
    fn complete_rectangle() {
        let p = load("bank,year,x\nA,2008,1\nA,2009,2\nB,2008,3\nB,2009,4\n").unwrap();
        assert_eq!(p.n_entities(), 2);
        assert_eq!(p.n_periods(), 2);
        let g = p.grid("x").unwrap();
        assert!(g.iter().flatten().all(Option::is_some));
        assert_eq!(g[1][0], Some(3.0));
    }

    #[test]
    fn gap_year_is_materialized() {
        let p = load("bank,year,x\nA,2008,1\nA,2010,2\n").unwrap();
        assert_eq!(p.periods(), &[2008, 2009, 2010]);
        assert_eq!(p.grid("x").unwrap()[0], vec![Some(1.0), None, Some(2.0)]);
    }

    #[test]
    fn missing_tokens() {
        let p = load("bank,year,x,y\nA,1,NA,\nA,2,1.5,2\n").unwrap();
        assert_eq!(p.grid("x").unwrap()[0], vec![None, Some(1.5)]);
        assert_eq!(p.grid("y").unwrap()[0], vec![None, Some(2.0)]);
    }

    #[test]
    fn duplicate_pair_is_rejected() {
        let err = load("bank,year,x\nA,2008,1\nA,2008,2\n").unwrap_err();
        match err {
            Error::DuplicateObservation { entity, period } => {
                assert_eq!(entity, "A");
                assert_eq!(period, 2008);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_token_names_row_and_column() {
        let err = load("bank,year,x\nA,2008,1\nA,2009,abc\n").unwrap_err();
        match err {
            Error::NonNumeric { row, column, token } => {
                assert_eq!(row, 3);
                assert_eq!(column, "x");
                assert_eq!(token, "abc");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            load("bank,year,x\nA,2008,nan\n"),
            Err(Error::NonNumeric { .. })
        ));
    }

    #[test]
    fn empty_file_is_rejected() {
        assert!(matches!(load(""), Err(Error::EmptyInput(_))));
        assert!(matches!(load("bank,year,x\n"), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn schema_mapping_renames_and_selects() {
        let schema = CsvSchema::new("bank", "year").with_variable("ROA", "roa");
        let p = load_panel("bank,year,ROA,junk\nA,1,0.5,zzz\n".as_bytes(), &schema).unwrap();
        assert!(p.contains("roa"));
        assert!(!p.contains("junk"));
    }

    #[test]
    fn invariance_detection() {
        let g = vec![vec![Some(1.0), Some(2.0)], vec![Some(1.0), None]];
        assert!(is_cross_section_invariant(&g));
        let g = vec![vec![Some(1.0), Some(2.0)], vec![Some(1.0), Some(2.5)]];
        assert!(!is_cross_section_invariant(&g));
        assert!(!is_cross_section_invariant(&[vec![Some(1.0)]]));
    }

    #[test]
    fn log_return_examples() {
        let r = log_return(&[Some(100.0), Some(100.0), Some(100.0)]).unwrap();
        assert_eq!(r, vec![None, Some(0.0), Some(0.0)]);
        let r = log_return(&[Some(100.0), Some(110.0)]).unwrap();
        assert!((r[1].unwrap() - 0.09531).abs() < 1e-5);
        let r = log_return(&[Some(100.0), Some(80.0)]).unwrap();
        assert!((r[1].unwrap() + 0.22314).abs() < 1e-5);
        let r = log_return(&[Some(1.0), None, Some(2.0), Some(4.0)]).unwrap();
        assert_eq!(r[1], None);
        assert_eq!(r[2], None);
        assert!((r[3].unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn log_return_rejects_non_positive() {
        match log_return(&[Some(1.0), Some(0.0)]) {
            Err(Error::NonPositive { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn natural_log_examples() {
        assert_eq!(
            natural_log(&[Some(1.0), Some(1.0)]).unwrap(),
            vec![Some(0.0), Some(0.0)]
        );
        assert!(
            (natural_log(&[Some(std::f64::consts::E)]).unwrap()[0].unwrap() - 1.0).abs() < 1e-15
        );
        assert!((natural_log(&[Some(100.0)]).unwrap()[0].unwrap() - 4.60517).abs() < 1e-5);
        assert_eq!(natural_log(&[None]).unwrap(), vec![None]);
        assert!(matches!(
            natural_log(&[Some(-3.0)]),
            Err(Error::NonPositive { index: 0, .. })
        ));
    }

    #[test]
    fn map_grid_labels_errors() {
        let p = load("bank,year,x\nA,2008,1\nA,2009,-1\n").unwrap();
        match map_grid(&p, "x", natural_log) {
            Err(Error::NonPositiveAt { entity, period, .. }) => {
                assert_eq!(entity, "A");
                assert_eq!(period, 2009);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn drop_entity_keeps_the_rest() {
        let p = load("bank,year,x\nA,1,1\nB,1,2\nC,1,3\n").unwrap();
        let q = p.drop_entity("B").unwrap();
        assert_eq!(q.entities(), &["A".to_string(), "C".to_string()]);
        assert_eq!(q.grid("x").unwrap()[1][0], Some(3.0));
        assert!(matches!(p.drop_entity("Z"), Err(Error::UnknownEntity(_))));
    }
}
