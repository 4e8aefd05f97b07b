//! Report tables and their text, CSV and JSON renderings.

use serde::{Deserialize, Serialize};

use super::derive::CANONICAL_ORDER;
use crate::ardl_pmg::{Coefficient, ConvergenceInfo, PmgResult};
use crate::diagnostics::{
    fisher_combine, frees_cd, friedman_cd, ips_test, llc_test, pesaran_cd, FisherMode, TestResult,
    UnitRootSpec,
};
use crate::error::{Error, Result};
use crate::indicators::ShockVariant;
use crate::panel_data::{PanelDataset, MISSING_TOKEN};

pub const SIGNIFICANCE_NOTE: &str = "Note: ***, **, * indicates significance at 1%, 5% and 10%.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Text,
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidConfig(format!(
                "unknown format `{other}` (expected text, csv or json)"
            ))),
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::Text => "txt",
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Four significant digits from 1 upwards, three decimals below.
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let decimals = |a: f64| -> usize {
        if a < 1.0 {
            3
        } else {
            (3 - a.log10().floor() as i64).max(0) as usize
        }
    };
    let d = decimals(x.abs());
    let s = format!("{x:.d$}");
    let rounded: f64 = s.parse().unwrap_or(x);
    let d2 = decimals(rounded.abs());
    let s = if d2 < d { format!("{x:.d2$}") } else { s };
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| MISSING_TOKEN.to_string(), format_number)
}

fn csv_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v}"))
}

fn render_grid(rows: &[Vec<String>]) -> String {
    let ncol = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..ncol)
        .map(|j| {
            rows.iter()
                .filter_map(|r| r.get(j))
                .map(|c| c.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (j, w) in widths.iter().enumerate() {
            let cell = row.get(j).map(String::as_str).unwrap_or("");
            if j == 0 {
                line.push_str(&format!("{cell:<w$}"));
            } else {
                line.push_str(&format!("  {cell:>w$}"));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

fn write_csv(rows: &[Vec<String>]) -> Vec<u8> {
    let mut wtr = csv::WriterBuilder::new()
        .flexible(true)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for row in rows {
        wtr.write_record(row).expect("in-memory write");
    }
    wtr.into_inner().expect("in-memory flush")
}

fn to_json<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("report types serialize");
    out.push(b'\n');
    out
}

/// Rendering in the three output formats.
pub trait Table: Serialize {
    fn text(&self) -> String;
    fn csv_rows(&self) -> Vec<Vec<String>>;

    fn emit(&self, format: Format) -> Vec<u8> {
        match format {
            Format::Text => self.text().into_bytes(),
            Format::Csv => write_csv(&self.csv_rows()),
            Format::Json => to_json(self),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variable: String,
    pub n: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

/// Analysis variables first in display order, then the rest as stored.
fn ordered_variables(data: &PanelDataset) -> Vec<String> {
    let mut names: Vec<String> = CANONICAL_ORDER
        .iter()
        .filter(|n| data.contains(n))
        .map(|n| n.to_string())
        .collect();
    for n in data.variable_names() {
        if !names.iter().any(|m| m == n) {
            names.push(n.to_string());
        }
    }
    names
}

/// Mean, sample standard deviation, minimum and maximum over all
/// non-missing cells of each variable.
pub fn summary_stats(data: &PanelDataset) -> SummaryTable {
    let rows = ordered_variables(data)
        .into_iter()
        .map(|name| {
            let values: Vec<f64> = data
                .grid(&name)
                .map(|g| g.iter().flatten().flatten().copied().collect())
                .unwrap_or_default();
            let n = values.len();
            let mean = (n > 0).then(|| values.iter().sum::<f64>() / n as f64);
            let sd = mean.filter(|_| n > 1).map(|m| {
                (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            });
            SummaryRow {
                variable: name,
                n,
                mean,
                sd,
                min: values.iter().copied().reduce(f64::min),
                max: values.iter().copied().reduce(f64::max),
            }
        })
        .collect();
    SummaryTable { rows }
}

impl Table for SummaryTable {
    fn text(&self) -> String {
        let mut rows = vec![std::iter::once(String::new())
            .chain(self.rows.iter().map(|r| r.variable.clone()))
            .collect::<Vec<_>>()];
        let stats: [(&str, fn(&SummaryRow) -> Option<f64>); 4] = [
            ("Mean", |r| r.mean),
            ("SD", |r| r.sd),
            ("Min", |r| r.min),
            ("Max", |r| r.max),
        ];
        for (label, get) in stats {
            rows.push(
                std::iter::once(label.to_string())
                    .chain(self.rows.iter().map(|r| fmt_opt(get(r))))
                    .collect(),
            );
        }
        render_grid(&rows)
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        let mut rows = vec![["variable", "n", "mean", "sd", "min", "max"]
            .map(String::from)
            .to_vec()];
        for r in &self.rows {
            rows.push(vec![
                r.variable.clone(),
                r.n.to_string(),
                csv_opt(r.mean),
                csv_opt(r.sd),
                csv_opt(r.min),
                csv_opt(r.max),
            ]);
        }
        rows
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub variables: Vec<String>,
    /// Symmetric, `None` where the pair has too little overlap or variance.
    pub cells: Vec<Vec<Option<f64>>>,
    pub footnotes: Vec<String>,
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pairwise-complete Pearson correlations over (entity, period) cells.
pub fn correlation_matrix(data: &PanelDataset) -> CorrelationTable {
    let variables = ordered_variables(data);
    let flat: Vec<Vec<Option<f64>>> = variables
        .iter()
        .map(|v| {
            data.grid(v)
                .map(|g| g.iter().flatten().copied().collect())
                .unwrap_or_default()
        })
        .collect();
    let k = variables.len();
    let mut cells = vec![vec![None; k]; k];
    let mut footnotes = Vec::new();
    for a in 0..k {
        for b in 0..=a {
            let (x, y): (Vec<f64>, Vec<f64>) = flat[a]
                .iter()
                .zip(&flat[b])
                .filter_map(|(p, q)| Some(((*p)?, (*q)?)))
                .unzip();
            let r = if x.len() < 2 {
                footnotes.push(format!(
                    "{} / {}: fewer than 2 overlapping observations",
                    variables[a], variables[b]
                ));
                None
            } else {
                let r = if a == b { Some(1.0) } else { pearson(&x, &y) };
                if r.is_none() || (a == b && pearson(&x, &y).is_none()) {
                    footnotes.push(format!(
                        "{} / {}: zero variance",
                        variables[a], variables[b]
                    ));
                    None
                } else {
                    r
                }
            };
            cells[a][b] = r;
            cells[b][a] = r;
        }
    }
    CorrelationTable {
        variables,
        cells,
        footnotes,
    }
}

impl Table for CorrelationTable {
    fn text(&self) -> String {
        let mut rows = vec![std::iter::once(String::new())
            .chain(self.variables.iter().cloned())
            .collect::<Vec<_>>()];
        for (a, name) in self.variables.iter().enumerate() {
            let mut row = vec![name.clone()];
            for b in 0..=a {
                row.push(self.cells[a][b].map_or_else(|| "-".into(), |v| format!("{v:.3}")));
            }
            rows.push(row);
        }
        let mut out = render_grid(&rows);
        for f in &self.footnotes {
            out.push_str(&format!("- {f}\n"));
        }
        out
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        let mut rows = vec![std::iter::once(String::new())
            .chain(self.variables.iter().cloned())
            .collect::<Vec<_>>()];
        for (a, name) in self.variables.iter().enumerate() {
            rows.push(
                std::iter::once(name.clone())
                    .chain(self.cells[a].iter().map(|c| csv_opt(*c)))
                    .collect(),
            );
        }
        rows
    }
}

/// One test outcome in a report table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCell {
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub stars: String,
    pub error: Option<String>,
    pub warnings: Vec<String>,
}

impl TestCell {
    fn from_result(r: Result<TestResult>) -> Self {
        match r {
            Ok(t) => Self {
                statistic: Some(t.statistic),
                p_value: t.p_value,
                stars: t.stars().to_string(),
                error: None,
                warnings: t.warnings,
            },
            Err(e) => Self {
                statistic: None,
                p_value: None,
                stars: String::new(),
                error: Some(e.to_string()),
                warnings: Vec::new(),
            },
        }
    }

    fn text(&self) -> String {
        match self.statistic {
            Some(s) => format!("{}{}", format_number(s), self.stars),
            None => "n/a".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestTableRow {
    pub variable: String,
    pub cells: Vec<TestCell>,
}

/// Rows of variables, columns of tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestTable {
    pub title: String,
    pub tests: Vec<String>,
    pub rows: Vec<TestTableRow>,
    pub note: String,
}

impl Table for TestTable {
    fn text(&self) -> String {
        let mut rows = vec![std::iter::once(String::new())
            .chain(self.tests.iter().cloned())
            .collect::<Vec<_>>()];
        for r in &self.rows {
            rows.push(
                std::iter::once(r.variable.clone())
                    .chain(r.cells.iter().map(TestCell::text))
                    .collect(),
            );
        }
        let mut out = format!("{}\n\n", self.title);
        out.push_str(&render_grid(&rows));
        out.push('\n');
        out.push_str(&self.note);
        out.push('\n');
        let mut notes = Vec::new();
        for r in &self.rows {
            for (t, c) in self.tests.iter().zip(&r.cells) {
                if let Some(e) = &c.error {
                    notes.push(format!("- {} / {t}: {e}", r.variable));
                }
                for w in &c.warnings {
                    let line = format!("- {} / {t}: {w}", r.variable);
                    if !notes.contains(&line) {
                        notes.push(line);
                    }
                }
            }
        }
        for n in notes {
            out.push_str(&n);
            out.push('\n');
        }
        out
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        let mut rows = vec![
            ["variable", "test", "statistic", "p_value", "stars", "error"]
                .map(String::from)
                .to_vec(),
        ];
        for r in &self.rows {
            for (t, c) in self.tests.iter().zip(&r.cells) {
                rows.push(vec![
                    r.variable.clone(),
                    t.clone(),
                    csv_opt(c.statistic),
                    csv_opt(c.p_value),
                    c.stars.clone(),
                    c.error.clone().unwrap_or_default(),
                ]);
            }
        }
        rows
    }
}

/// Frees, Friedman and Pesaran statistics for each listed variable.
pub fn cross_section_table(data: &PanelDataset, variables: &[&str]) -> Result<TestTable> {
    let mut rows = Vec::new();
    for v in variables {
        let grid = data.grid(v)?;
        rows.push(TestTableRow {
            variable: v.to_string(),
            cells: vec![
                TestCell::from_result(frees_cd(grid)),
                TestCell::from_result(friedman_cd(grid)),
                TestCell::from_result(pesaran_cd(grid)),
            ],
        });
    }
    Ok(TestTable {
        title: "Cross-sectional dependence tests".into(),
        tests: vec!["Frees".into(), "Friedman".into(), "Pesaran CD".into()],
        rows,
        note: "Note: ***, **, * means rejection of cross-sectional independence at 1%, 5% and 10%."
            .into(),
    })
}

/// LLC, IPS, Fisher-ADF and Fisher-PP statistics for each listed variable.
pub fn unit_root_table(
    data: &PanelDataset,
    variables: &[&str],
    spec: &UnitRootSpec,
) -> Result<TestTable> {
    let mut rows = Vec::new();
    for v in variables {
        let grid = data.grid(v)?;
        rows.push(TestTableRow {
            variable: v.to_string(),
            cells: vec![
                TestCell::from_result(llc_test(grid, spec)),
                TestCell::from_result(ips_test(grid, spec)),
                TestCell::from_result(fisher_combine(grid, spec, FisherMode::Adf)),
                TestCell::from_result(fisher_combine(grid, spec, FisherMode::Pp)),
            ],
        });
    }
    Ok(TestTable {
        title: "Panel unit root tests".into(),
        tests: vec![
            "LLC t*".into(),
            "IPS W-stat".into(),
            "ADF-Fisher".into(),
            "PP-Fisher".into(),
        ],
        rows,
        note: "Note: null of a unit root; ***, **, * mean rejection at 1%, 5% and 10%.".into(),
    })
}

/// Report row label for a short-run design column: `d_wti` → `wti`,
/// `d_wti_l1` → `wti(-1)`, `const` → `c`.
pub fn short_run_label(name: &str) -> String {
    if name == "const" {
        return "c".into();
    }
    let base = name.strip_prefix("d_").unwrap_or(name);
    if let Some(pos) = base.rfind("_l") {
        if let Ok(lag) = base[pos + 2..].parse::<usize>() {
            return format!("{}(-{lag})", &base[..pos]);
        }
    }
    base.to_string()
}

pub const RHO_LABEL: &str = "rho_i";

/// One PMG estimation in the layout of a results column: long-run block,
/// short-run block led by the adjustment speed, log-likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationTable {
    pub dependent: String,
    pub shock: ShockVariant,
    pub model: usize,
    pub control: Option<String>,
    pub long_run: Vec<Coefficient>,
    pub short_run: Vec<Coefficient>,
    /// `None` when every group fits exactly.
    pub log_likelihood: Option<f64>,
    pub n_groups: usize,
    pub nobs: usize,
    pub convergence: ConvergenceInfo,
    pub warnings: Vec<String>,
}

impl EstimationTable {
    pub fn from_pmg(
        result: &PmgResult,
        dependent: &str,
        shock: ShockVariant,
        model: usize,
        control: Option<&str>,
    ) -> Self {
        let mut short_run = vec![Coefficient::new(
            RHO_LABEL,
            result.rho_mean.estimate,
            result.rho_mean.std_error,
        )];
        for c in &result.short_run_mean {
            short_run.push(Coefficient::new(
                short_run_label(&c.name),
                c.estimate,
                c.std_error,
            ));
        }
        Self {
            dependent: dependent.into(),
            shock,
            model,
            control: control.map(String::from),
            long_run: result.long_run.clone(),
            short_run,
            log_likelihood: result
                .log_likelihood
                .is_finite()
                .then_some(result.log_likelihood),
            n_groups: result.groups.len(),
            nobs: result.groups.iter().map(|g| g.nobs).sum(),
            convergence: result.convergence.clone(),
            warnings: result.warnings.clone(),
        }
    }

    pub fn title(&self) -> String {
        format!(
            "PMG estimates: {} on {} shock series, Model {}",
            self.dependent,
            self.shock.label(),
            self.model
        )
    }
}

fn coef_text(c: &Coefficient) -> String {
    format!("{}{}", format_number(c.estimate), c.stars())
}

fn coef_csv(panel: &str, c: &Coefficient) -> Vec<String> {
    vec![
        panel.into(),
        c.name.clone(),
        format!("{}", c.estimate),
        csv_opt(c.std_error),
        csv_opt(c.t_ratio()),
        csv_opt(c.p_value()),
        c.stars().into(),
    ]
}

impl Table for EstimationTable {
    fn text(&self) -> String {
        let mut rows = vec![vec![
            String::new(),
            self.dependent.clone(),
            format!("Model {}", self.model),
        ]];
        for (k, c) in self.long_run.iter().enumerate() {
            let panel = if k == 0 { "Long-run" } else { "" };
            rows.push(vec![panel.into(), c.name.clone(), coef_text(c)]);
        }
        for (k, c) in self.short_run.iter().enumerate() {
            let panel = if k == 0 { "Short-run" } else { "" };
            rows.push(vec![panel.into(), c.name.clone(), coef_text(c)]);
        }
        rows.push(vec![
            "Log Likelihood".into(),
            String::new(),
            self.log_likelihood
                .map_or_else(|| "inf".into(), format_number),
        ]);
        let mut out = format!("{}\n\n", self.title());
        out.push_str(&render_grid(&rows));
        out.push('\n');
        out.push_str(SIGNIFICANCE_NOTE);
        out.push('\n');
        out
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        let mut rows = vec![[
            "panel",
            "row",
            "estimate",
            "std_error",
            "t_ratio",
            "p_value",
            "stars",
        ]
        .map(String::from)
        .to_vec()];
        rows.extend(self.long_run.iter().map(|c| coef_csv("long_run", c)));
        rows.extend(self.short_run.iter().map(|c| coef_csv("short_run", c)));
        rows.push(vec![
            "log_likelihood".into(),
            String::new(),
            self.log_likelihood
                .map_or_else(|| "inf".into(), |v| format!("{v}")),
        ]);
        rows
    }
}

/// Outcome of one (shock variant, model) cell of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Estimated {
        table: EstimationTable,
    },
    Failed {
        error: String,
        estimation_failure: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub shock: ShockVariant,
    pub model: usize,
    pub control: Option<String>,
    pub outcome: CellOutcome,
}

impl GridCell {
    pub fn table(&self) -> Option<&EstimationTable> {
        match &self.outcome {
            CellOutcome::Estimated { table } => Some(table),
            CellOutcome::Failed { .. } => None,
        }
    }
}

/// All models of one shock variant side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTable {
    pub dependent: String,
    pub shock: ShockVariant,
    pub cells: Vec<GridCell>,
}

impl GridTable {
    fn row_labels(&self) -> (Vec<String>, Vec<String>) {
        let mut long = Vec::new();
        let mut short = vec![RHO_LABEL.to_string()];
        let mut controls = Vec::new();
        let mut tail = Vec::new();
        for t in self.cells.iter().filter_map(GridCell::table) {
            for c in &t.long_run {
                if !long.contains(&c.name) {
                    long.push(c.name.clone());
                }
            }
            for c in t.short_run.iter().skip(1) {
                let is_control = t
                    .control
                    .as_deref()
                    .is_some_and(|ctl| c.name.starts_with(ctl));
                let bucket = if is_control {
                    &mut controls
                } else if c.name == "c" {
                    &mut tail
                } else {
                    &mut short
                };
                if !bucket.contains(&c.name) {
                    bucket.push(c.name.clone());
                }
            }
        }
        short.extend(controls);
        short.extend(tail);
        (long, short)
    }
}

impl Table for GridTable {
    fn text(&self) -> String {
        let (long, short) = self.row_labels();
        let mut rows = vec![std::iter::once(String::new())
            .chain(std::iter::once(self.dependent.clone()))
            .chain(self.cells.iter().map(|c| format!("Model {}", c.model)))
            .collect::<Vec<_>>()];
        let lookup = |cell: &GridCell, long_run: bool, name: &str| -> String {
            match &cell.outcome {
                CellOutcome::Failed { .. } => "failed".into(),
                CellOutcome::Estimated { table } => {
                    let block = if long_run {
                        &table.long_run
                    } else {
                        &table.short_run
                    };
                    block
                        .iter()
                        .find(|c| c.name == name)
                        .map(coef_text)
                        .unwrap_or_default()
                }
            }
        };
        for (block, names, long_run) in [("Long-run", &long, true), ("Short-run", &short, false)] {
            for (k, name) in names.iter().enumerate() {
                let mut row = vec![
                    if k == 0 { block.into() } else { String::new() },
                    name.clone(),
                ];
                row.extend(self.cells.iter().map(|c| lookup(c, long_run, name)));
                rows.push(row);
            }
        }
        let mut ll = vec!["Log Likelihood".to_string(), String::new()];
        ll.extend(self.cells.iter().map(|c| {
            match &c.outcome {
                CellOutcome::Failed { .. } => "failed".into(),
                CellOutcome::Estimated { table } => table
                    .log_likelihood
                    .map_or_else(|| "inf".into(), format_number),
            }
        }));
        rows.push(ll);
        let mut out = format!(
            "PMG estimates: {} on {} shock series\n\n",
            self.dependent,
            self.shock.label()
        );
        out.push_str(&render_grid(&rows));
        out.push('\n');
        out.push_str(SIGNIFICANCE_NOTE);
        out.push('\n');
        for c in &self.cells {
            if let CellOutcome::Failed { error, .. } = &c.outcome {
                out.push_str(&format!("- Model {}: {error}\n", c.model));
            }
        }
        out
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        let mut rows = vec![[
            "model",
            "panel",
            "row",
            "estimate",
            "std_error",
            "t_ratio",
            "p_value",
            "stars",
        ]
        .map(String::from)
        .to_vec()];
        for c in &self.cells {
            match &c.outcome {
                CellOutcome::Failed { error, .. } => {
                    rows.push(vec![c.model.to_string(), "failed".into(), error.clone()]);
                }
                CellOutcome::Estimated { table } => {
                    for r in table.csv_rows().into_iter().skip(1) {
                        rows.push(std::iter::once(c.model.to_string()).chain(r).collect());
                    }
                }
            }
        }
        rows
    }
}
