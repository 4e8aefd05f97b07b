//! Synthetic panels from error-correction data-generating processes, and
//! seeded Monte Carlo runs over them.
//!
//! Replication `r` of a run with master seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(s)` positioned on stream `r`. Each replication
//! therefore owns an independent random sequence, and the report does not
//! depend on how replications are spread across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ardl_pmg::{build_ecm_design, estimate_mg, estimate_pmg, EstimateOptions, ModelSpec};
use crate::diagnostics::{
    fisher_combine, frees_cd, friedman_cd, ips_test, llc_test, pesaran_cd, FisherMode, TestResult,
    UnitRootSpec, LEVELS,
};
use crate::error::{Error, Result};
use crate::indicators::{shock_decompose, ShockVariant};
use crate::panel_data::{log_return, PanelDataset, Series, VariableRole};

/// Environment variable holding the Monte Carlo worker count.
pub const WORKERS_ENV: &str = "PMGKIT_WORKERS";

const MAX_REDRAWS: usize = 100;
const Z_95: f64 = 1.959_963_984_540_054;

/// Random stream of replication `replication` under `master_seed`.
pub fn replication_rng(master_seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replication);
    rng
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum XProcess {
    RandomWalk,
    StationaryAr { phi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpParams {
    pub n_groups: usize,
    pub n_periods: usize,
    pub theta_true: Vec<f64>,
    /// Group long-run vectors are `theta_true + U(−spread, spread)`.
    pub theta_spread: f64,
    pub rho_range: (f64, f64),
    /// Range of the loadings on ΔX.
    pub short_run_range: (f64, f64),
    pub intercept_range: (f64, f64),
    pub noise_sd: f64,
    /// Scale each group's noise by U(0.5, 1.5).
    pub heteroskedastic: bool,
    pub x_process: XProcess,
    pub x_innovation_sd: f64,
    /// Regressors whose path is shared by every group, by position.
    pub common_x: Vec<bool>,
    pub seed: u64,
    pub burn_in: usize,
    pub dependent: String,
    pub regressors: Vec<String>,
}

impl Default for DgpParams {
    fn default() -> Self {
        Self {
            n_groups: 17,
            n_periods: 9,
            theta_true: vec![0.5, -0.3],
            theta_spread: 0.0,
            rho_range: (-0.9, -0.3),
            short_run_range: (-0.2, 0.2),
            intercept_range: (-0.5, 0.5),
            noise_sd: 0.1,
            heteroskedastic: false,
            x_process: XProcess::RandomWalk,
            x_innovation_sd: 1.0,
            common_x: Vec::new(),
            seed: 0,
            burn_in: 50,
            dependent: "z".into(),
            regressors: vec!["x1".into(), "x2".into()],
        }
    }
}

impl DgpParams {
    pub fn new(n_groups: usize, n_periods: usize) -> Self {
        Self {
            n_groups,
            n_periods,
            ..Self::default()
        }
    }

    pub fn with_noise(mut self, noise_sd: f64) -> Self {
        self.noise_sd = noise_sd;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Model that matches the generating process.
    pub fn model_spec(&self) -> ModelSpec {
        let names: Vec<&str> = self.regressors.iter().map(String::as_str).collect();
        ModelSpec::new(self.dependent.clone(), &names)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_groups == 0 || self.n_periods < 2 {
            return bad("simulation needs at least one group and two periods".into());
        }
        if self.theta_true.is_empty() || self.theta_true.len() != self.regressors.len() {
            return bad(format!(
                "{} long-run coefficients for {} regressors",
                self.theta_true.len(),
                self.regressors.len()
            ));
        }
        if !self.common_x.is_empty() && self.common_x.len() != self.regressors.len() {
            return bad("common_x must have one flag per regressor".into());
        }
        let (lo, hi) = self.rho_range;
        if !(-2.0..=0.0).contains(&lo) || !(-2.0..=0.0).contains(&hi) || lo > hi {
            return bad(format!("rho range ({lo}, {hi}) must lie inside [-2, 0]"));
        }
        for (name, (a, b)) in [
            ("short-run", self.short_run_range),
            ("intercept", self.intercept_range),
        ] {
            if a > b || !a.is_finite() || !b.is_finite() {
                return bad(format!("{name} range ({a}, {b}) is not an interval"));
            }
        }
        if self.burn_in < 20 {
            return bad(format!(
                "burn-in of {} periods; at least 20 required",
                self.burn_in
            ));
        }
        if !(self.noise_sd >= 0.0) || !(self.x_innovation_sd >= 0.0) || !(self.theta_spread >= 0.0)
        {
            return bad("standard deviations and spreads must be non-negative".into());
        }
        if let XProcess::StationaryAr { phi } = self.x_process {
            if !(phi.abs() < 1.0) {
                return bad(format!("AR coefficient {phi} is not stationary"));
            }
        }
        let mut names: Vec<&String> = self.regressors.iter().collect();
        names.push(&self.dependent);
        names.sort();
        names.dedup();
        if names.len() != self.regressors.len() + 1 {
            return bad("dependent and regressor names must be distinct".into());
        }
        Ok(())
    }
}

/// Group parameters drawn for one simulated panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpTruth {
    pub rho: Vec<f64>,
    pub theta: Vec<Vec<f64>>,
    pub short_run: Vec<Vec<f64>>,
    pub intercept: Vec<f64>,
    pub noise_sd: Vec<f64>,
}

fn draw_rho<R: Rng + ?Sized>(rng: &mut R, range: (f64, f64)) -> Result<f64> {
    for _ in 0..MAX_REDRAWS {
        let rho = uniform(rng, range).clamp(-2.0, 0.0);
        if (1.0 + rho).abs() < 1.0 {
            return Ok(rho);
        }
    }
    Err(Error::ExplosiveDraw(MAX_REDRAWS))
}

fn x_path<R: Rng + ?Sized>(rng: &mut R, process: XProcess, sd: f64, len: usize) -> Vec<f64> {
    let mut x = Vec::with_capacity(len);
    match process {
        XProcess::RandomWalk => {
            x.push(0.0);
            for t in 1..len {
                x.push(x[t - 1] + sd * normal(rng));
            }
        }
        XProcess::StationaryAr { phi } => {
            x.push(sd / (1.0 - phi * phi).sqrt() * normal(rng));
            for t in 1..len {
                x.push(phi * x[t - 1] + sd * normal(rng));
            }
        }
    }
    x
}

/// Run the error-correction recursion forward from its equilibrium at
/// index `start − 1`.
#[allow(clippy::too_many_arguments)]
fn ecm_path<R: Rng + ?Sized>(
    rng: &mut R,
    xs: &[&[f64]],
    theta: &[f64],
    delta: &[f64],
    rho: f64,
    level: f64,
    sigma: f64,
    start: usize,
) -> Vec<f64> {
    let len = xs[0].len();
    let lr = |t: usize| -> f64 { xs.iter().zip(theta).map(|(x, th)| th * x[t]).sum() };
    let mu = -rho * level;
    let mut z = vec![f64::NAN; len];
    z[start - 1] = lr(start - 1) + level;
    for t in start..len {
        let sr: f64 = xs
            .iter()
            .zip(delta)
            .map(|(x, d)| d * (x[t] - x[t - 1]))
            .sum();
        z[t] = z[t - 1] + rho * (z[t - 1] - lr(t)) + sr + mu + sigma * normal(rng);
    }
    z
}

fn entity_names(prefix: &str, n: usize) -> Vec<String> {
    let width = n.to_string().len().max(2);
    (1..=n).map(|i| format!("{prefix}{i:0width$}")).collect()
}

pub fn simulate_ecm_panel(params: &DgpParams) -> Result<PanelDataset> {
    simulate_ecm_panel_with(params, &mut replication_rng(params.seed, 0)).map(|(d, _)| d)
}

/// Simulate from an explicit random stream, returning the drawn group
/// parameters alongside the panel.
pub fn simulate_ecm_panel_with<R: Rng + ?Sized>(
    params: &DgpParams,
    rng: &mut R,
) -> Result<(PanelDataset, DgpTruth)> {
    params.validate()?;
    let k = params.regressors.len();
    let len = params.burn_in + params.n_periods + 1;
    let is_common = |j: usize| params.common_x.get(j).copied().unwrap_or(false);
    let common: Vec<Option<Vec<f64>>> = (0..k)
        .map(|j| is_common(j).then(|| x_path(rng, params.x_process, params.x_innovation_sd, len)))
        .collect();

    let mut truth = DgpTruth {
        rho: vec![],
        theta: vec![],
        short_run: vec![],
        intercept: vec![],
        noise_sd: vec![],
    };
    let mut z_grid = Vec::with_capacity(params.n_groups);
    let mut x_grids: Vec<Vec<Series>> = vec![Vec::with_capacity(params.n_groups); k];
    let keep = len - params.n_periods;
    for _ in 0..params.n_groups {
        let rho = draw_rho(rng, params.rho_range)?;
        let theta: Vec<f64> = params
            .theta_true
            .iter()
            .map(|&t| t + uniform(rng, (-params.theta_spread, params.theta_spread)))
            .collect();
        let delta: Vec<f64> = (0..k)
            .map(|_| uniform(rng, params.short_run_range))
            .collect();
        let level = uniform(rng, params.intercept_range);
        let sigma = if params.heteroskedastic {
            params.noise_sd * uniform(rng, (0.5, 1.5))
        } else {
            params.noise_sd
        };
        let own: Vec<Vec<f64>> = (0..k)
            .map(|j| match &common[j] {
                Some(path) => path.clone(),
                None => x_path(rng, params.x_process, params.x_innovation_sd, len),
            })
            .collect();
        let xs: Vec<&[f64]> = own.iter().map(Vec::as_slice).collect();
        let z = ecm_path(rng, &xs, &theta, &delta, rho, level, sigma, 1);
        z_grid.push(z[keep..].iter().copied().map(Some).collect());
        for (j, path) in own.iter().enumerate() {
            x_grids[j].push(path[keep..].iter().copied().map(Some).collect());
        }
        truth.rho.push(rho);
        truth.theta.push(theta);
        truth.short_run.push(delta);
        truth.intercept.push(-rho * level);
        truth.noise_sd.push(sigma);
    }

    let mut data = PanelDataset::new(
        entity_names("g", params.n_groups),
        (1..=params.n_periods as i64).collect(),
    )?;
    data.insert(
        &params.dependent,
        VariableRole::Dependent,
        "simulated dependent",
        z_grid,
    )?;
    for (name, grid) in params.regressors.iter().zip(x_grids) {
        data.insert(
            name,
            VariableRole::LongRunRegressor,
            "simulated regressor",
            grid,
        )?;
    }
    Ok((data, truth))
}

/// Null and alternative processes for diagnostic size and power runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PanelProcess {
    /// Independent standard normal draws.
    IidNormal,
    /// Driftless random walk from zero.
    RandomWalk,
    /// Zero-mean AR(1) started from its stationary distribution.
    Ar { phi: f64 },
}

/// An `n × t` grid of independent series.
pub fn simulate_panel_grid<R: Rng + ?Sized>(
    process: PanelProcess,
    n: usize,
    t: usize,
    rng: &mut R,
) -> Vec<Series> {
    (0..n)
        .map(|_| {
            let path: Vec<f64> = match process {
                PanelProcess::IidNormal => (0..t).map(|_| normal(rng)).collect(),
                PanelProcess::RandomWalk => {
                    let mut acc = 0.0;
                    (0..t)
                        .map(|_| {
                            acc += normal(rng);
                            acc
                        })
                        .collect()
                }
                PanelProcess::Ar { phi } => x_path(rng, XProcess::StationaryAr { phi }, 1.0, t),
            };
            path.into_iter().map(Some).collect()
        })
        .collect()
}

/// A synthetic bank panel carrying every column the replication grid uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankPanelParams {
    pub n_banks: usize,
    pub n_periods: usize,
    pub first_period: i64,
    pub seed: u64,
    /// Oil series that drives the stability indicators in the long run.
    pub shock: ShockVariant,
    pub shock_loading: f64,
    pub pbvr_loading: f64,
    pub rho_range: (f64, f64),
    pub noise_sd: f64,
    pub burn_in: usize,
    pub lookback: usize,
}

impl Default for BankPanelParams {
    fn default() -> Self {
        Self {
            n_banks: 17,
            n_periods: 9,
            first_period: 2008,
            seed: 0,
            shock: ShockVariant::Returns,
            shock_loading: 0.5,
            pbvr_loading: 2.0,
            rho_range: (-0.9, -0.3),
            noise_sd: 0.1,
            burn_in: 30,
            lookback: 3,
        }
    }
}

/// Control columns in model order, and whether each is shared by all banks.
pub const BANK_CONTROLS: [(&str, bool); 8] = [
    ("nim", false),
    ("nocf", false),
    ("lr", false),
    ("ta", false),
    ("gdp", true),
    ("bc", true),
    ("rq", true),
    ("cpi", true),
];

fn ar_around<R: Rng + ?Sized>(rng: &mut R, mean: f64, phi: f64, sd: f64, len: usize) -> Vec<f64> {
    x_path(rng, XProcess::StationaryAr { phi }, sd, len)
        .into_iter()
        .map(|v| mean + v)
        .collect()
}

pub fn simulate_bank_panel(params: &BankPanelParams) -> Result<PanelDataset> {
    simulate_bank_panel_with(params, &mut replication_rng(params.seed, 0))
}

pub fn simulate_bank_panel_with<R: Rng + ?Sized>(
    params: &BankPanelParams,
    rng: &mut R,
) -> Result<PanelDataset> {
    if params.n_banks == 0 || params.n_periods < 2 {
        return Err(Error::InvalidConfig(
            "bank panel needs banks and at least two periods".into(),
        ));
    }
    if params.burn_in < 20 || params.burn_in <= params.lookback {
        return Err(Error::InvalidConfig(
            "burn-in must be at least 20 and exceed the shock lookback".into(),
        ));
    }
    let len = params.burn_in + params.n_periods;
    let keep = params.burn_in;
    let mut log_price = 60f64.ln();
    let oil: Series = (0..len)
        .map(|_| {
            log_price += 0.2 * normal(rng);
            Some(log_price.exp())
        })
        .collect();
    let wti = log_return(&oil)?;
    let shocks = shock_decompose(&oil, params.lookback)?;
    let start = params.lookback.max(1) + 1;
    let driver: Vec<f64> = match params.shock {
        ShockVariant::Returns => &wti,
        ShockVariant::Positive => &shocks.positive,
        ShockVariant::Negative => &shocks.negative,
    }
    .iter()
    .map(|v| v.unwrap_or(f64::NAN))
    .collect();

    let macro_controls: Vec<Vec<f64>> = BANK_CONTROLS
        .iter()
        .filter(|(_, shared)| *shared)
        .map(|(name, _)| match *name {
            "gdp" => ar_around(rng, 0.02, 0.5, 0.02, len),
            "bc" => ar_around(rng, 0.10, 0.6, 0.03, len),
            "rq" => ar_around(rng, -0.4, 0.9, 0.05, len),
            _ => ar_around(rng, 0.07, 0.7, 0.02, len),
        })
        .collect();

    let theta = [params.shock_loading, params.pbvr_loading];
    let mut grids: Vec<(String, VariableRole, Vec<Series>)> = vec![
        ("z1".into(), VariableRole::Dependent, vec![]),
        ("z2".into(), VariableRole::Dependent, vec![]),
        ("pbvr".into(), VariableRole::LongRunRegressor, vec![]),
    ];
    for (name, _) in BANK_CONTROLS {
        grids.push((name.into(), VariableRole::ShortRunControl, vec![]));
    }
    let trim = |v: &[f64]| -> Series {
        v[keep..]
            .iter()
            .map(|&x| x.is_finite().then_some(x))
            .collect()
    };
    for _ in 0..params.n_banks {
        let mut w = 0.0;
        let pbvr: Vec<f64> = (0..len)
            .map(|_| {
                w += 0.15 * normal(rng);
                w.exp()
            })
            .collect();
        let xs: [&[f64]; 2] = [&driver, &pbvr];
        let mut zs = Vec::new();
        for _ in 0..2 {
            let rho = draw_rho(rng, params.rho_range)?;
            let delta = [uniform(rng, (-0.2, 0.2)), uniform(rng, (-0.2, 0.2))];
            let level = uniform(rng, (8.0, 20.0));
            zs.push(ecm_path(
                rng,
                &xs,
                &theta,
                &delta,
                rho,
                level,
                params.noise_sd,
                start,
            ));
        }
        let own = [
            ar_around(rng, 0.05, 0.6, 0.01, len),
            ar_around(rng, 0.30, 0.6, 0.05, len),
            ar_around(rng, 0.25, 0.6, 0.04, len),
        ];
        let mut ln_assets = uniform(rng, (12.0, 16.0));
        let ta: Vec<f64> = (0..len)
            .map(|_| {
                ln_assets += 0.05 + 0.05 * normal(rng);
                ln_assets
            })
            .collect();
        let columns: Vec<&[f64]> = vec![
            &zs[0],
            &zs[1],
            &pbvr,
            &own[0],
            &own[1],
            &own[2],
            &ta,
            &macro_controls[0],
            &macro_controls[1],
            &macro_controls[2],
            &macro_controls[3],
        ];
        for (g, col) in grids.iter_mut().zip(columns) {
            g.2.push(trim(col));
        }
    }

    let mut data = PanelDataset::new(
        entity_names("bank", params.n_banks),
        (params.first_period..params.first_period + params.n_periods as i64).collect(),
    )?;
    let shared = |s: &Series| vec![s[keep..].to_vec(); params.n_banks];
    data.insert(
        "oil",
        VariableRole::RawInput,
        "oil price level",
        shared(&oil),
    )?;
    data.insert(
        "wti",
        VariableRole::LongRunRegressor,
        "oil price log return",
        shared(&wti),
    )?;
    data.insert(
        "wti_pos",
        VariableRole::LongRunRegressor,
        "positive oil shock",
        shared(&shocks.positive),
    )?;
    data.insert(
        "wti_neg",
        VariableRole::LongRunRegressor,
        "negative oil shock",
        shared(&shocks.negative),
    )?;
    for (name, role, grid) in grids {
        data.insert(&name, role, "simulated", grid)?;
    }
    Ok(data)
}

/// Panel diagnostics available to Monte Carlo runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PanelTest {
    PesaranCd,
    Friedman,
    Frees,
    Llc,
    Ips,
    FisherAdf,
    FisherPp,
}

impl PanelTest {
    pub const ALL: [PanelTest; 7] = [
        PanelTest::PesaranCd,
        PanelTest::Friedman,
        PanelTest::Frees,
        PanelTest::Llc,
        PanelTest::Ips,
        PanelTest::FisherAdf,
        PanelTest::FisherPp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PanelTest::PesaranCd => "pesaran_cd",
            PanelTest::Friedman => "friedman",
            PanelTest::Frees => "frees",
            PanelTest::Llc => "llc",
            PanelTest::Ips => "ips",
            PanelTest::FisherAdf => "fisher_adf",
            PanelTest::FisherPp => "fisher_pp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s.trim().to_ascii_lowercase().replace('-', "_"))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown test `{s}`")))
    }

    pub fn run(self, grid: &[Series], unit_root: &UnitRootSpec) -> Result<TestResult> {
        match self {
            PanelTest::PesaranCd => pesaran_cd(grid),
            PanelTest::Friedman => friedman_cd(grid),
            PanelTest::Frees => frees_cd(grid),
            PanelTest::Llc => llc_test(grid, unit_root),
            PanelTest::Ips => ips_test(grid, unit_root),
            PanelTest::FisherAdf => fisher_combine(grid, unit_root, FisherMode::Adf),
            PanelTest::FisherPp => fisher_combine(grid, unit_root, FisherMode::Pp),
        }
    }
}

/// A procedure repeated on freshly simulated panels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Procedure {
    /// Pooled mean group on [`simulate_ecm_panel`] draws.
    Pmg {
        params: DgpParams,
        options: EstimateOptions,
    },
    /// Mean group on [`simulate_ecm_panel`] draws.
    MeanGroup { params: DgpParams },
    /// A panel diagnostic on independent series.
    Test {
        test: PanelTest,
        process: PanelProcess,
        n_groups: usize,
        n_periods: usize,
        unit_root: UnitRootSpec,
    },
}

impl Procedure {
    pub fn name(&self) -> String {
        match self {
            Procedure::Pmg { .. } => "pmg".into(),
            Procedure::MeanGroup { .. } => "mg".into(),
            Procedure::Test { test, .. } => test.name().into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    pub rmse: f64,
    /// Standard deviation across replications over √reps.
    pub mc_std_error: Option<f64>,
    /// Share of nominal 95% intervals containing the truth.
    pub coverage: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejectionRate {
    pub level: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub procedure: String,
    pub reps: usize,
    pub successes: usize,
    pub failures: usize,
    /// `(replication, message)` for each failed replication.
    pub failure_messages: Vec<(usize, String)>,
    pub master_seed: u64,
    pub seed_policy: String,
    pub parameters: Vec<ParameterSummary>,
    pub rejection_rates: Vec<RejectionRate>,
    /// Share of successful replications whose mean adjustment speed is negative.
    pub rho_mean_negative_rate: Option<f64>,
}

impl MonteCarloReport {
    pub fn parameter(&self, name: &str) -> Option<&ParameterSummary> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn rejection_rate(&self, level: f64) -> Option<f64> {
        self.rejection_rates
            .iter()
            .find(|r| (r.level - level).abs() < 1e-12)
            .map(|r| r.rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonteCarloOptions {
    pub reps: usize,
    pub master_seed: u64,
    /// Thread count; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl MonteCarloOptions {
    /// Worker count taken from [`WORKERS_ENV`] when set.
    pub fn new(reps: usize, master_seed: u64) -> Self {
        Self {
            reps,
            master_seed,
            workers: workers_from_env(),
        }
    }
}

pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Evaluate `f(r, rng_r)` for every replication and return the results in
/// replication order.
pub fn run_replications<T, F>(reps: usize, master_seed: u64, workers: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> T + Sync + Send,
{
    let work = || {
        (0..reps)
            .into_par_iter()
            .map(|r| f(r, &mut replication_rng(master_seed, r as u64)))
            .collect::<Vec<T>>()
    };
    match workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(work),
            Err(_) => work(),
        },
        None => work(),
    }
}

enum Outcome {
    Estimate {
        theta: Vec<f64>,
        se: Vec<Option<f64>>,
        rho_mean: f64,
    },
    Test {
        p_value: f64,
    },
}

fn run_once(procedure: &Procedure, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    match procedure {
        Procedure::Pmg { params, options } => {
            let (data, _) = simulate_ecm_panel_with(params, rng)?;
            let design = build_ecm_design(&data, &params.model_spec())?;
            let fit = estimate_pmg(&design, options)?;
            Ok(Outcome::Estimate {
                theta: fit.theta(),
                se: fit.theta_se(),
                rho_mean: fit.rho_mean.estimate,
            })
        }
        Procedure::MeanGroup { params } => {
            let (data, _) = simulate_ecm_panel_with(params, rng)?;
            let design = build_ecm_design(&data, &params.model_spec())?;
            let fit = estimate_mg(&design)?;
            Ok(Outcome::Estimate {
                theta: fit.theta(),
                se: fit.long_run.iter().map(|c| c.std_error).collect(),
                rho_mean: fit.rho.estimate,
            })
        }
        Procedure::Test {
            test,
            process,
            n_groups,
            n_periods,
            unit_root,
        } => {
            let grid = simulate_panel_grid(*process, *n_groups, *n_periods, rng);
            let result = test.run(&grid, unit_root)?;
            let p_value = result.p_value.ok_or_else(|| {
                Error::InsufficientData(format!("{} returned no p-value", test.name()))
            })?;
            Ok(Outcome::Test { p_value })
        }
    }
}

fn validate_procedure(procedure: &Procedure) -> Result<()> {
    match procedure {
        Procedure::Pmg { params, .. } | Procedure::MeanGroup { params } => params.validate(),
        Procedure::Test {
            n_groups,
            n_periods,
            ..
        } => {
            if *n_groups < 2 || *n_periods < 3 {
                return Err(Error::InvalidConfig(
                    "diagnostic runs need N >= 2 and T >= 3".into(),
                ));
            }
            Ok(())
        }
    }
}

/// Repeat `procedure` on `options.reps` independent panels. Replication
/// failures are counted and recorded, not propagated.
pub fn monte_carlo(procedure: &Procedure, options: &MonteCarloOptions) -> Result<MonteCarloReport> {
    if options.reps == 0 {
        return Err(Error::InvalidConfig(
            "Monte Carlo needs at least one replication".into(),
        ));
    }
    validate_procedure(procedure)?;
    let outcomes = run_replications(
        options.reps,
        options.master_seed,
        options.workers,
        |_, rng| run_once(procedure, rng),
    );

    let mut failure_messages = Vec::new();
    let mut estimates = Vec::new();
    let mut p_values = Vec::new();
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(Outcome::Estimate {
                theta,
                se,
                rho_mean,
            }) => estimates.push((theta, se, rho_mean)),
            Ok(Outcome::Test { p_value }) => p_values.push(p_value),
            Err(e) => failure_messages.push((r, e.to_string())),
        }
    }

    let mut parameters = Vec::new();
    let mut rho_mean_negative_rate = None;
    if let Procedure::Pmg { params, .. } | Procedure::MeanGroup { params } = procedure {
        if !estimates.is_empty() {
            let reps = estimates.len() as f64;
            for (j, name) in params.regressors.iter().enumerate() {
                let truth = params.theta_true[j];
                let values: Vec<f64> = estimates.iter().map(|e| e.0[j]).collect();
                let mean = values.iter().sum::<f64>() / reps;
                let rmse = (values.iter().map(|v| (v - truth).powi(2)).sum::<f64>() / reps).sqrt();
                let mc_std_error = (values.len() > 1).then(|| {
                    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1.0);
                    (var / reps).sqrt()
                });
                let with_se: Vec<(f64, f64)> = estimates
                    .iter()
                    .filter_map(|e| e.1[j].map(|s| (e.0[j], s)))
                    .collect();
                let coverage = (!with_se.is_empty()).then(|| {
                    with_se
                        .iter()
                        .filter(|(v, s)| (v - truth).abs() <= Z_95 * s)
                        .count() as f64
                        / with_se.len() as f64
                });
                parameters.push(ParameterSummary {
                    name: name.clone(),
                    truth,
                    mean,
                    bias: mean - truth,
                    rmse,
                    mc_std_error,
                    coverage,
                });
            }
            rho_mean_negative_rate =
                Some(estimates.iter().filter(|e| e.2 < 0.0).count() as f64 / reps);
        }
    }
    let rejection_rates = if p_values.is_empty() {
        Vec::new()
    } else {
        LEVELS
            .iter()
            .map(|&level| RejectionRate {
                level,
                rate: p_values.iter().filter(|&&p| p < level).count() as f64
                    / p_values.len() as f64,
            })
            .collect()
    };
    Ok(MonteCarloReport {
        procedure: procedure.name(),
        reps: options.reps,
        successes: options.reps - failure_messages.len(),
        failures: failure_messages.len(),
        failure_messages,
        master_seed: options.master_seed,
        seed_policy: "replication r draws from ChaCha8Rng::seed_from_u64(master_seed) on stream r"
            .into(),
        parameters,
        rejection_rates,
        rho_mean_negative_rate,
    })
}
