//! Estimator properties on simulated panels.

use pmgkit::ardl_pmg::{
    build_ecm_design, concentrated_loglik, concentrated_score, estimate_pmg, group_ardl_ols,
    EstimateOptions, ModelSpec,
};
use pmgkit::diagnostics::{adf_regression, LagSelection, UnitRootSpec};
use pmgkit::panel_data::{PanelDataset, VariableRole};
use pmgkit::simulate::{
    replication_rng, run_replications, simulate_ecm_panel, simulate_ecm_panel_with,
    simulate_panel_grid, DgpParams, PanelProcess, XProcess,
};
use rand::Rng;

fn spec() -> ModelSpec {
    ModelSpec::new("z", &["x1", "x2"])
}

fn numeric_score(theta: &[f64], design: &pmgkit::ardl_pmg::EcmDesign, h: f64) -> Vec<f64> {
    (0..theta.len())
        .map(|j| {
            let mut up = theta.to_vec();
            let mut dn = theta.to_vec();
            up[j] += h;
            dn[j] -= h;
            (concentrated_loglik(&up, design).unwrap() - concentrated_loglik(&dn, design).unwrap())
                / (2.0 * h)
        })
        .collect()
}

fn perturbed_theta(r: u64) -> Vec<f64> {
    let mut rng = replication_rng(99, r);
    vec![
        0.5 + 0.3 * (rng.random::<f64>() - 0.5),
        -0.3 + 0.3 * (rng.random::<f64>() - 0.5),
    ]
}

#[test]
fn analytic_score_matches_central_differences() {
    for r in 0..20u64 {
        let params = DgpParams::new(17, 40).with_noise(0.1).with_seed(r);
        let design = build_ecm_design(&simulate_ecm_panel(&params).unwrap(), &spec()).unwrap();
        let theta = perturbed_theta(r);
        let g = concentrated_score(&theta, &design).unwrap();
        let fd = numeric_score(&theta, &design, 1e-5);
        for j in 0..2 {
            let rel = (fd[j] - g[j]).abs() / fd[j].abs().max(1e-8);
            assert!(
                rel <= 1e-6,
                "instance {r}, coordinate {j}: analytic {} vs numeric {}",
                g[j],
                fd[j]
            );
        }
    }
}

#[test]
fn central_difference_error_shrinks_quadratically() {
    let params = DgpParams::new(6, 25).with_noise(0.2).with_seed(18);
    let design = build_ecm_design(&simulate_ecm_panel(&params).unwrap(), &spec()).unwrap();
    let theta = perturbed_theta(18);
    let g = concentrated_score(&theta, &design).unwrap();
    let err = |h: f64| {
        let fd = numeric_score(&theta, &design, h);
        (0..2).map(|j| (fd[j] - g[j]).abs()).fold(0.0, f64::max)
    };
    let ratio = err(1e-3) / err(5e-4);
    assert!(
        (3.0..5.0).contains(&ratio),
        "halving h cut the error by {ratio}"
    );
}

fn shifted(data: &PanelDataset, name: &str, c: f64) -> PanelDataset {
    let mut out = data.clone();
    let grid = data
        .grid(name)
        .unwrap()
        .iter()
        .map(|row| row.iter().map(|v| v.map(|x| x + c)).collect())
        .collect();
    out.insert(name, VariableRole::LongRunRegressor, "", grid)
        .unwrap();
    out
}

#[test]
fn shifting_a_regressor_leaves_slopes_and_likelihood() {
    let params = DgpParams::new(10, 30).with_noise(0.1).with_seed(4);
    let data = simulate_ecm_panel(&params).unwrap();
    let opts = EstimateOptions::default();
    let base = estimate_pmg(&build_ecm_design(&data, &spec()).unwrap(), &opts).unwrap();
    let moved = estimate_pmg(
        &build_ecm_design(&shifted(&data, "x1", 25.0), &spec()).unwrap(),
        &opts,
    )
    .unwrap();
    assert!((base.log_likelihood - moved.log_likelihood).abs() < 1e-8);
    for (a, b) in base.theta().iter().zip(moved.theta()) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
    for (a, b) in base.groups.iter().zip(&moved.groups) {
        assert!((a.rho.estimate - b.rho.estimate).abs() < 1e-6);
        let ca = a.short_run.last().unwrap().estimate;
        let cb = b.short_run.last().unwrap().estimate;
        assert!((cb - (ca + a.rho.estimate * base.theta()[0] * 25.0)).abs() < 1e-5);
    }
}

#[test]
fn single_group_reproduces_ardl_long_run() {
    for seed in 0..10 {
        let params = DgpParams::new(1, 30).with_noise(0.2).with_seed(seed);
        let design = build_ecm_design(&simulate_ecm_panel(&params).unwrap(), &spec()).unwrap();
        let pmg = estimate_pmg(&design, &EstimateOptions::default()).unwrap();
        let ols = group_ardl_ols(&design.groups[0], &design.spec).unwrap();
        for (p, o) in pmg.theta().iter().zip(&ols.long_run) {
            assert!(
                (p - o.estimate).abs() < 1e-8,
                "seed {seed}: {p} vs {}",
                o.estimate
            );
        }
        assert!((pmg.groups[0].rho.estimate - ols.rho().estimate).abs() < 1e-8);
    }
}

#[test]
fn cointegrated_panels_have_negative_adjustment() {
    for seed in 0..10 {
        let params = DgpParams::new(17, 40).with_noise(0.1).with_seed(seed);
        let design = build_ecm_design(&simulate_ecm_panel(&params).unwrap(), &spec()).unwrap();
        let pmg = estimate_pmg(&design, &EstimateOptions::default()).unwrap();
        assert!(
            pmg.rho().iter().all(|&r| r < 0.0),
            "seed {seed}: {:?}",
            pmg.rho()
        );
    }
}

/// Share of groups whose adjustment speed is significantly negative at 5%
/// (two-sided normal critical value) when z, x1, x2 are unrelated random walks.
fn spurious_rejection_share(reps: usize, n: usize, t: usize) -> f64 {
    let shares = run_replications(reps, 2024, None, |_, rng| {
        let mut data = PanelDataset::new(
            (0..n).map(|i| format!("g{i:02}")).collect(),
            (1..=t as i64).collect(),
        )
        .unwrap();
        for (name, role) in [
            ("z", VariableRole::Dependent),
            ("x1", VariableRole::LongRunRegressor),
            ("x2", VariableRole::LongRunRegressor),
        ] {
            data.insert(
                name,
                role,
                "",
                simulate_panel_grid(PanelProcess::RandomWalk, n, t, rng),
            )
            .unwrap();
        }
        let design = build_ecm_design(&data, &spec()).unwrap();
        let fit = estimate_pmg(&design, &EstimateOptions::default()).ok()?;
        let sig = fit
            .groups
            .iter()
            .filter(|g| g.rho.t_ratio().is_some_and(|t| t < -1.96))
            .count();
        Some(sig as f64 / n as f64)
    });
    let ok: Vec<f64> = shares.into_iter().flatten().collect();
    ok.iter().sum::<f64>() / ok.len() as f64
}

#[test]
#[ignore = "normal critical values reject in about 35% of groups at any T; run with --ignored"]
fn unrelated_random_walks_rarely_show_significant_adjustment() {
    let share = spurious_rejection_share(100, 17, 40);
    println!("share of significantly negative rho_i under no cointegration: {share:.3}");
    assert!(
        1.0 - share >= 0.80,
        "rho_i significantly negative in {:.1}% of groups",
        100.0 * share
    );
}

#[test]
fn generated_differences_look_stationary() {
    let mut spec_ur = UnitRootSpec::fixed(1);
    spec_ur.lag_selection = LagSelection::InformationCriterion;
    spec_ur.max_lags = 2;
    let mut params = DgpParams::new(1, 40).with_noise(0.1);
    params.rho_range = (-0.8, -0.4);
    params.x_process = XProcess::RandomWalk;
    let passed = run_replications(200, 31, None, |_, rng| {
        let (data, _) = simulate_ecm_panel_with(&params, rng).unwrap();
        let z: Vec<Option<f64>> = data.grid("z").unwrap()[0].clone();
        let dz: Vec<Option<f64>> = z.windows(2).map(|w| Some(w[1]? - w[0]?)).collect();
        let fit = adf_regression(&dz, &spec_ur).unwrap();
        pmgkit::diagnostics::adf_pvalue(fit.tau, spec_ur.deterministic, Some(fit.nobs)) < 0.05
    });
    let rate = passed.iter().filter(|&&p| p).count() as f64 / passed.len() as f64;
    assert!(
        rate >= 0.90,
        "ADF rejects a unit root in Δz in only {:.1}% of replications",
        100.0 * rate
    );
}
