use super::*;
use approx::assert_abs_diff_eq;

fn config(design: DesignKind, n: usize, p: usize, k: usize) -> ScenarioConfig {
    ScenarioConfig {
        n,
        p,
        k,
        sigma: 1.0,
        epsilon: 0.05,
        design,
        pair: PairKind::Identity,
        signal_magnitude: 5.0,
        replications: 6,
        master_seed: 42,
        solve_estimators: true,
        bound_tolerance: 1e-8,
        solver: SolverConfig::default(),
        re: ReConfig::default(),
    }
}

fn csv_bytes(trials: &[TrialResult]) -> Vec<u8> {
    let mut out = Vec::new();
    write_trials_csv(trials, &mut out).unwrap();
    out
}

#[test]
fn orthonormal_design_has_scaled_identity_gram() {
    for (n, p) in [(4, 4), (20, 5)] {
        let x = generate_design(&DesignKind::OrthonormalScaled, n, p, 1).unwrap();
        let target = Matrix::identity(p, p) * n as f64;
        assert!(crate::linalg::max_abs(&(x.gram() - target)) <= 1e-9);
    }
    assert!(generate_design(&DesignKind::OrthonormalScaled, 3, 4, 1).is_err());
}

#[test]
fn ar1_at_zero_is_the_iid_path() {
    let iid = generate_design(&DesignKind::GaussianIid, 7, 5, 3).unwrap();
    let ar = generate_design(&DesignKind::Ar1 { rho: 0.0 }, 7, 5, 3).unwrap();
    assert_eq!(iid.entries(), ar.entries());
}

#[test]
fn ar1_columns_are_correlated() {
    let x = generate_design(&DesignKind::Ar1 { rho: 0.8 }, 4000, 3, 5).unwrap();
    let g = x.gram() / 4000.0;
    assert_abs_diff_eq!(g[(0, 1)], 0.8, epsilon = 0.05);
    assert_abs_diff_eq!(g[(0, 2)], 0.64, epsilon = 0.05);
    assert!(generate_design(&DesignKind::Ar1 { rho: 1.0 }, 5, 3, 5).is_err());
}

#[test]
fn designs_are_normalized_and_seeded() {
    let a = generate_design(&DesignKind::GaussianIid, 9, 4, 11).unwrap();
    let b = generate_design(&DesignKind::GaussianIid, 9, 4, 11).unwrap();
    let c = generate_design(&DesignKind::GaussianIid, 9, 4, 12).unwrap();
    assert_eq!(a.entries(), b.entries());
    assert_ne!(a.entries(), c.entries());
    assert!(a.normalization_error() < 1e-12);
}

#[test]
fn truth_has_requested_sparsity() {
    let p_matrix = Matrix::from_fn(6, 6, |i, j| if i == j { 2.0 } else if j == i + 1 { 0.5 } else { 0.0 });
    let (beta, gamma) = generate_truth(&p_matrix, 6, 3, 4.0, 9).unwrap();
    assert_eq!(gamma.iter().filter(|g| **g != 0.0).count(), 3);
    assert!(gamma.iter().all(|g| *g == 0.0 || g.abs() == 4.0));
    assert_abs_diff_eq!(&p_matrix * &beta, gamma.clone(), epsilon = 1e-12);
    assert_eq!(generate_truth(&p_matrix, 6, 3, 4.0, 9).unwrap().1, gamma);

    let (beta, gamma) = generate_truth(&p_matrix, 6, 0, 4.0, 9).unwrap();
    assert_eq!(beta, Vector::zeros(6));
    assert_eq!(gamma, Vector::zeros(6));
    assert!(generate_truth(&p_matrix, 6, 7, 4.0, 9).is_err());
}

#[test]
fn bound_arithmetic() {
    let b = OracleBounds::new(1.0, 1.0, 2, 50, 8, 0.05);
    let log_term = 160.0_f64.ln();
    assert_abs_diff_eq!(b.gds_a, 144.0 * log_term, epsilon = 1e-9);
    assert_abs_diff_eq!(b.gds_a, 730.8, epsilon = 0.05);
    assert_abs_diff_eq!(b.gl_a, 256.0 * log_term, epsilon = 1e-9);
    let root = (log_term / 50.0).sqrt();
    assert_abs_diff_eq!(b.gds_l1, 36.0 * 2.0_f64.sqrt() * root, epsilon = 1e-12);
    assert_abs_diff_eq!(b.gl_l1, 64.0 * 2.0_f64.sqrt() * root, epsilon = 1e-12);
}

#[test]
fn orthonormal_identity_scenario_uses_exact_constant() {
    let scenario = PreparedScenario::new(&config(DesignKind::OrthonormalScaled, 16, 16, 2)).unwrap();
    assert_eq!(scenario.c_used, 1.0);
    assert!(scenario.c_exact);
    assert_eq!(scenario.bounds, OracleBounds::new(1.0, 1.0, 2, 16, 16, 0.05));
}

#[test]
fn sampled_constant_is_flagged() {
    let scenario = PreparedScenario::new(&config(DesignKind::GaussianIid, 30, 8, 2)).unwrap();
    assert!(!scenario.c_exact);
    assert!(scenario.c_used > 0.0);
}

#[test]
fn zero_signal_with_tiny_noise() {
    let mut cfg = config(DesignKind::GaussianIid, 20, 6, 0);
    cfg.sigma = 1e-8;
    let out = run_monte_carlo(&cfg, Some(1)).unwrap();
    for t in &out.trials {
        assert!(t.failure.is_none(), "{:?}", t.failure);
        assert!(t.covered_s && t.covered_s_half);
        for err in [t.err_a_gds, t.err_l1p_gds, t.err_a_gl, t.err_l1p_gl] {
            assert!(err <= 1e-10);
        }
        assert!(t.holds.unwrap().all());
    }
    assert_eq!(out.summary.bounds.gds_a, 0.0);
    assert_eq!(out.summary.simultaneous_bound_rate, Some(1.0));
}

#[test]
fn coverage_only_mode_skips_estimators() {
    let mut cfg = config(DesignKind::GaussianIid, 20, 30, 2);
    cfg.solve_estimators = false;
    cfg.re.c = Some(0.5);
    let out = run_monte_carlo(&cfg, Some(1)).unwrap();
    assert!(out.trials.iter().all(|t| t.holds.is_none() && t.failure.is_none()));
    assert!(out.summary.inequality_rates.is_none());
    assert!(out.summary.errors.is_none());
    let text = String::from_utf8(csv_bytes(&out.trials)).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with("NA,NA,NA,NA,ok"));
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let cfg = config(DesignKind::GaussianIid, 20, 10, 2);
    let one = run_monte_carlo(&cfg, Some(1)).unwrap();
    let again = run_monte_carlo(&cfg, Some(1)).unwrap();
    let two = run_monte_carlo(&cfg, Some(2)).unwrap();
    assert_eq!(csv_bytes(&one.trials), csv_bytes(&again.trials));
    assert_eq!(csv_bytes(&one.trials), csv_bytes(&two.trials));
    let header = String::from_utf8(csv_bytes(&one.trials)).unwrap();
    assert_eq!(header.lines().next().unwrap(), TRIAL_COLUMNS.join(","));
}

#[test]
fn failed_trials_leave_the_denominators() {
    let scenario = PreparedScenario::new(&config(DesignKind::OrthonormalScaled, 8, 4, 1)).unwrap();
    let mut trials: Vec<TrialResult> = (0..4).map(|i| run_trial(&scenario, i)).collect();
    trials[0].holds = None;
    trials[0].failure = Some("solver did not converge".into());
    for t in &mut trials[1..] {
        t.holds = Some(InequalityFlags {
            gds_a: true,
            gds_l1: true,
            gl_a: true,
            gl_l1: false,
        });
    }
    let summary = summarize(&scenario, &trials, 1, 0.0);
    assert_eq!(summary.trials_failed, 1);
    assert_eq!(summary.simultaneous_bound_rate, Some(0.0));
    assert_eq!(summary.inequality_rates.unwrap().gds_a, 1.0);
    let text = String::from_utf8(csv_bytes(&trials)).unwrap();
    assert!(text.lines().nth(1).unwrap().contains("failed: solver did not converge"));
}

#[test]
fn config_round_trips_through_toml() {
    let mut cfg = config(DesignKind::Ar1 { rho: 0.3 }, 20, 4, 1);
    cfg.pair = PairKind::User {
        p: vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 2.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]],
        a: None,
    };
    let text = cfg.to_toml_string();
    assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), cfg);
}

#[test]
fn minimal_toml_uses_defaults() {
    let cfg = ScenarioConfig::from_toml_str(
        "n = 50\np = 100\nk = 5\nsigma = 1.0\nepsilon = 0.1\nreplications = 10\nmaster_seed = 1\n\n[design]\nkind = \"gaussian_iid\"\n",
    )
    .unwrap();
    assert_eq!(cfg.pair, PairKind::Identity);
    assert_eq!(cfg.signal_magnitude, 5.0);
    assert!(cfg.solve_estimators);
    assert_eq!(cfg.solver, SolverConfig::default());
}

#[test]
fn invalid_configs_are_rejected() {
    let base = "n = 10\np = 20\nk = 2\nsigma = 1.0\nepsilon = 0.1\nreplications = 3\nmaster_seed = 1\n";
    let cases = [
        format!("{base}[design]\nkind = \"orthonormal_scaled\"\n"),
        format!("{base}typo = 1\n[design]\nkind = \"gaussian_iid\"\n"),
        format!("{}[design]\nkind = \"gaussian_iid\"\n", base.replace("epsilon = 0.1", "epsilon = 1.5")),
        format!("{}[design]\nkind = \"gaussian_iid\"\n", base.replace("k = 2", "k = 21")),
        format!("{base}[design]\nkind = \"ar1\"\nrho = -1.0\n"),
        format!("{base}[design]\nkind = \"gaussian_iid\"\n[pair]\nkind = \"user\"\np = [[1.0]]\n"),
    ];
    for text in cases {
        assert!(
            matches!(ScenarioConfig::from_toml_str(&text), Err(Error::InvalidConfig(_))),
            "accepted: {text}"
        );
    }
}

#[test]
fn substreams_are_independent_and_reproducible() {
    let a = substream(1, Purpose::Noise, 0).next_u64();
    assert_eq!(a, substream(1, Purpose::Noise, 0).next_u64());
    assert_ne!(a, substream(1, Purpose::Noise, 1).next_u64());
    assert_ne!(a, substream(1, Purpose::Design, 0).next_u64());
    assert_ne!(a, substream(2, Purpose::Noise, 0).next_u64());
}
