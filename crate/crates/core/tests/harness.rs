use dtcbf::dynamics::{AccParams, DisturbanceMode};
use dtcbf::harness::{
    csv_header, export, run_episode, run_monte_carlo, write_csv, Controller, Format, ModelConfig, RunConfig,
    TrajectoryLog, SAFETY_TOL,
};

fn parse(cell: &str) -> Option<f64> {
    (!cell.is_empty()).then(|| cell.parse().unwrap())
}

#[test]
fn csv_round_trip() {
    let cfg = RunConfig {
        horizon: 60,
        ..RunConfig::default()
    };
    let log = run_episode(&cfg, 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    write_csv(&log, &path).unwrap();

    let mut rdr = csv::Reader::from_path(&path).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, csv_header(&log));
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), log.steps.len());
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + b.abs());
    for (row, s) in rows.iter().zip(&log.steps) {
        assert_eq!(row[col("t")].parse::<usize>().unwrap(), s.t);
        assert!(close(parse(&row[col("v")]).unwrap(), s.x[0]));
        assert!(close(parse(&row[col("d")]).unwrap(), s.x[1]));
        assert!(close(parse(&row[col("B")]).unwrap(), s.b));
        assert!(close(parse(&row[col("B_rt")]).unwrap(), s.b_rt));
        assert!(close(parse(&row[col("theta_hat_2")]).unwrap(), s.theta_hat[1]));
        assert!(close(parse(&row[col("beta1")]).unwrap(), s.beta1));
        match (&s.u_safe, parse(&row[col("u_safe")])) {
            (Some(u), Some(c)) => assert!(close(c, u[0])),
            (None, None) => {}
            other => panic!("u_safe mismatch at t = {}: {other:?}", s.t),
        }
        match (&s.w, parse(&row[col("w_v")])) {
            (Some(w), Some(c)) => assert!(close(c, w[0])),
            (None, None) => {}
            other => panic!("w mismatch at t = {}: {other:?}", s.t),
        }
    }
    // the terminal record carries no input
    assert!(rows.last().unwrap()[col("u_safe")].is_empty());
}

#[test]
fn json_round_trip() {
    let cfg = RunConfig {
        horizon: 20,
        ..RunConfig::default()
    };
    let log = run_episode(&cfg, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    export(&log, Format::Json, &path).unwrap();
    let back: TrajectoryLog = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back.header, log.header);
    assert_eq!(back.steps, log.steps);
}

#[test]
fn perfect_knowledge_matches_oracle_controller() {
    let params = AccParams {
        mu_aero_bounds: [0.25, 0.25],
        v_f_bounds: [14.0, 14.0],
        ..AccParams::default()
    };
    let base = RunConfig {
        model: ModelConfig::Acc(params),
        horizon: 150,
        ..RunConfig::default()
    };
    let adaptive = run_episode(&base, 2).unwrap();
    let oracle = run_episode(
        &RunConfig {
            controller: Controller::OracleRobust,
            ..base.clone()
        },
        2,
    )
    .unwrap();
    for (a, o) in adaptive.steps.iter().zip(&oracle.steps) {
        assert_eq!(a.beta1, 0.0);
        for (x, y) in a.x.iter().zip(&o.x) {
            assert!((x - y).abs() <= 1e-9 * (1.0 + y.abs()), "t = {}", a.t);
        }
        if let (Some(ma), Some(mo)) = (a.margin, o.margin) {
            assert!((ma - mo).abs() <= 1e-6 * (1.0 + mo.abs()), "t = {}: {ma} vs {mo}", a.t);
        }
    }
}

#[test]
fn scalar_demo_is_safe_and_learns() {
    let cfg = RunConfig {
        model: ModelConfig::ScalarDemo,
        horizon: 150,
        gamma_alpha: 0.3,
        kappa: 10.0,
        seeds: (0..5).collect(),
        ..RunConfig::default()
    };
    let (report, logs) = run_monte_carlo(&cfg).unwrap();
    assert_eq!(report.seeds.len(), 5);
    for log in &logs {
        assert!(log.min_b() >= -SAFETY_TOL);
        assert!(log.steps.iter().all(|s| s.theta_true_in_set));
        assert!(log.steps.last().unwrap().beta1 < log.steps[0].beta1);
    }
}

#[test]
fn zero_disturbance_is_deterministic_across_seeds() {
    let cfg = RunConfig {
        horizon: 40,
        disturbance: DisturbanceMode::Zero,
        ..RunConfig::default()
    };
    let a = run_episode(&cfg, 0).unwrap();
    let b = run_episode(&cfg, 99).unwrap();
    assert_eq!(a.steps, b.steps);
}

#[test]
fn vertex_adversarial_run_stays_safe() {
    let cfg = RunConfig {
        disturbance: DisturbanceMode::VertexAdversarial,
        seeds: (0..4).collect(),
        ..RunConfig::default()
    };
    let (_, logs) = run_monte_carlo(&cfg).unwrap();
    assert!(logs.iter().all(|l| l.min_b() >= -SAFETY_TOL));
}
