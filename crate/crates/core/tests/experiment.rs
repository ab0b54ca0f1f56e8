mod common;

use common::*;
use nalgebra::DVector;
use tubal_core::experiment::*;
use tubal_core::io;
use tubal_core::measurement::{gaussian_map, VarianceMode};
use tubal_core::*;

fn small_spec() -> ExperimentSpec {
    ExperimentSpec {
        case_name: "small".into(),
        n: 4,
        n3: 3,
        r: RankSpec::Absolute(1),
        sample_rule: SampleRule { factor: 2.0 },
        sigma_list: vec![0.0, 0.05],
        lambda_list: vec![1.0, 0.1, 0.01],
        trials: 4,
        base_seed: 17,
        variance_mode: VarianceMode::OneOverM,
        solver: None,
    }
}

#[test]
fn lowrank_generation() {
    let a = generate_lowrank(4, 4, 3, 1, 9).unwrap();
    assert_eq!(a, generate_lowrank(4, 4, 3, 1, 9).unwrap());
    assert_ne!(a, generate_lowrank(4, 4, 3, 1, 10).unwrap());
    assert_eq!(tubal_rank(&a, 1e-8).unwrap(), 1);
    let full = generate_lowrank(5, 5, 2, 5, 1).unwrap();
    assert_eq!(tubal_rank(&full, 1e-8).unwrap(), 5);
    assert!(generate_lowrank(3, 4, 2, 4, 1).is_err());
    assert!(generate_lowrank(3, 4, 2, 0, 1).is_err());
}

#[test]
fn sample_rule() {
    let s = small_spec();
    assert_eq!(s.sample_count().unwrap(), 2 * 9 * 3);
    assert_eq!(ExperimentSpec::case1().sample_count().unwrap(), 210);
}

#[test]
fn grid_shape_and_trial_counts() {
    let res = run_experiment(&small_spec(), RunOptions::default()).unwrap();
    assert_eq!(res.cells.len(), 3);
    assert!(res.cells.iter().all(|row| row.len() == 2));
    for (i, row) in res.cells.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            assert_eq!(c.lambda, res.lambda_list[i]);
            assert_eq!(c.sigma, res.sigma_list[j]);
            assert_eq!(c.trials + c.failures, 4);
            assert!(c.mean_snr_db.unwrap().is_finite());
            assert!(c.std_snr_db.unwrap() >= 0.0);
            assert!(c.mean_wall_time_s.is_none());
        }
    }
    assert_eq!(res.metadata.m, 54);
    assert!(res.metadata.timestamp.is_none());
}

#[test]
fn cells_share_instances_across_noise_and_lambda() {
    // one trial: the solve in cell (lambda, sigma) equals a direct solve of
    // the instance derived from the trial seeds
    let mut spec = small_spec();
    spec.trials = 1;
    let res = run_experiment(&spec, RunOptions::default()).unwrap();
    let seeds = TrialSeeds::derive(spec.base_seed, &spec.case_name, 0);
    let map = gaussian_map(54, spec.dims(), seeds.map, VarianceMode::OneOverM).unwrap();
    let x = generate_lowrank(4, 4, 3, 1, seeds.data).unwrap();
    let y = add_noise(&map.apply(&x).unwrap(), 0.05, seeds.noise).unwrap().y;
    let sol = admm_solve(&map, &y, &SolverConfig::new(0.1)).unwrap();
    let snr = snr_db(&x, &sol.x_hat).unwrap();
    assert_eq!(res.cell(1, 1).mean_snr_db.unwrap(), snr);
}

#[test]
fn results_independent_of_worker_count() {
    let spec = small_spec();
    let one = run_experiment(&spec, RunOptions { workers: Some(1), timing: false }).unwrap();
    let three = run_experiment(&spec, RunOptions { workers: Some(3), timing: false }).unwrap();
    assert_eq!(to_json(&one).unwrap(), to_json(&three).unwrap());
    assert_eq!(to_csv(&one), to_csv(&three));
}

#[test]
fn timing_is_opt_in() {
    let mut spec = small_spec();
    spec.trials = 1;
    spec.lambda_list = vec![0.1];
    let res = run_experiment(&spec, RunOptions { workers: None, timing: true }).unwrap();
    assert!(res.cell(0, 0).mean_wall_time_s.is_some());
    assert!(res.metadata.timestamp.is_some());
}

#[test]
fn csv_layout() {
    let res = run_experiment(&small_spec(), RunOptions::default()).unwrap();
    let csv = to_csv(&res);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "lambda,sigma=0,sigma=0.05");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("1,"));
    assert!(lines[3].starts_with("0.01,"));
    let cell = lines[2].split(',').nth(1).unwrap();
    assert_eq!(cell.split('.').nth(1).unwrap().len(), 4);
}

#[test]
fn empty_grid_gives_header_only_csv() {
    let mut spec = small_spec();
    spec.lambda_list.clear();
    let res = run_experiment(&spec, RunOptions::default()).unwrap();
    assert_eq!(to_csv(&res), "lambda,sigma=0,sigma=0.05\n");
    spec.sigma_list.clear();
    let res = run_experiment(&spec, RunOptions::default()).unwrap();
    assert_eq!(to_csv(&res), "lambda\n");
}

#[test]
fn json_round_trip_and_emit() {
    let res = run_experiment(&small_spec(), RunOptions::default()).unwrap();
    let text = to_json(&res).unwrap();
    let back: ExperimentResult = serde_json::from_str(&text).unwrap();
    assert_eq!(back, res);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.json");
    emit(&res, Format::Json, &p).unwrap();
    let first = std::fs::read(&p).unwrap();
    emit(&back, Format::Json, &p).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), first);
    let c = dir.path().join("r.csv");
    emit(&res, Format::Csv, &c).unwrap();
    assert_eq!(std::fs::read_to_string(&c).unwrap(), to_csv(&res));
}

#[test]
fn spec_parsing() {
    let text = r#"{
        "case_name": "c", "n": 10, "n3": 5, "r": {"fraction": 0.1},
        "sample_rule": {"factor": 2.0}, "sigma_list": [0.01], "lambda_list": [0.1],
        "base_seed": 3
    }"#;
    let spec: ExperimentSpec = serde_json::from_str(text).unwrap();
    assert_eq!(spec.trials, 50);
    assert_eq!(spec.variance_mode, VarianceMode::OneOverM);
    assert_eq!(spec.rank().unwrap(), 1);
    assert!(spec.validate().is_ok());
    let mut bad = spec.clone();
    bad.solver = Some(SolverOverrides {
        vartheta: Some(0.5),
        ..Default::default()
    });
    assert!(bad.validate().is_err());
    assert!(run_experiment(&bad, RunOptions::default()).is_err());
}

#[test]
fn rip_campaign() {
    let id = MapSpec::ScaledIdentity { dims: [3, 3, 2], scale: 1.0 };
    let t = run_rip_campaign(&id, &[1], 10, 0, 2.0).unwrap();
    assert!(t.rows[0].estimate.delta_hat <= 1e-12);
    assert!(t.rows[0].satisfied);
    let empty = run_rip_campaign(&id, &[], 10, 0, 2.0).unwrap();
    assert!(empty.rows.is_empty());
    assert_eq!(rip_to_csv(&empty), "r,trials,delta_hat,threshold,satisfied\n");

    let g = MapSpec::Gaussian {
        m: 30,
        dims: [4, 4, 2],
        seed: 5,
        variance_mode: VarianceMode::OneOverM,
    };
    let t = run_rip_campaign(&g, &[1, 2, 3, 4], 20, 9, 3.0).unwrap();
    let d: Vec<f64> = t.rows.iter().map(|r| r.estimate.delta_hat).collect();
    assert!(d.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(rip_to_csv(&t).lines().count(), 5);
    let json = serde_json::to_string(&t).unwrap();
    assert_eq!(serde_json::from_str::<RipTable>(&json).unwrap(), t);
}

#[test]
fn binary_containers_round_trip() {
    let mut r = rng(50);
    let dir = tempfile::tempdir().unwrap();
    let x = gaussian_tensor(&mut r, (3, 4, 2));
    let p = dir.path().join("x.tns");
    io::write_tensor(&p, &x).unwrap();
    assert_eq!(io::read_tensor(&p).unwrap(), x);
    assert_eq!(io::read_tensor_any(&p).unwrap(), x);
    let j = dir.path().join("x.json");
    io::write_json(&j, &x).unwrap();
    assert_eq!(io::read_tensor_any(&j).unwrap(), x);

    let v = DVector::from_vec(vec![1.5, -2.0, 0.25]);
    let pv = dir.path().join("v.bin");
    io::write_vector(&pv, &v).unwrap();
    assert_eq!(io::read_vector(&pv).unwrap(), v);
    assert!(io::read_tensor(&pv).is_err());

    let map = gaussian_map(7, (2, 3, 2), 4, VarianceMode::Unit).unwrap();
    let pm = dir.path().join("m.bin");
    io::write_map(&pm, &map).unwrap();
    let back = io::read_map(&pm).unwrap();
    assert_eq!(back.matrix(), map.matrix());
    assert_eq!(back.dims(), map.dims());
}
