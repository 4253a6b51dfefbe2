use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn shcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shcast"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().to_owned())
        .collect()
}

/// Noiseless trajectory peaking on day 55.
fn simulated(dir: &Path) -> PathBuf {
    let out = dir.join("sim");
    let o = shcast(&[
        "simulate",
        "--beta-bar",
        "1e-5",
        "--gamma",
        "0.08",
        "--s-bar",
        "2e4",
        "--h0",
        "50",
        "--days",
        "120",
        "--out-dir",
        path(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out.join("trajectory.csv")
}

#[test]
fn simulate_geometric_decay() {
    let tmp = TempDir::new().unwrap();
    let o = shcast(&[
        "simulate",
        "--beta-bar",
        "0",
        "--gamma",
        "0.1",
        "--s-bar",
        "123",
        "--h0",
        "100",
        "--days",
        "2",
        "--out-dir",
        path(tmp.path()),
    ]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    assert_eq!(column(&csv, "H"), ["100", "90", "81"]);
    assert_eq!(column(&csv, "day"), ["0", "1", "2"]);
}

#[test]
fn simulate_one_step() {
    let tmp = TempDir::new().unwrap();
    let o = shcast(&[
        "simulate",
        "--beta-bar",
        "1e-5",
        "--gamma",
        "0.08",
        "--s-bar",
        "1e4",
        "--h0",
        "100",
        "--days",
        "1",
        "--out-dir",
        path(tmp.path()),
    ]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    let s: f64 = column(&csv, "S_bar")[1].parse().unwrap();
    let h: f64 = column(&csv, "H")[1].parse().unwrap();
    assert!((s - 9990.0).abs() < 1e-9);
    assert!((h - 102.0).abs() < 1e-9);
}

#[test]
fn simulate_divergence_exits_2_with_the_day() {
    let tmp = TempDir::new().unwrap();
    let o = shcast(&[
        "simulate",
        "--beta-bar",
        "1",
        "--gamma",
        "0.5",
        "--s-bar",
        "1e6",
        "--h0",
        "1e6",
        "--days",
        "50",
        "--out-dir",
        path(tmp.path()),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("day"));
}

#[test]
fn simulate_then_fit_recovers_the_generator() {
    let tmp = TempDir::new().unwrap();
    let traj = simulated(tmp.path());
    let out = tmp.path().join("fit");
    let o = shcast(&[
        "fit",
        "--input",
        path(&traj),
        "--schema",
        "trajectory",
        "--train-start",
        "48",
        "--train-end",
        "61",
        "--out-dir",
        path(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let printed: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("fit MAPE: "))
        .and_then(|v| v.trim_end_matches('%').parse().ok())
        .expect("fit MAPE is printed");
    assert!(printed < 0.5);

    let fit = read_json(out.join("fit.json"));
    assert_eq!(fit["method"], "sequential");
    assert_eq!(fit["gamma_estimator"], "ratio_of_means");
    assert_eq!(fit["window"]["start_date"], "2020-02-18");
    assert_eq!(fit["solver"]["termination_reason"], "tolerance");
    let beta = fit["params"]["beta_bar"].as_f64().unwrap();
    let gamma = fit["params"]["gamma"].as_f64().unwrap();
    assert!((beta / 1e-5 - 1.0).abs() < 0.01);
    assert!((gamma / 0.08 - 1.0).abs() < 1e-12);

    let series = fs::read_to_string(out.join("fit_series.csv")).unwrap();
    assert_eq!(series.lines().count(), 15);
    assert!(column(&series, "phase").iter().all(|p| p == "train"));
}

#[test]
fn joint_fit_with_census_weights() {
    let tmp = TempDir::new().unwrap();
    let traj = simulated(tmp.path());
    let out = tmp.path().join("fit");
    let o = shcast(&[
        "fit",
        "--input",
        path(&traj),
        "--schema",
        "trajectory",
        "--method",
        "joint4d",
        "--weights",
        "1,0,0",
        "--train-start",
        "40",
        "--train-end",
        "80",
        "--out-dir",
        path(&out),
    ]);
    assert!(matches!(code(&o), 0 | 2));
    let fit = read_json(out.join("fit.json"));
    assert_eq!(fit["method"], "joint4d");
    assert_eq!(fit["weights"]["c_e"], 0.0);
    assert!(fit["fit_mape"]["percent"].as_f64().unwrap() < 1.0);
}

#[test]
fn malformed_csv_exits_1_and_writes_nothing() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("bad.csv");
    fs::write(
        &input,
        "DATE,TOTAL_IN,NEW_IN,NEW_OUT\n2020-03-15,1,2,3\n2020-03-16,oops,2,3\n",
    )
    .unwrap();
    let out = tmp.path().join("out");
    let o = shcast(&["fit", "--input", path(&input), "--out-dir", path(&out)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    assert!(!out.exists());
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&shcast(&["fit"])), 1);
    assert_eq!(
        code(&shcast(&["fit", "--input", "x.csv", "--weights", "1,2"])),
        1
    );
    assert_eq!(code(&shcast(&["nope"])), 1);
    assert_eq!(code(&shcast(&["--help"])), 0);
}

#[test]
fn window_outside_data_exits_1() {
    let tmp = TempDir::new().unwrap();
    let traj = simulated(tmp.path());
    let o = shcast(&[
        "fit",
        "--input",
        path(&traj),
        "--schema",
        "trajectory",
        "--train-start",
        "100",
        "--train-end",
        "500",
        "--out-dir",
        path(tmp.path()),
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn non_converged_fit_exits_2_with_artifacts() {
    let tmp = TempDir::new().unwrap();
    let traj = simulated(tmp.path());
    let out = tmp.path().join("fit");
    let o = shcast(&[
        "fit",
        "--input",
        path(&traj),
        "--schema",
        "trajectory",
        "--train-start",
        "0",
        "--train-end",
        "13",
        "--out-dir",
        path(&out),
    ]);
    assert_eq!(code(&o), 2);
    let fit = read_json(out.join("fit.json"));
    assert_eq!(fit["solver"]["converged"], false);
    assert!(out.join("fit_series.csv").exists());
}

#[test]
fn forecast_past_the_data_marks_beyond_rows() {
    let tmp = TempDir::new().unwrap();
    let traj = simulated(tmp.path());
    let out = tmp.path().join("fc");
    let o = shcast(&[
        "forecast",
        "--input",
        path(&traj),
        "--schema",
        "trajectory",
        "--train-start",
        "48",
        "--train-end",
        "61",
        "--horizon-end",
        "2020-05-10",
        "--out-dir",
        path(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("forecast_series.csv")).unwrap();
    let phases = column(&csv, "phase");
    let observed = column(&csv, "H_observed");
    assert_eq!(phases.iter().filter(|p| *p == "train").count(), 14);
    assert_eq!(phases.iter().filter(|p| *p == "test").count(), 59);
    assert_eq!(phases.iter().filter(|p| *p == "beyond").count(), 10);
    for (p, h) in phases.iter().zip(&observed) {
        assert_eq!(p == "beyond", h.is_empty());
    }
    let json = read_json(out.join("forecast.json"));
    assert!(json["test_mape"]["percent"].as_f64().unwrap() < 0.5);
    assert_eq!(json["horizon_end"], "2020-05-10");
}

#[test]
fn forecast_horizon_inside_window_exits_1() {
    let tmp = TempDir::new().unwrap();
    let traj = simulated(tmp.path());
    let o = shcast(&[
        "forecast",
        "--input",
        path(&traj),
        "--schema",
        "trajectory",
        "--train-start",
        "48",
        "--train-end",
        "61",
        "--horizon-end",
        "55",
        "--out-dir",
        path(tmp.path()),
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn backtest_sweep_writes_every_window() {
    let tmp = TempDir::new().unwrap();
    let traj = simulated(tmp.path());
    let out = tmp.path().join("bt");
    let o = shcast(&[
        "backtest",
        "--input",
        path(&traj),
        "--schema",
        "trajectory",
        "--window-length",
        "14",
        "--stride",
        "7",
        "--out-dir",
        path(&out),
    ]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(out.join("backtest.csv")).unwrap();
    assert!(csv.starts_with(
        "window_start,window_end,beta_bar,gamma,s_bar_0,h_0,phi_star,train_mape,test_mape,converged\n"
    ));
    // 121 days: floor((121 - 14 - 1) / 7) + 1
    assert_eq!(csv.lines().count() - 1, 16);
    let json = read_json(out.join("backtest.json"));
    assert_eq!(json["records"].as_array().unwrap().len(), 16);
}

#[test]
fn backtest_stride_past_the_series_exits_1() {
    let tmp = TempDir::new().unwrap();
    let traj = simulated(tmp.path());
    let out = tmp.path().join("bt");
    let o = shcast(&[
        "backtest",
        "--input",
        path(&traj),
        "--schema",
        "trajectory",
        "--stride",
        "500",
        "--out-dir",
        path(&out),
    ]);
    assert_eq!(code(&o), 1);
    assert!(!out.exists());
}

fn contour_cells(csv: &str) -> (Vec<f64>, Vec<f64>, Vec<Vec<Option<f64>>>) {
    let mut lines = csv.lines();
    let s_axis: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .skip(1)
        .map(|v| v.parse().unwrap())
        .collect();
    let mut betas = Vec::new();
    let mut rows = Vec::new();
    for line in lines {
        let mut cells = line.split(',');
        betas.push(cells.next().unwrap().parse().unwrap());
        rows.push(cells.map(|c| c.parse().ok()).collect());
    }
    (betas, s_axis, rows)
}

#[test]
fn contour_two_by_two() {
    let tmp = TempDir::new().unwrap();
    let traj = simulated(tmp.path());
    let o = shcast(&[
        "contour",
        "--input",
        path(&traj),
        "--schema",
        "trajectory",
        "--train-start",
        "48",
        "--train-end",
        "61",
        "--grid-beta",
        "5e-6,1.5e-5,2",
        "--grid-s",
        "1e4,3e4,2",
        "--out-dir",
        path(tmp.path()),
    ]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(tmp.path().join("contour.csv")).unwrap();
    let (betas, s_axis, rows) = contour_cells(&csv);
    assert_eq!(betas, [5e-6, 1.5e-5]);
    assert_eq!(s_axis, [1e4, 3e4]);
    assert_eq!(rows.len(), 2);
    assert!(rows
        .iter()
        .all(|r| r.len() == 2 && r.iter().all(Option::is_some)));
}

#[test]
fn contour_minimum_sits_near_the_fit() {
    let tmp = TempDir::new().unwrap();
    let traj = simulated(tmp.path());
    let base = [
        "--input",
        path(&traj),
        "--schema",
        "trajectory",
        "--train-start",
        "48",
        "--train-end",
        "61",
    ];
    let fit_dir = tmp.path().join("fit");
    let o = shcast(&[&["fit"], &base[..], &["--out-dir", path(&fit_dir)]].concat());
    assert_eq!(code(&o), 0);
    let fit = read_json(fit_dir.join("fit.json"));
    let beta = fit["params"]["beta_bar"].as_f64().unwrap();
    let s0 = fit["initial"]["s_bar"].as_f64().unwrap();

    let o = shcast(&[&["contour"], &base[..], &["--out-dir", path(tmp.path())]].concat());
    assert_eq!(code(&o), 0);
    let (betas, s_axis, rows) =
        contour_cells(&fs::read_to_string(tmp.path().join("contour.csv")).unwrap());
    let mut best = (f64::INFINITY, 0, 0);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if let Some(v) = v {
                if *v < best.0 {
                    best = (*v, i, j);
                }
            }
        }
    }
    let db = betas[1] - betas[0];
    let ds = s_axis[1] - s_axis[0];
    assert!(
        (betas[best.1] - beta).abs() <= 2.0 * db,
        "beta {} vs {beta}",
        betas[best.1]
    );
    assert!(
        (s_axis[best.2] - s0).abs() <= 2.0 * ds,
        "s {} vs {s0}",
        s_axis[best.2]
    );
}

#[test]
fn contour_in_the_overflow_region_is_masked_with_a_warning() {
    let tmp = TempDir::new().unwrap();
    let traj = simulated(tmp.path());
    let o = shcast(&[
        "contour",
        "--input",
        path(&traj),
        "--schema",
        "trajectory",
        "--train-start",
        "48",
        "--train-end",
        "61",
        "--grid-beta",
        "1e2,2e2,3",
        "--grid-s",
        "1e300,1.5e300,3",
        "--out-dir",
        path(tmp.path()),
    ]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let (_, _, rows) = contour_cells(&fs::read_to_string(tmp.path().join("contour.csv")).unwrap());
    assert!(rows.iter().flatten().all(Option::is_none));
}

#[test]
fn outputs_are_deterministic_and_inputs_untouched() {
    let tmp = TempDir::new().unwrap();
    let traj = simulated(tmp.path());
    let before = fs::read(&traj).unwrap();
    let run = |dir: &str| {
        let out = tmp.path().join(dir);
        let o = shcast(&[
            "forecast",
            "--input",
            path(&traj),
            "--schema",
            "trajectory",
            "--train-start",
            "30",
            "--train-end",
            "50",
            "--method",
            "joint4d",
            "--out-dir",
            path(&out),
        ]);
        assert!(matches!(code(&o), 0 | 2));
        (
            fs::read(out.join("forecast.json")).unwrap(),
            fs::read(out.join("forecast_series.csv")).unwrap(),
            o.stdout,
        )
    };
    assert_eq!(run("a"), run("b"));
    assert_eq!(fs::read(&traj).unwrap(), before);
}

#[test]
fn belgian_file_runs_through_the_whole_pipeline() {
    // Synthetic two-province file in the Belgian layout.
    let tmp = TempDir::new().unwrap();
    let traj = fs::read_to_string(simulated(tmp.path())).unwrap();
    let h = column(&traj, "H");
    let e = column(&traj, "E");
    let mut text = String::from("DATE,PROVINCE,TOTAL_IN,NEW_IN,NEW_OUT\n");
    let start = chrono::NaiveDate::from_ymd_opt(2020, 3, 15).unwrap();
    for t in 0..h.len() {
        let date = start + chrono::Days::new(t as u64);
        let ht: f64 = h[t].parse().unwrap();
        let et: f64 = e[t].parse().unwrap();
        let (ha, ea) = ((ht * 0.4).round(), (et * 0.4).round());
        text.push_str(&format!("{date},A,{ha},{ea},0\n"));
        text.push_str(&format!(
            "{date},B,{},{},0\n",
            ht.round() - ha,
            et.round() - ea
        ));
    }
    let input = tmp.path().join("be.csv");
    fs::write(&input, text).unwrap();

    let out = tmp.path().join("fc");
    let o = shcast(&[
        "forecast",
        "--input",
        path(&input),
        "--data-start",
        "2020-03-20",
        "--train-start",
        "2020-05-01",
        "--train-end",
        "2020-05-14",
        "--out-dir",
        path(&out),
    ]);
    assert!(
        matches!(code(&o), 0 | 2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let json = read_json(out.join("forecast.json"));
    assert_eq!(json["fit"]["window"]["t_i"], 42);
    assert!(json["test_mape"]["percent"].as_f64().unwrap() < 10.0);
    let csv = fs::read_to_string(out.join("forecast_series.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("2020-05-01,"));
}
