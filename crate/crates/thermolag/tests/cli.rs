//! End-to-end tests of the `thermolag` binary: exit codes, file contracts,
//! and byte determinism across thread counts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_thermolag")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_spec(dir: &Path) -> PathBuf {
    let spec = r#"{
        "years": 2,
        "seed": 42,
        "truth": {
            "strata": [
                {"cause": "cvd", "sex": "all", "baseline_log_rate": 3.0},
                {"cause": "cvd", "sex": "female", "baseline_log_rate": 2.3},
                {"cause": "cvd", "sex": "male", "baseline_log_rate": 2.3},
                {"cause": "resp", "sex": "all", "baseline_log_rate": 2.0}
            ]
        }
    }"#;
    let path = dir.join("spec.json");
    std::fs::write(&path, spec).unwrap();
    path
}

fn simulate_series(dir: &Path) -> PathBuf {
    write_spec(dir);
    let out = run_in(
        dir,
        &["simulate", "--spec", "spec.json", "--out", "series.csv"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    dir.join("series.csv")
}

#[test]
fn no_arguments_is_a_usage_error() {
    let out = Command::new(bin()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.to_lowercase().contains("usage"), "stderr: {stderr}");
}

#[test]
fn help_exits_zero() {
    let out = Command::new(bin()).arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn missing_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["fit", "--input", "nope.csv", "--out", "r.json"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_definition_name_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    simulate_series(dir.path());
    let out = run_in(
        dir.path(),
        &[
            "detect",
            "--input",
            "series.csv",
            "--definitions",
            "HW_90Q_2d",
            "--out-dir",
            "d",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_series_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.csv"),
        "date,temp_mean,rh,pm10,holiday,deaths_cvd_all\n2006-01-01,20,80,35,0,3\n2006-01-03,20,80,35,0,3\n",
    )
    .unwrap();
    let out = run_in(
        dir.path(),
        &["detect", "--input", "bad.csv", "--out-dir", "d"],
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("2006-01-02"), "gap date named: {stderr}");
}

#[test]
fn detect_writes_21_definition_files_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    simulate_series(dir.path());
    let out = run_in(
        dir.path(),
        &["detect", "--input", "series.csv", "--out-dir", "det"],
    );
    assert!(out.status.success());
    let summary = std::fs::read_to_string(dir.path().join("det/summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 22, "header + 21 definitions");
    assert_eq!(lines[0], "name,description,mean,sd,min,median,max");
    // one flags file per definition, aligned with the series
    let hw = std::fs::read_to_string(dir.path().join("det/HW_92.5P_3d.csv")).unwrap();
    assert_eq!(hw.lines().count(), 1 + 730, "header + two years of days");
    assert!(hw.lines().nth(1).unwrap().starts_with("2006-01-01,"));
    // manifest sidecar exists
    assert!(dir.path().join("det/summary.csv.manifest.json").exists());
}

#[test]
fn fit_produces_full_panel_and_report_projects_it() {
    let dir = tempfile::tempdir().unwrap();
    simulate_series(dir.path());
    let out = run_in(
        dir.path(),
        &[
            "fit",
            "--input",
            "series.csv",
            "--panel",
            "all",
            "--variant",
            "both",
            "--out",
            "results.json",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    // 21 definitions x 4 strata x 2 variants, plus the header
    assert_eq!(csv.lines().count(), 1 + 21 * 4 * 2);
    assert!(csv
        .lines()
        .next()
        .unwrap()
        .starts_with("definition,cause,sex,variant,rr,ci_low,ci_high,significant"));

    let report = run_in(
        dir.path(),
        &["report", "--results", "results.json", "--out-dir", "figs"],
    );
    assert!(report.status.success());
    for name in [
        "fig2_overall.csv",
        "fig2_added.csv",
        "fig3_overall.csv",
        "fig3_added.csv",
        "fig4.csv",
    ] {
        assert!(
            dir.path().join("figs").join(name).exists(),
            "missing {name}"
        );
    }
    // figure rows are a projection of the flat csv rows
    let fig2 = std::fs::read_to_string(dir.path().join("figs/fig2_overall.csv")).unwrap();
    for line in fig2.lines().skip(1) {
        assert!(
            csv.lines().any(|f| f.starts_with(line)),
            "figure row missing from flat csv: {line}"
        );
    }
    // fig4 carries only cvd/resp split by sex
    let fig4 = std::fs::read_to_string(dir.path().join("figs/fig4.csv")).unwrap();
    for line in fig4.lines().skip(1) {
        let sex = line.split(',').nth(2).unwrap();
        let cause = line.split(',').nth(1).unwrap();
        assert!(matches!(cause, "cvd" | "resp"), "{line}");
        assert!(matches!(sex, "female" | "male"), "{line}");
    }
}

#[test]
fn sensitivity_ranks_grid_and_reports_base() {
    let dir = tempfile::tempdir().unwrap();
    simulate_series(dir.path());
    std::fs::write(
        dir.path().join("base.json"),
        r#"{
            "definition": "HW_90P_2d",
            "grid": {
                "df_rh": [2], "df_pm10": [2], "lag_df": [3, 4],
                "max_lag": [7, 10], "df_time_per_year": [2], "df_dos": [2]
            }
        }"#,
    )
    .unwrap();
    let out = run_in(
        dir.path(),
        &[
            "sensitivity",
            "--input",
            "series.csv",
            "--config",
            "base.json",
            "--out",
            "grid.csv",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let grid = std::fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    let lines: Vec<&str> = grid.lines().collect();
    assert_eq!(
        lines.len(),
        1 + 4 + 1,
        "header + 4 ranked points + base row"
    );
    assert!(lines[0].starts_with("rank,is_base,definition"));
    assert!(lines[5].starts_with("base,true,HW_90P_2d"));
    // qaic column is non-decreasing over ranked rows
    let qaics: Vec<f64> = lines[1..5]
        .iter()
        .map(|l| l.split(',').nth(13).unwrap().parse().unwrap())
        .collect();
    assert!(qaics.windows(2).all(|w| w[0] <= w[1]), "{qaics:?}");
}

#[test]
fn outputs_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    simulate_series(dir.path());

    let run_fit = |threads: &str| {
        let out = run_in(
            dir.path(),
            &[
                "--threads",
                threads,
                "fit",
                "--input",
                "series.csv",
                "--panel",
                "hw",
                "--variant",
                "overall",
                "--out",
                "results.json",
            ],
        );
        assert!(out.status.success());
        (
            std::fs::read(dir.path().join("results.json")).unwrap(),
            std::fs::read(dir.path().join("results.csv")).unwrap(),
        )
    };
    let first = run_fit("1");
    let second = run_fit("3");
    assert_eq!(first.0, second.0, "results.json depends on thread count");
    assert_eq!(first.1, second.1, "results.csv depends on thread count");

    // simulate is seeded: same spec, same bytes
    let a = std::fs::read(dir.path().join("series.csv")).unwrap();
    let out = run_in(
        dir.path(),
        &["simulate", "--spec", "spec.json", "--out", "series2.csv"],
    );
    assert!(out.status.success());
    let b = std::fs::read(dir.path().join("series2.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn series_round_trips_through_the_csv_contract() {
    let dir = tempfile::tempdir().unwrap();
    let path = simulate_series(dir.path());
    let text = std::fs::read_to_string(&path).unwrap();
    let series = thermolag::data::parse_series(text.as_bytes()).unwrap();
    assert_eq!(thermolag::data::to_csv_string(&series), text);
}
