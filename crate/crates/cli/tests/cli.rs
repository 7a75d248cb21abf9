//! End-to-end checks of the installed binary: exit codes, help coverage,
//! config merging, determinism, and output files.

use std::path::Path;
use std::process::{Command, Output};

fn kmatch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kmatch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf8 stderr")
}

fn data_path(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
        .display()
        .to_string()
}

#[test]
fn help_enumerates_every_flag_of_every_subcommand() {
    let top = kmatch(&["--help"]);
    assert_eq!(top.status.code(), Some(0));
    let text = stdout(&top);
    for sub in ["simulate", "sweep", "analyze", "misspec", "overlap", "kernel-check"] {
        assert!(text.contains(sub), "top help misses {sub}:\n{text}");
    }

    let expected: [(&str, &[&str]); 6] = [
        (
            "simulate",
            &[
                "--scenario", "--n", "--reps", "--boot", "--bandwidth", "--kernel",
                "--estimand", "--seed", "--threads", "--format", "--config", "--out",
            ],
        ),
        (
            "sweep",
            &[
                "--scenario", "--ns", "--bandwidths", "--kernels", "--estimand",
                "--reps", "--seed", "--threads", "--config", "--out",
            ],
        ),
        (
            "analyze",
            &[
                "--data", "--bandwidth", "--boot", "--ps-columns", "--summary-out",
                "--seed", "--threads", "--format", "--config", "--out",
            ],
        ),
        (
            "misspec",
            &[
                "--n", "--reps", "--ks", "--ps-form", "--bandwidth", "--boot",
                "--estimand", "--seed", "--threads", "--format", "--config", "--out",
            ],
        ),
        (
            "overlap",
            &[
                "--n", "--reps", "--ks", "--scales", "--bandwidth", "--boot",
                "--estimand", "--pool", "--pool-rows", "--seed", "--threads",
                "--format", "--config", "--out",
            ],
        ),
        ("kernel-check", &["--kernel", "--config", "--out"]),
    ];
    for (sub, flags) in expected {
        let out = kmatch(&[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub} --help failed");
        let text = stdout(&out);
        for flag in flags {
            assert!(text.contains(flag), "{sub} --help misses {flag}:\n{text}");
        }
    }
}

#[test]
fn usage_errors_exit_one_with_one_line_messages() {
    let bad_flag = kmatch(&["simulate", "--frobnicate"]);
    assert_eq!(bad_flag.status.code(), Some(1));
    let msg = stderr(&bad_flag);
    assert!(msg.contains("--frobnicate"), "{msg}");
    assert_eq!(msg.trim_end().lines().count(), 1, "not one line: {msg}");

    let no_sub = kmatch(&[]);
    assert_eq!(no_sub.status.code(), Some(1));

    let bad_sub = kmatch(&["simulte"]);
    assert_eq!(bad_sub.status.code(), Some(1));

    let no_seed = kmatch(&["simulate", "--scenario", "s1", "--n", "100", "--reps", "2"]);
    assert_eq!(no_seed.status.code(), Some(1));
    assert!(stderr(&no_seed).contains("--seed"), "{}", stderr(&no_seed));

    let bad_scenario = kmatch(&["simulate", "--scenario", "s9", "--seed", "1"]);
    assert_eq!(bad_scenario.status.code(), Some(1));
    assert!(stderr(&bad_scenario).contains("s9"), "{}", stderr(&bad_scenario));
}

#[test]
fn data_errors_exit_two() {
    let missing = kmatch(&["analyze", "--data", "/no/such/file.csv", "--boot", "0"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(stderr(&missing).contains("file.csv"), "{}", stderr(&missing));

    let bad_pool = kmatch(&[
        "overlap", "--pool", "/no/such/pool.csv", "--n", "80", "--reps", "2", "--ks", "1",
        "--seed", "4",
    ]);
    assert_eq!(bad_pool.status.code(), Some(2));
}

#[test]
fn version_exits_zero() {
    let out = kmatch(&["--version"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("kmatch"));
}

#[test]
fn simulate_bytes_do_not_depend_on_thread_count() {
    fn args(threads: &'static str) -> [&'static str; 13] {
        [
            "simulate", "--scenario", "s2", "--n", "120", "--reps", "6", "--boot", "24",
            "--seed", "11", "--threads", threads,
        ]
    }
    let one = kmatch(&args("1"));
    let four = kmatch(&args("4"));
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(four.status.code(), Some(0));
    assert_eq!(stdout(&one), stdout(&four));
    assert!(stdout(&one).starts_with("scenario,n,reps,bootstrap_b,method,"));
    assert_eq!(stdout(&one).lines().count(), 7, "six methods plus header");
}

#[test]
fn emitted_numbers_parse_back_to_their_cells() {
    let out = kmatch(&[
        "simulate", "--scenario", "s1", "--n", "100", "--reps", "4", "--boot", "0",
        "--seed", "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    for line in stdout(&out).lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        for cell in &cells[6..9] {
            let value: f64 = cell.parse().expect("numeric cell");
            assert_eq!(&kmatch::report::format_sig(value, 6), cell);
        }
    }
}

#[test]
fn config_supplies_values_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.ini");
    std::fs::write(
        &cfg,
        "# experiment defaults\nscenario = s1\nn = 100\nreps = 3\nboot = 0\nseed = 21\n",
    )
    .unwrap();
    let cfg = cfg.display().to_string();

    let from_file = kmatch(&["simulate", "--config", &cfg]);
    assert_eq!(from_file.status.code(), Some(0), "{}", stderr(&from_file));
    assert!(stdout(&from_file).lines().nth(1).unwrap().starts_with("s1,100,3,0,"));

    let overridden = kmatch(&["simulate", "--config", &cfg, "--reps", "5"]);
    assert!(stdout(&overridden).lines().nth(1).unwrap().starts_with("s1,100,5,0,"));

    // The same seed through either channel gives the same bytes.
    let by_flag = kmatch(&[
        "simulate", "--scenario", "s1", "--n", "100", "--reps", "3", "--boot", "0",
        "--seed", "21",
    ]);
    assert_eq!(stdout(&from_file), stdout(&by_flag));
}

#[test]
fn method_panel_comes_from_dotted_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("panel.ini");
    std::fs::write(
        &cfg,
        "scenario = s1\nn = 100\nreps = 2\nboot = 0\nseed = 2\n\
         method.1.kind = kernel\nmethod.1.label = Smoothed\nmethod.1.h = 0.08\n\
         method.2.kind = ipw\n",
    )
    .unwrap();
    let out = kmatch(&["simulate", "--config", &cfg.display().to_string()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let body = stdout(&out);
    let lines: Vec<&str> = body.lines().collect();
    assert_eq!(lines.len(), 3, "two methods plus header:\n{body}");
    assert!(lines[1].contains(",Smoothed,"));
    assert!(lines[2].contains(",ipw,"));
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("broken.ini");
    std::fs::write(&cfg, "scenario s1\n").unwrap();
    let out = kmatch(&["simulate", "--config", &cfg.display().to_string()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("broken.ini:1"), "{}", stderr(&out));
}

#[test]
fn analyze_emits_the_panel_and_summary() {
    let data = data_path("nsw_dw_experimental.csv");
    let dir = tempfile::tempdir().unwrap();
    let summary = dir.path().join("balance.csv");
    let out = kmatch(&[
        "analyze", "--data", &data, "--boot", "0", "--summary-out",
        &summary.display().to_string(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let body = stdout(&out);
    let lines: Vec<&str> = body.lines().collect();
    assert_eq!(lines[0], "method,estimand,point,se,ci_lo,ci_hi");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("Proposed,att,1864.35,"), "{body}");
    assert!(lines[4].starts_with("IPW,att,1754.55,"), "{body}");
    assert!(lines[5].starts_with("DR,att,1718.88,"), "{body}");

    let balance = std::fs::read_to_string(&summary).unwrap();
    assert!(balance.starts_with("variable,treated_mean,treated_sd,"));
    assert_eq!(balance.lines().count(), 11, "ten covariates plus header");
    assert!(balance.contains("Age,25.8162,7.15502,"), "{balance}");

    let text = kmatch(&["analyze", "--data", &data, "--boot", "0", "--format", "text"]);
    assert!(stdout(&text).contains("Estimate (SE)"));
}

#[test]
fn analyze_ps_columns_change_score_methods_only() {
    let data = data_path("nsw_dw_experimental.csv");
    let full = kmatch(&["analyze", "--data", &data, "--boot", "0"]);
    let narrow = kmatch(&[
        "analyze", "--data", &data, "--boot", "0", "--ps-columns", "age,educ,re74,re75",
    ]);
    assert_eq!(narrow.status.code(), Some(0), "{}", stderr(&narrow));
    let full_lines: Vec<String> = stdout(&full).lines().map(String::from).collect();
    let narrow_lines: Vec<String> = stdout(&narrow).lines().map(String::from).collect();
    assert_ne!(full_lines[1], narrow_lines[1], "kernel row should move");
    assert_eq!(full_lines[2], narrow_lines[2], "covariate matching row should not");

    let bad = kmatch(&["analyze", "--data", &data, "--boot", "0", "--ps-columns", "wage"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn sweep_emits_long_format_csv() {
    let out = kmatch(&[
        "sweep", "--scenario", "s1", "--ns", "100,150", "--bandwidths", "0.1",
        "--reps", "3", "--seed", "13",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let body = stdout(&out);
    let lines: Vec<&str> = body.lines().collect();
    assert_eq!(lines[0], "n,h,kernel,estimand,bias,rmse,failures");
    assert_eq!(lines.len(), 3, "two cells plus header:\n{body}");
    assert!(lines[1].starts_with("100,0.1,gaussian,ate,"));
    assert!(lines[2].starts_with("150,0.1,gaussian,ate,"));
}

#[test]
fn misspec_reports_both_score_designs() {
    let out = kmatch(&[
        "misspec", "--n", "100", "--reps", "3", "--ks", "1", "--seed", "17",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let body = stdout(&out);
    assert_eq!(body.lines().filter(|l| l.starts_with("scenario,")).count(), 1);
    assert!(body.contains("misspec(linear),"), "{body}");
    assert!(body.contains("misspec(interactions),"), "{body}");
    // Three methods per design: kernel + one NN-Cov + one NN-PS.
    assert_eq!(body.lines().count(), 7, "{body}");
}

#[test]
fn overlap_reports_both_scales_and_takes_a_pool_file() {
    let dir = tempfile::tempdir().unwrap();
    let pool = dir.path().join("pool.csv");
    // Header plus a tiny two-column pool.
    let mut rows = String::from("v1,v2\n");
    for i in 0..40 {
        let x = (i as f64) / 10.0 - 2.0;
        rows.push_str(&format!("{x},{}\n", -x * 0.5));
    }
    std::fs::write(&pool, rows).unwrap();

    let dir_cfg = dir.path().join("coef.ini");
    std::fs::write(
        &dir_cfg,
        "overlap.beta = 0.8,-0.4\noverlap.delta0 = 1,0.5,0.25\n\
         overlap.delta1 = 3,0.5,0.25\noverlap.att = 2\n",
    )
    .unwrap();

    let out = kmatch(&[
        "overlap", "--pool", &pool.display().to_string(), "--config",
        &dir_cfg.display().to_string(), "--n", "60", "--reps", "2", "--ks", "1",
        "--seed", "29",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let body = stdout(&out);
    assert!(body.contains("overlap(scale=1),"), "{body}");
    assert!(body.contains("overlap(scale=0.2),"), "{body}");

    // Mismatched coefficient widths are caught before any run.
    let short = kmatch(&[
        "overlap", "--pool", &pool.display().to_string(), "--n", "60", "--reps", "2",
        "--ks", "1", "--seed", "29",
    ]);
    assert_eq!(short.status.code(), Some(1));
    assert!(stderr(&short).contains("overlap.beta"), "{}", stderr(&short));
}

#[test]
fn out_files_land_under_the_env_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_kmatch"))
        .args(["kernel-check", "--kernel", "gaussian", "--out", "moments/report.txt"])
        .env("KMATCH_OUT_DIR", dir.path())
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let written = std::fs::read_to_string(dir.path().join("moments/report.txt")).unwrap();
    assert!(written.starts_with("kernel gaussian\n"));

    let direct = kmatch(&["kernel-check", "--kernel", "gaussian"]);
    assert_eq!(stdout(&direct), written, "file and stdout forms agree");
}
