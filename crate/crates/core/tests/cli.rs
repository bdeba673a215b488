use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_auditbench");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn cli(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("AUDITBENCH_SEED")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const DATASET: &str = r#"
[dataset]
kind = "benchmark"
n_rows = 1000
n_numeric_features = 4
n_categorical_features = 1
group_balance = 0.4
base_rate_privileged = 0.5
base_rate_underprivileged = 0.35
signal_strength = 2.0
seed = 9

[model]
class = "logistic_regression"
"#;

fn config(head: &str, grids: &str) -> String {
    format!("{head}\n{DATASET}\n{grids}")
}

fn trivial() -> String {
    config(
        "scenario = \"B\"\nrepetitions = 1\nbootstrap_B = 200\nmaster_seed = 3",
        "",
    )
}

fn small_grid() -> String {
    config(
        "scenario = \"B\"\nrepetitions = 2\nbootstrap_B = 30\nmaster_seed = 8",
        "[grids]\nsubsample = [0.5]\nmissingness = [0.2]\nfeatures = [1]",
    )
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn validate_accepts_shipped_configs() {
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let out = cli(&["validate", p(&path)]);
            assert_eq!(
                code(&out),
                0,
                "{}: {}",
                path.display(),
                String::from_utf8_lossy(&out.stderr)
            );
            assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "OK");
        }
    }
}

#[test]
fn validate_cites_compatibility_matrix() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "a.toml",
        &config(
            "scenario = \"A\"",
            "[grids]\nepsilon = [1.0]\nsynthesizers = [{ kind = \"gaussian_copula\" }]",
        ),
    );
    let out = cli(&["validate", p(&cfg)]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("compatibility matrix"), "{err}");
    assert!(err.contains("synthesizers"), "{err}");
}

#[test]
fn validate_reports_every_violation() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        &config(
            "scenario = \"B\"\nrepetitions = 0\nbootstrap_B = 0",
            "[grids]\nepsilon = [1.0]",
        ),
    );
    let out = cli(&["validate", p(&cfg)]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    for needle in ["repetitions", "bootstrap_B", "epsilon"] {
        assert!(err.contains(needle), "{needle} missing from {err}");
    }
}

#[test]
fn validate_exit_codes_for_io_and_parse_errors() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        code(&cli(&["validate", p(&dir.path().join("nope.toml"))])),
        3
    );
    let garbage = write(dir.path(), "g.toml", "scenario = = 3");
    assert_eq!(code(&cli(&["validate", p(&garbage)])), 2);
    let unknown = write(
        dir.path(),
        "u.toml",
        &config("scenario = \"B\"", "[grids]\nsubsamples = [0.5]"),
    );
    assert_eq!(code(&cli(&["validate", p(&unknown)])), 2);
}

#[test]
fn validate_agrees_with_run() {
    let dir = TempDir::new().unwrap();
    let corpus = [
        trivial(),
        config(
            "scenario = \"A\"\nrepetitions = 1\nbootstrap_B = 10",
            "[grids]\nepsilon = [1.0]",
        ),
        config("scenario = \"A\"\nrepetitions = 1\nbootstrap_B = 10", ""),
        config(
            "scenario = \"C\"\nrepetitions = 1\nbootstrap_B = 10",
            "[grids]\nepsilon = [1.0]",
        ),
        config(
            "scenario = \"B\"\nrepetitions = 1\nbootstrap_B = 10",
            "[grids]\nfeatures = [99]",
        ),
        config(
            "scenario = \"B\"\nrepetitions = 1\nbootstrap_B = 10\nlevel = 1.5",
            "",
        ),
        config(
            "scenario = \"B\"\nrepetitions = 1\nbootstrap_B = 10",
            "[grids]\nmissingness = [0.9]",
        ),
    ];
    for (i, text) in corpus.iter().enumerate() {
        let cfg = write(dir.path(), &format!("c{i}.toml"), text);
        let v = code(&cli(&["validate", p(&cfg)]));
        let r = code(&cli(&[
            "run",
            p(&cfg),
            "--out",
            p(&dir.path().join(format!("o{i}"))),
        ]));
        assert_eq!(
            v == 0,
            r == 0 || r == 4,
            "config {i}: validate {v}, run {r}"
        );
        if v != 0 {
            assert_eq!(v, r, "config {i}");
        }
    }
}

#[test]
fn gen_data_line_count_idempotence_and_base_rates() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", &trivial());
    let out1 = dir.path().join("one");
    let out2 = dir.path().join("two");
    let a = cli(&["gen-data", p(&cfg), "--out", p(&out1)]);
    assert_eq!(code(&a), 0);
    assert_eq!(code(&cli(&["gen-data", p(&cfg), "--out", p(&out2)])), 0);
    let text = fs::read_to_string(out1.join("dataset.csv")).unwrap();
    assert_eq!(text.lines().count(), 1001);
    assert_eq!(text, fs::read_to_string(out2.join("dataset.csv")).unwrap());

    // independent tally: plain line splitting, group is column 5 and y column 6
    let mut tally = std::collections::BTreeMap::<String, (usize, usize)>::new();
    for line in text.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let e = tally.entry(cells[5].to_string()).or_default();
        e.0 += 1;
        e.1 += usize::from(cells[6] == "1");
    }
    let stdout = String::from_utf8(a.stdout).unwrap();
    assert!(stdout.contains("rows: 1000"), "{stdout}");
    for (group, (n, pos)) in tally {
        let expected = format!("base_rate {group}: {:.6} ({n} rows)", pos as f64 / n as f64);
        assert!(stdout.contains(&expected), "{expected} not in {stdout}");
    }
}

#[test]
fn gen_data_needs_benchmark_dataset() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", &csv_config("data.csv"));
    assert_eq!(
        code(&cli(&["gen-data", p(&cfg), "--out", p(dir.path())])),
        2
    );
}

fn summary_rows(dir: &Path) -> Vec<csv::StringRecord> {
    let mut rdr = csv::Reader::from_path(dir.join("summary.csv")).unwrap();
    rdr.records().map(|r| r.unwrap()).collect()
}

#[test]
fn trivial_run_reproduces_baseline() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", &trivial());
    let out = dir.path().join("out");
    assert_eq!(code(&cli(&["run", p(&cfg), "--out", p(&out)])), 0);
    let rows = summary_rows(&out);
    assert_eq!(rows.len(), 3);
    for r in rows {
        assert_eq!(&r[9], "accurate");
        assert_eq!(&r[7], &r[8]);
        let overlap: f64 = r[10].parse().unwrap();
        // the pooled values are the baseline values themselves
        assert!(overlap >= 0.95, "{overlap}");
        assert_eq!(&r[12], "0");
    }
    let prov = fs::read_to_string(out.join("provenance.txt")).unwrap();
    assert!(prov.contains("master_seed: 3"));
}

#[test]
fn results_are_identical_across_job_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", &small_grid());
    let o1 = dir.path().join("j1");
    let o8 = dir.path().join("j8");
    assert_eq!(
        code(&cli(&["run", p(&cfg), "--out", p(&o1), "--jobs", "1"])),
        0
    );
    assert_eq!(
        code(&cli(&["run", p(&cfg), "--out", p(&o8), "--jobs", "8"])),
        0
    );
    let r1 = fs::read(o1.join("results.csv")).unwrap();
    assert_eq!(r1, fs::read(o8.join("results.csv")).unwrap());
    assert_eq!(
        fs::read(o1.join("summary.csv")).unwrap(),
        fs::read(o8.join("summary.csv")).unwrap()
    );
    let header = String::from_utf8(r1)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert_eq!(
        header,
        "scenario,experiment,condition,repetition,metric,disparity_mode,value,kind,skipped,skip_reason"
    );
}

#[test]
fn golden_summary_matches() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cfg = configs().join("benchmark.toml");
    assert_eq!(
        code(&cli(&["run", p(&cfg), "--out", p(&out), "--jobs", "4"])),
        0
    );
    let got = fs::read_to_string(out.join("summary.csv")).unwrap();
    let want = fs::read_to_string(configs().join("golden/benchmark_summary.csv")).unwrap();
    assert_eq!(got, want);
}

#[test]
fn seed_flag_beats_environment() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", &small_grid());
    let run = |name: &str, env: Option<&str>, flag: Option<&str>| {
        let out = dir.path().join(name);
        let mut cmd = Command::new(BIN);
        cmd.args(["run", p(&cfg), "--out", p(&out)])
            .env_remove("AUDITBENCH_SEED");
        if let Some(e) = env {
            cmd.env("AUDITBENCH_SEED", e);
        }
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        assert!(cmd.status().unwrap().success());
        fs::read(out.join("results.csv")).unwrap()
    };
    let config_seed = run("a", None, None);
    let env_seed = run("b", Some("100"), None);
    let flag_seed = run("c", None, Some("100"));
    let both = run("d", Some("5"), Some("100"));
    assert_ne!(config_seed, env_seed);
    assert_eq!(env_seed, flag_seed);
    assert_eq!(flag_seed, both);
    let prov = fs::read_to_string(dir.path().join("d/provenance.txt")).unwrap();
    assert!(prov.contains("master_seed: 100"));
}

fn csv_config(path: &str) -> String {
    format!(
        r#"scenario = "B"
repetitions = 2
bootstrap_B = 20

[dataset]
kind = "csv"
path = "{path}"

[dataset.schema]
feature_columns = [{{ name = "x", kind = "numeric" }}]
group_column = "g"
privileged_value = "p"
underprivileged_value = "u"
target_column = "y"

[model]
class = "logistic_regression"
"#
    )
}

/// Underprivileged rows never have a positive label, so both
/// true-positive-rate metrics are undefined for every repetition.
fn no_positive_underprivileged(dir: &Path) {
    let mut text = String::from("x,g,y\n");
    for i in 0..400 {
        let x = f64::from(i % 40) / 10.0 - 2.0;
        let (g, y) = if i % 3 == 0 {
            ("u", 0)
        } else {
            ("p", u8::from(x > 0.0))
        };
        text.push_str(&format!("{x},{g},{y}\n"));
    }
    fs::create_dir_all(dir.join("data")).unwrap();
    fs::write(dir.join("data/table.csv"), text).unwrap();
}

#[test]
fn csv_dataset_resolves_relative_to_config_and_degenerate_run_exits_4() {
    let dir = TempDir::new().unwrap();
    no_positive_underprivileged(dir.path());
    let cfg = write(dir.path(), "c.toml", &csv_config("data/table.csv"));
    assert_eq!(code(&cli(&["validate", p(&cfg)])), 0);
    let out = dir.path().join("out");
    let run = cli(&["run", p(&cfg), "--out", p(&out)]);
    assert_eq!(code(&run), 4, "{}", String::from_utf8_lossy(&run.stderr));
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(results
        .lines()
        .any(|l| l.contains(",EOD,") && l.contains(",true,")));
}

#[test]
fn missing_csv_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", &csv_config("absent.csv"));
    assert_eq!(code(&cli(&["validate", p(&cfg)])), 3);
    assert_eq!(
        code(&cli(&["run", p(&cfg), "--out", p(&dir.path().join("o"))])),
        3
    );
}

#[test]
fn report_formats() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", &small_grid());
    let out = dir.path().join("out");
    assert_eq!(code(&cli(&["run", p(&cfg), "--out", p(&out)])), 0);

    assert_eq!(code(&cli(&["report", p(&out), "--format", "md"])), 0);
    let md = fs::read_to_string(out.join("report.md")).unwrap();
    for exp in ["## subsample", "## missingness", "## features_weakest"] {
        assert!(md.contains(exp), "{md}");
    }
    assert!(
        md.contains("| scenario | disparity_mode | metric | 0.5 |"),
        "{md}"
    );

    assert_eq!(code(&cli(&["report", p(&out), "--format", "csv"])), 0);
    let csv_text = fs::read_to_string(out.join("report_subsample.csv")).unwrap();
    assert_eq!(
        csv_text.lines().next().unwrap(),
        "scenario,disparity_mode,metric,0.5"
    );
    assert_eq!(csv_text.lines().count(), 4);

    let plot = fs::read_to_string(out.join("plot_data_missingness.csv")).unwrap();
    let mut lines = plot.lines();
    assert_eq!(
        lines.next().unwrap(),
        "condition,metric,value,baseline_lower,baseline_upper"
    );
    // 2 repetitions x 30 resamples x 3 metrics
    assert_eq!(lines.count(), 180);
}

#[test]
fn report_on_empty_dir_exits_3() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&cli(&["report", p(dir.path())])), 3);
}
