use std::path::Path;
use std::process::{Command, Output};

use decouple::analysis::{analyze_series, summarize, write_analysis, AnalysisSummary, Format};
use decouple::ingest::ColumnSpec;
use decouple_core::ensemble::AnalysisOptions;
use decouple_core::model::{simulate_trail, SimulationConfig, StrategyPair};

fn decouple(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_decouple"))
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

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = decouple(&[
            "simulate",
            "--a",
            "0.40",
            "--b",
            "0.45",
            "--length",
            "5000",
            "--seed",
            seed,
            "--out-dir",
            path(&out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        read(&out.join("trail.csv"))
    };
    let first = run("one", "7");
    assert_eq!(first, run("two", "7"));
    assert_ne!(first, run("three", "8"));
    assert!(first.starts_with("# format_version=1\n# kind=trail\n"));
    assert_eq!(first.lines().filter(|l| !l.starts_with('#')).count(), 5001);
}

#[test]
fn simulate_then_analyze_matches_in_process_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let cli_out = dir.path().join("cli");
    let lib_out = dir.path().join("lib");
    let o = decouple(&[
        "simulate",
        "--a",
        "0.4",
        "--b",
        "0.45",
        "--seed",
        "7",
        "--out-dir",
        path(&sim),
    ]);
    assert_eq!(code(&o), 0);
    let trail_file = sim.join("trail.csv");
    let o = decouple(&[
        "analyze",
        "--input",
        path(&trail_file),
        "--out-dir",
        path(&cli_out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let cfg = SimulationConfig::new(StrategyPair::new(0.4, 0.45).unwrap(), 7);
    let trail = simulate_trail(&cfg).unwrap();
    let options = AnalysisOptions::default();
    let analysis = analyze_series(&trail.returns, &options).unwrap();
    let (_, source) =
        decouple::analysis::load_returns(&trail_file, &ColumnSpec::default()).unwrap();
    let summary = summarize(&analysis, source, &options, Vec::new(), trail.returns.len());
    write_analysis(&lib_out, &analysis, &summary, Format::Csv, false).unwrap();

    for file in [
        "acf.csv",
        "scaling.csv",
        "spectrum.csv",
        "hist.csv",
        "summary.json",
    ] {
        assert_eq!(
            read(&cli_out.join(file)),
            read(&lib_out.join(file)),
            "{file} differs"
        );
    }
    let parsed: AnalysisSummary =
        serde_json::from_str(&read(&cli_out.join("summary.json"))).unwrap();
    assert_eq!(parsed, summary);
    assert_eq!(parsed.source.seed, Some(7));
    assert_eq!(
        parsed.source.config_hash.as_deref(),
        Some(cfg.config_hash().as_str())
    );
}

#[test]
fn config_file_is_overlaid_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("sim.conf");
    std::fs::write(
        &conf,
        "# model\na = 0.3\nb = 0.45\nlength = 300\nseed = 5\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = decouple(&[
        "--config",
        path(&conf),
        "simulate",
        "--a",
        "0.35",
        "--out-dir",
        path(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(&out.join("trail.csv"));
    assert!(text.contains("# a=0.35\n"));
    assert!(text.contains("# b=0.45\n"));
    assert!(text.contains("# seed=5\n"));
    assert!(text.contains("# length=300\n"));
}

#[test]
fn json_format_writes_trail_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = decouple(&[
        "--format",
        "json",
        "simulate",
        "--a",
        "0.4",
        "--b",
        "0.3",
        "--length",
        "50",
        "--seed",
        "1",
        "--out-dir",
        path(dir.path()),
    ]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&read(&dir.path().join("trail.json"))).unwrap();
    assert_eq!(v["kind"], "trail");
    assert_eq!(v["trail"]["returns"].as_array().unwrap().len(), 49);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    assert_eq!(code(&decouple(&["--help"])), 0);
    assert_eq!(code(&decouple(&["--version"])), 0);
    assert_eq!(code(&decouple(&["frobnicate"])), 1);
    assert_eq!(code(&decouple(&["simulate", "--a", "0.4"])), 1);
    assert_eq!(
        code(&decouple(&[
            "simulate",
            "--a",
            "0.7",
            "--b",
            "0.4",
            "--out-dir",
            out
        ])),
        1
    );
    assert_eq!(code(&decouple(&["sweep", "--out-dir", out])), 1);

    let missing = dir.path().join("missing.csv");
    assert_eq!(
        code(&decouple(&[
            "analyze",
            "--input",
            path(&missing),
            "--out-dir",
            out
        ])),
        2
    );
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "date,close\n2020-01-01,1\n2020-01-02,abc\n").unwrap();
    let o = decouple(&["analyze", "--input", path(&bad), "--out-dir", out]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unparseable"));

    // The price component sits near a = 0.1, under a floor of 0.3.
    let o = decouple(&[
        "simulate",
        "--a",
        "0.1",
        "--b",
        "0.4",
        "--epsilon-floor",
        "0.3",
        "--out-dir",
        out,
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

fn write_empirical(path: &Path, rows: usize) {
    // Deterministic bounded walk with a custom date format and extra columns.
    let mut text = String::from("Day,Open,Px\n");
    let mut p = 100.0f64;
    for i in 0..rows {
        let step = ((i * 7919 % 1000) as f64 / 1000.0 - 0.5) * 0.02;
        p *= step.exp();
        text.push_str(&format!("{},{:.4},{:.4}\n", us_date(i), p, p));
    }
    std::fs::write(path, text).unwrap();
}

/// `MM/DD/YYYY` for consecutive days starting 2001-01-01, 28-day months.
fn us_date(i: usize) -> String {
    let (y, rest) = (2001 + i / 336, i % 336);
    format!("{:02}/{:02}/{y}", rest / 28 + 1, rest % 28 + 1)
}

#[test]
fn empirical_ingest_with_custom_columns() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("index.csv");
    write_empirical(&csv, 3000);
    let out = dir.path().join("emp");
    let o = decouple(&[
        "analyze",
        "--input",
        path(&csv),
        "--date-column",
        "day",
        "--close-column",
        "PX",
        "--date-format",
        "%m/%d/%Y",
        "--plots",
        "--out-dir",
        path(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s: AnalysisSummary = serde_json::from_str(&read(&out.join("summary.json"))).unwrap();
    assert_eq!(s.source.kind, "empirical");
    assert_eq!(s.n_returns, 2999);
    assert_eq!(s.options.acf_max_tau, 300);
    assert_eq!(s.source.first_date.as_deref(), Some("2001-01-01"));
    for f in [
        "acf_decay.dat",
        "acf_decay.plot.json",
        "multiscaling.dat",
        "log_density.dat",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn sweep_compare_and_controls() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("sweep.conf");
    std::fs::write(
        &conf,
        "a_grid = 0.4\nb_grid = 0.25..0.45:0.2\nruns_per_cell = 4\ntrail_length = 3000\nacf_max_tau = 200\n",
    )
    .unwrap();
    let sweep = dir.path().join("sweep");
    let o = decouple(&[
        "--config",
        path(&conf),
        "--seed",
        "7",
        "sweep",
        "--threads",
        "2",
        "--timing",
        "--out-dir",
        path(&sweep),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&read(&sweep.join("manifest.json"))).unwrap();
    assert_eq!(manifest["master_seed"], 7);
    assert_eq!(manifest["cells"].as_array().unwrap().len(), 2);
    assert!(sweep.join("timing.json").exists());
    assert!(!read(&sweep.join("manifest.json")).contains("elapsed"));
    let cell = sweep.join("0.4_0.45");
    assert!(read(&cell.join("acf_band.csv")).starts_with("tau,alpha,mean,variance,std_dev,count\n"));

    let controls = dir.path().join("controls");
    let o = decouple(&[
        "--seed",
        "3",
        "controls",
        "--generator",
        "gaussian",
        "--length",
        "2000",
        "--seeds",
        "10",
        "--out-dir",
        path(&controls),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(controls.join("controls_gaussian.plot.json").exists());
    assert!(read(&controls.join("control_band.csv"))
        .starts_with("generator,q,hq_low,hq_median,hq_high\n"));

    let csv = dir.path().join("index.csv");
    write_empirical(&csv, 3000);
    let cmp = dir.path().join("cmp");
    let o = decouple(&[
        "compare",
        "--model",
        path(&cell),
        "--empirical",
        path(&csv),
        "--date-column",
        "day",
        "--close-column",
        "px",
        "--date-format",
        "%m/%d/%Y",
        "--controls",
        path(&controls.join("controls.json")),
        "--out-dir",
        path(&cmp),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&read(&cmp.join("compare.json"))).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert!(rows
        .iter()
        .any(|r| r["property"] == "excess_kurtosis" && r["model"].is_number()));
    assert!(read(&cmp.join("compare_multiscaling.dat")).contains("control median"));
}

#[test]
fn converge_reports_entropy_rate() {
    let dir = tempfile::tempdir().unwrap();
    let o = decouple(&[
        "--seed",
        "1",
        "converge",
        "--seeds",
        "4",
        "--entropy-samples",
        "10000",
        "--out-dir",
        path(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("convergence.json"))).unwrap();
    assert_eq!(v["record"]["observable"], "fast_wealth");
    assert!(v["record"]["mean_slope"].as_f64().unwrap() < 0.0);
    assert!(read(&dir.path().join("convergence.dat")).contains("# linear fit: slope = "));
}
