use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn adc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adc"))
        .args(args)
        .env_remove("ADC_SEED")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn verify_feller_at_half_index() {
    let out = adc(&["verify", "--suite", "feller", "--nu", "0.5"]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.starts_with("# adc "));
    assert_eq!(data_lines(&stdout).len(), 1);
    assert!(data_lines(&stdout)[0].starts_with("feller univariate PASS"), "{stdout}");
}

#[test]
fn model1_price_table() {
    let params = fixture("model1_2006.cfg");
    let out = adc(&["price", "--model", "model1", "--params", path(&params)]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# adc "));
    let lines = data_lines(&text);
    assert_eq!(lines.len(), 31);
    let header: Vec<&str> = lines[0].split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (rf, rk) = (col("riskfree_price"), col("risky_price"));
    for line in &lines[1..] {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(v[rk] <= v[rf] && v[rf] <= 1.0);
    }
}

#[test]
fn calibrate_model1_on_noiseless_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = adc(&[
        "calibrate",
        "--model",
        "model1",
        "--fixture",
        path(&fixture("synthetic_noiseless.csv")),
        "--out-dir",
        path(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["report.txt", "params.csv", "residuals.csv", "fitted.toml"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let stderr = String::from_utf8(out.stderr).unwrap();
    let line = stderr.lines().find(|l| l.starts_with("objective = ")).unwrap();
    let objective: f64 = line.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!(objective < 1e-18, "{objective}");

    // the fitted parameters price the fixture back
    let fitted = dir.path().join("fitted.toml");
    let priced = adc(&["price", "--model", "model1", "--params", path(&fitted)]);
    assert!(priced.status.success(), "{}", String::from_utf8_lossy(&priced.stderr));
}

#[test]
fn reruns_are_byte_identical() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let out = adc(&[
            "simulate",
            "--model",
            "adc",
            "--params",
            path(&fixture("model2_2006.cfg")),
            "--config",
            path(&fixture("simulation_fast.toml")),
            "--times",
            "5",
            "--out-dir",
            path(dir.path()),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        files
    };
    let a = run();
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["hist_joint_t5.csv", "hist_r_t5.csv", "hist_s_t5.csv", "paths.csv"]);
    assert_eq!(a, run());
}

#[test]
fn header_records_seed_and_configuration() {
    let params = fixture("cir_riskfree.cfg");
    let first = |seed: &str| {
        let out = adc(&["--seed", seed, "price", "--model", "cir", "--params", path(&params), "--tenors", "1..3"]);
        assert!(out.status.success());
        String::from_utf8(out.stdout).unwrap().lines().next().unwrap().to_string()
    };
    let (a, b) = (first("1"), first("2"));
    assert!(a.starts_with("# adc ") && a.contains(" seed=1 config_hash="), "{a}");
    let hash = |h: &str| h.rsplit("config_hash=").next().unwrap().to_string();
    assert_eq!(hash(&a).len(), 64);
    assert_ne!(hash(&a), hash(&b));
    assert_eq!(a, first("1"));
}

#[test]
fn errors_are_reported_in_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "kappa = -1.0\ntheta = 0.05\nsigma = 0.1\nx0 = 0.03\n").unwrap();
    let out = adc(&["price", "--model", "cir", "--params", path(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    let last = stderr.lines().last().unwrap();
    assert!(last.starts_with("error: kind=nonpositive_parameter message="), "{last}");
}

#[test]
fn curves_from_quotes() {
    let dir = tempfile::tempdir().unwrap();
    let out = adc(&[
        "curve",
        "--quotes",
        path(&fixture("quotes_riskfree.csv")),
        "--risky-quotes",
        path(&fixture("quotes_risky.csv")),
        "--out-dir",
        path(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("spread_curve.csv")).unwrap();
    let rows = data_lines(&text);
    assert_eq!(rows.len(), 31);
    for row in &rows[1..] {
        let spread: f64 = row.split(',').last().unwrap().parse().unwrap();
        assert!(spread > 0.0 && spread < 0.01, "{row}");
    }
}
