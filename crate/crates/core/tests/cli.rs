mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use common::*;
use pfcreduce::cli::{load_matrix, main_with_args, write_matrix};
use pfcreduce::matalg::Mat;
use pfcreduce::Error;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn pfcreduce(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_pfcreduce"))
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn report(path: &Path) -> toml::Table {
    std::fs::read_to_string(path).unwrap().parse().unwrap()
}

fn matrix(v: &toml::Value) -> Dense {
    v.as_array()
        .unwrap()
        .iter()
        .map(|r| {
            r.as_array()
                .unwrap()
                .iter()
                .map(|x| x.as_float().unwrap())
                .collect()
        })
        .collect()
}

fn floats(v: &toml::Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_float().unwrap())
        .collect()
}

struct Fixture {
    dir: tempfile::TempDir,
    z: Dense,
}

impl Fixture {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

/// Noisy growth-curve data with a known C(Z), written as y.csv/x.csv.
fn fixture(noise: f64) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = rng(70);
    let (n, q) = (60, 5);
    let z = random_orthonormal(&mut rng, q, 1);
    let x = gaussian(&mut rng, n, 2);
    let gamma = vec![vec![2.0], vec![-1.0]];
    let clean = noiseless_response(&center_columns(&x), &gamma, &z, &[1.0, 0.0, 2.0, -1.0, 0.5]);
    let y = add(&clean, &scale(&gaussian(&mut rng, n, q), noise));
    write_csv(&dir.path().join("y.csv"), &y);
    write_csv(&dir.path().join("x.csv"), &x);
    Fixture { dir, z }
}

#[test]
fn load_matrix_examples() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.csv");
    std::fs::write(&p, "1,2\n3,4\n").unwrap();
    assert_eq!(
        load_matrix(&p, false).unwrap().to_rows(),
        vec![vec![1.0, 2.0], vec![3.0, 4.0]]
    );
    assert_eq!(load_matrix(&p, true).unwrap().rows(), 1);
    std::fs::write(&p, "1,2\n3\n").unwrap();
    match load_matrix(&p, false) {
        Err(e @ Error::Parse { line: 2, .. }) => assert!(e.to_string().contains("line 2")),
        other => panic!("unexpected {other:?}"),
    }
    std::fs::write(&p, "").unwrap();
    assert!(matches!(load_matrix(&p, false), Err(Error::EmptyFile(_))));
    assert!(matches!(
        load_matrix(&dir.path().join("missing.csv"), false),
        Err(Error::Io { .. })
    ));
}

#[test]
fn written_matrices_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.csv");
    let mut rng = rng(71);
    let mut rows = gaussian(&mut rng, 7, 4);
    rows[0][0] = 0.1;
    rows[1][1] = -1.0 / 3.0;
    rows[2][2] = 1e-300;
    rows[3][3] = 123_456_789.123_456_78;
    let m = to_mat(&rows);
    write_matrix(&p, &m).unwrap();
    let back = load_matrix(&p, false).unwrap();
    let bits = |m: &Mat| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&m), bits(&back));
}

#[test]
fn report_matrices_round_trip_through_load_matrix() {
    let f = fixture(0.3);
    let out = f.path("fit.txt");
    let r = pfcreduce(&[
        "fit",
        "--model",
        "pfc-iso",
        "--y",
        s(&f.path("y.csv")),
        "--x",
        s(&f.path("x.csv")),
        "--d",
        "1",
        "--out",
        s(&out),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let basis = matrix(&report(&out)["result"]["basis"]);

    // the same numbers as CSV parse back to identical bits
    let text = std::fs::read_to_string(&out).unwrap();
    let start = text.find("basis = [").unwrap();
    let rows: String = text[start..]
        .lines()
        .skip(1)
        .take_while(|l| l.trim() != "]")
        .map(|l| {
            l.trim()
                .trim_start_matches('[')
                .trim_end_matches(',')
                .trim_end_matches(']')
                .to_string()
                + "\n"
        })
        .collect();
    let csv = f.path("basis.csv");
    std::fs::write(&csv, rows).unwrap();
    let reread = load_matrix(&csv, false).unwrap();
    assert_eq!(reread.to_rows(), basis);
}

#[test]
fn fit_pc_on_noiseless_data_recovers_truth() {
    let f = fixture(0.0);
    let out = f.path("pc.txt");
    // PC uses Y only; noiseless Y varies only along C(Z)
    let r = pfcreduce(&[
        "fit",
        "--model",
        "pc",
        "--y",
        s(&f.path("y.csv")),
        "--d",
        "1",
        "--out",
        s(&out),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let t = report(&out);
    assert!(distance(&matrix(&t["result"]["basis"]), &f.z) <= 1e-6);
    assert_eq!(t["config"]["model"].as_str(), Some("pc"));
    assert_eq!(t["result"]["selected_indices"].as_array().unwrap().len(), 1);
}

#[test]
fn fit_reports_contain_model_fields() {
    let f = fixture(0.3);
    let (y, x) = (f.path("y.csv"), f.path("x.csv"));
    let out = f.path("iso.txt");
    let r = pfcreduce(&[
        "fit",
        "--model",
        "pfc-iso",
        "--y",
        s(&y),
        "--x",
        s(&x),
        "--d",
        "1",
        "--out",
        s(&out),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let t = report(&out);
    let res = &t["result"];
    assert!(res["sigma2_hat"].as_float().unwrap() > 0.0);
    assert!(res["log_lik"].as_float().unwrap().is_finite());
    assert_eq!(matrix(&res["gamma_hat"]).len(), 2);
    assert_eq!(floats(&res["mu_hat"]).len(), 5);
    assert_eq!(res["x_centered"].as_bool(), Some(true));
    assert!(distance(&matrix(&res["basis"]), &f.z) < 0.1);

    for (model, selection) in [
        ("structured13", "exhaustive"),
        ("structured13", "sequential"),
        ("structured10", "exhaustive"),
    ] {
        let out = f.path(&format!("{model}-{selection}.txt"));
        let r = pfcreduce(&[
            "fit",
            "--model",
            model,
            "--y",
            s(&y),
            "--x",
            s(&x),
            "--d",
            "1",
            "--source",
            "sigma_fit",
            "--selection",
            selection,
            "--out",
            s(&out),
        ]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        let t = report(&out);
        let res = &t["result"];
        assert_eq!(floats(&res["omega2_hat"]).len(), 1);
        assert_eq!(floats(&res["omega0_2_hat"]).len(), 4);
        assert_eq!(res["source"].as_str(), Some("sigma_fit"));
        assert_eq!(t["config"]["selection"].as_str(), Some(selection));
        assert!(res["log_lik"].as_float().unwrap().is_finite());
    }
}

#[test]
fn structured10_runs_without_design() {
    let f = fixture(0.3);
    let out = f.path("s10.txt");
    let r = pfcreduce(&[
        "fit",
        "--model",
        "structured10",
        "--y",
        s(&f.path("y.csv")),
        "--d",
        "2",
        "--out",
        s(&out),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let sel = report(&out)["result"]["selected_indices"].clone();
    assert_eq!(
        sel.as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_integer().unwrap())
            .collect::<Vec<_>>(),
        vec![1, 2]
    );
}

#[test]
fn identical_config_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.cfg");
    std::fs::write(
        &cfg,
        "# small run\nn = 40\nq = 4\nreplicates = 50\nseed = 9\nsigma0_grid = 0.5, 2\n",
    )
    .unwrap();
    for cmd in ["verify", "recover", "simulate"] {
        let out = dir.path().join(format!("{cmd}.txt"));
        assert_eq!(
            pfcreduce(&[cmd, "--config", s(&cfg), "--out", s(&out)]).code,
            0
        );
        let first = std::fs::read(&out).unwrap();
        assert_eq!(
            pfcreduce(&[cmd, "--config", s(&cfg), "--out", s(&out)]).code,
            0
        );
        assert_eq!(first, std::fs::read(&out).unwrap(), "{cmd}");
        let _: toml::Table = String::from_utf8(first).unwrap().parse().unwrap();
    }
}

#[test]
fn flags_override_config_and_are_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.cfg");
    std::fs::write(&cfg, "n = 40\nq = 4\nreplicates = 20\nseed = 9\n").unwrap();
    let out = dir.path().join("v.txt");
    let r = pfcreduce(&[
        "verify",
        "--config",
        s(&cfg),
        "--seed",
        "11",
        "--sigma0",
        "2.5",
        "--out",
        s(&out),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let t = report(&out);
    let c = &t["config"];
    assert_eq!(c["seed"].as_str(), Some("11"));
    assert_eq!(c["n"].as_integer(), Some(40));
    assert_eq!(c["sigma0"].as_float(), Some(2.5));
    assert_eq!(c["replicates"].as_integer(), Some(20));
    assert!(t.contains_key("expectations"));
}

#[test]
fn simulate_writes_data_that_fit_can_read() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.txt");
    let r = pfcreduce(&[
        "simulate",
        "--n",
        "500",
        "--q",
        "4",
        "--seed",
        "3",
        "--out",
        s(&out),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let t = report(&out);
    let y = PathBuf::from(t["result"]["y"].as_str().unwrap());
    let x = PathBuf::from(t["result"]["x"].as_str().unwrap());
    assert_eq!(load_matrix(&y, false).unwrap().shape(), (500, 4));
    let z = matrix(&t["population"]["z"]);

    let fit_out = dir.path().join("fit.txt");
    let r = pfcreduce(&[
        "fit",
        "--model",
        "pfc-iso",
        "--y",
        s(&y),
        "--x",
        s(&x),
        "--d",
        "1",
        "--out",
        s(&fit_out),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let fitted = report(&fit_out);
    assert!(distance(&matrix(&fitted["result"]["basis"]), &z) < 0.3);
    // the written design is already centered
    assert_eq!(fitted["result"]["x_centered"].as_bool(), Some(false));
}

#[test]
fn inputs_are_not_modified() {
    let f = fixture(0.3);
    let (y, x) = (f.path("y.csv"), f.path("x.csv"));
    let before = (std::fs::read(&y).unwrap(), std::fs::read(&x).unwrap());
    let out = f.path("o.txt");
    let r = pfcreduce(&[
        "fit",
        "--model",
        "structured13",
        "--y",
        s(&y),
        "--x",
        s(&x),
        "--d",
        "1",
        "--out",
        s(&out),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(
        before,
        (std::fs::read(&y).unwrap(), std::fs::read(&x).unwrap())
    );
}

fn error_line(r: &Run) -> &str {
    let lines: Vec<&str> = r.stderr.lines().collect();
    assert_eq!(lines.len(), 1, "{}", r.stderr);
    assert!(
        lines[0].starts_with(&format!("error: code={} kind=", r.code)),
        "{}",
        lines[0]
    );
    lines[0]
}

#[test]
fn exit_codes_by_error_class() {
    let f = fixture(0.3);
    let y = f.path("y.csv");
    let out = f.path("e.txt");

    // usage
    for args in [
        vec!["fit", "--model", "pc", "--y", s(&y), "--out", s(&out)],
        vec![
            "fit",
            "--model",
            "pfc-iso",
            "--y",
            s(&y),
            "--d",
            "1",
            "--out",
            s(&out),
        ],
        vec![
            "fit",
            "--model",
            "nope",
            "--y",
            s(&y),
            "--d",
            "1",
            "--out",
            s(&out),
        ],
        vec!["fit", "--bogus"],
        vec!["frobnicate"],
        vec!["verify", "--d", "3", "--out", s(&out)],
    ] {
        let r = pfcreduce(&args);
        assert_eq!(r.code, 2, "{args:?}: {}", r.stderr);
        error_line(&r);
    }

    // data
    let ragged = f.path("ragged.csv");
    std::fs::write(&ragged, "1,2,3\n4,5\n").unwrap();
    let r = pfcreduce(&[
        "fit",
        "--model",
        "pc",
        "--y",
        s(&ragged),
        "--d",
        "1",
        "--out",
        s(&out),
    ]);
    assert_eq!(r.code, 3);
    assert!(error_line(&r).contains("line 2"));
    let r = pfcreduce(&[
        "fit",
        "--model",
        "pc",
        "--y",
        s(&f.path("absent.csv")),
        "--d",
        "1",
        "--out",
        s(&out),
    ]);
    assert_eq!(r.code, 3);
    error_line(&r);

    // numerical: too few residual degrees of freedom for model13
    let mut rng = rng(72);
    write_csv(&f.path("ys.csv"), &gaussian(&mut rng, 7, 5));
    write_csv(&f.path("xs.csv"), &gaussian(&mut rng, 7, 2));
    let r = pfcreduce(&[
        "fit",
        "--model",
        "structured13",
        "--y",
        s(&f.path("ys.csv")),
        "--x",
        s(&f.path("xs.csv")),
        "--d",
        "1",
        "--out",
        s(&out),
    ]);
    assert_eq!(r.code, 4);
    assert!(error_line(&r).contains("kind=not_positive_definite"));

    // help and version succeed
    let r = pfcreduce(&["--help"]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("fit") && r.stdout.contains("recover"));
    assert_eq!(pfcreduce(&["--version"]).code, 0);
}

#[test]
fn library_entry_point_matches_binary() {
    let f = fixture(0.3);
    let out = f.path("lib.txt");
    let code = main_with_args([
        "pfcreduce",
        "fit",
        "--model",
        "pc",
        "--y",
        s(&f.path("y.csv")),
        "--d",
        "2",
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 0);
    let bin_out = f.path("bin.txt");
    let r = pfcreduce(&[
        "fit",
        "--model",
        "pc",
        "--y",
        s(&f.path("y.csv")),
        "--d",
        "2",
        "--out",
        s(&bin_out),
    ]);
    assert_eq!(r.code, 0);
    let a = std::fs::read_to_string(&out).unwrap().replace(s(&out), "");
    let b = std::fs::read_to_string(&bin_out)
        .unwrap()
        .replace(s(&bin_out), "");
    assert_eq!(a, b);
}

#[test]
fn header_and_centering_flags() {
    let f = fixture(0.3);
    let y = std::fs::read_to_string(f.path("y.csv")).unwrap();
    let x = std::fs::read_to_string(f.path("x.csv")).unwrap();
    std::fs::write(f.path("yh.csv"), format!("a,b,c,d,e\n{y}")).unwrap();
    std::fs::write(f.path("xh.csv"), format!("u,v\n{x}")).unwrap();
    let out = f.path("h.txt");
    let r = pfcreduce(&[
        "fit",
        "--model",
        "pfc-iso",
        "--y",
        s(&f.path("yh.csv")),
        "--x",
        s(&f.path("xh.csv")),
        "--header",
        "--d",
        "1",
        "--out",
        s(&out),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(report(&out)["config"]["header"].as_bool(), Some(true));

    // uncentered X with centering disabled is rejected
    let r = pfcreduce(&[
        "fit",
        "--model",
        "pfc-iso",
        "--y",
        s(&f.path("y.csv")),
        "--x",
        s(&f.path("x.csv")),
        "--center-x",
        "false",
        "--d",
        "1",
        "--out",
        s(&out),
    ]);
    assert_ne!(r.code, 0);
    error_line(&r);
}

#[test]
fn fit_settings_from_config_file() {
    let f = fixture(0.3);
    let cfg = f.path("fit.cfg");
    std::fs::write(
        &cfg,
        format!(
            "model = structured13\ny = {}\nx = {}\nd = 1\nsource = sigma_res\nselection = sequential\n",
            s(&f.path("y.csv")),
            s(&f.path("x.csv"))
        ),
    )
    .unwrap();
    let out = f.path("c.txt");
    let r = pfcreduce(&[
        "fit",
        "--config",
        s(&cfg),
        "--source",
        "sigma_hat",
        "--out",
        s(&out),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let t = report(&out);
    assert_eq!(t["config"]["source"].as_str(), Some("sigma_hat"));
    assert_eq!(t["config"]["selection"].as_str(), Some("sequential"));

    std::fs::write(&cfg, "colour = blue\n").unwrap();
    let r = pfcreduce(&["fit", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(r.code, 2);
    assert!(error_line(&r).contains("colour"));
}
