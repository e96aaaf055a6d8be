use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn polygreen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polygreen"))
        .args(args)
        .env("POLYGREEN_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn fundsol_laplacian_in_three_dimensions() {
    let o = polygreen(&["fundsol", "--m", "1", "--n", "3", "--r", "0.5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let v: f64 = row[1].parse().unwrap();
    assert!((v - 0.159155).abs() < 1e-6, "{v}");
}

#[test]
fn fundsol_derivative_column() {
    let o = polygreen(&["fundsol", "--m", "1", "--n", "3", "--r", "0.5", "--alpha", "1,0,0"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.starts_with("r,value,d1_0_0"));
    // ∂_1 (1/4π|z|) = -z_1/(4π|z|³)
    let d: f64 = text.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    let exact = -0.5 / (4.0 * std::f64::consts::PI * 0.125);
    assert!((d - exact).abs() < 1e-12 * exact.abs());
}

#[test]
fn fundsol_rejects_bad_dimensions() {
    let o = polygreen(&["fundsol", "--m", "1", "--n", "4", "--r", "0.5"]);
    assert_eq!(code(&o), 2);
    assert!(o.stdout.is_empty());
}

#[test]
fn out_of_range_spec_is_a_config_error() {
    let o = polygreen(&["verify-green", "--m", "2", "--n", "3", "--levels", "1/8,1/12", "--count", "10", "--spec", "Gr1:2:0"]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("specs[0]") && err.contains("0 ≤ i, j ≤ λ = 1"), "{err}");
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"domain": {"kind": "ball", "radius": 1.0, "dim": 2}, "m": 2, "n": 2,
            "levels": [0.05, 0.025], "plan": {"count": "many", "seed": 1}}"#,
    )
    .unwrap();
    let o = polygreen(&["verify-green", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("plan.count"), "{}", stderr(&o));

    let o = polygreen(&["verify-green", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_polygreen"))
        .args(["counterexample", "--m", "2", "--n", "3"])
        .env("POLYGREEN_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn counterexample_passes() {
    let o = polygreen(&["counterexample", "--m", "2", "--n", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("bounded: PASS") && text.contains("unbounded: PASS"), "{text}");
    assert_eq!(code(&polygreen(&["counterexample", "--m", "2", "--n", "2"])), 2);
}

fn estimate_args<'a>(cmd: &'a str, out: &'a str) -> Vec<&'a str> {
    vec![
        cmd, "--m", "2", "--n", "2", "--domain", "square", "--levels", "1/32,1/64", "--count", "40", "--seed", "3",
        "--out", out,
    ]
}

#[test]
fn estimate_runs_are_byte_identical() {
    for cmd in ["verify-green", "verify-regular"] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for dir in [&a, &b] {
            let o = polygreen(&estimate_args(cmd, dir.path().to_str().unwrap()));
            assert_eq!(code(&o), 0, "{cmd}: {}", stderr(&o));
        }
        let (fa, fb) = (files(a.path()), files(b.path()));
        // four specs, two levels, one summary
        assert_eq!(fa.len(), 9, "{cmd}");
        assert_eq!(fa, fb, "{cmd}");
        let csv = String::from_utf8(fa[0].1.clone()).unwrap();
        assert_eq!(csv.lines().next(), Some("x,y,d_x,d_y,sep,region,lhs,rhs,ratio"));
    }
}

#[test]
fn report_merges_runs() {
    let root = tempfile::tempdir().unwrap();
    let green = root.path().join("green");
    let cex = root.path().join("cex");
    let merged = root.path().join("merged");
    assert_eq!(code(&polygreen(&estimate_args("verify-green", green.to_str().unwrap()))), 0);
    assert_eq!(code(&polygreen(&["counterexample", "--m", "2", "--n", "3", "--out", cex.to_str().unwrap()])), 0);
    let o = polygreen(&["report", green.to_str().unwrap(), cex.to_str().unwrap(), "--out", merged.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(merged.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["command"], "report");
    assert_eq!(summary["passed"], true);
    assert_eq!(summary["specs"].as_array().unwrap().len(), 4);
    assert_eq!(summary["checks"][0]["name"], "counterexample/counterexample");
    let csv = summary["specs"][0]["levels"][0]["csv"].as_str().unwrap();
    assert!(merged.join(csv).exists(), "{csv}");

    let o = polygreen(&["report", root.path().join("nowhere").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn green_dumps_fields() {
    let dir = tempfile::tempdir().unwrap();
    let o = polygreen(&[
        "green", "--m", "2", "--n", "2", "--domain", "square", "--h", "1/32", "--y", "0.4,0.5", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["green.bin", "regular.bin", "green.csv", "regular.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let bin = fs::read(dir.path().join("green.bin")).unwrap();
    let header_end = bin.iter().position(|&b| b == b'\n').unwrap();
    let header = std::str::from_utf8(&bin[..header_end]).unwrap();
    assert!(header.starts_with("dims="), "{header}");
    let o = polygreen(&["green", "--m", "2", "--n", "2", "--domain", "square", "--h", "1/32", "--y", "0.02,0.5"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn dirichlet_decay_and_hardy_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{
            "domain": {"kind": "ball", "radius": 1.0, "dim": 2},
            "m": 2, "n": 2, "seed": 5,
            "levels": [0.03125, 0.015625],
            "dirichlet": {"points": 20, "data_sets": [
                [{"alpha": [1, 0], "centre": [0.1, 0.2], "radius": 0.2}]
            ]},
            "decay": {"anchor": [-0.9, 0.0], "radius": 0.45},
            "hardy": {"trials": 5}
        }"#,
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    for cmd in ["dirichlet-bound", "decay", "hardy"] {
        let out = dir.path().join(cmd);
        let o = polygreen(&[cmd, "--config", c, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{cmd}: {}\n{}", stdout(&o), stderr(&o));
        let s: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
        assert_eq!(s["passed"], true, "{cmd}");
        assert!(s["config"].get("output").is_none());
    }
    let o = polygreen(&["dirichlet-bound", "--m", "2", "--n", "2", "--levels", "0.1,0.05"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("`dirichlet`"), "{}", stderr(&o));
}
