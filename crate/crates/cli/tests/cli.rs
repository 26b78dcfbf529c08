use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spaceform"))
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn report(out: &Path, cmd: &str) -> Value {
    let text = std::fs::read_to_string(out.join(format!("{cmd}_report.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn verify_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ok");
    let o = run("verify-space-form", &configs().join("verify_bergman.toml"), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out, "verify-space-form");
    assert_eq!(r["pass"], true);
    assert_eq!(r["result"]["calibration_sign"], -1.0);
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["config"]["metric"]["catalog"], "bergman");

    let out = tmp.path().join("flat");
    let o = run("verify-space-form", &configs().join("verify_flat_as_hyperbolic.toml"), &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    let r = report(&out, "verify-space-form");
    assert!(r["result"]["best_fit_c"].as_f64().unwrap().abs() < 1e-9);

    let bad = write_config(
        tmp.path(),
        "bad.toml",
        "[metric]\nn = 2\nc = 0.0\npotential = \"log(1 + abs2(z1) +\"\n",
    );
    let o = run("verify-space-form", &bad, &tmp.path().join("bad"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("syntax error"));
}

#[test]
fn operational_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run("verify-space-form", &tmp.path().join("missing.toml"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    // Config written for another command.
    let o = run("extend", &configs().join("verify_bergman.toml"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    let unknown = write_config(tmp.path(), "u.toml", "[metric]\nn = 2\ncatalog = \"bergman\"\ncolour = 1\n");
    let o = run("verify-space-form", &unknown, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reports_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("verify_bergman.toml");
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    run("verify-space-form", &cfg, &a, &[]);
    run("verify-space-form", &cfg, &b, &[]);
    run("verify-space-form", &cfg, &c, &["--seed", "7"]);
    let read = |d: &Path| std::fs::read(d.join("verify-space-form_report.json")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    assert_eq!(report(&c, "verify-space-form")["config"]["seed"], 7);

    let dev = write_config(
        tmp.path(),
        "dev.toml",
        "[metric]\nn = 2\ncatalog = \"bergman\"\n[puncture]\nkind = \"ball\"\nradius = 0.2\n[develop]\nsamples = 40\n",
    );
    run("develop", &dev, &a, &[]);
    run("develop", &dev, &b, &[]);
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(read(&a, "develop.csv"), read(&b, "develop.csv"));
    assert_eq!(read(&a, "develop_report.json"), read(&b, "develop_report.json"));
    // No temporary files survive the atomic writes.
    for entry in std::fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        assert!(!name.ends_with(".tmp"), "{name}");
    }
}

#[test]
fn develop_writes_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "dev.toml",
        "[metric]\nn = 2\ncatalog = \"fubini-study\"\n[develop]\nsamples = 30\n",
    );
    let out = tmp.path().join("o");
    let o = run("develop", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("develop.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "z1_re,z1_im,z2_re,z2_im,F1_re,F1_im,F2_re,F2_im,chart,det_re,det_im"
    );
    assert_eq!(lines.count(), 30);
    assert!(report(&out, "develop")["result"]["pullback"]["residual"].as_f64().unwrap() < 1e-6);
}

#[test]
fn cone_monodromy() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("m");
    let o = run("monodromy", &configs().join("monodromy_cone_flat.toml"), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out, "monodromy");
    let loops = r["result"]["loops"].as_array().unwrap();
    assert!(loops[0]["expect_linear_gap"].as_f64().unwrap() < 1e-6);
    assert!(loops[1]["expect_identity_gap"].as_f64().unwrap() < 1e-6);
    assert!(loops[2]["expect_identity_gap"].as_f64().unwrap() < 1e-6);
    let words = r["result"]["words"].as_array().unwrap();
    assert_eq!(words.len(), 3);
    assert!(words.iter().all(|w| w["pass"] == true));
    let csv = std::fs::read_to_string(out.join("monodromy.csv")).unwrap();
    assert!(csv.starts_with("path,z1_re,"));

    // A loop through the divisor enters the guard zone.
    let guard = write_config(
        tmp.path(),
        "g.toml",
        "[metric]\nn = 2\ncatalog = \"cone-flat\"\nbeta = [0.5, 1.0]\n[base]\nframe = \"standard\"\n\
         [[paths]]\npoints = [[[0.5, 0.0], [0.0, 0.0]], [[-0.5, 0.0], [0.0, 0.0]], [[0.5, 0.0], [0.0, 0.0]]]\npieces = 8\n",
    );
    let o = run("monodromy", &guard, &tmp.path().join("g"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("guard"));
}

#[test]
fn extend_flat_plane_and_injection() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("e");
    let o = run("extend", &configs().join("extend_flat_plane.toml"), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("series.txt")).unwrap();
    let series = spaceform::extension::PowerSeriesMap::from_text(&text).unwrap();
    let z = spaceform::linalg::cvec_from_pairs(&[[0.1, 0.05], [-0.2, 0.0]]);
    assert!((series.eval(&z) - &z).norm() < 1e-9);
    let grid = std::fs::read_to_string(out.join("metric_grid.csv")).unwrap();
    assert!(grid.starts_with("z1_re,z1_im,z2_re,z2_im,g11_re,g11_im,g12_re,g12_im,g22_re,g22_im"));
    for line in grid.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert!((v[4] - 1.0).abs() < 1e-8 && v[6].abs() < 1e-8 && (v[8] - 1.0).abs() < 1e-8);
    }
    let checks = report(&out, "extend")["result"]["extension"]["checks"].clone();
    assert_eq!(checks.as_array().unwrap().len(), 5);

    let out = tmp.path().join("c");
    let o = run("extend", &configs().join("extend_conjugate_injected.toml"), &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    let r = report(&out, "extend");
    assert_eq!(r["result"]["extension"]["checks"][0]["check"], "holomorphy");
    assert_eq!(r["result"]["extension"]["checks"][0]["pass"], false);
    assert!(!out.join("series.txt").exists());
}

#[test]
fn probes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("f");
    let o = run("probe", &configs().join("probe_f_minus_one.toml"), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out, "probe");
    assert!(r["result"]["min_det"].as_f64().unwrap() >= 0.0625 - 1e-9);
    let csv = std::fs::read_to_string(out.join("probe.csv")).unwrap();
    assert!(csv.starts_with("x1,x2,x3,hsc,det_j,distance"));

    for (cfg, expected) in [("probe_cone_flat.toml", 0.0), ("probe_cone_log.toml", -4.0)] {
        let out = tmp.path().join(cfg);
        let o = run("probe", &configs().join(cfg), &out, &[]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let csv = std::fs::read_to_string(out.join("probe.csv")).unwrap();
        for line in csv.lines().skip(1) {
            let hsc: f64 = line.split(',').nth(4).unwrap().parse().unwrap();
            assert!((hsc - expected).abs() < 1e-6, "{line}");
        }
    }
}
