use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn kpairs(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kpairs"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn default_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("config/default.toml")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn verify_all_passes_on_the_shipped_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = default_config();
    let out = kpairs(&["verify-all", "--config", cfg.to_str().unwrap()], dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout.lines().filter(|l| l.starts_with("[PASS]")).count(), 9);
    assert!(dir.path().join("verify.json").exists());
}

#[test]
fn truncating_equal_pairs_gives_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[symbols]\nkind = \"equal\"\nfiber_dim = 2\n\n[truncation]\nradii = [2, 4]\nreference_radius = 6\n",
    );
    let out = kpairs(&["truncate", "--quiet", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let mut rdr = csv::Reader::from_path(dir.path().join("truncation.csv")).unwrap();
    let headers: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(headers, ["R", "dim", "eps1", "eps2", "eps2prime", "wall_time"]);
    let rows: Vec<_> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    for r in rows {
        for k in 2..5 {
            assert_eq!(r[k].parse::<f64>().unwrap(), 0.0);
        }
    }
}

#[test]
fn malformed_config_exits_with_two_and_points_at_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 3\n[truncation]\nradii = [4, 6\n");
    let out = kpairs(&["defects", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");

    let cfg = write_config(dir.path(), "[truncation]\nradii = [6, 4]\n");
    let out = kpairs(&["defects", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("truncation.radii"));

    let cfg = write_config(dir.path(), "[cover]\ngird = 4\n");
    let out = kpairs(&["defects", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gird"));
}

#[test]
fn dimension_cap_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = kpairs(&["truncate", "--max-dim", "50"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn failed_check_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[truncation]\nradii = [2, 3]\nreference_radius = 16\n\n[tolerances]\nconvergence = 0.01\n",
    );
    let out = kpairs(&["example", "--quiet", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(dir.path().join("convergence.csv").exists());
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = kpairs(&["defects", "--quiet", "--seed", "5"], d.path());
        assert!(out.status.success());
    }
    let ja = fs::read(a.path().join("defects.json")).unwrap();
    let jb = fs::read(b.path().join("defects.json")).unwrap();
    assert_eq!(ja, jb);
    let v: serde_json::Value = serde_json::from_slice(&ja).unwrap();
    assert_eq!(v[0]["R"], 4);
    assert_eq!(v[0]["report"]["F_radius"], 1);
}

#[test]
fn kclass_and_example_pass_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = default_config();
    for cmd in ["kclass", "example", "projections"] {
        let out = kpairs(&[cmd, "--quiet", "--config", cfg.to_str().unwrap()], dir.path());
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let v: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("kclass.json")).unwrap()).unwrap();
    assert_eq!(v["chern_input"], -1);
    assert_eq!(v["agree"], true);
    assert_eq!(v["class"]["class_rank"], 0);
}
