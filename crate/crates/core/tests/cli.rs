//! End-to-end runs of the `photovel` binary.

use std::path::Path;
use std::process::Command;

fn photovel(out: &Path, args: &[&str]) -> (i32, String, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_photovel"))
        .args(args)
        .env("PHOTOVEL_OUT", out)
        .output()
        .unwrap();
    (
        o.status.code().unwrap(),
        String::from_utf8(o.stdout).unwrap(),
        String::from_utf8(o.stderr).unwrap(),
    )
}

fn scratch(name: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("photovel-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

#[test]
fn identical_config_gives_identical_bytes() {
    let (a, b) = (scratch("a"), scratch("b"));
    for dir in [&a, &b] {
        let (code, _, err) = photovel(dir, &["phasemap", "--beam", "gaussian", "--kw0", "5"]);
        assert_eq!(code, 0, "{err}");
        let (code, _, err) = photovel(dir, &["audit", "rs", "--fixture", "vp1-demo"]);
        assert_eq!(code, 0, "{err}");
    }
    for f in ["phasemap.csv", "phasemap.json", "audit_rs.json"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = scratch("cfg");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.json");
    std::fs::write(
        &cfg,
        r#"{"command": "velocity", "beam": "gaussian", "kw0": 50}"#,
    )
    .unwrap();
    let (code, _, err) = photovel(&dir, &["--config", cfg.to_str().unwrap(), "--kw0", "5"]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("velocity.json")).unwrap()).unwrap();
    assert_eq!(v["kw0"], 5.0);
    assert_eq!(v["v_g"]["method"], "numeric");
    assert!((v["v_g"]["value"].as_f64().unwrap() - 0.96).abs() < 0.01);
}

#[test]
fn exit_codes() {
    let dir = scratch("codes");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("bad.json");
    std::fs::write(&cfg, r#"{"command": "velocity", "radius": 1}"#).unwrap();
    assert_eq!(photovel(&dir, &["--config", cfg.to_str().unwrap()]).0, 2);
    assert_eq!(photovel(&dir, &["velocity", "--beam", "airy"]).0, 2);
    assert_eq!(photovel(&dir, &["velocity", "--kw0", "0"]).0, 2);
    assert_eq!(photovel(&dir, &[]).0, 2);
    // a 3-node comb repeats the packet inside the window
    assert_eq!(photovel(&dir, &["propagate", "--M", "3"]).0, 3);
}
