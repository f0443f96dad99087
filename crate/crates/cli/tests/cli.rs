use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polarprior")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn synth(dir: &Path) {
    ok(&["synth", "--resolution", "24", "--out", &p(dir, "")]);
}

fn captures(dir: &Path) -> Vec<String> {
    ["i0.pfm", "i45.pfm", "i90.pfm", "i135.pfm"].iter().map(|n| p(dir, n)).collect()
}

#[test]
fn synth_writes_captures_and_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    for f in ["i0.pfm", "i45.pfm", "i90.pfm", "i135.pfm", "gt_normals.pfm", "gt_dolp.pfm", "gt_sp.pfm", "gt_dp.pfm", "rgb.pfm", "mosaic.pfm", "manifest.txt"] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }
}

#[test]
fn analysis_chain_runs_end_to_end() {
    let scene = tempfile::tempdir().unwrap();
    synth(scene.path());
    let out = tempfile::tempdir().unwrap();
    let o = p(out.path(), "");
    let caps = captures(scene.path());
    let caps: Vec<&str> = caps.iter().map(String::as_str).collect();

    ok(&[&["stokes", "--out", &o][..], &caps].concat());
    for f in ["s0.pfm", "s1.pfm", "s2.pfm", "dolp.pfm", "aolp.pfm"] {
        assert!(out.path().join(f).is_file(), "missing {f}");
    }
    ok(&[&["separate", "--out", &o][..], &caps].concat());
    assert!(out.path().join("i_sp.pfm").is_file() && out.path().join("i_dp.pfm").is_file());
    ok(&[&["normals", "--out", &o][..], &caps].concat());
    assert!(out.path().join("n_pol.pfm").is_file());
    ok(&["disambiguate", "--out", &o, "--n-pol", &p(out.path(), "n_pol.pfm"), "--prior", &p(scene.path(), "gt_normals.pfm"), "--dolp", &p(out.path(), "dolp.pfm")]);
    assert!(out.path().join("n_disambiguated.pfm").is_file());

    let report = ok(&[
        "loss-eval",
        "--final", &p(scene.path(), "rgb.pfm"),
        "--rgb", &p(scene.path(), "rgb.pfm"),
        "--refl", &p(out.path(), "i_sp.pfm"),
        "--sp", &p(out.path(), "i_sp.pfm"),
        "--base", &p(out.path(), "i_dp.pfm"),
        "--dp", &p(out.path(), "i_dp.pfm"),
        "--n-pred", &p(out.path(), "n_pol.pfm"),
        "--n-pol", &p(out.path(), "n_pol.pfm"),
        "--dolp", &p(out.path(), "dolp.pfm"),
    ]);
    assert!(report.contains("total"), "{report}");
}

#[test]
fn short_fit_writes_maps_and_history() {
    let scene = tempfile::tempdir().unwrap();
    synth(scene.path());
    let out = tempfile::tempdir().unwrap();
    let cfg = out.path().join("fit.toml");
    std::fs::write(&cfg, "[fit]\niterations = [2, 3, 2]\n").unwrap();
    ok(&["fit", "--config", &cfg.to_string_lossy(), "--scene", &p(scene.path(), ""), "--out", &p(out.path(), "")]);
    for f in ["base.pfm", "refl.pfm", "strength.pfm", "final.pfm", "normals.pfm", "loss_history.txt"] {
        assert!(out.path().join(f).is_file(), "missing {f}");
    }
}

#[test]
fn demosaic_splits_the_synthetic_mosaic() {
    let scene = tempfile::tempdir().unwrap();
    synth(scene.path());
    let out = tempfile::tempdir().unwrap();
    ok(&["demosaic", "--out", &p(out.path(), ""), &p(scene.path(), "mosaic.pfm")]);
    for f in ["i0.pfm", "i45.pfm", "i90.pfm", "i135.pfm"] {
        assert!(out.path().join(f).is_file(), "missing {f}");
    }
}

#[test]
fn unknown_subcommand_fails() {
    let out = run(&["transmogrify"]);
    assert!(!out.status.success());
}

#[test]
fn mismatched_capture_sizes_are_diagnosed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(&["synth", "--resolution", "24", "--out", &p(a.path(), "")]);
    ok(&["synth", "--resolution", "16", "--out", &p(b.path(), "")]);
    let out = run(&["stokes", "--out", &p(a.path(), "o"), &p(a.path(), "i0.pfm"), &p(a.path(), "i45.pfm"), &p(b.path(), "i90.pfm"), &p(a.path(), "i135.pfm")]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("error:") && err.contains("16"), "{err}");
}

#[test]
fn unknown_config_field_is_diagnosed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[material]\nrefractive_indx = 1.5\n").unwrap();
    let out = run(&["synth", "--config", &cfg.to_string_lossy(), "--out", &p(dir.path(), "o")]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("refractive_indx"), "{err}");
}

#[test]
fn invalid_refractive_index_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["synth", "--refractive-index", "0.5", "--out", &p(dir.path(), "o")]);
    assert!(!out.status.success());
}
