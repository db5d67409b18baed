//! End-to-end smoke test of the binary: synth → train → mask → protect →
//! evaluate on a deliberately tiny configuration.

use std::path::Path;
use std::process::Command;

use tempfile::tempdir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uncolorable"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn full_pipeline() {
    let dir = tempdir().unwrap();
    let d = |p: &str| dir.path().join(p);
    let s = |p: &Path| p.to_str().unwrap().to_string();

    run_ok(bin().args([
        "synth", "--out", &s(&d("imgs")), "--n", "4", "--size", "48", "--seed", "1",
    ]));
    assert!(d("imgs/synth_0003.png").exists());

    run_ok(bin().args([
        "train", "--arch", "small_cnn", "--data", &s(&d("imgs")), "--out", &s(&d("m.bin")),
        "--epochs", "1", "--size", "48", "--n", "4",
    ]));
    assert!(d("m.bin").exists());

    run_ok(bin().args([
        "mask", "--in", &s(&d("imgs/synth_0000.png")), "--out", &s(&d("mask.png")),
    ]));
    assert!(d("mask.png").exists());

    let out = run_ok(bin().args([
        "protect", "--model", &s(&d("m.bin")), "--attack", "pachroma", "--eps", "16",
        "--iters", "2", "--n-transforms", "2", "--in", &s(&d("imgs/synth_0000.png")),
        "--out", &s(&d("adv.png")),
    ]));
    assert!(out.contains("pachroma"));
    assert!(d("adv.png").exists());

    let config = format!(
        r#"
        seeds = [3]
        [dataset]
        image_size = 48
        n_images = 2
        [[models]]
        arch = "small_cnn"
        path = {:?}
        [attack]
        iterations = 2
        n_transforms = 2
        [robustness]
        rrc_draws = 2
        "#,
        s(&d("m.bin"))
    );
    std::fs::write(d("exp.toml"), config).unwrap();
    let out = run_ok(bin().args([
        "evaluate", "--config", &s(&d("exp.toml")), "--out", &s(&d("results")),
    ]));
    assert!(out.contains("pachroma") && out.contains("cf_un"));
    assert!(d("results/results.csv").exists());
    assert!(d("results/results.json").exists());

    // Re-running the same experiment reproduces the CSV byte-for-byte.
    let first = std::fs::read(d("results/results.csv")).unwrap();
    run_ok(bin().args([
        "evaluate", "--config", &s(&d("exp.toml")), "--out", &s(&d("results2")),
    ]));
    assert_eq!(first, std::fs::read(d("results2/results.csv")).unwrap());
}

#[test]
fn unknown_attack_is_an_error() {
    let dir = tempdir().unwrap();
    let out = bin()
        .args([
            "protect", "--model", dir.path().join("none.bin").to_str().unwrap(),
            "--attack", "pgd", "--in", "x.png", "--out", "y.png",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown attack type"));
}
