//! End-to-end tests of the `opsin-evo` binary: exit codes, file outputs,
//! config echo round-trips and thread-count independence.

use std::path::Path;
use std::process::{Command, Output};

fn opsin_evo(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_opsin-evo"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write(path: &Path, contents: &str) {
    std::fs::write(path, contents).unwrap();
}

/// Small blueshift variant that finishes in well under a second.
const TINY_BLUESHIFT: &str = r#"
name = "blueshift"
[scene]
height = 12
width = 12
scene_count = 2
[env]
depths_m = [0.0, 30.0]
[evolution]
epochs = 5
"#;

#[test]
fn run_writes_all_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    write(&config, TINY_BLUESHIFT);
    let out_dir = dir.path().join("out");
    let output = opsin_evo(
        &["run", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()],
        &[],
    );
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    assert!(out_dir.join("summary.json").exists());
    assert!(out_dir.join("resolved_config.json").exists());
    assert!(out_dir.join("depth-0m/trajectory.csv").exists());
    assert!(out_dir.join("depth-30m/trajectory.csv").exists());

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["experiment"], "blueshift");
    assert!(summary["config_hash"].as_str().unwrap().starts_with("sha256:"));
    assert_eq!(summary["conditions"].as_array().unwrap().len(), 2);
}

#[test]
fn resolved_echo_reproduces_the_identical_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    write(&config, TINY_BLUESHIFT);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    assert!(opsin_evo(
        &["run", config.to_str().unwrap(), "--out", out_a.to_str().unwrap()],
        &[]
    )
    .status
    .success());
    // rerun from the emitted resolved config
    let echo = out_a.join("resolved_config.json");
    assert!(opsin_evo(
        &["run", echo.to_str().unwrap(), "--out", out_b.to_str().unwrap()],
        &[]
    )
    .status
    .success());
    for rel in ["depth-0m/trajectory.csv", "depth-30m/trajectory.csv"] {
        let a = std::fs::read(out_a.join(rel)).unwrap();
        let b = std::fs::read(out_b.join(rel)).unwrap();
        assert_eq!(a, b, "{rel} differs after config echo round-trip");
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    write(&config, TINY_BLUESHIFT);
    let serial = dir.path().join("serial");
    let parallel = dir.path().join("parallel");
    assert!(opsin_evo(
        &["run", config.to_str().unwrap(), "--out", serial.to_str().unwrap(), "--threads", "1"],
        &[]
    )
    .status
    .success());
    // env var takes precedence over the flag
    assert!(opsin_evo(
        &[
            "run",
            config.to_str().unwrap(),
            "--out",
            parallel.to_str().unwrap(),
            "--threads",
            "1"
        ],
        &[("OPSIN_EVO_THREADS", "3")]
    )
    .status
    .success());
    for rel in ["depth-0m/trajectory.csv", "depth-30m/trajectory.csv"] {
        assert_eq!(
            std::fs::read(serial.join(rel)).unwrap(),
            std::fs::read(parallel.join(rel)).unwrap(),
            "{rel} differs between serial and parallel runs"
        );
    }
}

#[test]
fn unknown_experiment_name_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    write(&config, "name = \"volcano-vision\"\n");
    let output = opsin_evo(&["run", config.to_str().unwrap()], &[]);
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("unknown experiment"), "{stderr}");
}

#[test]
fn bioluminescence_without_attenuation_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    write(
        &config,
        "name = \"multirod\"\n[env]\ndepths_m = []\nbioluminescence_label = 2\n",
    );
    let output = opsin_evo(&["run", config.to_str().unwrap()], &[]);
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("bioluminescence requires attenuation"), "{stderr}");
}

#[test]
fn zero_epochs_echoes_the_initial_bank() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    write(
        &config,
        r#"
name = "mammal-dichromacy"
[scene]
height = 12
width = 12
scene_count = 1
[bank]
lambda_max = [620.0, 375.0]
[evolution]
epochs = 0
"#,
    );
    let out_dir = dir.path().join("out");
    assert!(opsin_evo(
        &["run", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()],
        &[]
    )
    .status
    .success());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    let bank = summary["final_bank"].as_array().unwrap();
    assert_eq!(bank[0]["lambda_max"], 620.0);
    assert_eq!(bank[1]["lambda_max"], 375.0);
    // trajectory: header + epoch-0 row per kernel
    let csv = std::fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2);
}

#[test]
fn trajectory_row_count_matches_epochs_and_kernels() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    write(
        &config,
        r#"
name = "mammal-dichromacy"
[scene]
height = 12
width = 12
scene_count = 1
[evolution]
epochs = 2
"#,
    );
    let out_dir = dir.path().join("out");
    assert!(opsin_evo(
        &["run", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()],
        &[]
    )
    .status
    .success());
    // 2 kernels, epochs 0..=2 -> 6 data rows
    let csv = std::fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
    assert!(csv.starts_with("epoch,kernel,lambda_max_nm,applied_shift_nm,loss,miou\n"));
}

const FRUIT_SCENE: &str = r#"
height = 16
width = 16
seed = 5
layout = { kind = "scattered-fruit", fruit_density = 0.2 }
[[classes]]
name = "leaf"
peaks = [[550.0, 40.0, 0.8]]
baseline = 0.1
jitter = 0.05
[[classes]]
name = "fruit"
peaks = [[650.0, 30.0, 1.0]]
baseline = 0.1
jitter = 0.05
"#;

#[test]
fn synth_and_score_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let scene_config = dir.path().join("scene.toml");
    write(&scene_config, FRUIT_SCENE);
    let scene_file = dir.path().join("scene.hsi");
    let output = opsin_evo(
        &[
            "synth",
            scene_config.to_str().unwrap(),
            "--out",
            scene_file.to_str().unwrap(),
        ],
        &[],
    );
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let cube = opsin_evo_core::scene::load_scene(&scene_file).unwrap();
    assert_eq!((cube.height(), cube.width(), cube.bands()), (16, 16, 31));

    let bank = dir.path().join("bank.json");
    write(
        &bank,
        r#"[
            {"lambda_max": 580.0, "sigma": 25.0, "trainable": false, "channel_gain": 1.0},
            {"lambda_max": 540.0},
            {"lambda_max": 425.0}
        ]"#,
    );
    let output = opsin_evo(
        &[
            "score",
            "--scene",
            scene_file.to_str().unwrap(),
            "--bank",
            bank.to_str().unwrap(),
            "--mask-from-labels",
            "1",
            "--t",
            "0.4",
        ],
        &[],
    );
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let parsed: serde_json::Value =
        serde_json::from_slice(&output.stdout).expect("score prints JSON");
    let s_r = parsed["s_r"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&s_r));
}

#[test]
fn score_rejects_an_invalid_bank_file() {
    let dir = tempfile::tempdir().unwrap();
    let scene_config = dir.path().join("scene.toml");
    write(&scene_config, FRUIT_SCENE);
    let scene_file = dir.path().join("scene.hsi");
    assert!(opsin_evo(
        &[
            "synth",
            scene_config.to_str().unwrap(),
            "--out",
            scene_file.to_str().unwrap()
        ],
        &[]
    )
    .status
    .success());
    let bank = dir.path().join("bank.json");
    write(&bank, r#"[{"lambda_max": 580.0, "sigma": -3.0}]"#);
    let output = opsin_evo(
        &[
            "score",
            "--scene",
            scene_file.to_str().unwrap(),
            "--bank",
            bank.to_str().unwrap(),
            "--mask-from-labels",
            "1",
            "--t",
            "0.4",
        ],
        &[],
    );
    assert!(!output.status.success());
}
