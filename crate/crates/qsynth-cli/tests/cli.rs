//! End-to-end checks of the binary: subcommands, exit codes, resumability.

use std::path::Path;
use std::process::Command;

fn qsynth() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qsynth"))
}

fn gen_world(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let world = dir.join("world.jsonl");
    let seeds = dir.join("seeds.jsonl");
    let out = qsynth()
        .args([
            "gen-world",
            "--out",
            world.to_str().unwrap(),
            "--seeds-out",
            seeds.to_str().unwrap(),
            "--seed",
            "5",
            "--roots",
            "6",
            "--depth",
            "3",
            "--fanout",
            "2",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (world, seeds)
}

#[test]
fn run_all_mock_succeeds_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (world, seeds) = gen_world(dir.path());
    let run_dir = dir.path().join("run");
    let out = qsynth()
        .args([
            "run-all",
            "--out-dir",
            run_dir.to_str().unwrap(),
            "--seeds",
            seeds.to_str().unwrap(),
            "--world",
            world.to_str().unwrap(),
            "--run-seed",
            "9",
            "--d-max",
            "3",
            "--k",
            "2",
            "--n-rollouts",
            "2",
            "--cap-fraction",
            "1.0",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    for stage in [
        "seed", "tree", "synth-topdown", "synth-bottomup", "filter", "distill", "stats",
    ] {
        assert!(stdout.contains(stage), "missing summary for {stage}: {stdout}");
    }
    for file in [
        "seeds.jsonl",
        "trees.jsonl",
        "qa_topdown.jsonl",
        "qa_bottomup.jsonl",
        "qa_filtered.jsonl",
        "sft.jsonl",
        "stats.txt",
    ] {
        assert!(run_dir.join(file).exists(), "missing {file}");
    }
}

#[test]
fn stage_with_missing_prerequisite_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let (world, seeds) = gen_world(dir.path());
    let run_dir = dir.path().join("run");
    let out = qsynth()
        .args([
            "filter",
            "--out-dir",
            run_dir.to_str().unwrap(),
            "--seeds",
            seeds.to_str().unwrap(),
            "--world",
            world.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing prerequisite"));
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let (world, seeds) = gen_world(dir.path());
    let out = qsynth()
        .args([
            "seed",
            "--out-dir",
            dir.path().join("run").to_str().unwrap(),
            "--seeds",
            seeds.to_str().unwrap(),
            "--world",
            world.to_str().unwrap(),
            "--n-votes",
            "2",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config"));
}

#[test]
fn config_file_is_honored_and_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let (world, seeds) = gen_world(dir.path());
    let run_dir = dir.path().join("run");
    let config_path = dir.path().join("run.toml");
    std::fs::write(
        &config_path,
        format!(
            "run_seed = 4\nout_dir = {:?}\nseeds_path = {:?}\n[limits]\ncap_fraction = 1.0\n[mock]\nworld_path = {:?}\n",
            run_dir, seeds, world
        ),
    )
    .unwrap();
    let out = qsynth()
        .args(["seed", "--config", config_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(run_dir.join("seeds.jsonl").exists());

    // A flag overrides the file: bogus seeds path must now fail.
    let out = qsynth()
        .args([
            "seed",
            "--config",
            config_path.to_str().unwrap(),
            "--seeds",
            dir.path().join("nope.jsonl").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn limit_flag_interrupts_and_resume_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let (world, seeds) = gen_world(dir.path());
    let run = |out_dir: &Path, limit: Option<&str>| {
        let mut args = vec![
            "tree".to_string(),
            "--out-dir".into(),
            out_dir.to_str().unwrap().into(),
            "--seeds".into(),
            seeds.to_str().unwrap().into(),
            "--world".into(),
            world.to_str().unwrap().into(),
            "--run-seed".into(),
            "3".into(),
            "--d-max".into(),
            "2".into(),
            "--k".into(),
            "2".into(),
            "--cap-fraction".into(),
            "1.0".into(),
        ];
        if let Some(l) = limit {
            args.push("--limit".into());
            args.push(l.into());
        }
        let out = qsynth().args(&args).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    let seed_stage = |out_dir: &Path| {
        let out = qsynth()
            .args([
                "seed",
                "--out-dir",
                out_dir.to_str().unwrap(),
                "--seeds",
                seeds.to_str().unwrap(),
                "--world",
                world.to_str().unwrap(),
                "--run-seed",
                "3",
                "--cap-fraction",
                "1.0",
            ])
            .output()
            .unwrap();
        assert!(out.status.success());
    };

    let plain = dir.path().join("plain");
    seed_stage(&plain);
    run(&plain, None);

    let resumed = dir.path().join("resumed");
    seed_stage(&resumed);
    run(&resumed, Some("1"));
    run(&resumed, None);

    let a = std::fs::read(plain.join("trees.jsonl")).unwrap();
    let b = std::fs::read(resumed.join("trees.jsonl")).unwrap();
    assert_eq!(a, b, "interrupted+resumed tree stage must match");
}
