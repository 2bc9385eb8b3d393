use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use narrecall::pipeline::{self, BackendKind, Command, PipelineConfig};

fn small_config(out: &Path) -> PipelineConfig {
    let mut c = PipelineConfig { out: out.to_path_buf(), seed: 7, ..PipelineConfig::default() };
    c.simulate.n_narratives = 2;
    c.simulate.events_per_narrative = 6;
    c.simulate.n_participants = 8;
    c.simulate.n_raters = 4;
    c.llm.n_instances = 6;
    c.segmentation.group_size = 3;
    c.segmentation.consistency_iterations = 10;
    c.recall.split_half_iterations = 200;
    c.recall.segmentation_instances = 3;
    c
}

fn files(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                if p.file_name().is_some_and(|n| n != "cache") {
                    stack.push(p);
                }
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

#[test]
fn every_artifact_is_stamped_or_listed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    pipeline::run(Command::All, &cfg).unwrap();
    let stamp = format!("config={} seed=7", cfg.hash());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    let listed: Vec<&str> = manifest["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert_eq!(manifest["meta"]["config_hash"], cfg.hash());
    for p in files(dir.path()) {
        let rel = p.strip_prefix(dir.path()).unwrap().to_string_lossy().replace('\\', "/");
        let text = fs::read_to_string(&p).unwrap();
        match p.extension().and_then(|e| e.to_str()) {
            Some("csv") => assert!(text.lines().next().unwrap().contains(&stamp), "{rel}"),
            Some("json") if rel != "manifest.json" => {
                let v: serde_json::Value = serde_json::from_str(&text).unwrap();
                assert_eq!(v["meta"]["seed"], 7, "{rel}");
            }
            Some("svg") | Some("md") => assert!(text.contains(&stamp), "{rel}"),
            _ => {}
        }
        if rel != "manifest.json" {
            assert!(listed.contains(&rel.as_str()), "{rel} missing from manifest");
        }
    }
    for rel in [
        "segmentation/agreement.csv",
        "segmentation/consistency.csv",
        "segmentation/normative.json",
        "recall/validation.json",
        "figures/boundary_counts.svg",
        "figures/agreement.svg",
        "report.md",
    ] {
        assert!(dir.path().join(rel).exists(), "{rel}");
    }
}

#[test]
fn segment_writes_per_instance_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    pipeline::run(Command::Simulate, &cfg).unwrap();
    pipeline::run(Command::Segment, &cfg).unwrap();
    let inst = dir.path().join("segmentation/instances/story1/gpt-4_t0.5");
    let n = fs::read_dir(&inst).unwrap().count();
    assert_eq!(n, 6);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(inst.join("03.json")).unwrap()).unwrap();
    assert_eq!(v["source"]["instance_index"], 3);
    assert_eq!(v["source"]["temperature"], 0.5);
    assert!(v["boundaries"].as_array().unwrap().len() >= 3);
}

#[test]
fn unreachable_backend_fails_but_keeps_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    pipeline::run(Command::Simulate, &cfg).unwrap();
    cfg.llm.backend = BackendKind::Http;
    cfg.llm.base_url = "http://127.0.0.1:9".into();
    cfg.llm.retry.max_attempts = 1;
    cfg.llm.timeout_secs = 2;
    cfg.llm.temperatures = vec![0.0];
    cfg.segmentation.normative_temperature = 0.0;
    let err = pipeline::run(Command::Segment, &cfg).unwrap_err();
    assert!(err.to_string().contains("failed"), "{err:#}");
    assert!(dir.path().join("segmentation/failures.json").exists());
    assert!(dir.path().join("synthetic/annotations.csv").exists());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn later_steps_require_earlier_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    pipeline::run(Command::Simulate, &cfg).unwrap();
    let err = pipeline::run(Command::AnalyzeSeg, &cfg).unwrap_err();
    assert!(format!("{err:#}").contains("not found"));
}

fn bin() -> Process {
    Process::new(env!("CARGO_BIN_EXE_narrecall"))
}

#[test]
fn cli_overrides_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.toml");
    fs::write(&cfg_path, "seed = 3\n[simulate]\nn_narratives = 1\nevents_per_narrative = 4\nn_participants = 6\n").unwrap();
    let out = dir.path().join("out");
    let status = bin()
        .args(["simulate", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out)
        .args(["--seed", "11", "--temperature", "0", "--temperature", "1", "--instances", "4", "--tolerance", "2"])
        .status()
        .unwrap();
    assert!(status.success());
    let echoed: PipelineConfig = toml::from_str(&fs::read_to_string(out.join("config.toml")).unwrap()).unwrap();
    assert_eq!(echoed.seed, 11);
    assert_eq!(echoed.llm.temperatures, [0.0, 1.0]);
    assert_eq!(echoed.llm.n_instances, 4);
    assert_eq!(echoed.segmentation.tolerance, 2);
    assert_eq!(echoed.simulate.n_participants, 6);
    assert_eq!(fs::read_dir(out.join("synthetic/narratives")).unwrap().count(), 1);
}

#[test]
fn cli_rejects_invalid_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("bad.toml");
    fs::write(&cfg_path, "[llm]\nn_instances = 0\n").unwrap();
    let out = bin().args(["segment", "--config"]).arg(&cfg_path).arg("--out").arg(dir.path()).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_instances"));

    fs::write(&cfg_path, "[llm]\nunknown_key = 1\n").unwrap();
    let out = bin().args(["segment", "--config"]).arg(&cfg_path).output().unwrap();
    assert!(!out.status.success());
}
