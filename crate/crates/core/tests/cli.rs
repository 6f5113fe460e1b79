use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mwa_ser::cli::{EXIT_CONFIG, EXIT_DATA};
use mwa_ser::synthetic::{write_manifest, write_tone_corpus, CorpusSpec};

fn mwa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mwa-ser"))
        .args(args)
        .args(["--log-level", "warn"])
        .output()
        .expect("binary runs")
}

fn corpus(dir: &Path) -> String {
    let spec = CorpusSpec {
        per_class: 4,
        seconds: 0.4,
        ..CorpusSpec::default()
    };
    let utts = write_tone_corpus(&dir.join("wav"), &spec).unwrap();
    let path = dir.join("manifest.csv");
    write_manifest(&path, &utts, &spec.class_names()).unwrap();
    path.to_string_lossy().into_owned()
}

fn train_args<'a>(manifest: &'a str, out: &'a str, cache: &'a str) -> Vec<&'a str> {
    vec![
        "train",
        "--manifest",
        manifest,
        "--out",
        out,
        "--cache-dir",
        cache,
        "--windows-ms",
        "25,100",
        "--max-frames",
        "32",
        "--epochs",
        "2",
        "--batch-size",
        "8",
    ]
}

#[test]
fn train_is_idempotent_and_eval_reproduces_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path());
    let cache = dir.path().join("cache").to_string_lossy().into_owned();
    let run = dir.path().join("run");
    let run_s = run.to_string_lossy().into_owned();

    let first = mwa(&train_args(&manifest, &run_s, &cache));
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    for f in [
        "manifest.lock",
        "split.json",
        "failures.json",
        "dataset_index.json",
        "model.mwam",
        "model.json",
        "report.json",
        "metrics.csv",
        "history.csv",
        "confusion_25ms.csv",
        "confusion_100ms.csv",
        "confusion_best.csv",
    ] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let lock = fs::read_to_string(run.join("manifest.lock")).unwrap();
    assert!(lock.contains("max_frames = 32") && lock.contains("windows_ms = [25.0, 100.0]"));

    let snapshot = |names: &[&str]| {
        names
            .iter()
            .map(|n| fs::read(run.join(n)).unwrap())
            .collect::<Vec<_>>()
    };
    let files = [
        "report.json",
        "split.json",
        "model.mwam",
        "metrics.csv",
        "history.csv",
    ];
    let before = snapshot(&files);

    let second = mwa(&train_args(&manifest, &run_s, &cache));
    assert!(second.status.success());
    assert_eq!(snapshot(&files), before);

    let eval = mwa(&[
        "eval",
        "--manifest",
        &manifest,
        "--out",
        &run_s,
        "--cache-dir",
        &cache,
        "--max-frames",
        "32",
    ]);
    assert!(
        eval.status.success(),
        "{}",
        String::from_utf8_lossy(&eval.stderr)
    );
    assert_eq!(fs::read(run.join("report.json")).unwrap(), before[0]);

    let report = mwa(&["report", &run_s]);
    assert!(report.status.success());
    let text = String::from_utf8_lossy(&report.stdout);
    assert!(
        text.contains("multi-window") && text.contains("w12"),
        "{text}"
    );
}

#[test]
fn extract_fills_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path());
    let cache = dir.path().join("cache");
    let out = mwa(&[
        "extract",
        "--manifest",
        &manifest,
        "--out",
        &dir.path().join("x").to_string_lossy(),
        "--cache-dir",
        &cache.to_string_lossy(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("64 computed"));
    let again = mwa(&[
        "extract",
        "--manifest",
        &manifest,
        "--out",
        &dir.path().join("x").to_string_lossy(),
        "--cache-dir",
        &cache.to_string_lossy(),
    ]);
    assert!(String::from_utf8_lossy(&again.stdout).contains("64 cache hits, 0 computed"));
}

#[test]
fn error_categories_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path());
    let out = dir.path().join("o").to_string_lossy().into_owned();

    let bad_cfg = dir.path().join("bad.toml");
    fs::write(&bad_cfg, "learning_rate = 0.1\n").unwrap();
    let r = mwa(&[
        "train",
        "--manifest",
        &manifest,
        "--out",
        &out,
        "--config",
        &bad_cfg.to_string_lossy(),
    ]);
    assert_eq!(r.status.code(), Some(EXIT_CONFIG as i32));

    let r = mwa(&[
        "train",
        "--manifest",
        &manifest,
        "--out",
        &out,
        "--windows-ms",
        "25,25",
    ]);
    assert_eq!(r.status.code(), Some(EXIT_CONFIG as i32));

    let r = mwa(&["train", "--manifest", "/nonexistent/m.csv", "--out", &out]);
    assert_eq!(r.status.code(), Some(EXIT_DATA as i32));

    let empty = tempfile::tempdir().unwrap();
    let r = mwa(&["report", &empty.path().to_string_lossy()]);
    assert_eq!(r.status.code(), Some(EXIT_DATA as i32));
    assert!(String::from_utf8_lossy(&r.stderr).contains("no results"));

    assert_eq!(mwa(&["frobnicate"]).status.code(), Some(EXIT_CONFIG as i32));
    assert_eq!(mwa(&["--help"]).status.code(), Some(0));
}

#[test]
fn unreadable_audio_is_reported_per_file() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path());
    fs::write(dir.path().join("wav/angry_001.wav"), b"not a wav").unwrap();
    let out = dir.path().join("run");
    let base = [
        "extract",
        "--manifest",
        &manifest,
        "--out",
        &out.to_string_lossy(),
        "--cache-dir",
        &dir.path().join("cache").to_string_lossy(),
    ]
    .map(String::from)
    .to_vec();
    let args: Vec<&str> = base.iter().map(String::as_str).collect();
    let r = mwa(&args);
    assert_eq!(r.status.code(), Some(EXIT_DATA as i32));
    let failures = fs::read_to_string(out.join("failures.json")).unwrap();
    assert!(failures.contains("angry_001"), "{failures}");

    let mut skipping = args.clone();
    skipping.extend(["--skip-unreadable", "true"]);
    let r = mwa(&skipping);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(fs::read_to_string(out.join("failures.json"))
        .unwrap()
        .contains("angry_001"));
}

#[test]
fn make_manifest_from_savee_layout() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("AudioData");
    for (spk, file) in [("DC", "a01.wav"), ("DC", "su02.wav"), ("KL", "n05.wav")] {
        fs::create_dir_all(root.join(spk)).unwrap();
        fs::write(root.join(spk).join(file), b"").unwrap();
    }
    let csv = dir.path().join("savee.csv");
    let r = mwa(&[
        "make-manifest",
        "--layout",
        "savee",
        "--root",
        &root.to_string_lossy(),
        "--out",
        &csv.to_string_lossy(),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(
        text,
        "utterance_id,audio_path,label,speaker\n\
         DC_a01,AudioData/DC/a01.wav,angry,DC\n\
         DC_su02,AudioData/DC/su02.wav,surprise,DC\n\
         KL_n05,AudioData/KL/n05.wav,neutral,KL\n"
    );
    let m = mwa_ser::cli::ingest_manifest(&csv, mwa_ser::cli::Protocol::Savee6).unwrap();
    assert_eq!(m.rows.len(), 2);
    assert_eq!(m.excluded.get("surprised"), Some(&1));
}

#[test]
fn sweep_resumes_only_missing_subsets() {
    use mwa_ser::cli::{ingest_manifest, run_sweep, ExperimentConfig, Protocol};
    let dir = tempfile::tempdir().unwrap();
    let manifest = ingest_manifest(Path::new(&corpus(dir.path())), Protocol::Custom).unwrap();
    let cfg = ExperimentConfig {
        windows_ms: vec![25.0, 100.0],
        max_frames: 32,
        epochs: 1,
        batch_size: 8,
        cache_dir: dir.path().join("cache"),
        ..ExperimentConfig::default()
    };
    let out = dir.path().join("sweep");
    let full = run_sweep(&manifest, &cfg, &out).unwrap();
    let ids: Vec<&str> = full.subsets.iter().map(|s| s.subset_id.as_str()).collect();
    assert_eq!(ids, ["w1", "w2", "w12"]);
    assert!(full.subsets.iter().all(|s| s.train_seconds.is_some()));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("metric,w1,w2,w12"));

    fs::remove_file(out.join("w2").join("report.json")).unwrap();
    let resumed = run_sweep(&manifest, &cfg, &out).unwrap();
    let retrained: Vec<&str> = resumed
        .subsets
        .iter()
        .filter(|s| s.train_seconds.is_some())
        .map(|s| s.subset_id.as_str())
        .collect();
    assert_eq!(retrained, ["w2"]);
    for (a, b) in full.subsets.iter().zip(&resumed.subsets) {
        assert_eq!(a.metrics, b.metrics);
    }
}
