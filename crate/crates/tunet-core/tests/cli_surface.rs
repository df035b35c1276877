//! External-interface tests: the `tunet` binary's subcommands and exit
//! codes, plus the on-disk formats other tools consume (checkpoint bytes,
//! manifest corpus, confidence CSV, run manifests).

use std::path::Path;
use std::process::{Command, Output};

fn tunet(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tunet"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn synth_args(out: &str) -> Vec<&str> {
    vec![
        "synth",
        "--series",
        "10",
        "--cls",
        "2",
        "--series-length",
        "32",
        "--seed",
        "5",
        "--out",
        out,
    ]
}

#[test]
fn synth_train_eval_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    let out = tunet(&synth_args("corpus"), root);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // Train one epoch on the tiny corpus with a matching tiny net.
    let out = tunet(
        &[
            "train",
            "--manifest",
            "corpus/manifest.csv",
            "--config",
            "net.cfg",
            "--epochs",
            "1",
            "--seed",
            "5",
            "--out",
            "run",
        ],
        root,
    );
    // Needs the config file first; write it and retry.
    assert!(!out.status.success());
    std::fs::write(
        root.join("net.cfg"),
        "series_length=32\ndepth=2\nbase_channels=4\nbatch_size=4\n",
    )
    .unwrap();
    let out = tunet(
        &[
            "train",
            "--manifest",
            "corpus/manifest.csv",
            "--config",
            "net.cfg",
            "--epochs",
            "1",
            "--seed",
            "5",
            "--out",
            "run",
        ],
        root,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // Epoch log line: epoch,lr,mean_loss,train_accuracy
    let stdout = String::from_utf8_lossy(&out.stdout);
    let epoch_line = stdout.lines().next().unwrap();
    let fields: Vec<&str> = epoch_line.split(',').collect();
    assert_eq!(fields.len(), 4);
    assert_eq!(fields[0], "0");
    assert_eq!(fields[1], "0.005");

    let log = std::fs::read_to_string(root.join("run/train_log.csv")).unwrap();
    assert!(log.starts_with("epoch,lr,mean_loss,train_accuracy\n"));

    // Run manifest echoes the resolved config.
    let manifest = std::fs::read_to_string(root.join("run/run-manifest.txt")).unwrap();
    assert!(manifest.contains("command=train"));
    assert!(manifest.contains("seed=5"));
    assert!(manifest.contains("series_length=32"));
    assert!(manifest.contains("corpus_crc32=0x"));

    // Checkpoint bytes: magic up front, CRC at the back.
    let ckpt = std::fs::read(root.join("run/model.ckpt")).unwrap();
    assert!(ckpt.starts_with(b"TUNET1\n"));
    let body = &ckpt[..ckpt.len() - 4];
    let stored = u32::from_le_bytes(ckpt[ckpt.len() - 4..].try_into().unwrap());
    assert_eq!(stored, crc32fast::hash(body));

    // Eval on the test split emits the machine-readable block.
    let out = tunet(
        &[
            "eval",
            "--manifest",
            "corpus/manifest.csv",
            "--config",
            "net.cfg",
            "--checkpoint",
            "run/model.ckpt",
            "--seed",
            "5",
            "--out",
            "eval",
        ],
        root,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("mean_ap,"));
    assert!(stdout.contains("overall_accuracy,"));
    let block = std::fs::read_to_string(root.join("eval/eval_report.csv")).unwrap();
    for a in ["0.5", "0.6", "0.7", "0.8", "0.9"] {
        assert!(block.contains(&format!("ap,{},", a)), "missing ap line for {}", a);
    }

    // Predict writes n rows of sample index + per-class confidence + label.
    let out = tunet(
        &[
            "predict",
            "--checkpoint",
            "run/model.ckpt",
            "--series",
            "corpus/series/synth_test_0000.csv",
            "--config",
            "net.cfg",
            "--seed",
            "5",
            "--out",
            "pred",
        ],
        root,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(root.join("pred/confidences.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 32);
    assert_eq!(csv.lines().next().unwrap(), "sample,class0,class1,label");
}

#[test]
fn synth_regeneration_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    assert!(tunet(&synth_args("a"), root).status.success());
    assert!(tunet(&synth_args("b"), root).status.success());
    let a = std::fs::read(root.join("a/manifest.csv")).unwrap();
    let b = std::fs::read(root.join("b/manifest.csv")).unwrap();
    assert_eq!(a, b);
    let a = std::fs::read(root.join("a/series/synth_train_0000.csv")).unwrap();
    let b = std::fs::read(root.join("b/series/synth_train_0000.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn exit_codes_distinguish_failure_classes() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    // Config error: unknown key in the config file.
    std::fs::write(root.join("bad.cfg"), "not_a_key=1\n").unwrap();
    let out = tunet(&["gradcheck", "--config", "bad.cfg"], root);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    // Data error: manifest file that does not exist.
    let out = tunet(
        &["train", "--manifest", "missing/manifest.csv", "--out", "run"],
        root,
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    // Divergence: an absurd learning rate blows the loss up to non-finite.
    assert!(tunet(&synth_args("corpus"), root).status.success());
    std::fs::write(
        root.join("net.cfg"),
        "series_length=32\ndepth=2\nbase_channels=4\nbatch_size=8\n",
    )
    .unwrap();
    let out = tunet(
        &[
            "train",
            "--manifest",
            "corpus/manifest.csv",
            "--config",
            "net.cfg",
            "--epochs",
            "4",
            "--lr-init",
            "1e18",
            "--seed",
            "5",
            "--out",
            "run",
        ],
        root,
    );
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("diverged"), "stderr: {}", err);

    // Success path exits 0.
    let out = tunet(&["gradcheck", "--seed", "3", "--out", "gc"], root);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("conv1d"));
    assert!(stdout.contains("end_to_end"));
}

#[test]
fn gradcheck_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let a = tunet(&["gradcheck", "--seed", "11", "--out", "g1"], root);
    let b = tunet(&["gradcheck", "--seed", "11", "--out", "g2"], root);
    assert_eq!(a.stdout, b.stdout);
}
